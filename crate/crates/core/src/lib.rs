//! Water-level estimation and tide-turn detection from LTE downlink power
//! metrics (RSRP, RSSI, RSRQ).
//!
//! The pipeline is: [`ingest`] raw logs onto a uniform grid, transform each
//! cell with a Morlet [`cwt`] restricted to the tide band, sum the
//! magnitudes into `S(b)`, detect slack water and peak flow online with
//! [`detector`], combine cells robustly with [`fusion`], and regress the
//! water level from [`features`] with the small network in [`regressor`].
//! [`sim`] provides a two-ray channel simulator used as ground truth.

pub mod cwt;
pub mod detector;
pub mod error;
pub mod features;
pub mod fusion;
pub mod ingest;
pub mod io;
pub mod plot;
pub mod regressor;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
