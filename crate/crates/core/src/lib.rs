//! Polarization shift keying over dual-polarized fading channels.

pub mod analytic;
pub mod channel;
pub mod constellation;
pub mod detect;
pub mod error;
pub mod optimizer;
pub mod rng;
pub mod sim;
pub mod special;

pub use error::{Error, ErrorClass, Result};
