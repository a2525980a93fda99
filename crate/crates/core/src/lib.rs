//! Simulation and analysis of ghost imaging with thermal and superthermal
//! speckle light.
//!
//! * [`photostatistics`]: intensity densities, `g²` formulas, modified Bessel
//!   functions and direct intensity samplers.
//! * [`specklefield`]: seeded Monte Carlo synthesis of speckle frames.
//! * [`correlation`]: FFT autocorrelation, pixel, GI and DGI correlation maps.
//! * [`metrics`]: contrast, SNR, power-law fits and speckle-count sweeps.
//! * [`io`]: frame dumps, map CSV and PGM export, mask ingestion.
//! * [`verify`]: slow reference implementations used as test oracles.

pub mod correlation;
pub mod error;
pub mod fft;
pub mod io;
pub mod metrics;
pub mod parallel;
pub mod photostatistics;
pub mod specklefield;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
