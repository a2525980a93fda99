//! Ensemble correlation maps: FFT autocorrelation, single-pixel correlation,
//! ghost imaging and differential ghost imaging.

mod autocorr;
mod buckets;
mod region;

pub use autocorr::{autocorrelation_fft, autocorrelation_with_errors, AutocorrAccumulator};
pub use buckets::{
    collect_ghost, differential_ghost_image, ghost_image, pixel_correlation, BucketCorrelation,
    CorrelationSums,
};
pub use region::{background_margin, default_background, default_reference, Mask, Region};

use crate::error::{Error, Result};
use crate::specklefield::{FrameSource, GridSpec};
use crate::stats::{jackknife_se_map, mean};
use ndarray::Array2;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    Autocorrelation,
    PixelCorr,
    GI,
    DGI,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [
        MapKind::Autocorrelation,
        MapKind::PixelCorr,
        MapKind::GI,
        MapKind::DGI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Autocorrelation => "autocorr",
            MapKind::PixelCorr => "pixel",
            MapKind::GI => "gi",
            MapKind::DGI => "dgi",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "autocorr" | "autocorrelation" => Ok(MapKind::Autocorrelation),
            "pixel" | "px" => Ok(MapKind::PixelCorr),
            "gi" => Ok(MapKind::GI),
            "dgi" => Ok(MapKind::DGI),
            other => Err(Error::Config(format!(
                "unknown map kind '{other}' (expected autocorr, pixel, gi or dgi)"
            ))),
        }
    }
}

/// A finalized correlation map, indexed `[[y, x]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub values: Array2<f64>,
    pub grid: GridSpec,
    pub kind: MapKind,
    pub n_frames_used: usize,
}

impl CorrelationMap {
    pub fn new(values: Array2<f64>, grid: GridSpec, kind: MapKind, n_frames_used: usize) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::domain("map shape does not match grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{kind} map has non-finite entries")));
        }
        if n_frames_used == 0 {
            return Err(Error::domain("map must come from at least one frame"));
        }
        Ok(CorrelationMap {
            values,
            grid,
            kind,
            n_frames_used,
        })
    }

    /// Horizontal section through row `y`.
    pub fn row(&self, y: usize) -> Vec<f64> {
        self.values.row(y).to_vec()
    }

    pub fn region_values(&self, region: &Region) -> Result<Vec<f64>> {
        region.check_grid(&self.grid)?;
        let flat = self.values.as_slice().expect("standard layout");
        Ok(region.indices().iter().map(|&i| flat[i]).collect())
    }

    pub fn region_mean(&self, region: &Region) -> Result<f64> {
        Ok(mean(&self.region_values(region)?))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// [`pixel_correlation`] with delete-one-batch jackknife errors.
pub fn pixel_correlation_with_errors<S: FrameSource + ?Sized>(
    source: &S,
    pixel: (usize, usize),
    n_batches: usize,
) -> Result<(CorrelationMap, Array2<f64>)> {
    let g = source.grid();
    let r = Region::single(g.width, g.height, pixel.0, pixel.1)?;
    let bc = BucketCorrelation::collect(source, vec![r], n_batches.max(2))?;
    let map = bc.map(MapKind::PixelCorr, bc.total().normalized(0)?)?;
    let reps = (0..bc.n_batches())
        .map(|b| bc.leave_one_out(b).normalized(0))
        .collect::<Result<Vec<_>>>()?;
    Ok((map, jackknife_se_map(&reps)))
}
