//! Monte Carlo synthesis of single-shot speckle frames.
//!
//! A thermal frame is circular complex Gaussian white noise convolved with a
//! Gaussian kernel (periodic boundaries) and squared. Case A selects part of a
//! thermal field with a pinhole and re-scatters it from a cloud of point
//! scatterers; case B squares a thermal intensity pixel by pixel.

mod area;
mod ensemble;
mod pinhole;
mod scatter;
mod thermal;

pub use area::{measure_speckle_area, MIN_AREA_FRAMES};
pub use ensemble::{
    generate_ensemble, generate_ensemble_with, second_harmonic, EnsembleOptions, FrameEnsemble,
};
pub use pinhole::{apply_pinhole, PinholeField, PinholeSpec, PreparedPinhole};
pub use scatter::{scatter_speckled_speckle, ScattererCloud};
pub use thermal::{synthesize_thermal_frame, ThermalSynth};

use crate::error::{Error, Result};
use ndarray::Array2;
use std::borrow::Cow;

/// Geometry of the virtual camera and the speckle scale.
///
/// `speckle_radius` is the standard deviation, in pixels, of the Gaussian
/// intensity correlation `|γ(Δ)|² = exp(-|Δ|²/2σ²)` of the thermal field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Physical pixel size in metres. Informational only.
    pub pixel_pitch: f64,
    pub speckle_radius: f64,
}

impl GridSpec {
    /// 2 mm across 200 pixels.
    pub const DEFAULT_PIXEL_PITCH: f64 = 1e-5;
    pub const DEFAULT_SIZE: usize = 200;

    pub fn new(width: usize, height: usize, speckle_radius: f64) -> Result<Self> {
        let g = GridSpec {
            width,
            height,
            pixel_pitch: Self::DEFAULT_PIXEL_PITCH,
            speckle_radius,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_pixel_pitch(mut self, pitch: f64) -> Result<Self> {
        self.pixel_pitch = pitch;
        self.validate()?;
        Ok(self)
    }

    pub fn with_speckle_radius(mut self, radius: f64) -> Result<Self> {
        self.speckle_radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width * self.height < 4 {
            return Err(Error::domain(format!(
                "grid {}x{} must have at least 4 pixels",
                self.width, self.height
            )));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::domain(format!("pixel pitch must be positive, got {}", self.pixel_pitch)));
        }
        let max_r = self.max_speckle_radius();
        if !(self.speckle_radius >= 0.5 && self.speckle_radius <= max_r) {
            return Err(Error::domain(format!(
                "speckle radius {} outside [0.5, {max_r}] for a {}x{} grid",
                self.speckle_radius, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn max_speckle_radius(&self) -> f64 {
        self.width.min(self.height) as f64 / 4.0
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Pixel holding zero lag in correlation maps, `(width/2, height/2)`.
    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Area (px²) where the intensity correlation exceeds half its peak:
    /// `2 ln2 π σ²`.
    pub fn nominal_speckle_area(&self) -> f64 {
        nominal_speckle_area(self.speckle_radius)
    }

    /// Speckle radius whose nominal speckle area is `area`.
    pub fn radius_for_speckle_area(area: f64) -> f64 {
        (area / (2.0 * std::f64::consts::LN_2 * std::f64::consts::PI)).sqrt()
    }
}

pub(crate) fn nominal_speckle_area(radius: f64) -> f64 {
    2.0 * std::f64::consts::LN_2 * std::f64::consts::PI * radius * radius
}

/// One single-shot intensity image, indexed `[[y, x]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub grid: GridSpec,
    pub intensity: Array2<f64>,
    pub frame_index: usize,
}

impl Frame {
    pub fn new(grid: GridSpec, intensity: Array2<f64>, frame_index: usize) -> Result<Self> {
        let f = Frame {
            grid,
            intensity,
            frame_index,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensity.dim() != self.grid.shape() {
            return Err(Error::domain(format!(
                "frame shape {:?} does not match grid {}x{}",
                self.intensity.dim(),
                self.grid.width,
                self.grid.height
            )));
        }
        if let Some(bad) = self.intensity.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("frame intensity {bad} is not finite and >= 0")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.intensity.sum() / self.intensity.len() as f64
    }

    /// Row-major slice of intensities.
    pub fn as_slice(&self) -> &[f64] {
        self.intensity
            .as_slice()
            .expect("frames are stored in standard layout")
    }
}

/// Anything that can hand out the frames of an ensemble by index.
///
/// Implementations must return the same frame for the same index every time;
/// analysis code relies on this to split work across threads.
pub trait FrameSource: Sync {
    fn grid(&self) -> &GridSpec;
    fn n_frames(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>>;
}

/// Frames held in memory, e.g. loaded from a frame dump.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredFrames {
    grid: GridSpec,
    frames: Vec<Frame>,
}

impl StoredFrames {
    pub fn new(grid: GridSpec, frames: Vec<Frame>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if f.grid.width != grid.width || f.grid.height != grid.height {
                return Err(Error::domain(format!("frame {i} does not share the ensemble grid")));
            }
            f.validate().map_err(|e| e.at_frame(i))?;
        }
        Ok(StoredFrames { grid, frames })
    }

    /// Wraps raw intensity arrays, numbering them in order.
    pub fn from_arrays(grid: GridSpec, arrays: Vec<Array2<f64>>) -> Result<Self> {
        let frames = arrays
            .into_iter()
            .enumerate()
            .map(|(i, a)| Frame::new(grid, a, i).map_err(|e| e.at_frame(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, frames)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

impl FrameSource for StoredFrames {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n_frames(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>> {
        self.frames
            .get(index)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::domain(format!("frame index {index} out of range")))
    }
}

/// Per-frame seed derived from the master seed and the frame counter.
/// Independent of generation order, so parallel runs reproduce serial ones.
pub fn frame_seed(master_seed: u64, frame_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(frame_index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
