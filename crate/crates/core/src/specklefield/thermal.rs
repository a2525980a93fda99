use super::{frame_seed, Frame, GridSpec};
use crate::error::{ensure_positive, Result};
use crate::fft::Fft2;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator of unit-mean thermal speckle fields on a fixed grid.
///
/// The kernel is `exp(-r²/2σ²)` with periodic distances, scaled so that
/// `Σ k² = 1`; convolving unit-variance complex white noise with it gives a
/// field with `⟨|E|²⟩ = 1` at every pixel.
#[derive(Debug, Clone)]
pub struct ThermalSynth {
    grid: GridSpec,
    fft: Fft2,
    transfer: Vec<f64>,
    intensity_corr: Array2<f64>,
}

impl ThermalSynth {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let (w, h) = (grid.width, grid.height);
        let fft = Fft2::new(w, h);
        let s2 = grid.speckle_radius * grid.speckle_radius;

        let mut kernel = vec![Complex64::default(); w * h];
        let mut norm = 0.0;
        for y in 0..h {
            let dy = y.min(h - y) as f64;
            for x in 0..w {
                let dx = x.min(w - x) as f64;
                let k = (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                kernel[y * w + x] = Complex64::new(k, 0.0);
                norm += k * k;
            }
        }
        let scale = 1.0 / norm.sqrt();
        kernel.iter_mut().for_each(|k| *k *= scale);
        fft.forward(&mut kernel);
        // symmetric real kernel: transform is real
        let transfer: Vec<f64> = kernel.iter().map(|c| c.re).collect();

        // field correlation γ = kernel autocorrelation = IFFT(|K̂|²)/N
        let mut corr: Vec<Complex64> = transfer
            .iter()
            .map(|&t| Complex64::new(t * t, 0.0))
            .collect();
        fft.inverse(&mut corr);
        let n = (w * h) as f64;
        let intensity_corr = Array2::from_shape_fn((h, w), |(y, x)| {
            let g = corr[y * w + x].re / n;
            g * g
        });

        Ok(ThermalSynth {
            grid: *grid,
            fft,
            transfer,
            intensity_corr,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub(crate) fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// `|γ(Δ)|²` of the field on periodic lags; `[[0, 0]]` is zero lag.
    pub fn intensity_correlation(&self) -> &Array2<f64> {
        &self.intensity_corr
    }

    /// One complex field realization with unit mean intensity.
    pub fn field<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<Complex64> {
        let n = self.grid.len();
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * amp, im * amp)
            })
            .collect();
        self.fft.forward(&mut buf);
        let inv_n = 1.0 / n as f64;
        buf.iter_mut()
            .zip(&self.transfer)
            .for_each(|(c, &t)| *c *= t * inv_n);
        self.fft.inverse(&mut buf);
        Array2::from_shape_vec(self.grid.shape(), buf).expect("buffer matches grid")
    }

    /// Unit-mean thermal intensity `|E|²`.
    pub fn intensity<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<f64> {
        self.field(rng).mapv(|c| c.norm_sqr())
    }
}

/// One thermal frame with ensemble-mean intensity `mean`.
pub fn synthesize_thermal_frame(grid: &GridSpec, mean: f64, seed: u64) -> Result<Frame> {
    ensure_positive("mean intensity", mean)?;
    let synth = ThermalSynth::new(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intensity = synth.intensity(&mut rng);
    intensity.mapv_inplace(|v| v * mean);
    Frame::new(*grid, intensity, 0)
}

pub(crate) fn frame_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(frame_seed(master_seed, index as u64))
}
