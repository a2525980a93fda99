use super::thermal::ThermalSynth;
use super::GridSpec;
use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;

/// Circular aperture in pixel coordinates (pixel centres sit on integers).
///
/// An infinite radius denotes an open aperture that passes the whole grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeSpec {
    pub center: (f64, f64),
    pub radius: f64,
}

impl PinholeSpec {
    pub const MIN_RADIUS: f64 = 0.5;

    pub fn new(center: (f64, f64), radius: f64) -> Self {
        PinholeSpec { center, radius }
    }

    pub fn centered(grid: &GridSpec, radius: f64) -> Self {
        let (cx, cy) = grid.center();
        PinholeSpec::new((cx as f64, cy as f64), radius)
    }

    pub fn open() -> Self {
        PinholeSpec::new((0.0, 0.0), f64::INFINITY)
    }

    pub fn is_open(&self) -> bool {
        self.radius == f64::INFINITY
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.is_open() {
            return Ok(());
        }
        let (cx, cy) = self.center;
        let r = self.radius;
        if !(r.is_finite() && r >= Self::MIN_RADIUS) {
            return Err(Error::domain(format!(
                "pinhole radius {r} below the minimum {}",
                Self::MIN_RADIUS
            )));
        }
        let inside = cx.is_finite()
            && cy.is_finite()
            && cx - r >= -0.5
            && cy - r >= -0.5
            && cx + r <= grid.width as f64 - 0.5
            && cy + r <= grid.height as f64 - 0.5;
        if !inside {
            return Err(Error::domain(format!(
                "pinhole at ({cx}, {cy}) with radius {r} leaves the {}x{} grid",
                grid.width, grid.height
            )));
        }
        Ok(())
    }

    /// Row-major indices of the pixels whose centres lie in the disk.
    pub fn pixels(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        self.validate(grid)?;
        if self.is_open() {
            return Ok((0..grid.len()).collect());
        }
        let (cx, cy) = self.center;
        let r2 = self.radius * self.radius;
        let mut out = Vec::new();
        for y in 0..grid.height {
            let dy = y as f64 - cy;
            for x in 0..grid.width {
                let dx = x as f64 - cx;
                if dx * dx + dy * dy <= r2 {
                    out.push(y * grid.width + x);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::domain("pinhole contains no pixel centre"));
        }
        Ok(out)
    }
}

/// Field restricted to a pinhole, with the number of speckle modes it holds.
#[derive(Debug, Clone)]
pub struct PinholeField {
    pub field: Array2<Complex64>,
    pub pixels: Vec<usize>,
    pub mu_eff: f64,
}

/// A pinhole whose pixel set and mode count have been worked out for one
/// grid, so it can be applied to many fields cheaply.
#[derive(Debug, Clone)]
pub struct PreparedPinhole {
    pub spec: PinholeSpec,
    pixels: Vec<usize>,
    mu_eff: f64,
}

impl PreparedPinhole {
    pub fn new(spec: PinholeSpec, synth: &ThermalSynth) -> Result<Self> {
        let pixels = spec.pixels(synth.grid())?;
        let mu_eff = mode_count(synth, &pixels);
        Ok(PreparedPinhole { spec, pixels, mu_eff })
    }

    /// Centred pinhole whose mode count is closest to `target_modes`.
    ///
    /// Radii are scanned over the distinct pixel sets a centred disk can
    /// select; a target of 1 gives the single centre pixel.
    pub fn for_modes(synth: &ThermalSynth, target_modes: f64) -> Result<Self> {
        if !(target_modes.is_finite() && target_modes >= 1.0) {
            return Err(Error::domain(format!("mode count must be >= 1, got {target_modes}")));
        }
        let grid = synth.grid();
        let max_r = (grid.width.min(grid.height) as f64 - 1.0) / 2.0;
        let max_r2 = (max_r * max_r).floor() as usize;
        // squared radii that change the pixel set of a centred disk
        let mut radii2: Vec<usize> = (0..=max_r2)
            .filter(|&s| is_sum_of_two_squares(s))
            .collect();
        radii2.dedup();
        let spec_for = |s: usize| {
            PinholeSpec::centered(grid, (s as f64).sqrt().max(PinholeSpec::MIN_RADIUS) + 1e-9)
        };

        let (mut lo, mut hi) = (0usize, radii2.len() - 1);
        let mut best = PreparedPinhole::new(spec_for(radii2[lo]), synth)?;
        if best.mu_eff >= target_modes {
            return Ok(best);
        }
        let top = PreparedPinhole::new(spec_for(radii2[hi]), synth)?;
        if top.mu_eff < target_modes {
            return Err(Error::Config(format!(
                "a pinhole on this grid holds at most {:.2} modes, {target_modes} requested",
                top.mu_eff
            )));
        }
        let mut upper = top;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let p = PreparedPinhole::new(spec_for(radii2[mid]), synth)?;
            if p.mu_eff >= target_modes {
                hi = mid;
                upper = p;
            } else {
                lo = mid;
                best = p;
            }
        }
        if (upper.mu_eff - target_modes).abs() < (target_modes - best.mu_eff).abs() {
            Ok(upper)
        } else {
            Ok(best)
        }
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn mu_eff(&self) -> f64 {
        self.mu_eff
    }

    pub fn apply(&self, field: &Array2<Complex64>) -> PinholeField {
        let mut out = Array2::<Complex64>::zeros(field.dim());
        {
            let dst = out.as_slice_mut().expect("standard layout");
            let src = field.as_slice().expect("standard layout");
            for &i in &self.pixels {
                dst[i] = src[i];
            }
        }
        PinholeField {
            field: out,
            pixels: self.pixels.clone(),
            mu_eff: self.mu_eff,
        }
    }
}

fn is_sum_of_two_squares(s: usize) -> bool {
    let mut a = 0usize;
    while a * a <= s {
        let rest = s - a * a;
        let b = (rest as f64).sqrt().round() as usize;
        if b * b == rest {
            return true;
        }
        a += 1;
    }
    false
}

/// Number of independent speckle modes integrated over `pixels`:
/// `M² / Σ_{p,q} |γ(p - q)|²` for `M` pixels. Equals 1 for a single pixel and
/// tends to area / coherence area for large apertures.
pub(crate) fn mode_count(synth: &ThermalSynth, pixels: &[usize]) -> f64 {
    let grid = synth.grid();
    let fft = synth.fft();
    let n = grid.len();
    let mut ind = vec![Complex64::default(); n];
    for &i in pixels {
        ind[i] = Complex64::new(1.0, 0.0);
    }
    fft.forward(&mut ind);
    ind.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
    fft.inverse(&mut ind);
    let corr = synth
        .intensity_correlation()
        .as_slice()
        .expect("standard layout");
    let pair_sum: f64 = ind
        .iter()
        .zip(corr)
        .map(|(r, c)| r.re / n as f64 * c)
        .sum();
    let m = pixels.len() as f64;
    // at least one mode exactly; FFT roundoff can land just below
    (m * m / pair_sum).max(1.0)
}

/// Restricts `field` to the disk of `ph`, zeroing everything outside, and
/// reports the mode count of the selection.
pub fn apply_pinhole(
    field: &Array2<Complex64>,
    grid: &GridSpec,
    ph: &PinholeSpec,
) -> Result<PinholeField> {
    if field.dim() != grid.shape() {
        return Err(Error::domain("field shape does not match grid"));
    }
    let synth = ThermalSynth::new(grid)?;
    Ok(PreparedPinhole::new(*ph, &synth)?.apply(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn synth(r: f64) -> ThermalSynth {
        ThermalSynth::new(&GridSpec::new(64, 64, r).unwrap()).unwrap()
    }

    #[test]
    fn open_aperture_is_identity() {
        let s = synth(2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f = s.field(&mut rng);
        let p = apply_pinhole(&f, s.grid(), &PinholeSpec::open()).unwrap();
        assert_eq!(p.field, f);
        // whole-grid mode count = N / Σ|γ|² ≈ N / 2πσ²
        let expect = 64.0 * 64.0 / (2.0 * std::f64::consts::PI * 4.0);
        assert!((p.mu_eff / expect - 1.0).abs() < 0.01, "{}", p.mu_eff);
    }

    #[test]
    fn single_pixel_has_one_mode() {
        let s = synth(3.0);
        let p = PreparedPinhole::new(PinholeSpec::centered(s.grid(), 0.5), &s).unwrap();
        assert_eq!(p.pixels().len(), 1);
        assert!((p.mu_eff() - 1.0).abs() < 1e-12);
        let q = PreparedPinhole::for_modes(&s, 1.0).unwrap();
        assert_eq!(q.pixels().len(), 1);
    }

    #[test]
    fn speckle_sized_disk_holds_about_one_mode() {
        let s = synth(3.0);
        let p = PreparedPinhole::new(PinholeSpec::centered(s.grid(), 3.0), &s).unwrap();
        assert!(p.mu_eff() > 1.0 && p.mu_eff() < 2.0, "{}", p.mu_eff());
    }

    #[test]
    fn masks_outside_and_keeps_inside() {
        let s = synth(2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let f = s.field(&mut rng);
        let ph = PinholeSpec::new((20.0, 30.0), 4.0);
        let p = apply_pinhole(&f, s.grid(), &ph).unwrap();
        for ((y, x), v) in p.field.indexed_iter() {
            let inside = (x as f64 - 20.0).powi(2) + (y as f64 - 30.0).powi(2) <= 16.0;
            if inside {
                assert_eq!(*v, f[[y, x]]);
            } else {
                assert_eq!(*v, Complex64::default());
            }
        }
    }

    #[test]
    fn radius_limits() {
        let s = synth(2.0);
        let g = s.grid();
        assert!(PinholeSpec::centered(g, 0.5).validate(g).is_ok());
        assert!(PinholeSpec::centered(g, 0.49).validate(g).is_err());
        assert!(PinholeSpec::new((2.0, 30.0), 3.0).validate(g).is_err());
        assert!(PinholeSpec::new((61.0, 30.0), 2.5).validate(g).is_ok());
    }

    #[test]
    fn mode_targeting_brackets_request() {
        let s = synth(2.0);
        for target in [2.0, 5.0] {
            let p = PreparedPinhole::for_modes(&s, target).unwrap();
            assert!((p.mu_eff() / target - 1.0).abs() < 0.25, "{target}: {}", p.mu_eff());
        }
        assert!(PreparedPinhole::for_modes(&s, 1e6).is_err());
    }
}
