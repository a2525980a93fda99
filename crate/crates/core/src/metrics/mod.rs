//! Figures of merit for reconstructed maps and their scaling with the number
//! of speckles covering the object.

mod sweep;

pub use sweep::{
    calibrate_speckle, ghost_metrics, sweep_speckle_count, sweep_speckle_count_with,
    CalibratedSpeckle, GhostMetrics, Method, MetricsRecord, SweepOptions,
};

use crate::correlation::{CorrelationMap, Region};
use crate::error::{Error, Result};
use crate::specklefield::GridSpec;
use crate::stats::{mean, sample_std};
use ndarray::Array2;

/// Square root of the object-background difference of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    pub value: f64,
    /// Set when the difference was negative and `value` was clamped to 0.
    pub clamped: bool,
}

/// `√(mean over object − mean over background)`. A difference that is not
/// positive gives 0 with the `clamped` flag set.
pub fn contrast(map: &CorrelationMap, object: &Region, background: &Region) -> Result<Contrast> {
    contrast_of(&map.values, &map.grid, object, background)
}

/// `(mean over object − mean over background) / sd(background)` with the
/// `n − 1` standard deviation over background pixels.
pub fn snr(map: &CorrelationMap, object: &Region, background: &Region) -> Result<f64> {
    snr_of(&map.values, &map.grid, object, background)
}

pub(crate) fn contrast_of(
    values: &Array2<f64>,
    grid: &GridSpec,
    object: &Region,
    background: &Region,
) -> Result<Contrast> {
    let (o, b) = region_values(values, grid, object, background)?;
    let diff = mean(&o) - mean(&b);
    Ok(if diff > 0.0 {
        Contrast {
            value: diff.sqrt(),
            clamped: false,
        }
    } else {
        Contrast {
            value: 0.0,
            clamped: true,
        }
    })
}

pub(crate) fn snr_of(
    values: &Array2<f64>,
    grid: &GridSpec,
    object: &Region,
    background: &Region,
) -> Result<f64> {
    let (o, b) = region_values(values, grid, object, background)?;
    if b.len() < 2 {
        return Err(Error::domain("background needs at least 2 pixels for an SNR"));
    }
    let sd = sample_std(&b);
    if !(sd > 0.0) {
        return Err(Error::Undefined("background has zero spread".into()));
    }
    Ok((mean(&o) - mean(&b)) / sd)
}

fn region_values(
    values: &Array2<f64>,
    grid: &GridSpec,
    object: &Region,
    background: &Region,
) -> Result<(Vec<f64>, Vec<f64>)> {
    object.check_grid(grid)?;
    background.check_grid(grid)?;
    if !object.is_disjoint(background) {
        return Err(Error::domain("object and background regions overlap"));
    }
    let flat = values.as_slice().expect("standard layout");
    let pick = |r: &Region| r.indices().iter().map(|&i| flat[i]).collect::<Vec<_>>();
    Ok((pick(object), pick(background)))
}

/// `y = a·x^b` fitted by least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.powf(self.b)
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0))
    {
        return Err(Error::domain(format!(
            "power-law fit needs positive finite points, got ({}, {})",
            p.0, p.1
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("power-law fit needs at least two distinct x".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let c = my - b * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - c - b * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        a: c.exp(),
        b,
        residual: (rss / points.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::MapKind;

    fn map(f: impl Fn(usize, usize) -> f64) -> CorrelationMap {
        let g = GridSpec::new(10, 10, 0.5).unwrap();
        CorrelationMap::new(Array2::from_shape_fn((10, 10), |(y, x)| f(x, y)), g, MapKind::GI, 10)
            .unwrap()
    }

    fn regions() -> (Region, Region) {
        (
            Region::rect(10, 10, 0, 0, 2, 2).unwrap(),
            Region::rect(10, 10, 5, 5, 5, 5).unwrap(),
        )
    }

    #[test]
    fn synthetic_contrast_and_snr() {
        let (o, b) = regions();
        let m = map(|x, y| if x < 2 && y < 2 { 5.0 } else { 1.0 });
        let c = contrast(&m, &o, &b).unwrap();
        assert!((c.value - 2.0).abs() < 1e-12);
        assert!(!c.clamped);
        // two background pixels at 1 ± a have sample sd a·√2 = 0.5
        let a = 0.25 * std::f64::consts::SQRT_2;
        let m = map(|x, y| match (x, y) {
            (0..=1, 0..=1) => 3.0,
            (9, 9) => 1.0 + a,
            (8, 9) => 1.0 - a,
            _ => 0.0,
        });
        let bg = Region::from_pixels(10, 10, [(9, 9), (8, 9)]).unwrap();
        assert!((snr(&m, &o, &bg).unwrap() - 4.0).abs() < 1e-12);
        let constant = map(|_, _| 2.0);
        let c0 = contrast(&constant, &o, &b).unwrap();
        assert_eq!(c0.value, 0.0);
        assert!(c0.clamped);
        assert!(matches!(snr(&constant, &o, &b), Err(Error::Undefined(_))));
        let neg = map(|x, y| if x < 2 && y < 2 { 0.0 } else { 1.0 });
        assert!(contrast(&neg, &o, &b).unwrap().clamped);
    }

    #[test]
    fn region_checks() {
        let m = map(|_, _| 1.0);
        let o = Region::rect(10, 10, 0, 0, 3, 3).unwrap();
        let b = Region::rect(10, 10, 2, 2, 3, 3).unwrap();
        assert!(contrast(&m, &o, &b).is_err());
        let other = Region::rect(12, 10, 0, 0, 1, 1).unwrap();
        assert!(contrast(&m, &other, &b).is_err());
        let single = Region::single(10, 10, 9, 9).unwrap();
        assert!(snr(&m, &o, &single).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<_> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&x| (x, 2.0 * x.powf(0.5))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.a - 2.0).abs() < 1e-12 && (f.b - 0.5).abs() < 1e-12 && f.residual < 1e-12);
        let flat: Vec<_> = [1.0, 3.0, 9.0].iter().map(|&x| (x, 7.0)).collect();
        let f = fit_power_law(&flat).unwrap();
        assert!((f.a - 7.0).abs() < 1e-12 && f.b.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(matches!(
            fit_power_law(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]),
            Err(Error::Degenerate(_))
        ));
    }
}
