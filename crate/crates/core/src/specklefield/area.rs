use super::FrameSource;
use crate::correlation::autocorrelation_fft;
use crate::error::{Error, Result};
use ndarray::Array2;

/// Minimum ensemble size for a speckle-area estimate.
pub const MIN_AREA_FRAMES: usize = 100;

/// Mean speckle area in px²: the number of lags around zero where the
/// background-subtracted averaged autocorrelation exceeds half its peak.
///
/// The background level is the mean over lags at least 3/8 of the smaller grid
/// dimension from the centre.
pub fn measure_speckle_area<S: FrameSource + ?Sized>(source: &S) -> Result<f64> {
    if source.n_frames() < MIN_AREA_FRAMES {
        return Err(Error::domain(format!(
            "speckle area needs at least {MIN_AREA_FRAMES} frames, got {}",
            source.n_frames()
        )));
    }
    let map = autocorrelation_fft(source)?;
    let (cx, cy) = source.grid().center();
    half_max_area(&map.values, cx, cy)
}

pub(crate) fn half_max_area(values: &Array2<f64>, cx: usize, cy: usize) -> Result<f64> {
    let (h, w) = values.dim();
    let ring = 0.375 * w.min(h) as f64;
    let in_ring = |x: usize, y: usize| {
        let dx = x as f64 - cx as f64;
        let dy = y as f64 - cy as f64;
        (dx * dx + dy * dy).sqrt() >= ring
    };

    let (mut sum, mut sum2, mut n) = (0.0, 0.0, 0usize);
    for ((y, x), &v) in values.indexed_iter() {
        if in_ring(x, y) {
            sum += v;
            sum2 += v * v;
            n += 1;
        }
    }
    if n < 2 {
        return Err(Error::Analysis("grid too small to estimate a baseline".into()));
    }
    let base = sum / n as f64;
    let spread = ((sum2 / n as f64 - base * base).max(0.0)).sqrt();
    let peak = values[[cy, cx]] - base;
    if !(peak.is_finite() && peak > 5.0 * spread && peak > 0.0) {
        return Err(Error::Analysis(format!(
            "no resolvable autocorrelation peak (height {peak:.3e}, baseline spread {spread:.3e})"
        )));
    }

    // flood fill of the connected half-max region around the centre
    let half = 0.5 * peak;
    let mut seen = Array2::from_elem((h, w), false);
    let mut stack = vec![(cx, cy)];
    seen[[cy, cx]] = true;
    let mut count = 0usize;
    while let Some((x, y)) = stack.pop() {
        if in_ring(x, y) || x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            return Err(Error::Analysis(
                "half-maximum region reaches the baseline ring; speckle too large for the grid"
                    .into(),
            ));
        }
        count += 1;
        for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
            if !seen[[ny, nx]] && values[[ny, nx]] - base >= half {
                seen[[ny, nx]] = true;
                stack.push((nx, ny));
            }
        }
    }
    Ok(count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak_area() {
        let (w, h) = (64, 64);
        let s: f64 = 4.0;
        let v = Array2::from_shape_fn((h, w), |(y, x)| {
            let d2 = ((x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2)) / (2.0 * s * s);
            1.0 + (-d2).exp()
        });
        let a = half_max_area(&v, 32, 32).unwrap();
        let expect = 2.0 * std::f64::consts::LN_2 * std::f64::consts::PI * s * s;
        assert!((a / expect - 1.0).abs() < 0.1, "{a} vs {expect}");
    }

    #[test]
    fn flat_map_has_no_peak() {
        let v = Array2::from_elem((32, 32), 1.0);
        assert!(matches!(half_max_area(&v, 16, 16), Err(Error::Analysis(_))));
    }
}
