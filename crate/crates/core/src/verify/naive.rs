use ndarray::Array2;

fn frame_mean(frames: &[Array2<f64>]) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros(frames[0].dim());
    for f in frames {
        m += f;
    }
    m / frames.len() as f64
}

fn bucket_correlation(frames: &[Array2<f64>], bucket: &[f64]) -> Array2<f64> {
    let n = frames.len() as f64;
    let (h, w) = frames[0].dim();
    let mean_b = bucket.iter().sum::<f64>() / n;
    Array2::from_shape_fn((h, w), |(y, x)| {
        let mut bi = 0.0;
        let mut i = 0.0;
        for (t, f) in frames.iter().enumerate() {
            bi += bucket[t] * f[[y, x]];
            i += f[[y, x]];
        }
        (bi / n) / (mean_b * (i / n))
    })
}

fn buckets(frames: &[Array2<f64>], mask: &Array2<bool>) -> Vec<f64> {
    frames
        .iter()
        .map(|f| {
            let mut b = 0.0;
            for ((y, x), &m) in mask.indexed_iter() {
                if m {
                    b += f[[y, x]];
                }
            }
            b
        })
        .collect()
}

/// `⟨I(p₀) I(p)⟩ / (⟨I(p₀)⟩⟨I(p)⟩)` by direct summation.
pub fn pixel_correlation_naive(frames: &[Array2<f64>], pixel: (usize, usize)) -> Array2<f64> {
    let b: Vec<f64> = frames.iter().map(|f| f[[pixel.1, pixel.0]]).collect();
    bucket_correlation(frames, &b)
}

/// Same quantity computed from fluctuations about the means (two passes).
pub fn pixel_correlation_two_pass(frames: &[Array2<f64>], pixel: (usize, usize)) -> Array2<f64> {
    let n = frames.len() as f64;
    let m = frame_mean(frames);
    let m0 = m[[pixel.1, pixel.0]];
    let (h, w) = m.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let cov: f64 = frames
            .iter()
            .map(|f| (f[[pixel.1, pixel.0]] - m0) * (f[[y, x]] - m[[y, x]]))
            .sum::<f64>()
            / n;
        1.0 + cov / (m0 * m[[y, x]])
    })
}

pub fn ghost_image_naive(frames: &[Array2<f64>], mask: &Array2<bool>) -> Array2<f64> {
    bucket_correlation(frames, &buckets(frames, mask))
}

pub fn dgi_naive(frames: &[Array2<f64>], mask: &Array2<bool>, reference: &Array2<bool>) -> Array2<f64> {
    ghost_image_naive(frames, mask) - ghost_image_naive(frames, reference)
}

/// Frame-averaged autocorrelation over non-periodic lags, normalized by the
/// autocorrelation of the mean frame; zero lag at `(w/2, h/2)`.
pub fn autocorrelation_naive(frames: &[Array2<f64>]) -> Array2<f64> {
    let (h, w) = frames[0].dim();
    let (cx, cy) = (w as isize / 2, h as isize / 2);
    let mean = frame_mean(frames);
    let n = frames.len() as f64;
    let corr = |a: &Array2<f64>, dx: isize, dy: isize| -> f64 {
        let mut s = 0.0;
        for y in 0..h as isize {
            let y2 = y + dy;
            if y2 < 0 || y2 >= h as isize {
                continue;
            }
            for x in 0..w as isize {
                let x2 = x + dx;
                if x2 < 0 || x2 >= w as isize {
                    continue;
                }
                s += a[[y as usize, x as usize]] * a[[y2 as usize, x2 as usize]];
            }
        }
        s
    };
    Array2::from_shape_fn((h, w), |(y, x)| {
        let (dx, dy) = (x as isize - cx, y as isize - cy);
        let num: f64 = frames.iter().map(|f| corr(f, dx, dy)).sum::<f64>() / n;
        num / corr(&mean, dx, dy)
    })
}
