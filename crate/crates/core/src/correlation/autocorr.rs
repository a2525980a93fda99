use super::{CorrelationMap, MapKind};
use crate::error::{Error, Result};
use crate::fft::{next_fast_len, Fft2};
use crate::parallel::{combine, fold_batches, Accumulator};
use crate::specklefield::{Frame, FrameSource, GridSpec};
use crate::stats::jackknife_se_map;
use ndarray::Array2;
use num_complex::Complex64;

/// Sums of `|F(I_t)|²` over zero-padded frames, plus the frame sum.
///
/// Frames are transformed two at a time, packed as `I_a + i I_b`; the power
/// of each pair is symmetrized when the map is finalized.
#[derive(Debug, Clone)]
pub struct AutocorrAccumulator {
    fft: Fft2,
    grid: GridSpec,
    width: usize,
    height: usize,
    n: usize,
    power: Vec<f64>,
    frame_sum: Vec<f64>,
    pending: Option<Vec<f64>>,
}

impl AutocorrAccumulator {
    pub fn new(grid: &GridSpec) -> Self {
        Self::with_fft(grid, &padded_fft(grid))
    }

    fn with_fft(grid: &GridSpec, fft: &Fft2) -> Self {
        AutocorrAccumulator {
            fft: fft.clone(),
            grid: *grid,
            width: grid.width,
            height: grid.height,
            n: 0,
            power: vec![0.0; fft.len()],
            frame_sum: vec![0.0; grid.len()],
            pending: None,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n
    }

    pub fn add_frame(&mut self, frame: &Frame) {
        self.add(frame.as_slice());
    }

    /// Finalized map over all frames added so far.
    pub fn finish_map(&self) -> Result<CorrelationMap> {
        CorrelationMap::new(self.finish()?, self.grid, MapKind::Autocorrelation, self.n)
    }

    fn add(&mut self, frame: &[f64]) {
        self.n += 1;
        self.frame_sum
            .iter_mut()
            .zip(frame)
            .for_each(|(s, v)| *s += v);
        match self.pending.take() {
            Some(a) => self.transform(&a, Some(frame)),
            None => self.pending = Some(frame.to_vec()),
        }
    }

    fn transform(&mut self, a: &[f64], b: Option<&[f64]>) {
        let pw = self.fft.width();
        let mut buf = vec![Complex64::default(); self.fft.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                buf[y * pw + x] = Complex64::new(a[i], b.map_or(0.0, |b| b[i]));
            }
        }
        self.fft.forward(&mut buf);
        self.power
            .iter_mut()
            .zip(&buf)
            .for_each(|(p, z)| *p += z.norm_sqr());
    }

    fn flush(&mut self) {
        if let Some(a) = self.pending.take() {
            self.transform(&a, None);
        }
    }

    /// Normalized autocorrelation, zero lag at `(width/2, height/2)`.
    fn finish(&self) -> Result<Array2<f64>> {
        let mut s = self.clone();
        s.flush();
        let (pw, ph) = (s.fft.width(), s.fft.height());
        let n = s.n as f64;

        let mut num: Vec<Complex64> = (0..ph)
            .flat_map(|ky| (0..pw).map(move |kx| (kx, ky)))
            .map(|(kx, ky)| {
                let mirror = ((ph - ky) % ph) * pw + (pw - kx) % pw;
                Complex64::new(0.5 * (s.power[ky * pw + kx] + s.power[mirror]), 0.0)
            })
            .collect();
        s.fft.inverse(&mut num);

        let mut den = vec![Complex64::default(); s.fft.len()];
        for y in 0..s.height {
            for x in 0..s.width {
                den[y * pw + x] = Complex64::new(s.frame_sum[y * s.width + x] / n, 0.0);
            }
        }
        s.fft.forward(&mut den);
        den.iter_mut()
            .for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
        s.fft.inverse(&mut den);

        let zero_lag = den[0].re;
        if !(zero_lag > 0.0) {
            return Err(Error::Analysis("frames are identically zero".into()));
        }
        let (cx, cy) = (s.width / 2, s.height / 2);
        let mut out = Array2::<f64>::zeros((s.height, s.width));
        for y in 0..s.height {
            let dy = (y + ph - cy) % ph;
            for x in 0..s.width {
                let dx = (x + pw - cx) % pw;
                let d = den[dy * pw + dx].re;
                if !(d > 1e-12 * zero_lag) {
                    return Err(Error::Analysis(format!(
                        "mean pattern has no overlap at lag ({}, {})",
                        x as isize - cx as isize,
                        y as isize - cy as isize
                    )));
                }
                out[[y, x]] = num[dy * pw + dx].re / n / d;
            }
        }
        Ok(out)
    }
}

impl Accumulator for AutocorrAccumulator {
    fn merge(&mut self, mut later: Self) {
        self.n += later.n;
        self.power
            .iter_mut()
            .zip(&later.power)
            .for_each(|(a, b)| *a += b);
        self.frame_sum
            .iter_mut()
            .zip(&later.frame_sum)
            .for_each(|(a, b)| *a += b);
        match (self.pending.take(), later.pending.take()) {
            (Some(a), Some(b)) => self.transform(&a, Some(&b)),
            (a, b) => self.pending = a.or(b),
        }
    }
}

fn padded_fft(grid: &GridSpec) -> Fft2 {
    let pad = |n: usize| next_fast_len(n + n.div_ceil(2));
    Fft2::new(pad(grid.width), pad(grid.height))
}

fn collect<S: FrameSource + ?Sized>(source: &S, n_batches: usize) -> Result<Vec<AutocorrAccumulator>> {
    if source.n_frames() < 2 {
        return Err(Error::domain("autocorrelation needs at least 2 frames"));
    }
    let grid = *source.grid();
    let fft = padded_fft(&grid);
    fold_batches(
        source,
        n_batches,
        || AutocorrAccumulator::with_fft(&grid, &fft),
        |acc, frame| {
            acc.add(frame.as_slice());
            Ok(())
        },
    )
}

/// Frame-averaged intensity autocorrelation, normalized by the
/// autocorrelation of the mean frame so that uncorrelated lags give 1.
///
/// Frames are zero padded, so lags are not periodic. The centre pixel holds
/// zero lag and estimates `g²(0)`.
pub fn autocorrelation_fft<S: FrameSource + ?Sized>(source: &S) -> Result<CorrelationMap> {
    combine(&collect(source, 1)?, None)
        .expect("one batch")
        .finish_map()
}

/// [`autocorrelation_fft`] together with a delete-one-batch jackknife
/// standard error at every lag.
pub fn autocorrelation_with_errors<S: FrameSource + ?Sized>(
    source: &S,
    n_batches: usize,
) -> Result<(CorrelationMap, Array2<f64>)> {
    let batches = collect(source, n_batches.max(2))?;
    let total = combine(&batches, None).expect("batches");
    let map = total.finish_map()?;
    let reps = (0..batches.len())
        .map(|b| combine(&batches, Some(b)).expect("two or more batches").finish())
        .collect::<Result<Vec<_>>>()?;
    Ok((map, jackknife_se_map(&reps)))
}
