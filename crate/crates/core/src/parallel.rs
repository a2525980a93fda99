//! Deterministic parallel folds over frame sources.
//!
//! Frames are split into contiguous batches and each batch into fixed-size
//! blocks. Blocks run on the rayon pool; their partial results are merged into
//! the owning batch strictly in block order. The floating-point result
//! therefore depends only on the frame count and the number of batches, never
//! on the number of threads.

use crate::error::Result;
use crate::specklefield::{Frame, FrameSource};
use rayon::prelude::*;

/// Frames folded sequentially before a partial result is merged.
pub const BLOCK_FRAMES: usize = 32;

/// Partial result of a fold that can absorb another partial result covering
/// the frames that immediately follow it.
pub trait Accumulator: Send + Sized {
    fn merge(&mut self, later: Self);
}

impl<A: Accumulator, B: Accumulator> Accumulator for (A, B) {
    fn merge(&mut self, later: Self) {
        self.0.merge(later.0);
        self.1.merge(later.1);
    }
}

impl<A: Accumulator> Accumulator for Vec<A> {
    fn merge(&mut self, later: Self) {
        assert_eq!(self.len(), later.len(), "accumulator lists differ in length");
        for (a, b) in self.iter_mut().zip(later) {
            a.merge(b);
        }
    }
}

/// Folds every frame of `source`, returning one accumulator per batch.
///
/// `n_batches` is clamped to `[1, n_frames]`; batch `b` covers frames
/// `[b·n/B, (b+1)·n/B)`.
pub fn fold_batches<S, A, I, F>(source: &S, n_batches: usize, init: I, fold: F) -> Result<Vec<A>>
where
    S: FrameSource + ?Sized,
    A: Accumulator,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &Frame) -> Result<()> + Sync,
{
    let n = source.n_frames();
    let nb = n_batches.clamp(1, n.max(1));
    let mut tasks = Vec::new();
    for b in 0..nb {
        let (start, end) = (b * n / nb, (b + 1) * n / nb);
        let mut t = start;
        while t < end {
            let u = (t + BLOCK_FRAMES).min(end);
            tasks.push((b, t, u));
            t = u;
        }
    }

    let mut batches: Vec<Option<A>> = (0..nb).map(|_| None).collect();
    let wave = (rayon::current_num_threads() * 4).max(1);
    for chunk in tasks.chunks(wave) {
        let parts: Vec<Result<(usize, A)>> = chunk
            .par_iter()
            .map(|&(b, start, end)| {
                let mut acc = init();
                for i in start..end {
                    let frame = source.frame(i).map_err(|e| e.at_frame(i))?;
                    fold(&mut acc, &frame).map_err(|e| e.at_frame(i))?;
                }
                Ok((b, acc))
            })
            .collect();
        for part in parts {
            let (b, acc) = part?;
            match &mut batches[b] {
                Some(existing) => existing.merge(acc),
                slot => *slot = Some(acc),
            }
        }
    }
    Ok(batches.into_iter().map(|a| a.unwrap_or_else(&init)).collect())
}

/// Folds every frame into a single accumulator.
pub fn fold_all<S, A, I, F>(source: &S, init: I, fold: F) -> Result<A>
where
    S: FrameSource + ?Sized,
    A: Accumulator,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &Frame) -> Result<()> + Sync,
{
    let mut v = fold_batches(source, 1, init, fold)?;
    Ok(v.pop().expect("one batch"))
}

/// Merges all batches in order, optionally leaving one out.
pub fn combine<A: Accumulator + Clone>(batches: &[A], skip: Option<usize>) -> Option<A> {
    let mut out: Option<A> = None;
    for (i, b) in batches.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        match &mut out {
            Some(acc) => acc.merge(b.clone()),
            None => out = Some(b.clone()),
        }
    }
    out
}

/// Runs `f` inside a pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specklefield::{GridSpec, StoredFrames};
    use ndarray::Array2;

    #[derive(Clone)]
    struct Sum(f64, Vec<usize>);
    impl Accumulator for Sum {
        fn merge(&mut self, later: Self) {
            self.0 += later.0;
            self.1.extend(later.1);
        }
    }

    fn source(n: usize) -> StoredFrames {
        let g = GridSpec::new(2, 2, 0.5).unwrap();
        let arrays = (0..n)
            .map(|i| Array2::from_elem((2, 2), 1.0 / (1.0 + i as f64)))
            .collect();
        StoredFrames::from_arrays(g, arrays).unwrap()
    }

    fn run(threads: usize, batches: usize) -> Vec<Sum> {
        let s = source(203);
        with_threads(threads, || {
            fold_batches(&s, batches, || Sum(0.0, vec![]), |a, f| {
                a.0 += f.intensity[[0, 0]];
                a.1.push(f.frame_index);
                Ok(())
            })
        })
        .unwrap()
        .unwrap()
    }

    #[test]
    fn order_and_bits_independent_of_threads() {
        let one = run(1, 7);
        for t in [2, 5] {
            let other = run(t, 7);
            for (a, b) in one.iter().zip(&other) {
                assert_eq!(a.0.to_bits(), b.0.to_bits());
                assert_eq!(a.1, b.1);
            }
        }
        let all: Vec<usize> = one.iter().flat_map(|s| s.1.clone()).collect();
        assert_eq!(all, (0..203).collect::<Vec<_>>());
    }

    #[test]
    fn leave_one_out() {
        let b = run(1, 4);
        let full = combine(&b, None).unwrap();
        let loo = combine(&b, Some(2)).unwrap();
        assert_eq!(full.1.len() - loo.1.len(), b[2].1.len());
    }
}
