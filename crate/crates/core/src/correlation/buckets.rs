use super::region::{Mask, Region};
use super::{CorrelationMap, MapKind};
use crate::error::{Error, Result};
use crate::parallel::{combine, fold_batches, Accumulator};
use crate::specklefield::{Frame, FrameSource, GridSpec};
use crate::stats::compensated_sum;
use ndarray::Array2;

/// Running sums `n`, `Σ I(p)`, `Σ b_k` and `Σ b_k I(p)` for a set of bucket
/// signals `b_k`, each the summed intensity over one region.
#[derive(Debug, Clone)]
pub struct CorrelationSums {
    width: usize,
    height: usize,
    n: usize,
    field: Vec<f64>,
    bucket: Vec<f64>,
    cross: Vec<Vec<f64>>,
}

impl CorrelationSums {
    pub fn new(grid: &GridSpec, n_buckets: usize) -> Self {
        CorrelationSums {
            width: grid.width,
            height: grid.height,
            n: 0,
            field: vec![0.0; grid.len()],
            bucket: vec![0.0; n_buckets],
            cross: vec![vec![0.0; grid.len()]; n_buckets],
        }
    }

    /// Adds one frame; `regions[k]` defines bucket `k`.
    pub fn add_frame(&mut self, frame: &Frame, regions: &[Region]) {
        assert_eq!(regions.len(), self.bucket.len(), "one region per bucket");
        self.add(frame.as_slice(), regions);
    }

    fn add(&mut self, frame: &[f64], regions: &[Region]) {
        self.n += 1;
        for (f, &v) in self.field.iter_mut().zip(frame) {
            *f += v;
        }
        for (k, r) in regions.iter().enumerate() {
            let b = compensated_sum(r.indices().iter().map(|&i| frame[i]));
            self.bucket[k] += b;
            for (c, &v) in self.cross[k].iter_mut().zip(frame) {
                *c += b * v;
            }
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n
    }

    /// `⟨b_k I(p)⟩ / (⟨b_k⟩⟨I(p)⟩)` at every pixel.
    pub fn normalized(&self, k: usize) -> Result<Array2<f64>> {
        let n = self.n as f64;
        let b = self.bucket[k];
        if !(b > 0.0) {
            return Err(Error::Undefined(format!("bucket {k} has zero mean")));
        }
        let mut out = Vec::with_capacity(self.field.len());
        for (p, (&c, &f)) in self.cross[k].iter().zip(&self.field).enumerate() {
            if !(f > 0.0) {
                return Err(Error::Undefined(format!(
                    "mean intensity is zero at pixel ({}, {})",
                    p % self.width,
                    p / self.width
                )));
            }
            out.push(n * c / (b * f));
        }
        Ok(Array2::from_shape_vec((self.height, self.width), out).expect("grid shape"))
    }

    /// Object-bucket map minus reference-bucket map.
    pub fn differential(&self, object: usize, reference: usize) -> Result<Array2<f64>> {
        Ok(self.normalized(object)? - self.normalized(reference)?)
    }
}

impl Accumulator for CorrelationSums {
    fn merge(&mut self, later: Self) {
        self.n += later.n;
        add_into(&mut self.field, &later.field);
        add_into(&mut self.bucket, &later.bucket);
        for (a, b) in self.cross.iter_mut().zip(&later.cross) {
            add_into(a, b);
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Bucket sums split into contiguous frame batches for resampling.
#[derive(Debug, Clone)]
pub struct BucketCorrelation {
    grid: GridSpec,
    regions: Vec<Region>,
    batches: Vec<CorrelationSums>,
    total: CorrelationSums,
}

impl BucketCorrelation {
    pub fn collect<S: FrameSource + ?Sized>(
        source: &S,
        regions: Vec<Region>,
        n_batches: usize,
    ) -> Result<Self> {
        let grid = *source.grid();
        if source.n_frames() < 2 {
            return Err(Error::domain("correlation maps need at least 2 frames"));
        }
        for r in &regions {
            r.check_grid(&grid)?;
        }
        let nb = regions.len();
        let batches = fold_batches(
            source,
            n_batches,
            || CorrelationSums::new(&grid, nb),
            |acc, frame| {
                acc.add(frame.as_slice(), &regions);
                Ok(())
            },
        )?;
        Self::from_batches(grid, regions, batches)
    }

    /// Wraps per-batch sums gathered by a caller-driven fold.
    pub fn from_batches(
        grid: GridSpec,
        regions: Vec<Region>,
        batches: Vec<CorrelationSums>,
    ) -> Result<Self> {
        let total = combine(&batches, None)
            .ok_or_else(|| Error::domain("no frame batches to combine"))?;
        if total.n < 2 {
            return Err(Error::domain("correlation maps need at least 2 frames"));
        }
        Ok(BucketCorrelation {
            grid,
            regions,
            batches,
            total,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn total(&self) -> &CorrelationSums {
        &self.total
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    /// Sums over every batch except `batch`.
    pub fn leave_one_out(&self, batch: usize) -> CorrelationSums {
        combine(&self.batches, Some(batch)).unwrap_or_else(|| self.total.clone())
    }

    pub fn map(&self, kind: MapKind, values: Array2<f64>) -> Result<CorrelationMap> {
        CorrelationMap::new(values, self.grid, kind, self.total.n)
    }
}

/// Correlation of one pixel's intensity with every pixel of the field.
pub fn pixel_correlation<S: FrameSource + ?Sized>(
    source: &S,
    pixel: (usize, usize),
) -> Result<CorrelationMap> {
    let g = source.grid();
    let r = Region::single(g.width, g.height, pixel.0, pixel.1)?;
    let bc = BucketCorrelation::collect(source, vec![r], 1)?;
    bc.map(MapKind::PixelCorr, bc.total.normalized(0)?)
}

/// Ghost image: correlation of the bucket signal over `mask` with the field.
pub fn ghost_image<S: FrameSource + ?Sized>(source: &S, mask: &Mask) -> Result<CorrelationMap> {
    mask.matches(source.grid())?;
    let bc = BucketCorrelation::collect(source, vec![mask.region()], 1)?;
    bc.map(MapKind::GI, bc.total.normalized(0)?)
}

/// Differential ghost image: the ghost image minus the correlation map of a
/// reference bucket collected over `reference`.
pub fn differential_ghost_image<S: FrameSource + ?Sized>(
    source: &S,
    mask: &Mask,
    reference: &Region,
) -> Result<CorrelationMap> {
    let bc = collect_ghost(source, mask, reference, 1)?;
    bc.map(MapKind::DGI, bc.total.differential(0, 1)?)
}

/// Collects object and reference buckets together, for GI and DGI from one
/// pass over the frames.
pub fn collect_ghost<S: FrameSource + ?Sized>(
    source: &S,
    mask: &Mask,
    reference: &Region,
    n_batches: usize,
) -> Result<BucketCorrelation> {
    mask.matches(source.grid())?;
    reference.check_grid(source.grid())?;
    let object = mask.region();
    if !object.is_disjoint(reference) {
        return Err(Error::domain("reference region overlaps the mask"));
    }
    BucketCorrelation::collect(source, vec![object, reference.clone()], n_batches)
}
