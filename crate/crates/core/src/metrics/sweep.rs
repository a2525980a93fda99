use super::{contrast_of, snr_of, Contrast};
use crate::correlation::{
    background_margin, collect_ghost, default_background, default_reference, CorrelationMap,
    MapKind, Mask, Region,
};
use crate::error::{Error, Result};
use crate::photostatistics::{SourceKind, SourceSpec};
use crate::specklefield::{
    generate_ensemble_with, measure_speckle_area, splitmix64, EnsembleOptions, FrameSource,
    GridSpec,
};
use crate::stats::jackknife_se;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    GI,
    DGI,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::GI, Method::DGI];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GI => "gi",
            Method::DGI => "dgi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gi" => Ok(Method::GI),
            "dgi" => Ok(Method::DGI),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// One point of a contrast/SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// Object area over the measured speckle area.
    pub ratio: f64,
    /// Ratio that was requested.
    pub target_ratio: f64,
    pub contrast: f64,
    pub contrast_clamped: bool,
    pub snr: f64,
    /// Delete-one-batch jackknife standard errors.
    pub contrast_se: f64,
    pub snr_se: f64,
    pub method: Method,
    pub source: SourceKind,
    pub n_frames: usize,
    pub seed: u64,
    pub speckle_radius: f64,
    pub speckle_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub ensemble: EnsembleOptions,
    /// Frame batches for jackknife errors.
    pub n_batches: usize,
    /// Thermal frames used to measure the speckle area.
    pub calibration_frames: usize,
    /// Accepted relative deviation of the achieved ratio from the target.
    pub ratio_tolerance: f64,
    /// DGI reference bucket; `None` uses [`default_reference`].
    pub reference: Option<Region>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            ensemble: EnsembleOptions::default(),
            n_batches: 32,
            calibration_frames: 200,
            ratio_tolerance: 0.10,
            reference: None,
        }
    }
}

/// Speckle radius whose measured speckle area puts the object at the
/// requested ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedSpeckle {
    pub target_ratio: f64,
    pub radius: f64,
    pub area: f64,
    pub ratio: f64,
}

/// GI or DGI figures of merit for one ensemble.
#[derive(Debug, Clone)]
pub struct GhostMetrics {
    pub method: Method,
    pub map: CorrelationMap,
    pub contrast: Contrast,
    pub snr: f64,
    pub contrast_se: f64,
    pub snr_se: f64,
}

/// GI and DGI maps with contrast and SNR (and their jackknife errors) from
/// one pass over the frames.
pub fn ghost_metrics<S: FrameSource + ?Sized>(
    source: &S,
    mask: &Mask,
    reference: &Region,
    background: &Region,
    n_batches: usize,
) -> Result<[GhostMetrics; 2]> {
    let grid = *source.grid();
    let object = mask.region();
    let bc = collect_ghost(source, mask, reference, n_batches.max(2))?;
    let values = |s: &crate::correlation::CorrelationSums, m: Method| match m {
        Method::GI => s.normalized(0),
        Method::DGI => s.differential(0, 1),
    };
    let reps: Vec<_> = (0..bc.n_batches()).map(|b| bc.leave_one_out(b)).collect();
    let mut out = Vec::with_capacity(2);
    for m in Method::ALL {
        let v = values(bc.total(), m)?;
        let contrast = contrast_of(&v, &grid, &object, background)?;
        let snr = snr_of(&v, &grid, &object, background)?;
        let mut cs = Vec::with_capacity(reps.len());
        let mut ss = Vec::with_capacity(reps.len());
        for r in &reps {
            let rv = values(r, m)?;
            cs.push(contrast_of(&rv, &grid, &object, background)?.value);
            ss.push(snr_of(&rv, &grid, &object, background)?);
        }
        let kind = match m {
            Method::GI => MapKind::GI,
            Method::DGI => MapKind::DGI,
        };
        out.push(GhostMetrics {
            method: m,
            map: bc.map(kind, v)?,
            contrast,
            snr,
            contrast_se: jackknife_se(&cs),
            snr_se: jackknife_se(&ss),
        });
    }
    let dgi = out.pop().expect("two methods");
    let gi = out.pop().expect("two methods");
    Ok([gi, dgi])
}

fn derive_seed(master: u64, stream: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(stream ^ splitmix64(index as u64)))
}

const CALIBRATION_STREAM: u64 = 0xCA1B;
const CALIBRATION_PASSES: usize = 12;
const ENSEMBLE_STREAM: u64 = 0xE45E;

/// Largest speckle radius that still leaves background pixels around `mask`.
fn max_radius(grid: &GridSpec, mask: &Mask) -> f64 {
    let d = mask.distance_map();
    let farthest = d.iter().copied().fold(0.0, f64::max);
    // margin 5 + ceil(3σ) must not exceed the farthest distance
    let by_background = ((farthest - 5.0).floor() / 3.0).max(0.0);
    grid.max_speckle_radius().min(by_background)
}

/// Finds the speckle radius giving `mask.count() / area ≈ ratio`.
///
/// Starts from the nominal Gaussian half-maximum area and corrects with the
/// area measured on a thermal calibration ensemble.
pub fn calibrate_speckle(
    grid: &GridSpec,
    mask: &Mask,
    ratio: f64,
    calibration_frames: usize,
    seed: u64,
    tolerance: f64,
) -> Result<CalibratedSpeckle> {
    let count = mask.count() as f64;
    let (r_min, r_max) = (0.5, max_radius(grid, mask));
    let ratio_at = |r: f64| count / crate::specklefield::nominal_speckle_area(r);
    if r_max < r_min || !(ratio >= ratio_at(r_max) * (1.0 - tolerance) && ratio <= ratio_at(r_min) * (1.0 + tolerance)) {
        return Err(Error::Config(format!(
            "ratio {ratio} is not achievable for a {count}-pixel object on a {}x{} grid; feasible range is about [{:.3}, {:.3}]",
            grid.width,
            grid.height,
            ratio_at(r_max.max(r_min)),
            ratio_at(r_min)
        )));
    }
    let target_area = count / ratio;
    let mut radius = GridSpec::radius_for_speckle_area(target_area).clamp(r_min, r_max);
    let thermal = SourceSpec::thermal(1.0)?;
    let mut best: Option<CalibratedSpeckle> = None;
    // the measured area is a step function of the radius: rescale until the
    // target is bracketed, then bisect
    let (mut below, mut above) = (None::<f64>, None::<f64>);
    for _ in 0..CALIBRATION_PASSES {
        let g = grid.with_speckle_radius(radius)?;
        let e = generate_ensemble_with(&thermal, &g, calibration_frames, seed, &EnsembleOptions::default())?;
        let area = measure_speckle_area(&e)?;
        let c = CalibratedSpeckle {
            target_ratio: ratio,
            radius,
            area,
            ratio: count / area,
        };
        let err = |c: &CalibratedSpeckle| (c.area / target_area - 1.0).abs();
        if best.is_none_or(|b| err(&c) < err(&b)) {
            best = Some(c);
        }
        if err(&c) <= 0.5 * tolerance {
            break;
        }
        if area < target_area {
            below = Some(radius);
        } else {
            above = Some(radius);
        }
        let next = match (below, above) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            _ => (radius * (target_area / area).sqrt()).clamp(r_min, r_max),
        };
        if (next - radius).abs() < 1e-4 {
            break;
        }
        radius = next;
    }
    let best = best.expect("at least one calibration pass");
    if (best.ratio / ratio - 1.0).abs() > tolerance {
        return Err(Error::Config(format!(
            "speckle size could not be tuned to ratio {ratio}: best achieved {:.3}",
            best.ratio
        )));
    }
    Ok(best)
}

pub fn sweep_speckle_count(
    spec: &SourceSpec,
    grid: &GridSpec,
    mask: &Mask,
    ratios: &[f64],
    n_frames: usize,
    master_seed: u64,
) -> Result<Vec<MetricsRecord>> {
    sweep_speckle_count_with(spec, grid, mask, ratios, n_frames, master_seed, &SweepOptions::default())
}

/// Contrast and SNR of GI and DGI for each requested object/speckle area
/// ratio. Two records (GI, DGI) per ratio, in input order.
pub fn sweep_speckle_count_with(
    spec: &SourceSpec,
    grid: &GridSpec,
    mask: &Mask,
    ratios: &[f64],
    n_frames: usize,
    master_seed: u64,
    options: &SweepOptions,
) -> Result<Vec<MetricsRecord>> {
    spec.validate()?;
    grid.validate()?;
    mask.matches(grid)?;
    if n_frames < 2 {
        return Err(Error::domain("a sweep needs at least 2 frames per ratio"));
    }
    for (i, &r) in ratios.iter().enumerate() {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::domain(format!("ratio {r} must be >= 1")));
        }
        if ratios[..i].contains(&r) {
            return Err(Error::domain(format!("ratio {r} listed twice")));
        }
    }

    let mut records = Vec::with_capacity(2 * ratios.len());
    for (i, &ratio) in ratios.iter().enumerate() {
        let cal = calibrate_speckle(
            grid,
            mask,
            ratio,
            options.calibration_frames,
            derive_seed(master_seed, CALIBRATION_STREAM, i),
            options.ratio_tolerance,
        )?;
        let g = grid.with_speckle_radius(cal.radius)?;
        let seed = derive_seed(master_seed, ENSEMBLE_STREAM, i);
        let ensemble = generate_ensemble_with(spec, &g, n_frames, seed, &options.ensemble)?;
        let background = default_background(mask, &g)?;
        let reference = match &options.reference {
            Some(r) => r.clone(),
            None => default_reference(mask, &g)?,
        };
        debug_assert!(background_margin(&g) > 0.0);
        for m in ghost_metrics(&ensemble, mask, &reference, &background, options.n_batches)? {
            records.push(MetricsRecord {
                ratio: cal.ratio,
                target_ratio: ratio,
                contrast: m.contrast.value,
                contrast_clamped: m.contrast.clamped,
                snr: m.snr,
                contrast_se: m.contrast_se,
                snr_se: m.snr_se,
                method: m.method,
                source: spec.kind(),
                n_frames,
                seed,
                speckle_radius: cal.radius,
                speckle_area: cal.area,
            });
        }
    }
    Ok(records)
}
