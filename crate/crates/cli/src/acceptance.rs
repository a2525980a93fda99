//! The statistical acceptance suite behind `ghostim selftest`.
//!
//! Each criterion runs at full scale by default. [`Scale::Quick`] shrinks the
//! ensembles for smoke runs; its verdicts are indicative only.

use crate::commands;
use crate::config::RunConfig;
use ghostim::correlation::{
    autocorrelation_fft, collect_ghost, default_background, default_reference, AutocorrAccumulator, CorrelationMap,
    CorrelationSums, Mask, Region,
};
use ghostim::metrics::{contrast, fit_power_law, ghost_metrics, sweep_speckle_count_with, Method, MetricsRecord, SweepOptions};
use ghostim::parallel::{combine, fold_batches, with_threads};
use ghostim::photostatistics::{
    bessel_k, g2_case_a, g2_case_b, pdf_case_a, pdf_case_b, pdf_thermal, sample_intensity, SourceKind, SourceSpec,
};
use ghostim::specklefield::{generate_ensemble, GridSpec};
use ghostim::stats::jackknife_se_map;
use ghostim::verify::{autocorrelation_naive, dgi_naive, ghost_image_naive, integrate_semi_infinite, pixel_correlation_naive};
use ghostim::{Error, Result};
use ndarray::Array2;
use std::fmt;
use std::time::Instant;

pub const ALL: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn frames(self, full: usize, quick: usize) -> usize {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: u8,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {}: {} | {:.1} s | {}",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

/// Collects named checks into one verdict.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let w = what.into();
        if !ok {
            self.failed.push(w.clone());
        }
        self.notes.push(format!("{}{w}", if ok { "" } else { "FAILED " }));
    }

    fn runtime(&mut self, start: Instant, limit_s: f64, scale: Scale) {
        let s = start.elapsed().as_secs_f64();
        if scale == Scale::Full {
            self.check(s < limit_s, format!("runtime {s:.1} s < {limit_s} s"));
        }
    }

    fn finish(self, criterion: u8, start: Instant) -> Outcome {
        Outcome {
            criterion,
            passed: self.failed.is_empty(),
            detail: self.notes.join("; "),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

pub fn run_criterion(n: u8, scale: Scale) -> Result<Outcome> {
    let start = Instant::now();
    let checks = match n {
        1 => g2_extremes(scale, start)?,
        2 => field_consistency(scale, start)?,
        3 => oracle_equivalence(scale, start)?,
        4 => pdf_suite()?,
        5 => figure_of_merit_structure(scale, start)?,
        6 => power_law_scaling(scale)?,
        7 => single_speckle_contrast(scale)?,
        8 => mask_reconstruction(scale)?,
        9 => determinism(scale)?,
        _ => return Err(Error::Config(format!("no acceptance criterion {n} (expected 1 to 9)"))),
    };
    Ok(checks.finish(n, start))
}

fn thermal() -> SourceSpec {
    SourceSpec::thermal(1.0).expect("valid")
}

fn case_a() -> SourceSpec {
    SourceSpec::case_a(1.0, 1.0, 1.0).expect("valid")
}

fn case_b() -> SourceSpec {
    SourceSpec::case_b(1.0, 1.0, 1.0).expect("valid")
}

fn sources() -> [SourceSpec; 3] {
    [thermal(), case_a(), case_b()]
}

fn g2_extremes(scale: Scale, start: Instant) -> Result<Checks> {
    let n = scale.frames(100_000, 20_000);
    let mut c = Checks::default();
    for (spec, target, tol) in [(thermal(), 2.0, 0.1), (case_a(), 4.0, 0.2), (case_b(), 6.0, 0.5)] {
        let g2 = sample_intensity(&spec, n, 1)?.g2()?;
        c.check((g2 - target).abs() <= tol, format!("{} g2 {g2:.4} vs {target} +/- {tol}", spec.kind()));
    }
    c.runtime(start, 5.0, scale);
    Ok(c)
}

/// Centre value and mean over the lag annulus `r_in <= |lag| <= r_out`.
fn center_and_baseline(map: &CorrelationMap, r_in: f64, r_out: f64) -> (f64, f64) {
    let (cx, cy) = map.grid.center();
    let (mut s, mut n) = (0.0, 0usize);
    for ((y, x), v) in map.values.indexed_iter() {
        let r = ((x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2)).sqrt();
        if r >= r_in && r <= r_out {
            s += v;
            n += 1;
        }
    }
    (map.values[[cy, cx]], s / n as f64)
}

fn field_consistency(scale: Scale, start: Instant) -> Result<Checks> {
    let side = scale.frames(200, 64);
    let n = scale.frames(10_000, 1_000);
    let sigma = 2.0;
    let grid = GridSpec::new(side, side, sigma)?;
    let (cx, cy) = grid.center();
    let mut c = Checks::default();
    let targets = [(2.0, 0.1, 1.0, 0.05), (4.0, 0.2, 2.0, 0.1), (6.0, 0.5, 1.0, 0.05)];
    for (spec, (tc, tol_c, tb, tol_b)) in sources().into_iter().zip(targets) {
        let e = generate_ensemble(&spec, &grid, n, 20)?;
        let center = Region::single(grid.width, grid.height, cx, cy)?;
        let regions = vec![center];
        // autocorrelation and centre-pixel correlation from one pass
        let batches = fold_batches(
            &e,
            64,
            || (AutocorrAccumulator::new(&grid), CorrelationSums::new(&grid, 1)),
            |(a, p), frame| {
                a.add_frame(frame);
                p.add_frame(frame, &regions);
                Ok(())
            },
        )?;
        let (a_all, p_all) = combine(&batches, None).expect("batches");
        let auto = a_all.finish_map()?;
        let pix = p_all.normalized(0)?;
        let mut a_reps = Vec::new();
        let mut p_reps = Vec::new();
        for b in 0..batches.len() {
            let (a, p) = combine(&batches, Some(b)).expect("batches");
            a_reps.push(a.finish_map()?.values);
            p_reps.push(p.normalized(0)?);
        }
        let (a_se, p_se) = (jackknife_se_map(&a_reps), jackknife_se_map(&p_reps));

        let r_in = 10.0 * sigma;
        let (center_v, base) = center_and_baseline(&auto, r_in, (side as f64 / 4.0).max(r_in + 6.0));
        let kind = spec.kind();
        c.check(
            (center_v - tc).abs() <= tol_c,
            format!("{kind} centre {center_v:.3} vs {tc} +/- {tol_c}"),
        );
        c.check((base - tb).abs() <= tol_b, format!("{kind} baseline {base:.3} vs {tb} +/- {tol_b}"));
        let worst = (0..grid.width)
            .map(|x| {
                let d = (auto.values[[cy, x]] - pix[[cy, x]]).abs();
                d / (a_se[[cy, x]].powi(2) + p_se[[cy, x]].powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        c.check(worst <= 3.0, format!("{kind} worst section gap {worst:.2} SE"));
    }
    c.runtime(start, 300.0, scale);
    Ok(c)
}

fn max_relative_gap(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs() / scale))
}

fn oracle_equivalence(scale: Scale, start: Instant) -> Result<Checks> {
    let grid = GridSpec::new(16, 16, 1.5)?;
    let mask = Mask::rect(16, 16, 2, 2, 4, 4)?;
    let reference = Region::rect(16, 16, 10, 10, 5, 5)?;
    let mut c = Checks::default();
    for spec in sources() {
        let e = generate_ensemble(&spec, &grid, 500, 30)?;
        let stored = e.materialize()?;
        let arrays: Vec<Array2<f64>> = stored.frames().iter().map(|f| f.intensity.clone()).collect();
        let px = (7, 9);
        let pairs = [
            ("autocorr", autocorrelation_fft(&stored)?.values, autocorrelation_naive(&arrays)),
            (
                "pixel",
                ghostim::correlation::pixel_correlation(&stored, px)?.values,
                pixel_correlation_naive(&arrays, px),
            ),
            (
                "gi",
                ghostim::correlation::ghost_image(&stored, &mask)?.values,
                ghost_image_naive(&arrays, mask.pixels()),
            ),
            (
                "dgi",
                ghostim::correlation::differential_ghost_image(&stored, &mask, &reference)?.values,
                dgi_naive(&arrays, mask.pixels(), reference.to_mask()?.pixels()),
            ),
        ];
        for (name, fast, naive) in pairs {
            let gap = max_relative_gap(&fast, &naive);
            c.check(gap <= 1e-9, format!("{} {name} {gap:.1e}", spec.kind()));
        }
    }
    c.runtime(start, 10.0, scale);
    Ok(c)
}

fn quad(f: impl Fn(f64) -> f64) -> Result<f64> {
    integrate_semi_infinite(f, 1e-10)
}

/// Moments `(∫p, ∫i p, ∫i² p)` of a case-B density, integrated in `b = √(i/k)`
/// to remove the origin singularity.
fn case_b_moments(mean_fund: f64, mu: f64, k: f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (m, o) in out.iter_mut().enumerate() {
        *o = integrate_semi_infinite(
            |b| {
                if b == 0.0 {
                    return 0.0;
                }
                let i = k * b * b;
                i.powi(m as i32) * pdf_case_b(i, mean_fund, mu, k).unwrap_or(f64::NAN) * 2.0 * k * b
            },
            1e-11,
        )?;
    }
    Ok(out)
}

fn pdf_suite() -> Result<Checks> {
    let mut c = Checks::default();
    let (mut worst_norm, mut worst_g2) = (0.0f64, 0.0f64);
    for mean in [0.5, 1.0, 3.0] {
        let n = quad(|i| pdf_thermal(i, mean).unwrap_or(f64::NAN))?;
        worst_norm = worst_norm.max((n - 1.0).abs());
    }
    for mu_f in [1.0, 2.0, 3.5, 8.0] {
        for mu_s in [1.0, 2.0, 3.5, 8.0] {
            let p = |i: f64| pdf_case_a(i, 1.0, mu_f, mu_s).unwrap_or(f64::NAN);
            let m = [quad(p)?, quad(|i| i * p(i))?, quad(|i| i * i * p(i))?];
            worst_norm = worst_norm.max((m[0] - 1.0).abs());
            worst_g2 = worst_g2.max((m[2] * m[0] / (m[1] * m[1]) - g2_case_a(mu_f, mu_s)?).abs());
        }
    }
    for mu in [1.0, 2.0, 3.0, 5.0, 10.0] {
        let m = case_b_moments(1.3, mu, 0.7)?;
        worst_norm = worst_norm.max((m[0] - 1.0).abs());
        worst_g2 = worst_g2.max((m[2] * m[0] / (m[1] * m[1]) - g2_case_b(mu)?).abs());
    }
    c.check(worst_norm <= 1e-6, format!("normalization error {worst_norm:.1e}"));
    c.check(worst_g2 <= 1e-4, format!("g2 error {worst_g2:.1e}"));
    let mut worst_rec = 0.0f64;
    for x in [0.05, 0.5, 1.0, 5.0, 20.0, 100.0] {
        for nu in (1..=30).flat_map(|n| [n as f64, n as f64 + 0.5]) {
            let lhs = bessel_k(nu + 1.0, x)?;
            let rhs = bessel_k(nu - 1.0, x)? + 2.0 * nu / x * bessel_k(nu, x)?;
            worst_rec = worst_rec.max((lhs / rhs - 1.0).abs());
        }
    }
    c.check(worst_rec <= 1e-9, format!("Bessel recurrence error {worst_rec:.1e}"));
    Ok(c)
}

fn record<'a>(rs: &'a [MetricsRecord], source: SourceKind, method: Method) -> &'a MetricsRecord {
    rs.iter()
        .find(|r| r.source == source && r.method == method)
        .expect("record present")
}

fn sweep_all(
    kinds: &[SourceSpec],
    grid: &GridSpec,
    mask: &Mask,
    ratios: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<MetricsRecord>> {
    let options = SweepOptions::default();
    let mut out = Vec::new();
    for spec in kinds {
        out.extend(sweep_speckle_count_with(spec, grid, mask, ratios, n, seed, &options)?);
    }
    Ok(out)
}

fn figure_of_merit_structure(scale: Scale, start: Instant) -> Result<Checks> {
    let grid = GridSpec::new(96, 96, 1.0)?;
    let mask = Mask::centered_square(&grid, 16)?;
    let n = scale.frames(10_000, 2_000);
    let rs = sweep_all(&sources(), &grid, &mask, &[4.0], n, 50)?;
    let (t, a, b) = (SourceKind::Thermal, SourceKind::CaseA, SourceKind::CaseB);
    let mut c = Checks::default();
    for m in Method::ALL {
        let (rt, ra, rb) = (record(&rs, t, m), record(&rs, a, m), record(&rs, b, m));
        c.check(
            rb.contrast > ra.contrast && ra.contrast > rt.contrast,
            format!("{m} C case-b {:.3} > case-a {:.3} > thermal {:.3}", rb.contrast, ra.contrast, rt.contrast),
        );
        let pooled = (rb.snr_se.powi(2) + rt.snr_se.powi(2)).sqrt();
        c.check(
            (rb.snr - rt.snr).abs() <= 2.0 * pooled,
            format!("{m} SNR case-b {:.2} vs thermal {:.2} (pooled SE {pooled:.2})", rb.snr, rt.snr),
        );
        c.check(
            ra.snr < rt.snr && ra.snr < rb.snr,
            format!("{m} SNR case-a {:.2} lowest", ra.snr),
        );
    }
    for k in [t, b] {
        let (gi, dgi) = (record(&rs, k, Method::GI), record(&rs, k, Method::DGI));
        let dc = (dgi.contrast / gi.contrast - 1.0).abs();
        let ds = (dgi.snr / gi.snr - 1.0).abs();
        c.check(dc <= 0.05 && ds <= 0.05, format!("{k} DGI/GI gap C {:.1}% SNR {:.1}%", dc * 100.0, ds * 100.0));
    }
    let (gi, dgi) = (record(&rs, a, Method::GI), record(&rs, a, Method::DGI));
    c.check(dgi.snr > gi.snr, format!("case-a SNR DGI {:.2} > GI {:.2}", dgi.snr, gi.snr));
    c.runtime(start, 900.0, scale);
    Ok(c)
}

fn power_law_scaling(scale: Scale) -> Result<Checks> {
    let grid = GridSpec::new(128, 128, 1.0)?;
    // 576 px keeps every ratio within reach of the pixel-quantized speckle area
    let mask = Mask::centered_square(&grid, 24)?;
    let ratios = [1.0, 2.0, 4.0, 8.0, 16.0];
    let n = scale.frames(10_000, 2_000);
    let rs = sweep_all(&[thermal(), case_b()], &grid, &mask, &ratios, n, 60)?;
    let mut c = Checks::default();
    // noise-free thermal GI contrast of this mask at the calibrated radii
    let predicted: Vec<(f64, f64)> = rs
        .iter()
        .filter(|r| r.source == SourceKind::Thermal && r.method == Method::GI)
        .map(|r| (r.ratio, finite_object_contrast(&mask, r.speckle_radius)))
        .collect();
    if let Ok(f) = fit_power_law(&predicted) {
        c.notes.push(format!("finite-object prediction b {:.3}", f.b));
    }
    for kind in [SourceKind::Thermal, SourceKind::CaseB] {
        for m in Method::ALL {
            let curve: Vec<&MetricsRecord> = rs.iter().filter(|r| r.source == kind && r.method == m).collect();
            type Pick = fn(&MetricsRecord) -> (f64, f64);
            let picks: [(&str, Pick); 2] = [("C", |r| (r.contrast, r.contrast_se)), ("SNR", |r| (r.snr, r.snr_se))];
            for (name, pick) in picks {
                let pts: Vec<(f64, f64)> = curve.iter().map(|r| (r.ratio, pick(r).0)).collect();
                match fit_power_law(&pts) {
                    Ok(f) => c.check(
                        (f.b.abs() - 0.5).abs() <= 0.1,
                        format!("{kind} {m} {name} |b| {:.3}", f.b.abs()),
                    ),
                    Err(e) => c.check(false, format!("{kind} {m} {name} fit: {e}")),
                }
                let monotone = curve.windows(2).all(|w| {
                    let ((v0, s0), (v1, s1)) = (pick(w[0]), pick(w[1]));
                    v1 < v0 + 2.0 * (s0 * s0 + s1 * s1).sqrt()
                });
                c.check(monotone, format!("{kind} {m} {name} decreasing within 2 SE"));
            }
        }
    }
    Ok(c)
}

/// `C` of a thermal GI map without estimation noise:
/// `C² = A⁻² Σ_p Σ_q exp(-|p - q|² / 2σ²)` over the mask pixels.
pub fn finite_object_contrast(mask: &Mask, sigma: f64) -> f64 {
    let px: Vec<(f64, f64)> = mask
        .pixels()
        .indexed_iter()
        .filter(|(_, &on)| on)
        .map(|((y, x), _)| (x as f64, y as f64))
        .collect();
    let k = -0.5 / (sigma * sigma);
    let sum: f64 = px
        .iter()
        .map(|a| px.iter().map(|b| (k * ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))).exp()).sum::<f64>())
        .sum();
    (sum / (px.len() * px.len()) as f64).sqrt()
}

fn single_speckle_contrast(scale: Scale) -> Result<Checks> {
    let grid = GridSpec::new(64, 64, 2.0)?;
    let (cx, cy) = grid.center();
    let mask = Mask::rect(64, 64, cx, cy, 1, 1)?;
    let background = default_background(&mask, &grid)?;
    let reference = default_reference(&mask, &grid)?;
    let n = scale.frames(40_000, 5_000);
    let mut c = Checks::default();
    for (spec, target) in [(thermal(), 1.0), (case_a(), 2f64.sqrt()), (case_b(), 5f64.sqrt())] {
        let e = generate_ensemble(&spec, &grid, n, 70)?;
        let [gi, _] = ghost_metrics(&e, &mask, &reference, &background, 16)?;
        let v = gi.contrast.value;
        c.check(
            (v / target - 1.0).abs() <= 0.1,
            format!("{} C {v:.3} +/- {:.3} vs {target:.3}", spec.kind(), gi.contrast_se),
        );
    }
    Ok(c)
}

/// A 40 x 40 ring crossed by a horizontal bar, centred in `side x side`.
pub fn glyph_mask(side: usize) -> Result<Mask> {
    let o = (side - 40) / 2;
    let px = Array2::from_shape_fn((side, side), |(y, x)| {
        let (u, v) = (x as f64 - o as f64 - 19.5, y as f64 - o as f64 - 19.5);
        let r = (u * u + v * v).sqrt();
        let ring = (12.0..=20.0).contains(&r);
        let bar = v.abs() <= 3.0 && u.abs() <= 16.0;
        ring || bar
    });
    Mask::new(px)
}

fn mask_reconstruction(scale: Scale) -> Result<Checks> {
    let side = 100;
    let grid = GridSpec::new(side, side, 1.0)?;
    let mask = glyph_mask(side)?;
    let n = scale.frames(100_000, 10_000);
    let e = generate_ensemble(&thermal(), &grid, n, 80)?;
    let object = mask.region();
    let background = default_background(&mask, &grid)?;
    let reference = default_reference(&mask, &grid)?;
    let bc = collect_ghost(&e, &mask, &reference, 1)?;
    let dgi = bc.map(ghostim::correlation::MapKind::DGI, bc.total().differential(0, 1)?)?;
    let k = contrast(&dgi, &object, &background)?;
    let mut c = Checks::default();
    c.check((k.value - 1.0).abs() <= 0.1, format!("DGI C {:.3} vs 1 +/- 0.1", k.value));

    let w = grid.width;
    let complement = (0..grid.len()).filter(|i| !object.contains(*i)).map(|i| (i % w, i / w));
    let outside = Region::from_pixels(grid.width, grid.height, complement)?;
    let (om, bm) = (dgi.region_mean(&object)?, dgi.region_mean(&outside)?);
    let threshold = 0.5 * (om + bm);
    let hit = object.indices().iter().filter(|&&i| dgi.values.as_slice().expect("standard layout")[i] > threshold).count();
    let false_pos = outside
        .indices()
        .iter()
        .filter(|&&i| dgi.values.as_slice().expect("standard layout")[i] > threshold)
        .count();
    let recovered = hit as f64 / object.len() as f64;
    c.check(
        recovered >= 0.9,
        format!(
            "recovered {:.1}% of {} mask pixels ({} false positives of {})",
            recovered * 100.0,
            object.len(),
            false_pos,
            outside.len()
        ),
    );
    Ok(c)
}

/// Runs simulate, reconstruct (from the cache) and sweep into `dir`.
pub fn pipeline(dir: &std::path::Path, scale: Scale) -> Result<()> {
    let n = scale.frames(600, 200).to_string();
    let out = dir.display().to_string();
    let cache = dir.join(commands::FRAME_DUMP).display().to_string();
    let base = |extra: &[(&str, &str)]| -> Result<RunConfig> {
        let mut pairs: Vec<(String, String)> = [
            ("width", "48"),
            ("height", "48"),
            ("speckle_radius", "1.5"),
            ("n_frames", n.as_str()),
            ("seed", "99"),
            ("mask", "square:8"),
            ("output_dir", out.as_str()),
            ("batches", "8"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        pairs.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        RunConfig::load(None, &pairs)
    };
    commands::simulate(&base(&[("source", "case-a")])?)?;
    for method in ["autocorr", "pixel", "gi", "dgi"] {
        commands::reconstruct(&base(&[("source", "case-a"), ("cache", cache.as_str()), ("method", method)])?)?;
    }
    commands::sweep(&base(&[("ratios", "1,2"), ("calibration_frames", "100")])?)?;
    Ok(())
}

fn csv_files(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>> {
    let io = |e| Error::Io {
        path: dir.into(),
        source: e,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            let bytes = std::fs::read(&p).map_err(io)?;
            out.push((p.file_name().expect("file").to_string_lossy().into_owned(), bytes));
        }
    }
    out.sort();
    Ok(out)
}

fn determinism(scale: Scale) -> Result<Checks> {
    let mut c = Checks::default();
    let mut runs = Vec::new();
    for threads in [1usize, 2, 8, 1] {
        let dir = std::env::temp_dir().join(format!("ghostim-selftest-{}-{threads}-{}", std::process::id(), runs.len()));
        let _ = std::fs::remove_dir_all(&dir);
        with_threads(threads, || pipeline(&dir, scale))??;
        runs.push((threads, csv_files(&dir)?));
        let _ = std::fs::remove_dir_all(&dir);
    }
    let (_, first) = &runs[0];
    c.check(first.len() >= 6, format!("{} CSV files per run", first.len()));
    for (threads, files) in &runs[1..] {
        c.check(files == first, format!("{threads} threads byte-identical"));
    }
    Ok(c)
}
