//! The `simulate`, `reconstruct` and `sweep` pipelines.

use crate::config::RunConfig;
use crate::manifest::{file_sha256, Outputs};
use crate::plot;
use ghostim::correlation::{
    autocorrelation_fft, default_background, default_reference, differential_ghost_image, ghost_image,
    pixel_correlation, CorrelationMap, MapKind,
};
use ghostim::io::{fmt_sig9, read_frame_dump, DumpHeader, write_frame_dump_with, write_map_csv, write_map_pgm, write_pgm_with_comments};
use ghostim::metrics::{
    contrast, fit_power_law, snr, sweep_speckle_count_with, Contrast, Method, MetricsRecord, PowerLawFit,
    SweepOptions,
};
use ghostim::photostatistics::{g2_case_a, g2_case_b, SourceKind, SourceSpec};
use ghostim::specklefield::{generate_ensemble_with, Frame, FrameSource};
use ghostim::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const FRAME_DUMP: &str = "frames.dump";

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn comment_block(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

/// Result of `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub source: SourceKind,
    pub n_frames: usize,
    pub mean_intensity: f64,
    pub expected_mean: f64,
    /// `⟨I²⟩/⟨I⟩²` over all pixels of all frames.
    pub g2_pooled: f64,
    /// Same estimate from the time series of the central pixel alone.
    pub g2_center: f64,
    pub g2_analytic: f64,
    pub mu_eff: Option<f64>,
    pub dump: PathBuf,
    pub dump_sha256: String,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "source = {}", self.source)?;
        writeln!(f, "frames = {}", self.n_frames)?;
        writeln!(f, "mean_intensity = {} (expected {})", fmt_sig9(self.mean_intensity), fmt_sig9(self.expected_mean))?;
        writeln!(f, "g2_estimate = {}", fmt_sig9(self.g2_pooled))?;
        writeln!(f, "g2_center_pixel = {}", fmt_sig9(self.g2_center))?;
        writeln!(f, "g2_analytic = {}", fmt_sig9(self.g2_analytic))?;
        if let Some(mu) = self.mu_eff {
            writeln!(f, "pinhole_modes = {}", fmt_sig9(mu))?;
        }
        write!(f, "cache = {} sha256 {}", self.dump.display(), self.dump_sha256)
    }
}

/// Single-pixel `g²` expected at field level.
fn analytic_g2(spec: &SourceSpec, mu_eff: Option<f64>) -> Result<f64> {
    match *spec {
        SourceSpec::Thermal { .. } => Ok(2.0),
        // one pixel of the second speckle pattern is a single mode
        SourceSpec::CaseA { mu_f, .. } => g2_case_a(mu_eff.unwrap_or(mu_f), 1.0),
        SourceSpec::CaseB { mu, .. } => g2_case_b(mu),
    }
}

/// Generates the ensemble, caches it as a frame dump and reports its
/// single-pixel statistics.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let ensemble = generate_ensemble_with(&cfg.source, &cfg.grid, cfg.n_frames, cfg.master_seed, &cfg.ensemble)?;
    let g2_analytic = analytic_g2(&cfg.source, ensemble.mu_eff())?;
    let mut out = Outputs::new(&cfg.output_dir, "simulate", &cfg.digest())?;
    let dump = out.path(FRAME_DUMP);
    let (cx, cy) = cfg.grid.center();
    let (mut s1, mut s2, mut c1, mut c2) = (0.0, 0.0, 0.0, 0.0);
    let mut on_frame = |f: &Frame| {
        let (a, b) = f.as_slice().iter().fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v));
        s1 += a;
        s2 += b;
        let v = f.intensity[[cy, cx]];
        c1 += v;
        c2 += v * v;
    };
    write_frame_dump_with(&dump, &ensemble, cfg.source.kind().as_str(), cfg.master_seed, &cfg.effective(), &mut on_frame)?;
    out.record(FRAME_DUMP);

    let n = cfg.n_frames as f64;
    let m = n * cfg.grid.len() as f64;
    let ratio = |a: f64, b: f64, count: f64| if a > 0.0 { (b / count) / (a / count).powi(2) } else { f64::NAN };
    let summary = SimulateSummary {
        source: cfg.source.kind(),
        n_frames: cfg.n_frames,
        mean_intensity: s1 / m,
        expected_mean: cfg.source.mean_intensity(),
        g2_pooled: ratio(s1, s2, m),
        g2_center: ratio(c1, c2, n),
        g2_analytic,
        mu_eff: ensemble.mu_eff(),
        dump_sha256: file_sha256(&dump)?,
        dump,
    };
    write_text(&out.path("summary.txt"), &format!("{}{summary}\n", comment_block(&cfg.effective())))?;
    out.record("summary.txt");
    out.finish()?;
    Ok(summary)
}

/// Result of `reconstruct`.
#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub kind: MapKind,
    pub map: CorrelationMap,
    pub contrast: Option<Contrast>,
    /// `None` when there is no mask; `Some(Err)` text when undefined.
    pub snr: Option<std::result::Result<f64, String>>,
    pub files: Vec<String>,
}

impl std::fmt::Display for ReconstructReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (lo, hi) = self.map.min_max();
        write!(
            f,
            "{} map over {} frames, range [{}, {}]",
            self.kind,
            self.map.n_frames_used,
            fmt_sig9(lo),
            fmt_sig9(hi)
        )?;
        if let (Some(c), Some(s)) = (&self.contrast, &self.snr) {
            let s = match s {
                Ok(v) => fmt_sig9(*v),
                Err(e) => format!("undefined ({e})"),
            };
            write!(
                f,
                "\nmetrics: contrast = {}{} snr = {s}",
                fmt_sig9(c.value),
                if c.clamped { " (clamped)" } else { "" }
            )?;
        }
        write!(f, "\nwrote {}", self.files.join(", "))
    }
}

/// Frames for analysis: the configured cache if there is one, otherwise a
/// lazily generated ensemble.
enum Input {
    Cached(DumpHeader, ghostim::specklefield::StoredFrames, String),
    Generated(ghostim::specklefield::FrameEnsemble),
}

impl Input {
    fn open(cfg: &RunConfig) -> Result<Input> {
        match &cfg.cache {
            Some(p) => {
                let (header, frames) = read_frame_dump(p)?;
                Ok(Input::Cached(header, frames, file_sha256(p)?))
            }
            None => Ok(Input::Generated(generate_ensemble_with(
                &cfg.source,
                &cfg.grid,
                cfg.n_frames,
                cfg.master_seed,
                &cfg.ensemble,
            )?)),
        }
    }

    fn source(&self) -> &dyn FrameSource {
        match self {
            Input::Cached(_, f, _) => f,
            Input::Generated(e) => e,
        }
    }

    /// Effective configuration with the ensemble keys taken from the cache
    /// header when frames come from disk.
    fn comments(&self, cfg: &RunConfig) -> Vec<(String, String)> {
        let mut c = cfg.effective();
        match self {
            Input::Cached(h, _, sha) => {
                let from_dump = [
                    ("source", h.source.clone()),
                    ("width", h.width.to_string()),
                    ("height", h.height.to_string()),
                    ("speckle_radius", h.speckle_radius.to_string()),
                    ("n_frames", h.n_frames.to_string()),
                    ("seed", h.seed.to_string()),
                ];
                for (k, v) in from_dump {
                    if let Some(e) = c.iter_mut().find(|(key, _)| key == k) {
                        e.1 = v;
                    }
                }
                c.push(("input".into(), format!("frame-dump sha256:{sha}")));
            }
            Input::Generated(_) => c.push(("input".into(), "generated".into())),
        }
        c
    }
}

pub fn reconstruct(cfg: &RunConfig) -> Result<ReconstructReport> {
    let input = Input::open(cfg)?;
    let src = input.source();
    let grid = *src.grid();
    let mask = match cfg.method {
        MapKind::GI | MapKind::DGI => Some(cfg.require_mask(&grid, &format!("method {}", cfg.method))?),
        _ => cfg.mask_for(&grid)?,
    };
    let map = match cfg.method {
        MapKind::Autocorrelation => autocorrelation_fft(src)?,
        MapKind::PixelCorr => pixel_correlation(src, cfg.pixel.unwrap_or_else(|| grid.center()))?,
        MapKind::GI => ghost_image(src, mask.as_ref().expect("checked"))?,
        MapKind::DGI => {
            let m = mask.as_ref().expect("checked");
            let reference = match cfg.reference_region(&grid)? {
                Some(r) => r,
                None => default_reference(m, &grid)?,
            };
            differential_ghost_image(src, m, &reference)?
        }
    };

    let comments = input.comments(cfg);
    let mut out = Outputs::new(&cfg.output_dir, "reconstruct", &cfg.digest())?;
    let name = cfg.method.as_str();
    write_map_csv(&out.path(&format!("{name}.csv")), &map, &comments)?;
    out.record(&format!("{name}.csv"));
    write_map_pgm(&out.path(&format!("{name}.pgm")), &map, cfg.scale, &comments)?;
    out.record(&format!("{name}.pgm"));
    out.record(&format!("{name}.pgm.scale"));

    let (mut c, mut s) = (None, None);
    if let Some(m) = &mask {
        let object = m.region();
        let background = default_background(m, &grid)?;
        let k = contrast(&map, &object, &background)?;
        let sv = snr(&map, &object, &background).map_err(|e| e.to_string());
        let mut text = comment_block(&comments);
        text.push_str("method,contrast,contrast_clamped,snr,n_frames\n");
        let snr_text = match &sv {
            Ok(v) => fmt_sig9(*v),
            Err(_) => "nan".into(),
        };
        let _ = writeln!(text, "{name},{},{},{snr_text},{}", fmt_sig9(k.value), k.clamped, map.n_frames_used);
        let file = format!("{name}_metrics.csv");
        write_text(&out.path(&file), &text)?;
        out.record(&file);
        c = Some(k);
        s = Some(sv);
    }
    let files = out.written().to_vec();
    out.finish()?;
    Ok(ReconstructReport {
        kind: cfg.method,
        map,
        contrast: c,
        snr: s,
        files,
    })
}

/// Power-law fits of one (source, method) curve.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub source: SourceKind,
    pub method: Method,
    pub contrast: std::result::Result<PowerLawFit, String>,
    pub snr: std::result::Result<PowerLawFit, String>,
}

impl CurveFit {
    /// Trailer line for the sweep CSV.
    pub fn trailer(&self) -> String {
        let part = |name: &str, f: &std::result::Result<PowerLawFit, String>| match f {
            Ok(f) => format!(
                "{name}_a={} {name}_b={} {name}_residual={}",
                fmt_sig9(f.a),
                fmt_sig9(f.b),
                fmt_sig9(f.residual)
            ),
            Err(e) => format!("{name}=unavailable({e})"),
        };
        let mut line = format!(
            "# fit source={} method={} {} {}",
            self.source,
            self.method,
            part("contrast", &self.contrast),
            part("snr", &self.snr)
        );
        // the one curve that is not expected to follow a power law
        if self.source == SourceKind::CaseA && self.method == Method::GI {
            line.push_str(" snr_exempt=yes");
        }
        line
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<MetricsRecord>,
    pub fits: Vec<CurveFit>,
    pub files: Vec<String>,
}

pub const SWEEP_HEADER: &str = "ratio,source,method,contrast,snr,n_frames,seed";

pub fn fit_curves(records: &[MetricsRecord]) -> Vec<CurveFit> {
    let mut keys: Vec<(SourceKind, Method)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.source, r.method)) {
            keys.push((r.source, r.method));
        }
    }
    keys.into_iter()
        .map(|(source, method)| {
            let pts = |y: fn(&MetricsRecord) -> f64| -> Vec<(f64, f64)> {
                records
                    .iter()
                    .filter(|r| r.source == source && r.method == method)
                    .map(|r| (r.ratio, y(r)))
                    .collect()
            };
            CurveFit {
                source,
                method,
                contrast: fit_power_law(&pts(|r| r.contrast)).map_err(|e| e.to_string()),
                snr: fit_power_law(&pts(|r| r.snr)).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let mask = cfg.require_mask(&cfg.grid, "sweep")?;
    let options = SweepOptions {
        ensemble: cfg.ensemble,
        n_batches: cfg.batches,
        calibration_frames: cfg.calibration_frames,
        reference: cfg.reference_region(&cfg.grid)?,
        ..SweepOptions::default()
    };
    let mut records = Vec::new();
    for &kind in &cfg.sources {
        let spec = cfg.spec_for(kind)?;
        records.extend(sweep_speckle_count_with(
            &spec,
            &cfg.grid,
            &mask,
            &cfg.ratios,
            cfg.n_frames,
            cfg.master_seed,
            &options,
        )?);
    }
    let fits = fit_curves(&records);

    let mut out = Outputs::new(&cfg.output_dir, "sweep", &cfg.digest())?;
    let comments = cfg.effective();
    let mut csv = comment_block(&comments);
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    let mut details = comment_block(&comments);
    details.push_str(
        "ratio,target_ratio,source,method,contrast,contrast_se,contrast_clamped,snr,snr_se,n_frames,seed,speckle_radius,speckle_area\n",
    );
    for r in &records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_sig9(r.ratio),
            r.source,
            r.method,
            fmt_sig9(r.contrast),
            fmt_sig9(r.snr),
            r.n_frames,
            r.seed
        );
        let _ = writeln!(
            details,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig9(r.ratio),
            fmt_sig9(r.target_ratio),
            r.source,
            r.method,
            fmt_sig9(r.contrast),
            fmt_sig9(r.contrast_se),
            r.contrast_clamped,
            fmt_sig9(r.snr),
            fmt_sig9(r.snr_se),
            r.n_frames,
            r.seed,
            fmt_sig9(r.speckle_radius),
            fmt_sig9(r.speckle_area)
        );
    }
    for f in &fits {
        csv.push_str(&f.trailer());
        csv.push('\n');
    }
    write_text(&out.path("sweep.csv"), &csv)?;
    out.record("sweep.csv");
    write_text(&out.path("sweep_details.csv"), &details)?;
    out.record("sweep_details.csv");

    let series: Vec<plot::Series> = fits
        .iter()
        .map(|f| plot::Series {
            source: f.source,
            method: f.method,
            records: records.iter().filter(|r| r.source == f.source && r.method == f.method).collect(),
            contrast_fit: f.contrast.as_ref().ok().copied(),
            snr_fit: f.snr.as_ref().ok().copied(),
        })
        .collect();
    if let Some(img) = plot::render(&series) {
        let mut c = comments.clone();
        c.extend(plot::legend(&series));
        write_pgm_with_comments(&out.path("sweep.pgm"), &img, &c)?;
        out.record("sweep.pgm");
    }
    let files = out.written().to_vec();
    out.finish()?;
    Ok(SweepReport { records, fits, files })
}
