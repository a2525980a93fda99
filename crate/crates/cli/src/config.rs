//! Run configuration: a flat `key = value` file, overridden by command-line
//! flags, validated as a whole before anything runs.

use ghostim::correlation::{Mask, MapKind, Region};
use ghostim::io::{load_mask, MapScale};
use ghostim::photostatistics::{SourceKind, SourceSpec};
use ghostim::specklefield::{EnsembleOptions, GridSpec, PinholeSpec};
use ghostim::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Every accepted key with its default, in the order used when the effective
/// configuration is written out.
pub const KEYS: &[(&str, &str)] = &[
    ("source", "thermal"),
    ("mean", "1"),
    ("mu_f", "1"),
    ("mu_s", "1"),
    ("mean_fund", "1"),
    ("mu", "1"),
    ("k", "1"),
    ("width", "200"),
    ("height", "200"),
    ("pixel_pitch", "1e-5"),
    ("speckle_radius", "2"),
    ("n_frames", "1000"),
    ("seed", "0"),
    ("scatterers", "100"),
    ("pinhole_radius", "auto"),
    ("mask", "none"),
    ("reference", "auto"),
    ("cache", "none"),
    ("method", "dgi"),
    ("pixel", "center"),
    ("scale", "minmax"),
    ("ratios", "1,2,4,8"),
    ("sources", "thermal,case-a,case-b"),
    ("batches", "32"),
    ("calibration_frames", "200"),
    ("output_dir", "out"),
];

/// Keys that locate files rather than determine results; they are left out of
/// the embedded configuration and its digest.
const LOCATION_KEYS: &[&str] = &["output_dir", "cache"];

/// Where the object mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    None,
    File(PathBuf),
    /// Centred `n × n` square.
    Square(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    Auto,
    Rect { x0: usize, y0: usize, w: usize, h: usize },
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SourceSpec,
    pub grid: GridSpec,
    pub n_frames: usize,
    pub master_seed: u64,
    pub ensemble: EnsembleOptions,
    pub mask: MaskSource,
    pub reference: ReferenceSpec,
    pub cache: Option<PathBuf>,
    pub method: MapKind,
    pub pixel: Option<(usize, usize)>,
    pub scale: MapScale,
    pub ratios: Vec<f64>,
    pub sources: Vec<SourceKind>,
    pub batches: usize,
    pub calibration_frames: usize,
    pub output_dir: PathBuf,
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{origin}:{}: expected `key = value`, got `{line}`", n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = {value}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| bad(key, value, e)))
        .collect()
}

impl RunConfig {
    /// Builds a configuration from defaults, then `file` (if any), then
    /// `overrides` in order. Unknown keys are rejected.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut apply = |pairs: Vec<(String, String)>, origin: &str| -> Result<()> {
            for (k, v) in pairs {
                if !values.contains_key(&k) {
                    return Err(Error::Config(format!("{origin}: unknown key `{k}`")));
                }
                values.insert(k, v);
            }
            Ok(())
        };
        if let Some(p) = file {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.into(),
                source: e,
            })?;
            apply(parse_pairs(&text, &p.display().to_string())?, &p.display().to_string())?;
        }
        apply(overrides.to_vec(), "command line")?;
        Self::from_values(values)
    }

    fn from_values(values: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| values[k].as_str();
        let f = |k: &str| num::<f64>(k, get(k));
        let kind: SourceKind = get("source").parse()?;
        let source = spec_for(kind, &values)?;
        let grid = GridSpec::new(num("width", get("width"))?, num("height", get("height"))?, f("speckle_radius")?)
            .and_then(|g| g.with_pixel_pitch(f("pixel_pitch")?))
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        let n_frames: usize = num("n_frames", get("n_frames"))?;
        if n_frames < 2 {
            return Err(bad("n_frames", get("n_frames"), "at least 2 frames are needed"));
        }
        let pinhole = match get("pinhole_radius") {
            "auto" => None,
            v => {
                let ph = PinholeSpec::centered(&grid, num("pinhole_radius", v)?);
                ph.validate(&grid).map_err(|e| bad("pinhole_radius", v, e))?;
                Some(ph)
            }
        };
        let ensemble = EnsembleOptions {
            scatterer_count: num("scatterers", get("scatterers"))?,
            pinhole,
            lateral_std: None,
        };
        if ensemble.scatterer_count == 0 {
            return Err(bad("scatterers", "0", "at least one scatterer is needed"));
        }

        let mask = match get("mask") {
            "none" => MaskSource::None,
            v => match v.strip_prefix("square:") {
                Some(n) => {
                    let n: usize = num("mask", n)?;
                    if n == 0 || n > grid.width.min(grid.height) {
                        return Err(bad("mask", v, "square does not fit the grid"));
                    }
                    MaskSource::Square(n)
                }
                None => MaskSource::File(PathBuf::from(v)),
            },
        };
        let reference = match get("reference") {
            "auto" => ReferenceSpec::Auto,
            v => match list::<usize>("reference", v)?.as_slice() {
                &[x0, y0, w, h] => {
                    Region::rect(grid.width, grid.height, x0, y0, w, h).map_err(|e| bad("reference", v, e))?;
                    ReferenceSpec::Rect { x0, y0, w, h }
                }
                _ => return Err(bad("reference", v, "expected `auto` or `x0,y0,width,height`")),
            },
        };
        let cache = match get("cache") {
            "none" => None,
            v => Some(PathBuf::from(v)),
        };
        let method: MapKind = get("method").parse()?;
        let pixel = match get("pixel") {
            "center" => None,
            v => match list::<usize>("pixel", v)?.as_slice() {
                &[x, y] if x < grid.width && y < grid.height => Some((x, y)),
                _ => return Err(bad("pixel", v, "expected `center` or `x,y` inside the grid")),
            },
        };
        let scale = match get("scale") {
            "minmax" => MapScale::MinMax,
            "max" => MapScale::Max,
            v => match v.strip_prefix("fixed:").map(|r| list::<f64>("scale", r)) {
                Some(Ok(r)) if r.len() == 2 && r[1] > r[0] => MapScale::Fixed { lo: r[0], hi: r[1] },
                _ => return Err(bad("scale", v, "expected minmax, max or fixed:lo,hi with lo < hi")),
            },
        };
        let ratios: Vec<f64> = list("ratios", get("ratios"))?;
        if ratios.is_empty() {
            return Err(bad("ratios", get("ratios"), "no ratios given"));
        }
        let sources: Vec<SourceKind> = list("sources", get("sources"))?;
        if sources.is_empty() {
            return Err(bad("sources", get("sources"), "no sources given"));
        }
        for &s in &sources {
            spec_for(s, &values)?;
        }
        let batches: usize = num("batches", get("batches"))?;
        if batches < 2 {
            return Err(bad("batches", get("batches"), "error estimates need at least 2 batches"));
        }
        let calibration_frames: usize = num("calibration_frames", get("calibration_frames"))?;
        if calibration_frames < ghostim::specklefield::MIN_AREA_FRAMES {
            return Err(bad(
                "calibration_frames",
                get("calibration_frames"),
                format!("at least {} frames are needed", ghostim::specklefield::MIN_AREA_FRAMES),
            ));
        }
        Ok(RunConfig {
            source,
            grid,
            n_frames,
            master_seed: num("seed", get("seed"))?,
            ensemble,
            mask,
            reference,
            cache,
            method,
            pixel,
            scale,
            ratios,
            sources,
            batches,
            calibration_frames,
            output_dir: PathBuf::from(get("output_dir")),
            values,
        })
    }

    /// Source parameters of the configuration applied to another kind.
    pub fn spec_for(&self, kind: SourceKind) -> Result<SourceSpec> {
        spec_for(kind, &self.values)
    }

    pub fn value(&self, key: &str) -> &str {
        &self.values[key]
    }

    /// The effective configuration as `(key, value)` pairs, excluding keys
    /// that only locate files.
    pub fn effective(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter(|(k, _)| !LOCATION_KEYS.contains(k))
            .map(|(k, _)| (k.to_string(), self.values[*k].clone()))
            .collect()
    }

    /// SHA-256 of the effective configuration text.
    pub fn digest(&self) -> String {
        let text: String = self.effective().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Loads or builds the object mask, if one is configured.
    pub fn load_mask(&self) -> Result<Option<Mask>> {
        self.mask_for(&self.grid)
    }

    pub fn mask_for(&self, grid: &GridSpec) -> Result<Option<Mask>> {
        let m = match &self.mask {
            MaskSource::None => return Ok(None),
            MaskSource::File(p) => load_mask(p)?,
            MaskSource::Square(n) => Mask::centered_square(grid, *n)?,
        };
        m.matches(grid)
            .map_err(|e| Error::Config(format!("mask does not fit the grid: {e}")))?;
        Ok(Some(m))
    }

    pub fn require_mask(&self, grid: &GridSpec, why: &str) -> Result<Mask> {
        self.mask_for(grid)?
            .ok_or_else(|| Error::Config(format!("{why} needs a mask (set `mask`)")))
    }

    /// Explicit reference region, or `None` for the default.
    pub fn reference_region(&self, grid: &GridSpec) -> Result<Option<Region>> {
        match self.reference {
            ReferenceSpec::Auto => Ok(None),
            ReferenceSpec::Rect { x0, y0, w, h } => Region::rect(grid.width, grid.height, x0, y0, w, h).map(Some),
        }
    }
}

fn spec_for(kind: SourceKind, values: &BTreeMap<String, String>) -> Result<SourceSpec> {
    let f = |k: &str| num::<f64>(k, &values[k]);
    let spec = match kind {
        SourceKind::Thermal => SourceSpec::thermal(f("mean")?),
        SourceKind::CaseA => SourceSpec::case_a(f("mean")?, f("mu_f")?, f("mu_s")?),
        SourceKind::CaseB => SourceSpec::case_b(f("mean_fund")?, f("mu")?, f("k")?),
    };
    spec.map_err(|e| Error::Config(format!("{kind} source: {e}")))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.grid.width, 200);
        assert_eq!(c.source, SourceSpec::thermal(1.0).unwrap());
        assert_eq!(c.mask, MaskSource::None);
        assert!(c.effective().iter().all(|(k, _)| k != "output_dir"));
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "# case B run\nsource = case-b\nmu = 2  # two modes\nwidth = 64\nheight=64\n").unwrap();
        let c = RunConfig::load(Some(&p), &set(&[("mu", "3"), ("mask", "square:8")])).unwrap();
        assert_eq!(c.source, SourceSpec::case_b(1.0, 3.0, 1.0).unwrap());
        assert_eq!(c.mask, MaskSource::Square(8));
        assert_eq!(c.load_mask().unwrap().unwrap().count(), 64);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let bad = |pairs: &[(&str, &str)]| RunConfig::load(None, &set(pairs)).unwrap_err().to_string();
        assert!(bad(&[("colour", "red")]).contains("unknown key"));
        assert!(bad(&[("speckle_radius", "80")]).contains("grid"));
        assert!(bad(&[("n_frames", "1")]).contains("n_frames"));
        assert!(bad(&[("source", "laser")]).contains("unknown source"));
        assert!(bad(&[("mu_f", "0.5"), ("source", "case-a")]).contains("case-a"));
        assert!(bad(&[("scale", "fixed:2,1")]).contains("scale"));
        assert!(bad(&[("reference", "190,190,20,20")]).contains("reference"));
        assert!(bad(&[("pixel", "200,3")]).contains("pixel"));
    }

    #[test]
    fn digest_ignores_locations_only() {
        let a = RunConfig::load(None, &set(&[("output_dir", "x")])).unwrap();
        let b = RunConfig::load(None, &set(&[("output_dir", "y")])).unwrap();
        let c = RunConfig::load(None, &set(&[("seed", "1")])).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
