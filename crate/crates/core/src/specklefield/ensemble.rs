use super::pinhole::{PinholeSpec, PreparedPinhole};
use super::scatter::{scatter_speckled_speckle, ScattererCloud};
use super::thermal::{frame_rng, ThermalSynth};
use super::{Frame, FrameSource, GridSpec, StoredFrames};
use crate::error::{ensure_positive, Error, Result};
use crate::photostatistics::{SourceSpec, SourceKind};
use ndarray::Array2;
use rand::Rng;
use std::borrow::Cow;

/// Knobs of the field-level simulation that the source parameters leave open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    /// Scatterers in the case-A diffuser.
    pub scatterer_count: usize,
    /// Case-A pinhole; `None` picks a centred disk holding `mu_f` modes.
    pub pinhole: Option<PinholeSpec>,
    /// Case-A transverse scatterer spread; `None` matches the thermal speckle
    /// size.
    pub lateral_std: Option<f64>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            scatterer_count: ScattererCloud::DEFAULT_COUNT,
            pinhole: None,
            lateral_std: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Thermal {
        mean: f64,
    },
    CaseA {
        mean: f64,
        pinhole: PreparedPinhole,
        count: usize,
        lateral_std: f64,
    },
    CaseB {
        mean_fund: f64,
        modes: usize,
        k: f64,
    },
}

/// Lazily generated ensemble: frame `i` is synthesized on demand from a seed
/// derived from `(master_seed, i)`.
#[derive(Debug, Clone)]
pub struct FrameEnsemble {
    spec: SourceSpec,
    grid: GridSpec,
    n_frames: usize,
    master_seed: u64,
    options: EnsembleOptions,
    synth: ThermalSynth,
    engine: Engine,
}

pub fn generate_ensemble(
    spec: &SourceSpec,
    grid: &GridSpec,
    n_frames: usize,
    master_seed: u64,
) -> Result<FrameEnsemble> {
    generate_ensemble_with(spec, grid, n_frames, master_seed, &EnsembleOptions::default())
}

pub fn generate_ensemble_with(
    spec: &SourceSpec,
    grid: &GridSpec,
    n_frames: usize,
    master_seed: u64,
    options: &EnsembleOptions,
) -> Result<FrameEnsemble> {
    spec.validate()?;
    grid.validate()?;
    if n_frames == 0 {
        return Err(Error::domain("an ensemble needs at least one frame"));
    }
    let synth = ThermalSynth::new(grid)?;
    let engine = match *spec {
        SourceSpec::Thermal { mean } => Engine::Thermal { mean },
        SourceSpec::CaseA { mean, mu_f, .. } => {
            if options.scatterer_count == 0 {
                return Err(Error::domain("scatterer count must be at least 1"));
            }
            let pinhole = match options.pinhole {
                Some(ph) => PreparedPinhole::new(ph, &synth)?,
                None => PreparedPinhole::for_modes(&synth, mu_f)?,
            };
            let lateral_std = match options.lateral_std {
                Some(s) => {
                    ensure_positive("lateral scatterer spread", s)?;
                    s
                }
                None => ScattererCloud::matched_lateral_std(grid.speckle_radius),
            };
            Engine::CaseA {
                mean,
                pinhole,
                count: options.scatterer_count,
                lateral_std,
            }
        }
        SourceSpec::CaseB { mean_fund, mu, k } => {
            let modes = mu.round();
            if (mu - modes).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "field-level case B builds the fundamental from whole speckle patterns; mu = {mu} is not an integer"
                )));
            }
            Engine::CaseB {
                mean_fund,
                modes: modes as usize,
                k,
            }
        }
    };
    Ok(FrameEnsemble {
        spec: *spec,
        grid: *grid,
        n_frames,
        master_seed,
        options: *options,
        synth,
        engine,
    })
}

impl FrameEnsemble {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn kind(&self) -> SourceKind {
        self.spec.kind()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn options(&self) -> &EnsembleOptions {
        &self.options
    }

    /// Mode count of the case-A pinhole; `None` for the other sources.
    pub fn mu_eff(&self) -> Option<f64> {
        match &self.engine {
            Engine::CaseA { pinhole, .. } => Some(pinhole.mu_eff()),
            _ => None,
        }
    }

    /// Same source and seed with a different frame count. Frames shared by
    /// both ensembles are identical.
    pub fn with_frames(&self, n_frames: usize) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::domain("an ensemble needs at least one frame"));
        }
        let mut e = self.clone();
        e.n_frames = n_frames;
        Ok(e)
    }

    /// Frame `index`, synthesized from its own seed.
    pub fn generate(&self, index: usize) -> Result<Frame> {
        if index >= self.n_frames {
            return Err(Error::domain(format!(
                "frame index {index} out of range for {} frames",
                self.n_frames
            )));
        }
        self.synthesize(index).map_err(|e| e.at_frame(index))
    }

    fn synthesize(&self, index: usize) -> Result<Frame> {
        let mut rng = frame_rng(self.master_seed, index);
        let mut frame = match &self.engine {
            Engine::Thermal { mean } => {
                let mut i = self.synth.intensity(&mut rng);
                i.mapv_inplace(|v| v * mean);
                Frame::new(self.grid, i, index)?
            }
            Engine::CaseA {
                mean,
                pinhole,
                count,
                lateral_std,
            } => {
                let field = self.synth.field(&mut rng);
                let selected = pinhole.apply(&field);
                let cloud = ScattererCloud::draw(*count, *lateral_std, &mut rng)?;
                let mut f = scatter_speckled_speckle(&selected, &cloud, &self.grid, rng.random())?;
                f.intensity.mapv_inplace(|v| v * mean);
                f
            }
            Engine::CaseB { mean_fund, modes, k } => {
                let scale = mean_fund / *modes as f64;
                let mut fund = Array2::<f64>::zeros(self.grid.shape());
                for _ in 0..*modes {
                    fund.zip_mut_with(&self.synth.intensity(&mut rng), |a, b| *a += scale * b);
                }
                second_harmonic(&Frame::new(self.grid, fund, index)?, *k)?
            }
        };
        frame.frame_index = index;
        Ok(frame)
    }

    /// Generates every frame and keeps them in memory.
    pub fn materialize(&self) -> Result<StoredFrames> {
        let frames = (0..self.n_frames)
            .map(|i| self.generate(i))
            .collect::<Result<Vec<_>>>()?;
        StoredFrames::new(self.grid, frames)
    }
}

impl FrameSource for FrameEnsemble {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, Frame>> {
        self.generate(index).map(Cow::Owned)
    }
}

/// Ideal frequency doubling: `k · I²` at every pixel.
pub fn second_harmonic(frame: &Frame, k: f64) -> Result<Frame> {
    ensure_positive("conversion efficiency", k)?;
    frame.validate()?;
    Frame::new(
        frame.grid,
        frame.intensity.mapv(|v| k * v * v),
        frame.frame_index,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(32, 32, 1.5).unwrap()
    }

    #[test]
    fn second_harmonic_is_pointwise() {
        let g = grid();
        let f = Frame::new(g, Array2::from_elem(g.shape(), 3.0), 4).unwrap();
        let s = second_harmonic(&f, 0.5).unwrap();
        assert!(s.intensity.iter().all(|&v| v == 4.5));
        assert_eq!(s.frame_index, 4);
        let z = Frame::new(g, Array2::zeros(g.shape()), 0).unwrap();
        assert!(second_harmonic(&z, 1.0).unwrap().intensity.iter().all(|&v| v == 0.0));
        assert!(second_harmonic(&f, 0.0).is_err());
    }

    #[test]
    fn every_kind_yields_valid_frames() {
        let specs = [
            SourceSpec::thermal(1.0).unwrap(),
            SourceSpec::case_a(2.0, 1.0, 1.0).unwrap(),
            SourceSpec::case_b(1.0, 2.0, 0.5).unwrap(),
        ];
        for s in specs {
            let e = generate_ensemble(&s, &grid(), 1, 9).unwrap();
            let f = e.frame(0).unwrap();
            assert_eq!(f.frame_index, 0);
            f.validate().unwrap();
            assert!(e.frame(1).is_err());
        }
    }

    #[test]
    fn frames_do_not_depend_on_request_order() {
        let s = SourceSpec::case_a(1.0, 2.0, 1.0).unwrap();
        let e = generate_ensemble(&s, &grid(), 5, 77).unwrap();
        let forward: Vec<_> = (0..5).map(|i| e.generate(i).unwrap()).collect();
        let backward: Vec<_> = (0..5).rev().map(|i| e.generate(i).unwrap()).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert_eq!(a, b);
        }
        let longer = e.with_frames(8).unwrap();
        assert_eq!(longer.generate(3).unwrap(), forward[3]);
    }

    #[test]
    fn fractional_case_b_modes_rejected() {
        let s = SourceSpec::case_b(1.0, 1.5, 1.0).unwrap();
        assert!(matches!(
            generate_ensemble(&s, &grid(), 2, 1),
            Err(Error::Config(_))
        ));
        let t = SourceSpec::thermal(1.0).unwrap();
        assert!(generate_ensemble(&t, &grid(), 0, 1).is_err());
    }

    #[test]
    fn single_mode_case_a_uses_one_pixel() {
        let s = SourceSpec::case_a(1.0, 1.0, 1.0).unwrap();
        let e = generate_ensemble(&s, &grid(), 1, 1).unwrap();
        assert!((e.mu_eff().unwrap() - 1.0).abs() < 1e-12);
    }
}
