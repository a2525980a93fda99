//! Single-point intensity statistics of thermal and superthermal light.
//!
//! Three sources are modelled:
//!
//! * **thermal** light, whose intensity is exponentially distributed;
//! * **case A** ("speckled speckle"), a thermal field selected over `μ_f`
//!   modes and re-scattered by a second diffuser observed over `μ_s` modes;
//!   the intensity is the product of two independent normalized gamma
//!   variates (K distribution);
//! * **case B**, the second harmonic of a `μ`-mode thermal field:
//!   `I = k I_F²` with `I_F` gamma distributed.
//!
//! The densities, the closed-form `g² = ⟨I²⟩/⟨I⟩²` values and direct samplers
//! all live here. The samplers do not touch the field simulation and serve as
//! an independent reference for it.

mod bessel;

pub use bessel::{bessel_k, bessel_k_scaled, ln_bessel_k};

use crate::error::{ensure_at_least_one, ensure_positive, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::str::FromStr;

/// Which light source a [`SourceSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceKind {
    Thermal,
    CaseA,
    CaseB,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Thermal, SourceKind::CaseA, SourceKind::CaseB];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Thermal => "thermal",
            SourceKind::CaseA => "case-a",
            SourceKind::CaseB => "case-b",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thermal" => Ok(SourceKind::Thermal),
            "case-a" | "casea" | "a" => Ok(SourceKind::CaseA),
            "case-b" | "caseb" | "b" => Ok(SourceKind::CaseB),
            other => Err(Error::Config(format!(
                "unknown source `{other}` (expected thermal, case-a or case-b)"
            ))),
        }
    }
}

/// A light source and the parameters relevant to it.
///
/// Only the parameters meaningful for a kind exist on its variant. For case B
/// the mean intensity is derived: `⟨I⟩ = k ⟨I_F⟩² (1 + 1/μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Thermal { mean: f64 },
    CaseA { mean: f64, mu_f: f64, mu_s: f64 },
    CaseB { mean_fund: f64, mu: f64, k: f64 },
}

impl SourceSpec {
    pub fn thermal(mean: f64) -> Result<Self> {
        let s = SourceSpec::Thermal { mean };
        s.validate()?;
        Ok(s)
    }

    pub fn case_a(mean: f64, mu_f: f64, mu_s: f64) -> Result<Self> {
        let s = SourceSpec::CaseA { mean, mu_f, mu_s };
        s.validate()?;
        Ok(s)
    }

    pub fn case_b(mean_fund: f64, mu: f64, k: f64) -> Result<Self> {
        let s = SourceSpec::CaseB { mean_fund, mu, k };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Thermal { mean } => ensure_positive("mean intensity", mean),
            SourceSpec::CaseA { mean, mu_f, mu_s } => {
                ensure_positive("mean intensity", mean)?;
                ensure_at_least_one("mu_f", mu_f)?;
                ensure_at_least_one("mu_s", mu_s)
            }
            SourceSpec::CaseB { mean_fund, mu, k } => {
                ensure_positive("fundamental mean intensity", mean_fund)?;
                ensure_at_least_one("mu", mu)?;
                ensure_positive("conversion efficiency k", k)
            }
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self {
            SourceSpec::Thermal { .. } => SourceKind::Thermal,
            SourceSpec::CaseA { .. } => SourceKind::CaseA,
            SourceSpec::CaseB { .. } => SourceKind::CaseB,
        }
    }

    /// Mean intensity `⟨I⟩` of the source.
    pub fn mean_intensity(&self) -> f64 {
        match *self {
            SourceSpec::Thermal { mean } | SourceSpec::CaseA { mean, .. } => mean,
            SourceSpec::CaseB { mean_fund, mu, k } => k * mean_fund * mean_fund * (1.0 + 1.0 / mu),
        }
    }

    /// Closed-form `⟨I²⟩/⟨I⟩²` for this parameter set.
    pub fn g2(&self) -> f64 {
        match *self {
            SourceSpec::Thermal { .. } => 2.0,
            SourceSpec::CaseA { mu_f, mu_s, .. } => (1.0 + 1.0 / mu_f) * (1.0 + 1.0 / mu_s),
            SourceSpec::CaseB { mu, .. } => 1.0 + 2.0 * (2.0 * mu + 3.0) / (mu * (mu + 1.0)),
        }
    }

    /// Density of the intensity at `i`.
    pub fn pdf(&self, i: f64) -> Result<f64> {
        match *self {
            SourceSpec::Thermal { mean } => pdf_thermal(i, mean),
            SourceSpec::CaseA { mean, mu_f, mu_s } => pdf_case_a(i, mean, mu_f, mu_s),
            SourceSpec::CaseB { mean_fund, mu, k } => pdf_case_b(i, mean_fund, mu, k),
        }
    }
}

fn ensure_intensity(i: f64) -> Result<()> {
    if i.is_finite() && i >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("intensity must be finite and >= 0, got {i}")))
    }
}

/// Exponential density of thermal light, `exp(-i/⟨I⟩)/⟨I⟩`.
pub fn pdf_thermal(i: f64, mean: f64) -> Result<f64> {
    ensure_positive("mean intensity", mean)?;
    ensure_intensity(i)?;
    Ok((-i / mean).exp() / mean)
}

/// K-distribution density of case-A (speckled-speckle) light.
///
/// `P(I) = 2 (μ_f μ_s)^{(μ_f+μ_s)/2} / (⟨I⟩ Γ(μ_f) Γ(μ_s)) (I/⟨I⟩)^{(μ_f+μ_s-2)/2}
///  K_{|μ_f-μ_s|}(2 sqrt(μ_f μ_s I/⟨I⟩))`.
///
/// Evaluated in log space. At `i = 0` the continuous limit is returned; for
/// `μ_f = μ_s = 1` that limit is a logarithmic pole and is reported as
/// [`Error::Overflow`].
pub fn pdf_case_a(i: f64, mean: f64, mu_f: f64, mu_s: f64) -> Result<f64> {
    ensure_positive("mean intensity", mean)?;
    ensure_at_least_one("mu_f", mu_f)?;
    ensure_at_least_one("mu_s", mu_s)?;
    ensure_intensity(i)?;

    let order = (mu_f - mu_s).abs();
    let prod = mu_f * mu_s;
    let ln_norm = std::f64::consts::LN_2 + 0.5 * (mu_f + mu_s) * prod.ln()
        - mean.ln()
        - ln_gamma(mu_f)
        - ln_gamma(mu_s);

    if i == 0.0 {
        // K_ν(x) ~ Γ(ν)/2 (2/x)^ν, so P(I) ~ I^{min(μ_f, μ_s) - 1}.
        let lo = mu_f.min(mu_s);
        if lo > 1.0 {
            return Ok(0.0);
        }
        if order == 0.0 {
            return Err(Error::Overflow(
                "case-A density diverges at I = 0 for mu_f = mu_s = 1".into(),
            ));
        }
        let ln_limit = ln_norm + ln_gamma(order) - std::f64::consts::LN_2 - 0.5 * order * prod.ln();
        return Ok(ln_limit.exp());
    }

    let u = i / mean;
    let x = 2.0 * (prod * u).sqrt();
    let ln_p = ln_norm + 0.5 * (mu_f + mu_s - 2.0) * u.ln() + ln_bessel_k(order, x)?;
    Ok(ln_p.exp())
}

/// Density of case-B (second-harmonic) light.
///
/// `P(I) = b^{μ-2} exp(-μ b/⟨I_F⟩) / (2k Γ(μ) (⟨I_F⟩/μ)^μ)` with `b = sqrt(I/k)`.
/// At `i = 0` the density is infinite for `μ < 2`; that case is reported as
/// [`Error::Overflow`].
pub fn pdf_case_b(i: f64, mean_fund: f64, mu: f64, k: f64) -> Result<f64> {
    ensure_positive("fundamental mean intensity", mean_fund)?;
    ensure_at_least_one("mu", mu)?;
    ensure_positive("conversion efficiency k", k)?;
    ensure_intensity(i)?;

    let ln_norm = -(2.0 * k).ln() - ln_gamma(mu) - mu * (mean_fund / mu).ln();
    if i == 0.0 {
        return if mu < 2.0 {
            Err(Error::Overflow(format!("case-B density diverges at I = 0 for mu = {mu} < 2")))
        } else if mu == 2.0 {
            Ok(ln_norm.exp())
        } else {
            Ok(0.0)
        };
    }
    let b = (i / k).sqrt();
    let ln_p = ln_norm + (mu - 2.0) * b.ln() - mu * b / mean_fund;
    Ok(ln_p.exp())
}

/// `(1 + 1/μ_f)(1 + 1/μ_s)`.
pub fn g2_case_a(mu_f: f64, mu_s: f64) -> Result<f64> {
    ensure_at_least_one("mu_f", mu_f)?;
    ensure_at_least_one("mu_s", mu_s)?;
    Ok((1.0 + 1.0 / mu_f) * (1.0 + 1.0 / mu_s))
}

/// `1 + 2(2μ + 3)/(μ(μ + 1))`.
pub fn g2_case_b(mu: f64) -> Result<f64> {
    ensure_at_least_one("mu", mu)?;
    Ok(1.0 + 2.0 * (2.0 * mu + 3.0) / (mu * (mu + 1.0)))
}

/// Realizations of the intensity of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySample {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl IntensitySample {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn g2(&self) -> Result<f64> {
        estimate_g2(&self.values)
    }
}

/// Draws `n` intensities from `spec` using exact gamma constructions:
/// thermal `Exp(⟨I⟩)`, case A `⟨I⟩ (G₁/μ_f)(G₂/μ_s)`, case B `k I_F²` with
/// `I_F ~ Gamma(μ, ⟨I_F⟩/μ)`. Deterministic in `seed`.
pub fn sample_intensity(spec: &SourceSpec, n: usize, seed: u64) -> Result<IntensitySample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match *spec {
        SourceSpec::Thermal { mean } => {
            let d = Exp::new(1.0 / mean).map_err(|e| Error::domain(e.to_string()))?;
            draw(&mut rng, n, |r| d.sample(r))
        }
        SourceSpec::CaseA { mean, mu_f, mu_s } => {
            let g1 = Gamma::new(mu_f, 1.0).map_err(|e| Error::domain(e.to_string()))?;
            let g2 = Gamma::new(mu_s, 1.0).map_err(|e| Error::domain(e.to_string()))?;
            draw(&mut rng, n, |r| mean * (g1.sample(r) / mu_f) * (g2.sample(r) / mu_s))
        }
        SourceSpec::CaseB { mean_fund, mu, k } => {
            let g = Gamma::new(mu, mean_fund / mu).map_err(|e| Error::domain(e.to_string()))?;
            draw(&mut rng, n, |r| {
                let f = g.sample(r);
                k * f * f
            })
        }
    };
    Ok(IntensitySample { values, seed })
}

fn draw<R: Rng>(rng: &mut R, n: usize, mut f: impl FnMut(&mut R) -> f64) -> Vec<f64> {
    (0..n).map(|_| f(rng)).collect()
}

/// Moment estimator `mean(I²) / mean(I)²`.
pub fn estimate_g2(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::domain("g2 estimate needs at least two values"));
    }
    let n = values.len() as f64;
    let (s1, s2) = values
        .iter()
        .fold((0.0, 0.0), |(a, b), &v| (a + v, b + v * v));
    if s1 == 0.0 {
        return Err(Error::Undefined("g2 of an all-zero sample".into()));
    }
    let m = s1 / n;
    Ok((s2 / n) / (m * m))
}
