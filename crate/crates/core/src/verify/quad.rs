use crate::error::{Error, Result};

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XK[j];
        let s = f(c - x) + f(c + x);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]` to
/// absolute tolerance `tol`. Endpoints are never evaluated.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 20_000;
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if !total.is_finite() {
            return Err(Error::Numeric("integrand is not finite".into()));
        }
        if err <= tol {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not reach tolerance {tol:e} (estimate {err:e})"
            )));
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::Numeric("quadrature interval underflow".into()));
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// `∫_0^∞ f` via `x = t / (1 − t)` on `[0, 1)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let x = t / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else if x.is_finite() {
                f64::NAN
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// `K_ν(x) = ∫_0^∞ exp(−x cosh t) cosh(ν t) dt`.
pub fn bessel_k_integral(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled_integral(nu, x)? * (-x).exp())
}

/// `e^x K_ν(x)` from the same integral, usable where `K_ν` itself underflows.
pub fn bessel_k_scaled_integral(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    let nu = nu.abs();
    // log of the integrand is concave in t; walk past its peak until it has
    // dropped by 50 e-folds
    let log_f = |t: f64| -x * (t.cosh() - 1.0) + nu * t;
    let (mut t, mut peak) = (0.0f64, log_f(0.0));
    loop {
        t += 0.25;
        let v = log_f(t);
        peak = peak.max(v);
        if v < peak - 50.0 {
            break;
        }
        if t > 800.0 {
            return Err(Error::Numeric("integrand does not decay".into()));
        }
    }
    if peak > 700.0 {
        return Err(Error::Overflow(format!("K_{nu}({x}) is beyond f64 range")));
    }
    let tol = 1e-14 * peak.exp() * t;
    integrate(|s| (-x * (s.cosh() - 1.0)).exp() * (nu * s).cosh(), 0.0, t, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-13).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate_semi_infinite(|x| (-x).exp(), 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^-1/2 = 2
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn bessel_integral_known_values() {
        // K_{1/2}(x) = sqrt(π/2x) e^-x
        for x in [0.1, 1.0, 7.0] {
            let exact = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x as f64).exp();
            let v = bessel_k_integral(0.5, x).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-12, "{x}: {v} vs {exact}");
        }
    }
}
