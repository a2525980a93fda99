//! Small numerical helpers shared by the analysis modules.

use ndarray::Array2;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Delete-one-group jackknife standard error from leave-one-out replicates.
pub fn jackknife_se(replicates: &[f64]) -> f64 {
    let b = replicates.len() as f64;
    let m = mean(replicates);
    let ss: f64 = replicates.iter().map(|r| (r - m) * (r - m)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

/// Elementwise [`jackknife_se`] over replicate maps.
pub fn jackknife_se_map(replicates: &[Array2<f64>]) -> Array2<f64> {
    let dim = replicates[0].dim();
    Array2::from_shape_fn(dim, |ix| {
        let r: Vec<f64> = replicates.iter().map(|m| m[ix]).collect();
        jackknife_se(&r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn std_uses_n_minus_one() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jackknife_of_mean_matches_standard_error() {
        // leave-one-out means of x give exactly sd(x)/sqrt(n)
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let n = x.len() as f64;
        let total: f64 = x.iter().sum();
        let reps: Vec<f64> = x.iter().map(|v| (total - v) / (n - 1.0)).collect();
        assert!((jackknife_se(&reps) - sample_std(&x) / n.sqrt()).abs() < 1e-12);
    }
}
