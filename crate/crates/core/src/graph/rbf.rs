//! Exponential-normal radial basis `f_k(d) = exp(−β_k (e^{r_l − d} − μ_k)²)`.

/// Standard initialization: means evenly spaced on `[e^{−(r_u − r_l)}, 1]`,
/// all widths `β = (2/K · (1 − e^{−(r_u − r_l)}))⁻²`.
pub fn initial_params(num_rbf: usize, lower: f64, upper: f64) -> (Vec<f64>, Vec<f64>) {
    let start = (-(upper - lower)).exp();
    let means = if num_rbf == 1 {
        vec![start]
    } else {
        (0..num_rbf)
            .map(|k| start + (1.0 - start) * k as f64 / (num_rbf - 1) as f64)
            .collect()
    };
    let beta = (2.0 / num_rbf as f64 * (1.0 - start)).powi(-2);
    (means, vec![beta; num_rbf])
}

/// Evaluates all basis functions at distance `d` into `out`.
pub fn rbf_expnorm(d: f64, means: &[f64], betas: &[f64], lower: f64, out: &mut [f64]) {
    let t = (lower - d).exp();
    for ((o, &mu), &beta) in out.iter_mut().zip(means).zip(betas) {
        let x = t - mu;
        *o = (-beta * x * x).exp();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_at_matching_mean() {
        let mut out = [0.0];
        rbf_expnorm(0.7, &[1.0], &[3.0], 0.7, &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn values_in_unit_interval() {
        let (m, b) = initial_params(16, 0.0, 5.0);
        let mut out = vec![0.0; 16];
        for k in 0..100 {
            rbf_expnorm(0.06 * k as f64, &m, &b, 0.0, &mut out);
            assert!(out.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn matches_standalone_evaluation() {
        // Standalone evaluation of the formula with K=8, r_u=5, d=2.5.
        let expected = [
            0.912_040_013_317_902_6,
            0.930_696_753_215_056_7,
            0.494_289_766_673_747_35,
            0.136_626_251_660_181_33,
            0.019_654_672_052_663_639,
            0.001_471_555_220_807_851_4,
            5.734_115_542_575_292_8e-5,
            1.162_881_414_342_367_2e-6,
        ];
        let (m, b) = initial_params(8, 0.0, 5.0);
        assert!((b[0] - 16.217_813_244_583_94).abs() < 1e-10);
        let mut out = vec![0.0; 8];
        rbf_expnorm(2.5, &m, &b, 0.0, &mut out);
        for (g, e) in out.iter().zip(expected) {
            assert!((g - e).abs() < 1e-14 * e.max(1e-3), "{g} vs {e}");
        }
    }
}
