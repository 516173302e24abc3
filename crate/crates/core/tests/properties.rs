use bsreg::estimate::{fit, Restriction};
use bsreg::hypothesis::{test_alpha, test_beta_subset, FourStatistics};
use bsreg::localpower::{alpha_coeffs_reduced, AlphaPitmanSpec};
use bsreg::mcharness::{simulate_response, uniform_design};
use bsreg::model::{fisher_info, loglik, score, xi, Dataset, Theta};
use bsreg::sinh_normal::VariateStream;
use bsreg::specfun::{nc_chi2_cdf, nc_chi2_pdf, ChiSqSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dataset(n: usize, p: usize, alpha: f64, seed: u64) -> Dataset {
    let x = uniform_design(n, p, seed);
    let beta: Vec<f64> = (0..p).map(|j| 1.0 - 0.3 * j as f64).collect();
    let mut s = VariateStream::new(seed, 1);
    let y = simulate_response(&x, &beta, alpha, &mut s);
    Dataset::new(y, x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hyperbolic_identity(seed in any::<u64>(), alpha in 0.05f64..5.0, shift in -3.0f64..3.0) {
        let data = dataset(12, 2, 0.7, seed);
        let theta = Theta::new(DVector::from_vec(vec![shift, 0.5]), alpha).unwrap();
        let v = xi(&theta, &data);
        let target = 4.0 / (alpha * alpha);
        for i in 0..12 {
            let d = v.xi1[i] * v.xi1[i] - v.xi2[i] * v.xi2[i];
            prop_assert!((d - target).abs() <= 1e-9 * target.max(v.xi1[i] * v.xi1[i]));
        }
    }

    #[test]
    fn score_matches_finite_differences(seed in any::<u64>(), alpha in 0.2f64..3.0, b in -2.0f64..2.0) {
        let data = dataset(20, 3, 0.8, seed);
        let theta = Theta::new(DVector::from_vec(vec![b, 0.3, -0.4]), alpha).unwrap();
        let u = score(&theta, &data);
        let h = 1e-5;
        let mut up = theta.clone();
        up.alpha += h;
        let mut down = theta.clone();
        down.alpha -= h;
        let fd = (loglik(&up, &data) - loglik(&down, &data)) / (2.0 * h);
        prop_assert!((u.alpha - fd).abs() <= 1e-6 * u.alpha.abs().max(1.0));
        for j in 0..3 {
            let mut up = theta.clone();
            up.beta[j] += h;
            let mut down = theta.clone();
            down.beta[j] -= h;
            let fd = (loglik(&up, &data) - loglik(&down, &data)) / (2.0 * h);
            prop_assert!((u.beta[j] - fd).abs() <= 1e-6 * u.beta[j].abs().max(1.0));
        }
    }

    #[test]
    fn fisher_information_is_positive_definite(seed in any::<u64>(), alpha in 0.01f64..20.0, p in 1usize..6) {
        let data = dataset(3 * p + 2, p, 1.0, seed);
        let theta = Theta::new(DVector::zeros(p), alpha).unwrap();
        let k = fisher_info(&theta, &data).unwrap().to_matrix();
        prop_assert!(k.cholesky().is_some());
    }

    #[test]
    fn row_permutation_leaves_fit_unchanged(seed in any::<u64>()) {
        let data = dataset(25, 3, 0.5, seed);
        let n = data.n();
        let order: Vec<usize> = (0..n).rev().collect();
        let x = DMatrix::from_fn(n, 3, |i, j| data.design()[(order[i], j)]);
        let y = DVector::from_fn(n, |i, _| data.y()[order[i]]);
        let permuted = Dataset::new(y, x).unwrap();
        let a = fit(&data, &Restriction::None).unwrap();
        let b = fit(&permuted, &Restriction::None).unwrap();
        prop_assert!((a.theta_hat.alpha - b.theta_hat.alpha).abs() < 1e-8);
        prop_assert!((&a.theta_hat.beta - &b.theta_hat.beta).amax() < 1e-7);
        prop_assert!((a.loglik_value - b.loglik_value).abs() < 1e-9 * a.loglik_value.abs().max(1.0));
    }

    #[test]
    fn column_rescaling_is_equivariant(seed in any::<u64>(), d1 in 0.01f64..100.0, d2 in 0.01f64..100.0) {
        let data = dataset(30, 3, 0.5, seed);
        let scale = [1.0, d1, d2];
        let x = DMatrix::from_fn(30, 3, |i, j| data.design()[(i, j)] * scale[j]);
        let rescaled = Dataset::new(data.y().clone(), x).unwrap();
        let a = fit(&data, &Restriction::None).unwrap();
        let b = fit(&rescaled, &Restriction::None).unwrap();
        prop_assert!((a.theta_hat.alpha - b.theta_hat.alpha).abs() < 1e-8);
        for j in 0..3 {
            let back = b.theta_hat.beta[j] * scale[j];
            prop_assert!((a.theta_hat.beta[j] - back).abs() < 1e-8 * a.theta_hat.beta[j].abs().max(1.0));
        }
    }

    #[test]
    fn statistic_signs(seed in any::<u64>(), q in 1usize..3) {
        let data = dataset(20, 4, 0.6, seed);
        let subset: Vec<usize> = (4 - q..4).collect();
        let r = test_beta_subset(&data, &subset, &vec![0.1; q]).unwrap();
        prop_assert!(r.statistics.likelihood_ratio >= -1e-8);
        prop_assert!(r.statistics.wald >= 0.0);
        prop_assert!(r.statistics.score >= 0.0);
        let a = test_alpha(&data, 0.5).unwrap();
        prop_assert!(a.statistics.likelihood_ratio >= -1e-8);
        prop_assert!(a.statistics.wald >= 0.0 && a.statistics.score >= 0.0);
        for pv in r.p_values.as_array().into_iter().chain(a.p_values.as_array()) {
            prop_assert!((0.0..=1.0).contains(&pv));
        }
    }

    #[test]
    fn p_values_decrease_in_statistic(a in 0.0f64..40.0, b in 0.0f64..40.0, df in 1usize..8) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = FourStatistics::from_array([lo; 4]).p_values(df);
        let p_hi = FourStatistics::from_array([hi; 4]).p_values(df);
        prop_assert!(p_hi.wald <= p_lo.wald);
    }

    #[test]
    fn coefficient_rows_sum_to_zero(alpha0 in 0.05f64..5.0, frac in -0.5f64..0.5, n in 5usize..500, p in 1usize..10) {
        let spec = AlphaPitmanSpec::new(alpha0, frac * alpha0, n, p, 0.05).unwrap();
        let c = alpha_coeffs_reduced(&spec).unwrap();
        let scale = c.b.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(c.max_row_sum() <= 1e-13 * scale);
    }

    #[test]
    fn noncentral_recurrence(m in 1u32..30, lambda in 0.0f64..80.0, x in 0.001f64..150.0) {
        let g = nc_chi2_cdf(x, &ChiSqSpec::new(m, lambda).unwrap()).unwrap();
        let g2 = nc_chi2_cdf(x, &ChiSqSpec::new(m + 2, lambda).unwrap()).unwrap();
        let d = nc_chi2_pdf(x, &ChiSqSpec::new(m + 2, lambda).unwrap()).unwrap();
        prop_assert!((g - g2 - 2.0 * d).abs() < 1e-10);
    }
}
