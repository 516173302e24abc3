//! Maximum-likelihood fitting, unrestricted or under a null hypothesis.
//!
//! The optimizer works on `(beta_free, log alpha)` so the shape stays
//! positive without constraints. Starting values are least squares for
//! `beta` and the moment estimate `alpha^2 = (4/n) sum sinh^2(r_i / 2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fisher_info, loglik_and_score, Dataset, Theta};
use crate::optim::{minimize, BfgsOptions};
use crate::specfun::psi;

/// Relative tolerance on the sup-norm of the free-coordinate score.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Bound on `g' K^{-1} g` at convergence. Unlike the sup-norm test this does
/// not depend on how the covariates are scaled.
pub const DECREMENT_TOLERANCE: f64 = 1e-20;
pub const MAX_ITERATIONS: usize = 500;
/// Fits whose shape estimate falls below this are rejected.
pub const ALPHA_FLOOR: f64 = 1e-8;

/// Parameters held fixed during a fit. Column indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Restriction {
    None,
    FixBetaSubset { indices: Vec<usize>, values: Vec<f64> },
    FixAlpha { alpha0: f64 },
}

impl Restriction {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Restriction::None => Ok(()),
            Restriction::FixBetaSubset { indices, values } => {
                if indices.is_empty() {
                    return Err(Error::Domain("restricted subset is empty".into()));
                }
                if indices.len() != values.len() {
                    return Err(Error::Dimension(format!(
                        "{} restricted indices but {} values",
                        indices.len(),
                        values.len()
                    )));
                }
                let mut seen = vec![false; p];
                for &j in indices {
                    if j >= p {
                        return Err(Error::Dimension(format!(
                            "restricted column {j} out of range for {p} columns"
                        )));
                    }
                    if std::mem::replace(&mut seen[j], true) {
                        return Err(Error::Domain(format!("column {j} restricted twice")));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("restricted values must be finite".into()));
                }
                Ok(())
            }
            Restriction::FixAlpha { alpha0 } => {
                if !(*alpha0 > 0.0 && alpha0.is_finite()) {
                    return Err(Error::Domain(format!("alpha0 must be > 0, got {alpha0}")));
                }
                Ok(())
            }
        }
    }

    fn fixed_beta(&self, p: usize) -> Vec<Option<f64>> {
        let mut fixed = vec![None; p];
        if let Restriction::FixBetaSubset { indices, values } = self {
            for (&j, &v) in indices.iter().zip(values) {
                fixed[j] = Some(v);
            }
        }
        fixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub loglik_value: f64,
    /// `beta` entries first, `alpha` last.
    pub std_errors: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm of the score over the free coordinates.
    pub gradient_norm: f64,
    pub restriction: Restriction,
}

/// Least-squares coefficients via a QR factorization.
pub fn init_beta(data: &Dataset) -> DVector<f64> {
    least_squares(data.design(), data.y())
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if x.ncols() == 0 {
        return DVector::zeros(0);
    }
    let qr = x.clone().qr();
    let qty = qr.q().tr_mul(y);
    qr.r()
        .solve_upper_triangular(&qty)
        .expect("full column rank is a Dataset invariant")
}

/// Moment starting value `sqrt((4/n) sum sinh^2((y_i - x_i' beta)/2))`.
pub fn init_alpha(data: &Dataset, beta_init: &DVector<f64>) -> Result<f64> {
    let mu = data.design() * beta_init;
    let n = data.n() as f64;
    let ss: f64 = data
        .y()
        .iter()
        .zip(mu.iter())
        .map(|(y, m)| (0.5 * (y - m)).sinh().powi(2))
        .sum();
    let alpha = (4.0 * ss / n).sqrt();
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::DegenerateFit(
            "all residuals are zero; the shape estimate would be 0".into(),
        ));
    }
    Ok(alpha)
}

/// Maximizes the log-likelihood subject to `restriction`.
///
/// Fixed coordinates are held exactly at their values. A fit that uses up
/// the iteration budget comes back with `converged = false`.
pub fn fit(data: &Dataset, restriction: &Restriction) -> Result<FitResult> {
    let n = data.n();
    let p = data.p();
    restriction.validate(p)?;

    let fixed = restriction.fixed_beta(p);
    let free: Vec<usize> = (0..p).filter(|&j| fixed[j].is_none()).collect();
    let alpha_fixed = match restriction {
        Restriction::FixAlpha { alpha0 } => Some(*alpha0),
        _ => None,
    };

    // starting values: least squares on the free columns after removing
    // the fixed part of the mean
    let x_free = data.design().select_columns(free.iter());
    let mut offset = DVector::zeros(n);
    for (j, v) in fixed.iter().enumerate() {
        if let Some(v) = v {
            offset += data.design().column(j) * *v;
        }
    }
    let beta_free0 = least_squares(&x_free, &(data.y() - &offset));
    let assemble = |beta_free: &[f64]| -> DVector<f64> {
        let mut beta = DVector::zeros(p);
        let mut it = beta_free.iter();
        for j in 0..p {
            beta[j] = match fixed[j] {
                Some(v) => v,
                None => *it.next().expect("free coordinate count"),
            };
        }
        beta
    };
    let beta0 = assemble(beta_free0.as_slice());
    let alpha0 = match alpha_fixed {
        Some(a) => a,
        None => init_alpha(data, &beta0)?,
    };

    // optimizer coordinates: free betas, then log alpha when it is free
    let k_beta = free.len();
    let k = k_beta + usize::from(alpha_fixed.is_none());
    let mut z0 = DVector::zeros(k);
    z0.rows_mut(0, k_beta).copy_from(&beta_free0);
    if alpha_fixed.is_none() {
        z0[k_beta] = alpha0.ln();
    }

    // initial inverse Hessian: expected information at the starting point
    let mut h0 = DMatrix::zeros(k, k);
    if k_beta > 0 {
        let info = x_free.tr_mul(&x_free) * (0.25 * psi(alpha0)?);
        let inv = info
            .cholesky()
            .ok_or_else(|| Error::RankDeficient { rank: 0, cols: k_beta })?
            .inverse();
        h0.view_mut((0, 0), (k_beta, k_beta)).copy_from(&inv);
    }
    if alpha_fixed.is_none() {
        // information for log alpha is alpha^2 * 2n / alpha^2
        h0[(k_beta, k_beta)] = 1.0 / (2.0 * n as f64);
    }

    let split = |z: &DVector<f64>| -> (DVector<f64>, f64) {
        let beta = assemble(&z.as_slice()[..k_beta]);
        let alpha = alpha_fixed.unwrap_or_else(|| z[k_beta].exp());
        (beta, alpha)
    };

    let objective = |z: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let (beta, alpha) = split(z);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return None;
        }
        let theta = Theta { beta, alpha };
        let (ll, u) = loglik_and_score(&theta, data);
        if !ll.is_finite() {
            return None;
        }
        let mut g = DVector::zeros(k);
        for (slot, &j) in free.iter().enumerate() {
            g[slot] = -u.beta[j];
        }
        if alpha_fixed.is_none() {
            g[k_beta] = -u.alpha * alpha;
        }
        Some((-ll, g))
    };

    // convergence is judged on the natural-scale score
    let natural_norm = |z: &DVector<f64>, g: &DVector<f64>| -> f64 {
        let mut m = g.rows(0, k_beta).amax();
        if alpha_fixed.is_none() {
            let alpha = z[k_beta].exp();
            m = m.max((g[k_beta] / alpha).abs());
        }
        m
    };
    let h_start = h0.clone();
    let done = |z: &DVector<f64>, f: f64, g: &DVector<f64>| {
        natural_norm(z, g) < GRADIENT_TOLERANCE * f.abs().max(1.0)
            && g.dot(&(&h_start * g)) < DECREMENT_TOLERANCE * f.abs().max(1.0)
    };

    let opts = BfgsOptions {
        max_iterations: MAX_ITERATIONS,
        ..BfgsOptions::default()
    };
    let outcome = minimize(objective, z0, h0, &opts, done).ok_or_else(|| {
        Error::DegenerateFit("log-likelihood is not finite at the starting point".into())
    })?;

    let (beta, alpha) = split(&outcome.x);
    if alpha < ALPHA_FLOOR {
        return Err(Error::Boundary(alpha));
    }
    let theta_hat = Theta { beta, alpha };
    let std_errors = information_std_errors(&theta_hat, data)?;
    Ok(FitResult {
        gradient_norm: natural_norm(&outcome.x, &outcome.gradient),
        loglik_value: -outcome.value,
        theta_hat,
        std_errors,
        iterations: outcome.iterations,
        converged: outcome.converged,
        restriction: restriction.clone(),
    })
}

fn information_std_errors(theta: &Theta, data: &Dataset) -> Result<DVector<f64>> {
    let info = fisher_info(theta, data)?;
    let p = data.p();
    let inv_beta = info
        .beta
        .cholesky()
        .ok_or(Error::RankDeficient { rank: 0, cols: p })?
        .inverse();
    let mut se = DVector::zeros(p + 1);
    for j in 0..p {
        se[j] = inv_beta[(j, j)].sqrt();
    }
    se[p] = theta.alpha / (2.0 * data.n() as f64).sqrt();
    Ok(se)
}

/// Square roots of the diagonal of the inverse expected information at
/// the fitted point (`beta` entries, then `alpha`).
pub fn std_errors(fit: &FitResult, data: &Dataset) -> Result<DVector<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged(
            "standard errors need a converged fit".into(),
        ));
    }
    information_std_errors(&fit.theta_hat, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::loglik;
    use crate::sinh_normal::{sinh_normal_from_z, SinhNormalParams, VariateStream};

    fn simulate(n: usize, beta: &[f64], alpha: f64, seed: u64) -> Dataset {
        let p = beta.len();
        let mut cov = VariateStream::new(seed, 0);
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let mut x = x;
        for i in 0..n {
            for j in 1..p {
                x[(i, j)] = cov.uniform();
            }
        }
        let mut noise = VariateStream::new(seed, 1);
        let sn = SinhNormalParams::new(alpha, 0.0).unwrap();
        let mu = &x * DVector::from_column_slice(beta);
        let y = DVector::from_fn(n, |i, _| mu[i] + sinh_normal_from_z(noise.normal(), &sn));
        Dataset::new(y, x).unwrap()
    }

    #[test]
    fn ols_exact_and_intercept_only() {
        let data = simulate(20, &[1.0, -2.0, 0.5], 0.5, 3);
        let beta0 = DVector::from_vec(vec![0.3, 1.1, -0.7]);
        let exact = data.with_response(data.design() * &beta0).unwrap();
        assert!((init_beta(&exact) - &beta0).amax() < 1e-12);

        let y = [1.0, 2.5, -0.5, 4.0];
        let d = Dataset::from_rows(&y, &vec![vec![1.0]; 4]).unwrap();
        assert!((init_beta(&d)[0] - 1.75).abs() < 1e-14);
    }

    #[test]
    fn ols_normal_equations() {
        let data = simulate(30, &[0.2, 1.0, 2.0, -1.0], 1.0, 11);
        let b = init_beta(&data);
        let resid = data.y() - data.design() * b;
        assert!(data.design().tr_mul(&resid).amax() < 1e-10);
    }

    #[test]
    fn alpha_start_values() {
        let d = Dataset::from_rows(&[2.0, 0.0], &[vec![1.0], vec![1.0]]).unwrap();
        // residuals (2, 0) at beta = 0: sqrt((4/2) sinh^2(1))
        let a = init_alpha(&d, &DVector::from_vec(vec![0.0])).unwrap();
        assert!((a - (2.0f64).sqrt() * 1f64.sinh()).abs() < 1e-14);

        let d = Dataset::from_rows(&[2.0, 2.0], &[vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(
            init_alpha(&d, &DVector::from_vec(vec![2.0])),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn alpha_start_consistent() {
        let data = simulate(10_000, &[1.0, 1.0], 0.5, 5);
        let b = init_beta(&data);
        let a = init_alpha(&data, &b).unwrap();
        assert!((a - 0.5).abs() < 0.02, "{a}");
    }

    #[test]
    fn unrestricted_fit_is_stationary() {
        let data = simulate(40, &[1.0, 1.0, 1.0], 0.5, 21);
        let fit = fit(&data, &Restriction::None).unwrap();
        assert!(fit.converged);
        let (_, u) = loglik_and_score(&fit.theta_hat, &data);
        let tol = GRADIENT_TOLERANCE * fit.loglik_value.abs().max(1.0);
        assert!(u.beta.amax() < tol && u.alpha.abs() < tol);
        assert!((loglik(&fit.theta_hat, &data) - fit.loglik_value).abs() < 1e-12);
    }

    #[test]
    fn large_sample_consistency() {
        let data = simulate(10_000, &[1.0, 1.0, 1.0], 0.5, 99);
        let fit = fit(&data, &Restriction::None).unwrap();
        assert!(fit.converged);
        let truth = [1.0, 1.0, 1.0, 0.5];
        for (j, t) in truth.iter().enumerate() {
            let est = if j < 3 { fit.theta_hat.beta[j] } else { fit.theta_hat.alpha };
            assert!((est - t).abs() < 3.0 * fit.std_errors[j], "coordinate {j}: {est}");
        }
    }

    #[test]
    fn restricted_fit_at_mle_reproduces_it() {
        let data = simulate(30, &[1.0, 0.5, -0.5], 0.7, 8);
        let full = fit(&data, &Restriction::None).unwrap();
        let r = Restriction::FixBetaSubset { indices: vec![2], values: vec![full.theta_hat.beta[2]] };
        let restricted = fit(&data, &r).unwrap();
        assert!(restricted.converged);
        assert_eq!(restricted.theta_hat.beta[2], full.theta_hat.beta[2]);
        assert!((restricted.theta_hat.beta[0] - full.theta_hat.beta[0]).abs() < 1e-6);
        assert!((restricted.theta_hat.beta[1] - full.theta_hat.beta[1]).abs() < 1e-6);
        assert!((restricted.theta_hat.alpha - full.theta_hat.alpha).abs() < 1e-6);
    }

    #[test]
    fn fixing_alpha_at_mle_reproduces_beta() {
        let data = simulate(30, &[1.0, 0.5, -0.5], 0.7, 9);
        let full = fit(&data, &Restriction::None).unwrap();
        let r = Restriction::FixAlpha { alpha0: full.theta_hat.alpha };
        let restricted = fit(&data, &r).unwrap();
        assert_eq!(restricted.theta_hat.alpha, full.theta_hat.alpha);
        assert!((&restricted.theta_hat.beta - &full.theta_hat.beta).amax() < 1e-7);
    }

    #[test]
    fn restricted_value_never_exceeds_unrestricted() {
        let data = simulate(25, &[1.0, 1.0, 0.0, 0.0], 0.5, 17);
        let full = fit(&data, &Restriction::None).unwrap();
        let r = Restriction::FixBetaSubset { indices: vec![2, 3], values: vec![0.0, 0.0] };
        let restricted = fit(&data, &r).unwrap();
        assert!(restricted.loglik_value <= full.loglik_value + 1e-10);
        let r = Restriction::FixAlpha { alpha0: 0.9 };
        assert!(fit(&data, &r).unwrap().loglik_value <= full.loglik_value + 1e-10);
    }

    #[test]
    fn std_errors_structure() {
        let data = simulate(15, &[2.0], 0.2039, 4);
        let f = fit(&data, &Restriction::None).unwrap();
        let se = std_errors(&f, &data).unwrap();
        assert!((se[1] - f.theta_hat.alpha / 30f64.sqrt()).abs() < 1e-15);
        let expect = 2.0 / (15.0 * psi(f.theta_hat.alpha).unwrap()).sqrt();
        assert!((se[0] - expect).abs() < 1e-12);
        // value from the die-lifetime application: 0.2039 / sqrt(30)
        assert!((0.2039 / 30f64.sqrt() - 0.0372).abs() < 5e-5);
    }

    #[test]
    fn std_errors_match_dense_inverse() {
        let data = simulate(30, &[1.0, 1.0, 1.0], 0.8, 12);
        let f = fit(&data, &Restriction::None).unwrap();
        let dense = fisher_info(&f.theta_hat, &data).unwrap().to_matrix();
        let inv = dense.try_inverse().unwrap();
        for j in 0..4 {
            assert!((f.std_errors[j].powi(2) - inv[(j, j)]).abs() < 1e-10 * inv[(j, j)].max(1.0));
        }
    }

    #[test]
    fn std_errors_need_convergence() {
        let data = simulate(20, &[1.0, 1.0], 0.5, 2);
        let mut f = fit(&data, &Restriction::None).unwrap();
        f.converged = false;
        assert!(matches!(std_errors(&f, &data), Err(Error::NotConverged(_))));
    }

    #[test]
    fn restriction_validation() {
        let p = 3;
        assert!(Restriction::FixBetaSubset { indices: vec![3], values: vec![0.0] }.validate(p).is_err());
        assert!(Restriction::FixBetaSubset { indices: vec![1, 1], values: vec![0.0, 0.0] }
            .validate(p)
            .is_err());
        assert!(Restriction::FixBetaSubset { indices: vec![1], values: vec![] }.validate(p).is_err());
        assert!(Restriction::FixAlpha { alpha0: 0.0 }.validate(p).is_err());
        assert!(Restriction::FixAlpha { alpha0: 1.0 }.validate(p).is_ok());
    }
}
