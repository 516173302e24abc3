//! Likelihood ratio (S1), Wald (S2), score (S3) and gradient (S4)
//! statistics for `H0: beta_2 = beta_2^0` and `H0: alpha = alpha^0`.
//!
//! p-values always come from the asymptotic chi-square reference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, FitResult, Restriction};
use crate::model::{xi, Dataset};
use crate::specfun::{chi2_sf, psi};

/// The four statistics in the order S1..S4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourStatistics {
    pub likelihood_ratio: f64,
    pub wald: f64,
    pub score: f64,
    pub gradient: f64,
}

impl FourStatistics {
    pub const NAMES: [&'static str; 4] = ["likelihood_ratio", "wald", "score", "gradient"];

    pub fn as_array(&self) -> [f64; 4] {
        [self.likelihood_ratio, self.wald, self.score, self.gradient]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { likelihood_ratio: v[0], wald: v[1], score: v[2], gradient: v[3] }
    }

    /// Upper-tail chi-square p-values. A negative statistic gets p = 1.
    pub fn p_values(&self, df: usize) -> FourStatistics {
        let df = df as u32;
        let pv = self.as_array().map(|s| chi2_sf(s.max(0.0), df));
        Self::from_array(pv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    BetaSubset,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub hypothesis: Hypothesis,
    pub statistics: FourStatistics,
    pub df: usize,
    pub p_values: FourStatistics,
    pub unrestricted: FitResult,
    pub restricted: FitResult,
}

impl TestReport {
    pub fn converged(&self) -> bool {
        self.unrestricted.converged && self.restricted.converged
    }
}

fn check_subset(p: usize, subset: &[usize], beta2_0: &[f64]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::Domain("tested subset is empty".into()));
    }
    if subset.len() >= p {
        return Err(Error::Unsupported(
            "testing every regression coefficient leaves no nuisance block".into(),
        ));
    }
    if subset.len() != beta2_0.len() {
        return Err(Error::Dimension(format!(
            "{} tested columns but {} null values",
            subset.len(),
            beta2_0.len()
        )));
    }
    Restriction::FixBetaSubset { indices: subset.to_vec(), values: beta2_0.to_vec() }.validate(p)
}

/// `R' R` where `R` holds the residuals of the tested columns after
/// projecting them on the remaining columns.
pub fn residual_cross_product(design: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    let p = design.ncols();
    let nuisance: Vec<usize> = (0..p).filter(|j| !subset.contains(j)).collect();
    let x1 = design.select_columns(nuisance.iter());
    let x2 = design.select_columns(subset.iter());
    let q = x1.qr().q();
    let r = &x2 - &q * q.tr_mul(&x2);
    r.tr_mul(&r)
}

/// Tests `beta[subset] = beta2_0`. Column indices are zero-based.
pub fn test_beta_subset(data: &Dataset, subset: &[usize], beta2_0: &[f64]) -> Result<TestReport> {
    check_subset(data.p(), subset, beta2_0)?;
    let unrestricted = fit(data, &Restriction::None)?;
    let restricted = fit(
        data,
        &Restriction::FixBetaSubset { indices: subset.to_vec(), values: beta2_0.to_vec() },
    )?;
    beta_subset_report(data, subset, beta2_0, unrestricted, restricted)
}

/// Assembles the report from already computed fits.
pub fn beta_subset_report(
    data: &Dataset,
    subset: &[usize],
    beta2_0: &[f64],
    unrestricted: FitResult,
    restricted: FitResult,
) -> Result<TestReport> {
    check_subset(data.p(), subset, beta2_0)?;
    let rtr = residual_cross_product(data.design(), subset);
    let x2 = data.design().select_columns(subset.iter());

    let diff = DVector::from_iterator(
        subset.len(),
        subset.iter().zip(beta2_0).map(|(&j, v)| unrestricted.theta_hat.beta[j] - v),
    );
    let s_tilde = xi(&restricted.theta_hat, data).s;
    let v = x2.tr_mul(&s_tilde);

    let lr = 2.0 * (unrestricted.loglik_value - restricted.loglik_value);
    let wald = 0.25 * psi(unrestricted.theta_hat.alpha)? * diff.dot(&(&rtr * &diff));
    let chol = rtr.cholesky().ok_or(Error::RankDeficient {
        rank: 0,
        cols: subset.len(),
    })?;
    let score = v.dot(&chol.solve(&v)) / psi(restricted.theta_hat.alpha)?;
    let gradient = 0.5 * v.dot(&diff);

    let statistics = FourStatistics { likelihood_ratio: lr, wald, score, gradient };
    Ok(TestReport {
        hypothesis: Hypothesis::BetaSubset,
        statistics,
        df: subset.len(),
        p_values: statistics.p_values(subset.len()),
        unrestricted,
        restricted,
    })
}

/// Tests `alpha = alpha0` with `beta` as nuisance.
pub fn test_alpha(data: &Dataset, alpha0: f64) -> Result<TestReport> {
    let restriction = Restriction::FixAlpha { alpha0 };
    restriction.validate(data.p())?;
    let unrestricted = fit(data, &Restriction::None)?;
    let restricted = fit(data, &restriction)?;
    alpha_report(data, alpha0, unrestricted, restricted)
}

pub fn alpha_report(
    data: &Dataset,
    alpha0: f64,
    unrestricted: FitResult,
    restricted: FitResult,
) -> Result<TestReport> {
    let xi2 = xi(&restricted.theta_hat, data).xi2;
    let xi2_bar = xi2.norm_squared() / data.n() as f64;
    let statistics = alpha_statistics(
        data.n(),
        unrestricted.theta_hat.alpha,
        alpha0,
        xi2_bar,
        unrestricted.loglik_value,
        restricted.loglik_value,
    );
    Ok(TestReport {
        hypothesis: Hypothesis::Alpha,
        statistics,
        df: 1,
        p_values: statistics.p_values(1),
        unrestricted,
        restricted,
    })
}

/// Closed forms of the shape-test statistics, with `xi2_bar` the mean of
/// `xi2^2` at the restricted fit:
/// `S2 = 2n((a - a0)/a)^2`, `S3 = n(xi2_bar - 1)^2 / 2`,
/// `S4 = n(xi2_bar - 1)(a - a0)/a0`.
pub fn alpha_statistics(
    n: usize,
    alpha_hat: f64,
    alpha0: f64,
    xi2_bar: f64,
    loglik_unrestricted: f64,
    loglik_restricted: f64,
) -> FourStatistics {
    let n = n as f64;
    let rel = (alpha_hat - alpha0) / alpha_hat;
    FourStatistics {
        likelihood_ratio: 2.0 * (loglik_unrestricted - loglik_restricted),
        wald: 2.0 * n * rel * rel,
        score: 0.5 * n * (xi2_bar - 1.0).powi(2),
        gradient: n * (xi2_bar - 1.0) * (alpha_hat - alpha0) / alpha0,
    }
}
