//! Log-linear Birnbaum-Saunders regression: `y_i = x_i' beta + e_i` with
//! `e_i ~ SN(alpha, 0, 2)`.
//!
//! With `r_i = (y_i - x_i' beta) / 2` the building blocks are
//! `xi1_i = (2/alpha) cosh(r_i)`, `xi2_i = (2/alpha) sinh(r_i)` and
//! `s_i = xi1_i xi2_i - xi2_i / xi1_i`; the log-likelihood (up to a constant)
//! is `sum log xi1_i - sum xi2_i^2 / 2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::psi;

/// Relative singular-value threshold for the full-rank check.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Log-lifetimes and design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has {} rows but design has {n}",
                y.len()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidData("design matrix has no columns".into()));
        }
        if n <= p {
            return Err(Error::InvalidData(format!(
                "need more observations than columns (n = {n}, p = {p})"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("response row {i} is not finite")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "design entry (row {}, column {}) is not finite",
                k % n,
                k / n
            )));
        }
        let rank = numerical_rank(&x);
        if rank < p {
            return Err(Error::RankDeficient { rank, cols: p });
        }
        Ok(Self { y, x })
    }

    pub fn from_rows(y: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("design rows have unequal lengths".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(DVector::from_column_slice(y), x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Same design, new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Dimension("response length changed".into()));
        }
        Ok(Self { y, x: self.x.clone() })
    }
}

/// Number of singular values above `RANK_TOLERANCE * max`.
pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    if x.ncols() == 0 || x.nrows() == 0 {
        return 0;
    }
    let sv = x.clone().svd(false, false).singular_values;
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

/// Parameter point `(beta, alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: DVector<f64>,
    pub alpha: f64,
}

impl Theta {
    pub fn new(beta: DVector<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self { beta, alpha })
    }

    /// Linear predictor `X beta`.
    pub fn mean(&self, data: &Dataset) -> DVector<f64> {
        assert_eq!(
            self.beta.len(),
            data.p(),
            "beta has {} entries, design has {} columns",
            self.beta.len(),
            data.p()
        );
        data.design() * &self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiVectors {
    pub xi1: DVector<f64>,
    pub xi2: DVector<f64>,
    pub s: DVector<f64>,
}

pub fn xi(theta: &Theta, data: &Dataset) -> XiVectors {
    let mu = theta.mean(data);
    let scale = 2.0 / theta.alpha;
    let n = data.n();
    let mut xi1 = DVector::zeros(n);
    let mut xi2 = DVector::zeros(n);
    let mut s = DVector::zeros(n);
    for i in 0..n {
        let r = 0.5 * (data.y()[i] - mu[i]);
        let c = scale * r.cosh();
        let sh = scale * r.sinh();
        xi1[i] = c;
        xi2[i] = sh;
        s[i] = c * sh - sh / c;
    }
    XiVectors { xi1, xi2, s }
}

/// Log-likelihood without the constant `-n/2 log(8 pi)`.
pub fn loglik(theta: &Theta, data: &Dataset) -> f64 {
    let mu = theta.mean(data);
    let scale = 2.0 / theta.alpha;
    let mut total = 0.0;
    for i in 0..data.n() {
        let r = 0.5 * (data.y()[i] - mu[i]);
        let sh = scale * r.sinh();
        total += (scale * r.cosh()).ln() - 0.5 * sh * sh;
    }
    total
}

/// Gradient of [`loglik`], split into the `beta` and `alpha` parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub beta: DVector<f64>,
    pub alpha: f64,
}

/// `U_beta = X' s / 2`, `U_alpha = -n/alpha + sum xi2^2 / alpha`.
pub fn score(theta: &Theta, data: &Dataset) -> Score {
    let v = xi(theta, data);
    let beta = 0.5 * data.design().tr_mul(&v.s);
    let alpha = (-(data.n() as f64) + v.xi2.norm_squared()) / theta.alpha;
    Score { beta, alpha }
}

/// Log-likelihood and score in one pass over the data.
pub fn loglik_and_score(theta: &Theta, data: &Dataset) -> (f64, Score) {
    let mu = theta.mean(data);
    let scale = 2.0 / theta.alpha;
    let n = data.n();
    let mut ll = 0.0;
    let mut sum_xi2_sq = 0.0;
    let mut s = DVector::zeros(n);
    for i in 0..n {
        let r = 0.5 * (data.y()[i] - mu[i]);
        let c = scale * r.cosh();
        let sh = scale * r.sinh();
        ll += c.ln() - 0.5 * sh * sh;
        sum_xi2_sq += sh * sh;
        s[i] = c * sh - sh / c;
    }
    let beta = 0.5 * data.design().tr_mul(&s);
    let alpha = (sum_xi2_sq - n as f64) / theta.alpha;
    (ll, Score { beta, alpha })
}

/// Expected information; `beta` and `alpha` are orthogonal so only the
/// diagonal blocks are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    /// `psi(alpha) X'X / 4`
    pub beta: DMatrix<f64>,
    /// `2n / alpha^2`
    pub alpha: f64,
}

impl FisherInfo {
    /// Dense `(p+1) x (p+1)` matrix with `alpha` last.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let p = self.beta.nrows();
        let mut m = DMatrix::zeros(p + 1, p + 1);
        m.view_mut((0, 0), (p, p)).copy_from(&self.beta);
        m[(p, p)] = self.alpha;
        m
    }
}

pub fn fisher_info(theta: &Theta, data: &Dataset) -> Result<FisherInfo> {
    let w = psi(theta.alpha)?;
    let xtx = data.design().tr_mul(data.design());
    Ok(FisherInfo {
        beta: xtx * (0.25 * w),
        alpha: 2.0 * data.n() as f64 / (theta.alpha * theta.alpha),
    })
}
