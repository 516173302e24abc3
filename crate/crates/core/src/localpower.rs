//! Local power under Pitman alternatives, to order `n^{-1/2}`.
//!
//! For `H0: beta_2 = beta_2^0` every third-order cumulant entering the
//! correction terms is zero in this model, so all four statistics share
//! the power `1 - G_{df,lambda}(x)`; there is deliberately no coefficient
//! table for that family.
//!
//! For `H0: alpha = alpha^0` under `alpha = alpha^0 + eps` the statistics
//! satisfy `P(S_i <= x) = G_{1,lambda}(x) + sum_k b_ik G_{1+2k,lambda}(x)`
//! with `lambda = 2 n eps^2 / alpha^2`. The coefficients are available both
//! from the cumulant sums and from their reduced closed forms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::numerical_rank;
use crate::specfun::{chi2_critical, nc_chi2_cdf, nc_chi2_pdf, psi, ChiSqSpec};

/// Magnitude of the `n^{-1/2}` correction beyond which the expansion is
/// flagged as outside its local regime.
pub const CORRECTION_WARNING: f64 = 0.1;

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Local alternative `beta[tested] = beta_2^0 + epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPitmanSpec {
    pub design: DMatrix<f64>,
    /// Zero-based indices of the tested coefficients.
    pub tested: Vec<usize>,
    pub epsilon: DVector<f64>,
    pub alpha: f64,
    pub level: f64,
}

impl BetaPitmanSpec {
    /// Tests the trailing `epsilon.len()` columns.
    pub fn trailing(design: DMatrix<f64>, epsilon: DVector<f64>, alpha: f64, level: f64) -> Result<Self> {
        let p = design.ncols();
        if epsilon.len() >= p || epsilon.is_empty() {
            return Err(Error::Dimension(format!(
                "need 0 < {} tested coefficients < {p} columns",
                epsilon.len()
            )));
        }
        let tested = (p - epsilon.len()..p).collect();
        let spec = Self { design, tested, epsilon, alpha, level };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if !(self.alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        let p = self.design.ncols();
        if self.tested.is_empty() || self.tested.len() >= p {
            return Err(Error::Unsupported("tested block must be a proper nonempty subset".into()));
        }
        if self.tested.len() != self.epsilon.len() || self.tested.iter().any(|&j| j >= p) {
            return Err(Error::Dimension("tested indices do not match epsilon".into()));
        }
        if numerical_rank(&self.design) < p {
            return Err(Error::RankDeficient { rank: numerical_rank(&self.design), cols: p });
        }
        Ok(())
    }

    fn nuisance(&self) -> Vec<usize> {
        (0..self.design.ncols()).filter(|j| !self.tested.contains(j)).collect()
    }
}

/// `lambda = eps*' K_theta eps*` with
/// `eps* = (K_11^{-1} K_12 eps, -eps, 0)` built from the information blocks.
pub fn beta_noncentrality(spec: &BetaPitmanSpec) -> Result<f64> {
    spec.validate()?;
    let w = 0.25 * psi(spec.alpha)?;
    let nuisance = spec.nuisance();
    let x1 = spec.design.select_columns(nuisance.iter());
    let x2 = spec.design.select_columns(spec.tested.iter());
    let k11 = x1.tr_mul(&x1) * w;
    let k12 = x1.tr_mul(&x2) * w;
    let shift = k11
        .cholesky()
        .ok_or(Error::RankDeficient { rank: 0, cols: nuisance.len() })?
        .solve(&(k12 * &spec.epsilon));

    // eps* in the original column order, alpha coordinate zero
    let p = spec.design.ncols();
    let mut eps_star = DVector::zeros(p);
    for (slot, &j) in nuisance.iter().enumerate() {
        eps_star[j] = shift[slot];
    }
    for (slot, &j) in spec.tested.iter().enumerate() {
        eps_star[j] = -spec.epsilon[slot];
    }
    let k_beta = spec.design.tr_mul(&spec.design) * w;
    Ok(eps_star.dot(&(k_beta * &eps_star)).max(0.0))
}

/// Same noncentrality through the projection form `psi/4 eps' R'R eps`.
pub fn beta_noncentrality_projected(spec: &BetaPitmanSpec) -> Result<f64> {
    spec.validate()?;
    let rtr = crate::hypothesis::residual_cross_product(&spec.design, &spec.tested);
    Ok(0.25 * psi(spec.alpha)? * spec.epsilon.dot(&(rtr * &spec.epsilon)))
}

/// Local power `1 - G_{df,lambda}(chi2_{df, 1-level})`, common to all four statistics.
pub fn beta_local_power(lambda: f64, df: u32, level: f64) -> Result<f64> {
    check_level(level)?;
    let x = chi2_critical(level, df)?;
    Ok(1.0 - nc_chi2_cdf(x, &ChiSqSpec::new(df, lambda)?)?)
}

/// Local alternative `alpha = alpha0 + epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPitmanSpec {
    pub alpha0: f64,
    pub epsilon: f64,
    pub n: usize,
    pub p: usize,
    pub level: f64,
}

impl AlphaPitmanSpec {
    pub fn new(alpha0: f64, epsilon: f64, n: usize, p: usize, level: f64) -> Result<Self> {
        let spec = Self { alpha0, epsilon, n, p, level };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Domain(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if !(self.alpha0 + self.epsilon > 0.0) {
            return Err(Error::Domain("alternative shape alpha0 + epsilon must be > 0".into()));
        }
        if self.n == 0 || self.p == 0 {
            return Err(Error::Domain("n and p must be positive".into()));
        }
        Ok(())
    }

    /// `2 n eps^2 / alpha0^2`
    pub fn noncentrality(&self) -> f64 {
        2.0 * self.n as f64 * self.epsilon * self.epsilon / (self.alpha0 * self.alpha0)
    }
}

/// Expansion coefficients `b[i][k]`: row `i` is statistic S(i+1), column `k`
/// multiplies `G_{1+2k,lambda}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    pub b: [[f64; 4]; 4],
}

impl CoeffTable {
    /// Fills `b[i][0] = -(b[i][1] + b[i][2] + b[i][3])`.
    fn from_tail(tail: [[f64; 3]; 4]) -> Self {
        let mut b = [[0.0; 4]; 4];
        for (row, t) in b.iter_mut().zip(tail) {
            row[1..].copy_from_slice(&t);
            row[0] = -(t[0] + t[1] + t[2]);
        }
        Self { b }
    }

    /// Largest `|sum_k b_ik|` over the rows.
    pub fn max_row_sum(&self) -> f64 {
        self.b
            .iter()
            .map(|r| r.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Reduced closed forms; they involve the design only through `p`.
pub fn alpha_coeffs_reduced(spec: &AlphaPitmanSpec) -> Result<CoeffTable> {
    spec.validate()?;
    let a = spec.alpha0;
    let e = spec.epsilon;
    let n = spec.n as f64;
    let a3 = a * a * a;
    let cubic = n * e.powi(3) / a3; // n eps^3 / alpha^3
    let lin = e / a; // eps / alpha
    let design_term = 2.0 * spec.p as f64 * (2.0 + a * a) * e / (a3 * psi(a)?);

    Ok(CoeffTable::from_tail([
        [-3.0 * cubic - design_term, 4.0 * cubic / 3.0, 0.0],
        [-3.0 * cubic + 2.5 * lin - design_term, 3.0 * cubic - 2.5 * lin, -5.0 * cubic / 3.0],
        [-3.0 * cubic - 2.0 * lin - design_term, 2.0 * lin, 4.0 * cubic / 3.0],
        [-3.0 * cubic - 1.25 * lin - design_term, 1.25 * lin + 0.5 * cubic, 5.0 * cubic / 6.0],
    ]))
}

/// Joint cumulants of log-likelihood derivatives that drive the shape-test
/// expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCumulants {
    /// `E[d^3 l / d alpha^3] = 10 n / alpha^3`
    pub aaa: f64,
    /// `E[(dl/d alpha)(d^2 l / d alpha^2)] = -6 n / alpha^3`
    pub a_aa: f64,
    /// `E[(dl/d alpha)^3] = 8 n / alpha^3`
    pub a_a_a: f64,
    /// `E[d^3 l / d beta_r d beta_s d alpha] = (2 + alpha^2)/alpha^3 X'X`
    pub rs_a: DMatrix<f64>,
    /// `E[(dl/d beta_r)(d^2 l / d beta_s d alpha)] = -rs_a`
    pub r_sa: DMatrix<f64>,
    /// Inverse of the beta information block.
    pub inv_beta_info: DMatrix<f64>,
    /// Inverse of the alpha information, `alpha^2 / (2n)`.
    pub inv_alpha_info: f64,
}

impl AlphaCumulants {
    pub fn new(alpha: f64, design: &DMatrix<f64>) -> Result<Self> {
        let n = design.nrows() as f64;
        let a3 = alpha.powi(3);
        let xtx = design.tr_mul(design);
        let inv_beta_info = (&xtx * (0.25 * psi(alpha)?))
            .cholesky()
            .ok_or(Error::RankDeficient { rank: 0, cols: design.ncols() })?
            .inverse();
        let rs_a = &xtx * ((2.0 + alpha * alpha) / a3);
        Ok(Self {
            aaa: 10.0 * n / a3,
            a_aa: -6.0 * n / a3,
            a_a_a: 8.0 * n / a3,
            r_sa: -&rs_a,
            rs_a,
            inv_beta_info,
            inv_alpha_info: alpha * alpha / (2.0 * n),
        })
    }

    /// `sum_{r,s} m[r,s] kappa^{r,s}`
    pub fn contract(&self, m: &DMatrix<f64>) -> f64 {
        m.component_mul(&self.inv_beta_info).sum()
    }
}

/// Coefficients from the general cumulant expressions evaluated on `design`.
pub fn alpha_coeffs_general(spec: &AlphaPitmanSpec, design: &DMatrix<f64>) -> Result<CoeffTable> {
    spec.validate()?;
    if design.nrows() != spec.n || design.ncols() != spec.p {
        return Err(Error::Dimension(format!(
            "design is {}x{} but the spec says n = {}, p = {}",
            design.nrows(),
            design.ncols(),
            spec.n,
            spec.p
        )));
    }
    if numerical_rank(design) < spec.p {
        return Err(Error::RankDeficient { rank: numerical_rank(design), cols: spec.p });
    }
    let k = AlphaCumulants::new(spec.alpha0, design)?;
    let e = spec.epsilon;
    let e3 = e.powi(3);
    let inv_aa = k.inv_alpha_info;

    let t_rs_a = k.contract(&k.rs_a);
    let t_r_sa = k.contract(&k.r_sa);
    // sum (k_rsa + 2 k_r,sa) k^{r,s}
    let t_mixed = t_rs_a + 2.0 * t_r_sa;

    let b11 = (k.aaa - 2.0 * k.a_a_a) * e3 / 6.0 + t_mixed * e / 2.0 - (k.aaa + k.a_aa) * e3 / 2.0;
    let b12 = k.a_a_a * e3 / 6.0;
    let b13 = 0.0;

    let b21 = (k.aaa + 2.0 * k.a_aa) * e3 / 2.0 - k.a_aa * inv_aa * e
        + t_mixed * e / 2.0
        + (k.aaa + 2.0 * k.a_aa) * inv_aa * e / 2.0
        - (k.aaa + k.a_aa) * e3 / 2.0;
    let b22 = -(k.a_aa * e3 + k.aaa * inv_aa * e) / 2.0;
    let b23 = -k.aaa * e3 / 6.0;

    let b31 = (k.aaa - 2.0 * k.a_a_a) * e3 / 6.0 - k.a_a_a * inv_aa * e / 2.0 + t_mixed * e / 2.0
        - (k.aaa + k.a_aa) * e3 / 2.0;
    let b32 = k.a_a_a * inv_aa * e / 2.0;
    let b33 = k.a_a_a * e3 / 6.0;

    let b41 = -t_rs_a * e / 4.0 - k.aaa * inv_aa * e / 4.0
        + k.a_aa * e3 / 2.0
        + (4.0 * t_r_sa + 3.0 * t_rs_a) * e / 4.0;
    let b42 = k.aaa * inv_aa * e / 4.0 - (k.aaa + 2.0 * k.a_aa) * e3 / 4.0;
    let b43 = k.aaa * e3 / 12.0;

    Ok(CoeffTable::from_tail([
        [b11, b12, b13],
        [b21, b22, b23],
        [b31, b32, b33],
        [b41, b42, b43],
    ]))
}

fn check_statistic(index: usize) -> Result<()> {
    if !(1..=4).contains(&index) {
        return Err(Error::Domain(format!("statistic index must be 1..=4, got {index}")));
    }
    Ok(())
}

/// Expansion of `P(S_i <= x)` for the shape test; `statistic` is 1-based.
/// Not clamped to [0, 1].
pub fn alpha_nonnull_cdf(statistic: usize, x: f64, spec: &AlphaPitmanSpec) -> Result<f64> {
    check_statistic(statistic)?;
    let coeffs = alpha_coeffs_reduced(spec)?;
    nonnull_cdf_with(&coeffs, statistic, x, spec.noncentrality())
}

fn nonnull_cdf_with(coeffs: &CoeffTable, statistic: usize, x: f64, lambda: f64) -> Result<f64> {
    let row = coeffs.b[statistic - 1];
    let mut value = nc_chi2_cdf(x, &ChiSqSpec::new(1, lambda)?)?;
    for (k, b) in row.iter().enumerate() {
        value += b * nc_chi2_cdf(x, &ChiSqSpec::new(1 + 2 * k as u32, lambda)?)?;
    }
    Ok(value)
}

/// Local power `1 - P(S_i <= x)` from the expansion.
pub fn alpha_local_power(statistic: usize, x: f64, spec: &AlphaPitmanSpec) -> Result<f64> {
    Ok(1.0 - alpha_nonnull_cdf(statistic, x, spec)?)
}

/// `Pi_i - Pi_j` for the six pairs `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDifferences {
    pub pi1_pi2: f64,
    pub pi1_pi3: f64,
    pub pi1_pi4: f64,
    pub pi2_pi3: f64,
    pub pi2_pi4: f64,
    pub pi3_pi4: f64,
}

impl PowerDifferences {
    pub const PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

    pub fn as_array(&self) -> [f64; 6] {
        [self.pi1_pi2, self.pi1_pi3, self.pi1_pi4, self.pi2_pi3, self.pi2_pi4, self.pi3_pi4]
    }
}

/// Closed-form power differences
/// `Pi_i - Pi_j = c5 (eps/alpha) g_{5,lambda}(x) + c7 (n eps^3/alpha^3) g_{7,lambda}(x)`.
pub fn alpha_power_differences(spec: &AlphaPitmanSpec, x: f64) -> Result<PowerDifferences> {
    spec.validate()?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("evaluation point must be > 0, got {x}")));
    }
    let lambda = spec.noncentrality();
    let g5 = nc_chi2_pdf(x, &ChiSqSpec::new(5, lambda)?)?;
    let g7 = nc_chi2_pdf(x, &ChiSqSpec::new(7, lambda)?)?;
    let a = spec.alpha0;
    let lin = spec.epsilon / a * g5;
    let cubic = spec.n as f64 * spec.epsilon.powi(3) / a.powi(3) * g7;
    let d = |c5: f64, c7: f64| c5 * lin + c7 * cubic;
    Ok(PowerDifferences {
        pi1_pi2: d(5.0, 10.0 / 3.0),
        pi1_pi3: d(-4.0, -8.0 / 3.0),
        pi1_pi4: d(-2.5, -5.0 / 3.0),
        pi2_pi3: d(-9.0, -6.0),
        pi2_pi4: d(-7.5, -5.0),
        pi3_pi4: d(1.5, 1.0),
    })
}

/// Coefficients, powers and regime diagnostic at the asymptotic critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPowerTable {
    pub spec: AlphaPitmanSpec,
    pub noncentrality: f64,
    pub critical_value: f64,
    pub coefficients: CoeffTable,
    /// `Pi_1..Pi_4`
    pub powers: [f64; 4],
    /// First-order power `1 - G_{1,lambda}(x)` shared by all statistics.
    pub leading_power: f64,
    /// Largest `|Pi_i - leading_power|`.
    pub max_correction: f64,
    /// Set when `max_correction` exceeds [`CORRECTION_WARNING`].
    pub outside_local_regime: bool,
}

pub fn alpha_power_table(spec: &AlphaPitmanSpec) -> Result<AlphaPowerTable> {
    spec.validate()?;
    let x = chi2_critical(spec.level, 1)?;
    let lambda = spec.noncentrality();
    let coefficients = alpha_coeffs_reduced(spec)?;
    let leading = 1.0 - nc_chi2_cdf(x, &ChiSqSpec::new(1, lambda)?)?;
    let mut powers = [0.0; 4];
    for (i, slot) in powers.iter_mut().enumerate() {
        *slot = 1.0 - nonnull_cdf_with(&coefficients, i + 1, x, lambda)?;
    }
    let max_correction = powers.iter().map(|p| (p - leading).abs()).fold(0.0, f64::max);
    Ok(AlphaPowerTable {
        spec: *spec,
        noncentrality: lambda,
        critical_value: x,
        coefficients,
        powers,
        leading_power: leading,
        max_correction,
        outside_local_regime: max_correction > CORRECTION_WARNING,
    })
}
