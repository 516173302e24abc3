//! Scalar special functions and the chi-square family.
//!
//! `erf`, `erfc` and `ln_gamma` come from `libm`; everything built on top
//! of them (the scaled complementary error function, the information
//! weight `psi`, the regularized incomplete gamma, central and noncentral
//! chi-square CDFs, densities and quantiles) lives here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Poisson tail mass below which the noncentral mixture is truncated.
const MIXTURE_TAIL: f64 = 1e-14;

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)`, accurate in the right tail.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// Finite for every finite `x >= 0`; for large arguments it decays like
/// `1 / (x sqrt(pi))` instead of under/overflowing.
pub fn erfcx(x: f64) -> f64 {
    if x < 4.0 {
        // exp(x^2) only loses ~x^2 ulps here
        return (x * x).exp() * erfc(x);
    }
    // Continued fraction
    //   erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated with the modified Lentz algorithm.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * SQRT_PI)
}

/// Information weight of the sinh-normal log-lifetime model:
/// `psi(a) = 2 + 4/a^2 - (sqrt(2 pi)/a) {1 - erf(sqrt(2)/a)} exp(2/a^2)`.
///
/// The product `{1 - erf} exp` is evaluated as `erfcx(sqrt(2)/a)`, which
/// keeps the value finite for arbitrarily small shapes.
pub fn psi(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("psi requires alpha > 0, got {alpha}")));
    }
    let z = std::f64::consts::SQRT_2 / alpha;
    Ok(2.0 + 4.0 / (alpha * alpha) - SQRT_2PI / alpha * erfcx(z))
}

/// `psi` evaluated literally as `erfc(z) * exp(z^2)` with `z = sqrt(2)/alpha`.
///
/// Returns NaN once `exp(2/alpha^2)` overflows, roughly for `alpha < 0.053`;
/// kept as the second route for cross-checks.
pub fn psi_unscaled(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("psi requires alpha > 0, got {alpha}")));
    }
    let z = std::f64::consts::SQRT_2 / alpha;
    Ok(2.0 + 4.0 / (alpha * alpha)
        - SQRT_2PI / alpha * erfc(z) * (2.0 / (alpha * alpha)).exp())
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Central chi-square CDF with `df` degrees of freedom.
pub fn chi2_cdf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_p(0.5 * df as f64, 0.5 * x)
}

/// Central chi-square survival function `1 - CDF`, computed without cancellation.
pub fn chi2_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df as f64, 0.5 * x)
}

/// Central chi-square density.
pub fn chi2_pdf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * df as f64;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Degrees of freedom and noncentrality of a chi-square law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSqSpec {
    pub df: u32,
    pub noncentrality: f64,
}

impl ChiSqSpec {
    pub fn new(df: u32, noncentrality: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::Domain("chi-square degrees of freedom must be >= 1".into()));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(Error::Domain(format!(
                "noncentrality must be finite and >= 0, got {noncentrality}"
            )));
        }
        Ok(Self { df, noncentrality })
    }

    pub fn central(df: u32) -> Result<Self> {
        Self::new(df, 0.0)
    }
}

/// Sums `w_j f(j)` over the Poisson(`half_lambda`) weights, starting at the
/// mode and walking outwards until the neglected tail mass is below
/// [`MIXTURE_TAIL`].
fn poisson_mixture(half_lambda: f64, mut f: impl FnMut(u64) -> f64) -> f64 {
    let mode = half_lambda.floor();
    let w_mode = (-half_lambda + mode * half_lambda.ln() - ln_gamma(mode + 1.0)).exp();
    let mode = mode as u64;

    let mut total = w_mode * f(mode);

    // downwards: w_{j-1} = w_j * j / h
    let mut w = w_mode;
    let mut j = mode;
    while j > 0 {
        w *= j as f64 / half_lambda;
        j -= 1;
        total += w * f(j);
        // remaining terms shrink at least geometrically with ratio j/h
        let ratio = j as f64 / half_lambda;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < MIXTURE_TAIL {
            break;
        }
    }

    // upwards: w_{j+1} = w_j * h / (j + 1)
    let mut w = w_mode;
    let mut j = mode;
    loop {
        w *= half_lambda / (j + 1) as f64;
        j += 1;
        total += w * f(j);
        let ratio = half_lambda / (j + 1) as f64;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < MIXTURE_TAIL {
            break;
        }
    }
    total
}

/// Noncentral chi-square CDF `G_{m,lambda}(x)`.
pub fn nc_chi2_cdf(x: f64, spec: &ChiSqSpec) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-square CDF requires x >= 0, got {x}")));
    }
    if spec.noncentrality == 0.0 {
        return Ok(chi2_cdf(x, spec.df));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let a = 0.5 * spec.df as f64;
    let y = 0.5 * x;
    let value = poisson_mixture(0.5 * spec.noncentrality, |j| gamma_p(a + j as f64, y));
    Ok(value.clamp(0.0, 1.0))
}

/// Noncentral chi-square density `g_{m,lambda}(x)`.
pub fn nc_chi2_pdf(x: f64, spec: &ChiSqSpec) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("chi-square density requires x > 0, got {x}")));
    }
    if spec.noncentrality == 0.0 {
        return Ok(chi2_pdf(x, spec.df));
    }
    let value = poisson_mixture(0.5 * spec.noncentrality, |j| {
        chi2_pdf(x, spec.df + 2 * j as u32)
    });
    Ok(value.max(0.0))
}

/// Inverse of the central chi-square CDF.
///
/// Safeguarded Newton iteration inside a bisection bracket; the returned
/// point satisfies `|CDF(q) - prob| <= 1e-10`.
pub fn chi2_quantile(prob: f64, df: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&prob) {
        return Err(Error::Domain(format!("quantile requires prob in [0, 1), got {prob}")));
    }
    if df == 0 {
        return Err(Error::Domain("chi-square degrees of freedom must be >= 1".into()));
    }
    if prob == 0.0 {
        return Ok(0.0);
    }

    let mut lo = 0.0;
    let mut hi = (df as f64).max(1.0);
    while chi2_cdf(hi, df) < prob {
        lo = hi;
        hi *= 2.0;
    }

    let mut q = 0.5 * (lo + hi);
    for _ in 0..300 {
        let resid = chi2_cdf(q, df) - prob;
        if resid.abs() < 1e-14 {
            break;
        }
        if resid < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let density = chi2_pdf(q, df);
        let newton = q - resid / density;
        q = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(q)
}

/// Upper `level` critical value of the central chi-square: `chi2_quantile(1 - level, df)`.
pub fn chi2_critical(level: f64, df: u32) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    chi2_quantile(1.0 - level, df)
}
