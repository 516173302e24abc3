//! Birnbaum-Saunders and sinh-normal primitives.
//!
//! If `T ~ BS(alpha, eta)` then `Y = log T ~ SN(alpha, log eta, 2)`, i.e.
//! `(2/alpha) sinh((Y - mu)/2)` is standard normal. The sampler uses that
//! pivot directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and scale of a Birnbaum-Saunders law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSParams {
    pub alpha: f64,
    pub eta: f64,
}

impl BSParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("BS shape must be > 0, got {alpha}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Domain(format!("BS scale must be > 0, got {eta}")));
        }
        Ok(Self { alpha, eta })
    }
}

/// Sinh-normal law with scale fixed at 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinhNormalParams {
    pub alpha: f64,
    pub mu: f64,
}

impl SinhNormalParams {
    pub const SIGMA: f64 = 2.0;

    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("sinh-normal shape must be > 0, got {alpha}")));
        }
        if !mu.is_finite() {
            return Err(Error::Domain("sinh-normal location must be finite".into()));
        }
        Ok(Self { alpha, mu })
    }

    /// The lifetime law of `exp(Y)`.
    pub fn lifetime(&self) -> BSParams {
        BSParams {
            alpha: self.alpha,
            eta: self.mu.exp(),
        }
    }
}

/// Log density of `BS(alpha, eta)` at `t`:
/// `kappa(alpha, eta) t^{-3/2} (t + eta) exp{-tau(t/eta) / (2 alpha^2)}` with
/// `kappa = exp(alpha^{-2}) / (2 alpha sqrt(2 pi eta))` and `tau(z) = z + 1/z`.
pub fn bs_log_density(t: f64, p: &BSParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("BS density requires t > 0, got {t}")));
    }
    let a2 = p.alpha * p.alpha;
    let z = t / p.eta;
    // exp(1/a^2) * exp(-(z + 1/z)/(2 a^2)) = exp(-(sqrt z - 1/sqrt z)^2 / (2 a^2))
    let root = z.sqrt() - 1.0 / z.sqrt();
    let log_kappa = -(2.0 * p.alpha).ln() - 0.5 * (2.0 * std::f64::consts::PI * p.eta).ln();
    Ok(log_kappa - 1.5 * t.ln() + (t + p.eta).ln() - root * root / (2.0 * a2))
}

/// Maps a standard normal `z` to `mu + 2 asinh(alpha z / 2)`.
pub fn sinh_normal_from_z(z: f64, p: &SinhNormalParams) -> f64 {
    p.mu + 2.0 * (0.5 * p.alpha * z).asinh()
}

/// Inverse of [`sinh_normal_from_z`]: `(2/alpha) sinh((y - mu)/2)`.
pub fn sinh_normal_pivot(y: f64, p: &SinhNormalParams) -> f64 {
    2.0 / p.alpha * (0.5 * (y - p.mu)).sinh()
}

/// Draws one sinh-normal variate from `source`.
pub fn sample_sinh_normal(p: &SinhNormalParams, source: &mut VariateStream) -> f64 {
    sinh_normal_from_z(source.normal(), p)
}

/// Deterministic random stream used throughout the simulation code.
///
/// A stream is identified by `(seed, stream_id)`: ChaCha keys on the seed
/// and uses the 64-bit stream id as its nonce, so every id gives an
/// independent sequence that does not depend on which thread consumes it.
#[derive(Debug, Clone)]
pub struct VariateStream {
    rng: ChaCha12Rng,
}

impl VariateStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Child stream `id` of the same master seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        let mut rng = self.rng.clone();
        rng.set_stream(stream_id);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        self.normal_from_uniforms()
    }

    /// Standard normal generated from the underlying uniform source.
    pub fn normal_from_uniforms(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}
