//! Monte Carlo size and power studies.
//!
//! Covariates are drawn once from U(0,1) per `(n, p, covariate_seed)` and
//! held fixed; the first column is the intercept. Replication `r` of a
//! study draws its errors from its own stream `(master_seed, domain | r)`,
//! so results do not depend on how replications are spread over threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, Restriction};
use crate::hypothesis::{alpha_report, beta_subset_report};
use crate::model::Dataset;
use crate::sinh_normal::{sinh_normal_from_z, SinhNormalParams, VariateStream};
use crate::specfun::chi2_critical;

/// Paper default replication count.
pub const DEFAULT_REPLICATIONS: usize = 15_000;
pub const DEFAULT_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];
/// Studies abort when more than this fraction of replications is excluded.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

// stream id = domain << 56 | replication
const SIZE_DOMAIN: u64 = 0;
const CRITICAL_DOMAIN: u64 = 1;
const POWER_DOMAIN: u64 = 2;

fn stream_id(domain: u64, replication: usize) -> u64 {
    domain << 56 | replication as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub alpha_true: f64,
    pub beta_true: Vec<f64>,
    pub hypothesis: Restriction,
    pub levels: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    pub covariate_seed: u64,
    /// Worker cap; `None` uses every core. Never affects results, so it is
    /// not part of the serialized configuration.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimConfig {
    /// `H0: beta_{p-q+1} = ... = beta_p = 0` with the remaining
    /// coefficients equal to one.
    pub fn beta_null(n: usize, p: usize, q: usize, alpha: f64, master_seed: u64, covariate_seed: u64) -> Self {
        let tested: Vec<usize> = (p.saturating_sub(q)..p).collect();
        let beta_true = (0..p).map(|j| if j + q < p { 1.0 } else { 0.0 }).collect();
        Self {
            n,
            p,
            alpha_true: alpha,
            beta_true,
            hypothesis: Restriction::FixBetaSubset { values: vec![0.0; tested.len()], indices: tested },
            levels: DEFAULT_LEVELS.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            master_seed,
            covariate_seed,
            threads: None,
        }
    }

    /// `H0: alpha = alpha0` with all regression coefficients equal to one.
    pub fn alpha_null(n: usize, p: usize, alpha0: f64, master_seed: u64, covariate_seed: u64) -> Self {
        Self {
            n,
            p,
            alpha_true: alpha0,
            beta_true: vec![1.0; p],
            hypothesis: Restriction::FixAlpha { alpha0 },
            levels: DEFAULT_LEVELS.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            master_seed,
            covariate_seed,
            threads: None,
        }
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_levels(mut self, levels: &[f64]) -> Self {
        self.levels = levels.to_vec();
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        if self.p == 0 || self.n <= self.p {
            return Err(Error::Domain(format!("need n > p >= 1 (n = {}, p = {})", self.n, self.p)));
        }
        if !(self.alpha_true > 0.0 && self.alpha_true.is_finite()) {
            return Err(Error::Domain(format!("alpha must be > 0, got {}", self.alpha_true)));
        }
        if self.beta_true.len() != self.p {
            return Err(Error::Dimension(format!(
                "beta_true has {} entries for p = {}",
                self.beta_true.len(),
                self.p
            )));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("beta_true must be finite".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Domain("levels must lie in (0, 1)".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Domain("thread count must be positive".into()));
        }
        match &self.hypothesis {
            Restriction::None => Err(Error::Domain("a study needs a null hypothesis".into())),
            Restriction::FixBetaSubset { indices, .. } if indices.len() >= self.p => Err(Error::Unsupported(
                "testing every regression coefficient leaves no nuisance block".into(),
            )),
            h => h.validate(self.p),
        }
    }

    /// Whether the simulated truth satisfies the null hypothesis.
    pub fn null_holds(&self) -> bool {
        match &self.hypothesis {
            Restriction::None => true,
            Restriction::FixBetaSubset { indices, values } => {
                indices.iter().zip(values).all(|(&j, &v)| self.beta_true[j] == v)
            }
            Restriction::FixAlpha { alpha0 } => self.alpha_true == *alpha0,
        }
    }

    /// Degrees of freedom of the reference chi-square.
    pub fn df(&self) -> usize {
        match &self.hypothesis {
            Restriction::FixBetaSubset { indices, .. } => indices.len(),
            _ => 1,
        }
    }
}

/// `n x p` design with an intercept column and U(0,1) covariates.
pub fn uniform_design(n: usize, p: usize, covariate_seed: u64) -> DMatrix<f64> {
    let mut stream = VariateStream::new(covariate_seed, 0);
    let mut x = DMatrix::from_element(n, p, 1.0);
    for i in 0..n {
        for j in 1..p {
            x[(i, j)] = stream.uniform();
        }
    }
    x
}

/// `y = X beta + e` with `e_i ~ SN(alpha, 0, 2)`.
pub fn simulate_response(
    design: &DMatrix<f64>,
    beta: &[f64],
    alpha: f64,
    stream: &mut VariateStream,
) -> DVector<f64> {
    let errors = SinhNormalParams { alpha, mu: 0.0 };
    let mut y = design * DVector::from_column_slice(beta);
    for v in y.iter_mut() {
        *v += sinh_normal_from_z(stream.normal(), &errors);
    }
    y
}

/// Fixed design plus the pieces every replication shares.
struct Experiment<'a> {
    config: &'a SimConfig,
    base: Dataset,
}

impl<'a> Experiment<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let x = uniform_design(config.n, config.p, config.covariate_seed);
        let base = Dataset::new(DVector::zeros(config.n), x)?;
        Ok(Self { config, base })
    }

    /// Statistics for one simulated sample, `None` when a fit fails or does
    /// not converge.
    fn statistics(&self, beta: &[f64], alpha: f64, stream: &mut VariateStream) -> Option<[f64; 4]> {
        let y = simulate_response(self.base.design(), beta, alpha, stream);
        let data = self.base.with_response(y).ok()?;
        let unrestricted = fit(&data, &Restriction::None).ok()?;
        let restricted = fit(&data, &self.config.hypothesis).ok()?;
        if !(unrestricted.converged && restricted.converged) {
            return None;
        }
        let report = match &self.config.hypothesis {
            Restriction::FixBetaSubset { indices, values } => {
                beta_subset_report(&data, indices, values, unrestricted, restricted)
            }
            Restriction::FixAlpha { alpha0 } => alpha_report(&data, *alpha0, unrestricted, restricted),
            Restriction::None => unreachable!("validated"),
        };
        let stats = report.ok()?.statistics.as_array();
        stats.iter().all(|s| s.is_finite()).then_some(stats)
    }

    fn null_draws(&self, domain: u64, replications: usize) -> Result<Vec<Option<[f64; 4]>>> {
        let c = self.config;
        run_parallel(c.threads, replications, |r| {
            let mut stream = VariateStream::new(c.master_seed, stream_id(domain, r));
            self.statistics(&c.beta_true, c.alpha_true, &mut stream)
        })
    }
}

fn run_parallel<T, F>(threads: Option<usize>, replications: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..replications).into_par_iter().map(&task).collect()))
}

fn check_exclusions(excluded: usize, replications: usize) -> Result<()> {
    if excluded as f64 > MAX_EXCLUDED_FRACTION * replications as f64 {
        return Err(Error::TooManyFailures { excluded, replications });
    }
    Ok(())
}

/// Percentage binomial standard error for a rate given in percent.
pub fn mc_std_err(rate_percent: f64, replications: usize) -> f64 {
    let r = rate_percent / 100.0;
    100.0 * (r * (1.0 - r) / replications as f64).sqrt()
}

/// Null rejection rates in percent, `rates[statistic][level]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTable {
    pub config: SimConfig,
    pub levels: Vec<f64>,
    /// Asymptotic critical values, one per level.
    pub critical_values: Vec<f64>,
    pub rates: [Vec<f64>; 4],
    pub mc_std_err: [Vec<f64>; 4],
    /// Replications entering the rates.
    pub used: usize,
    pub excluded: usize,
}

impl SizeTable {
    /// Rate of statistic `s` (0-based) at `level`, if that level was run.
    pub fn rate(&self, s: usize, level: f64) -> Option<f64> {
        let k = self.levels.iter().position(|&l| (l - level).abs() < 1e-12)?;
        Some(self.rates[s][k])
    }

    /// One row per (level, statistic).
    pub fn rows(&self) -> Vec<SizeRow> {
        let mut rows = Vec::new();
        for (k, &level) in self.levels.iter().enumerate() {
            for s in 0..4 {
                rows.push(SizeRow {
                    n: self.config.n,
                    p: self.config.p,
                    alpha: self.config.alpha_true,
                    level,
                    statistic: STAT_LABELS[s],
                    rate: self.rates[s][k],
                    mc_std_err: self.mc_std_err[s][k],
                    used: self.used,
                    excluded: self.excluded,
                    master_seed: self.config.master_seed,
                    covariate_seed: self.config.covariate_seed,
                });
            }
        }
        rows
    }
}

pub const STAT_LABELS: [&str; 4] = ["S1", "S2", "S3", "S4"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRow {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub level: f64,
    pub statistic: &'static str,
    pub rate: f64,
    pub mc_std_err: f64,
    pub used: usize,
    pub excluded: usize,
    pub master_seed: u64,
    pub covariate_seed: u64,
}

fn size_table(config: &SimConfig, draws: Vec<Option<[f64; 4]>>) -> Result<SizeTable> {
    let excluded = draws.iter().filter(|d| d.is_none()).count();
    check_exclusions(excluded, config.replications)?;
    let used = draws.len() - excluded;
    let critical_values = config
        .levels
        .iter()
        .map(|&l| chi2_critical(l, config.df() as u32))
        .collect::<Result<Vec<_>>>()?;

    let mut rates: [Vec<f64>; 4] = Default::default();
    let mut errs: [Vec<f64>; 4] = Default::default();
    for s in 0..4 {
        for &c in &critical_values {
            let hits = draws.iter().flatten().filter(|d| d[s] > c).count();
            let rate = 100.0 * hits as f64 / used as f64;
            rates[s].push(rate);
            errs[s].push(mc_std_err(rate, used));
        }
    }
    Ok(SizeTable {
        config: config.clone(),
        levels: config.levels.clone(),
        critical_values,
        rates,
        mc_std_err: errs,
        used,
        excluded,
    })
}

fn require_null(config: &SimConfig) -> Result<()> {
    if !config.null_holds() {
        return Err(Error::Domain("simulated truth violates the null hypothesis".into()));
    }
    Ok(())
}

/// Null rejection rates against asymptotic chi-square critical values for
/// the regression-coefficient test.
pub fn run_size_study(config: &SimConfig) -> Result<SizeTable> {
    if !matches!(config.hypothesis, Restriction::FixBetaSubset { .. }) {
        return Err(Error::Domain("size study needs a coefficient-subset hypothesis".into()));
    }
    require_null(config)?;
    let exp = Experiment::new(config)?;
    size_table(config, exp.null_draws(SIZE_DOMAIN, config.replications)?)
}

/// Null rejection rates for the shape test.
pub fn run_alpha_size_study(config: &SimConfig) -> Result<SizeTable> {
    if !matches!(config.hypothesis, Restriction::FixAlpha { .. }) {
        return Err(Error::Domain("shape size study needs a fix-alpha hypothesis".into()));
    }
    require_null(config)?;
    let exp = Experiment::new(config)?;
    size_table(config, exp.null_draws(SIZE_DOMAIN, config.replications)?)
}

/// Empirical null quantiles, `values[level][statistic]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub config: SimConfig,
    pub levels: Vec<f64>,
    pub values: Vec<[f64; 4]>,
    pub asymptotic: Vec<f64>,
    pub replications: usize,
    pub excluded: usize,
}

impl CriticalValues {
    pub fn at(&self, level: f64) -> Option<[f64; 4]> {
        let k = self.levels.iter().position(|&l| (l - level).abs() < 1e-12)?;
        Some(self.values[k])
    }
}

/// Order statistic `ceil((1 - level) N)` of `sorted` (1-based), so that
/// rejecting above it rejects at most a `level` fraction of the sample.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let k = ((1.0 - level) * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

/// Exact critical values estimated from `replications` null samples at
/// every level in `config.levels`.
pub fn estimate_critical_values(config: &SimConfig, replications: usize) -> Result<CriticalValues> {
    if replications == 0 {
        return Err(Error::Domain("replications must be at least 1".into()));
    }
    require_null(config)?;
    let exp = Experiment::new(config)?;
    let draws = exp.null_draws(CRITICAL_DOMAIN, replications)?;
    let excluded = draws.iter().filter(|d| d.is_none()).count();
    check_exclusions(excluded, replications)?;

    let mut columns: [Vec<f64>; 4] = Default::default();
    for d in draws.iter().flatten() {
        for s in 0..4 {
            columns[s].push(d[s]);
        }
    }
    for c in columns.iter_mut() {
        c.sort_by(f64::total_cmp);
    }
    let values = config
        .levels
        .iter()
        .map(|&l| std::array::from_fn(|s| empirical_quantile(&columns[s], l)))
        .collect();
    let asymptotic = config
        .levels
        .iter()
        .map(|&l| chi2_critical(l, config.df() as u32))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalValues {
        config: config.clone(),
        levels: config.levels.clone(),
        values,
        asymptotic,
        replications,
        excluded,
    })
}

/// Size-corrected rejection rates along a grid of departures from the null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub config: SimConfig,
    pub delta_grid: Vec<f64>,
    /// `powers[statistic][grid point]`, fractions in [0, 1].
    pub powers: [Vec<f64>; 4],
    pub critical_values: [f64; 4],
    /// Excluded replications per grid point.
    pub excluded: Vec<usize>,
}

impl PowerCurve {
    /// Largest `|power_i - power_j|` over statistics and grid points.
    pub fn max_pairwise_difference(&self) -> f64 {
        let mut m: f64 = 0.0;
        for g in 0..self.delta_grid.len() {
            for i in 0..4 {
                for j in i + 1..4 {
                    m = m.max((self.powers[i][g] - self.powers[j][g]).abs());
                }
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<PowerRow> {
        let mut rows = Vec::new();
        for (g, &delta) in self.delta_grid.iter().enumerate() {
            for s in 0..4 {
                rows.push(PowerRow {
                    n: self.config.n,
                    p: self.config.p,
                    delta,
                    statistic: STAT_LABELS[s],
                    critical_value: self.critical_values[s],
                    power: self.powers[s][g],
                    excluded: self.excluded[g],
                    master_seed: self.config.master_seed,
                    covariate_seed: self.config.covariate_seed,
                });
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub statistic: &'static str,
    pub critical_value: f64,
    pub power: f64,
    pub excluded: usize,
    pub master_seed: u64,
    pub covariate_seed: u64,
}

/// Power at `null + delta` for each grid point: every tested coefficient is
/// shifted by `delta`, or the shape for the shape test. Replication `r` uses
/// the same error draws at every grid point.
pub fn run_power_study(config: &SimConfig, delta_grid: &[f64], critical_values: &[f64; 4]) -> Result<PowerCurve> {
    if critical_values.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("critical values must be finite".into()));
    }
    let exp = Experiment::new(config)?;
    let truths: Vec<(Vec<f64>, f64)> = delta_grid
        .iter()
        .map(|&d| match &config.hypothesis {
            Restriction::FixBetaSubset { indices, values } => {
                let mut beta = config.beta_true.clone();
                for (&j, &v) in indices.iter().zip(values) {
                    beta[j] = v + d;
                }
                Ok((beta, config.alpha_true))
            }
            Restriction::FixAlpha { alpha0 } if alpha0 + d > 0.0 => Ok((config.beta_true.clone(), alpha0 + d)),
            Restriction::FixAlpha { .. } => Err(Error::Domain(format!("shape alternative at delta = {d} is not positive"))),
            Restriction::None => unreachable!("validated"),
        })
        .collect::<Result<_>>()?;

    let draws = run_parallel(config.threads, config.replications, |r| {
        let base = VariateStream::new(config.master_seed, stream_id(POWER_DOMAIN, r));
        truths
            .iter()
            .map(|(beta, alpha)| exp.statistics(beta, *alpha, &mut base.clone()))
            .collect::<Vec<_>>()
    })?;

    let mut powers: [Vec<f64>; 4] = Default::default();
    let mut excluded = Vec::with_capacity(delta_grid.len());
    for g in 0..delta_grid.len() {
        let column: Vec<[f64; 4]> = draws.iter().filter_map(|d| d[g]).collect();
        let lost = config.replications - column.len();
        check_exclusions(lost, config.replications)?;
        excluded.push(lost);
        for s in 0..4 {
            let hits = column.iter().filter(|d| d[s] > critical_values[s]).count();
            powers[s].push(hits as f64 / column.len() as f64);
        }
    }
    Ok(PowerCurve {
        config: config.clone(),
        delta_grid: delta_grid.to_vec(),
        powers,
        critical_values: *critical_values,
        excluded,
    })
}
