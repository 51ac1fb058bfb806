//! m-out-of-n bootstrap confidence intervals with a convergence rate
//! estimated by double bootstrap.
//!
//! The naive bootstrap is invalid for this estimator (cube-root-type
//! asymptotics with a non-Gaussian limit), so inference resamples `m << n`
//! individuals, rescales the bootstrap deviations by `m^lambda`, and builds
//! centered-percentile intervals. The rate `lambda` is unknown; it is
//! estimated from the spread decay between two bootstrap sample sizes
//! `m_1 = ceil(n^rho_1)` and `m_2 = ceil(n^rho_2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::objective::TrimSide;
use crate::optimizer::DeConfig;
use crate::panel::{Coefficients, PanelDataset};
use crate::pipeline;
use crate::seed;
use crate::stats;

/// Clipping range for the estimated convergence rate: the theory brackets
/// it between roughly cube-root and root-n, and the double bootstrap is
/// noisy enough to stray outside without a guard.
pub const LAMBDA_MIN: f64 = 0.1;
pub const LAMBDA_MAX: f64 = 0.5;

/// Bootstrap settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Replications per bootstrap pass.
    pub replications: usize,
    /// `m = ceil(n^m_exponent)` for the confidence-interval pass.
    pub m_exponent: f64,
    /// Exponent pair for the double-bootstrap rate estimate.
    pub rate_exponents: (f64, f64),
    /// Confidence levels, e.g. 0.90 and 0.95.
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 500,
            m_exponent: 7.0 / 8.0,
            rate_exponents: (6.0 / 7.0, 7.0 / 8.0),
            levels: vec![0.90, 0.95],
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 50 {
            return Err(Error::Domain(format!(
                "bootstrap needs at least 50 replications, got {}",
                self.replications
            )));
        }
        let (r1, r2) = self.rate_exponents;
        if !(0.0 < r1 && r1 < r2 && r2 < 1.0) {
            return Err(Error::Domain(format!(
                "rate exponents must satisfy 0 < rho1 < rho2 < 1, got ({r1}, {r2})"
            )));
        }
        if !(0.0 < self.m_exponent && self.m_exponent < 1.0) {
            return Err(Error::Domain(format!(
                "m exponent must lie in (0, 1), got {}",
                self.m_exponent
            )));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(0.0 < *l && *l < 1.0)) {
            return Err(Error::Domain("confidence levels must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Bootstrap sample size for a panel of `n` individuals.
    pub fn m_for(&self, n: usize) -> usize {
        ceil_pow(n, self.m_exponent)
    }
}

fn ceil_pow(n: usize, exponent: f64) -> usize {
    ((n as f64).powf(exponent).ceil() as usize).clamp(1, n)
}

/// Draw `m` individuals i.i.d. with replacement.
pub fn resample_individuals(dataset: &PanelDataset, m: usize, seed: u64) -> PanelDataset {
    let mut rng = seed::rng(seed, &[0x5a3]);
    let n = dataset.n_individuals();
    let individuals = (0..m)
        .map(|_| {
            use rand::Rng;
            dataset.individuals[rng.random_range(0..n)].clone()
        })
        .collect();
    PanelDataset { individuals, p: dataset.p }
}

/// Pooled spread of a bootstrap draw matrix around a center point: the
/// median over coefficients of the per-coefficient interquartile range of
/// the deviations. Quantile-based, so it tolerates the heavy-tailed,
/// non-Gaussian draws this estimator produces.
pub fn spread_statistic(draws: &[Vec<f64>], center: &[f64]) -> f64 {
    assert!(!draws.is_empty(), "spread of an empty draw matrix");
    let dim = center.len();
    let per_coefficient: Vec<f64> = (0..dim)
        .map(|k| {
            let deviations: Vec<f64> = draws.iter().map(|d| d[k] - center[k]).collect();
            stats::iqr(&deviations)
        })
        .collect();
    stats::median(&per_coefficient)
}

/// Convergence-rate estimate from two spreads: if the estimator contracts
/// like `m^-lambda`, then `lambda = log(s1/s2) / log(m2/m1)`. Clipped to
/// [`LAMBDA_MIN`, `LAMBDA_MAX`].
pub fn rate_from_spreads(s1: f64, s2: f64, m1: usize, m2: usize) -> Result<f64> {
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(Error::DegenerateSpread);
    }
    if m1 >= m2 {
        return Err(Error::Domain(format!("need m1 < m2, got {m1} >= {m2}")));
    }
    let lambda = (s1 / s2).ln() / (m2 as f64 / m1 as f64).ln();
    Ok(lambda.clamp(LAMBDA_MIN, LAMBDA_MAX))
}

/// One confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// Interval excludes zero (the significance marker).
    pub excludes_zero: bool,
}

/// Intervals for one coefficient at every requested level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientIntervals {
    pub estimate: f64,
    pub levels: Vec<LevelInterval>,
}

/// Bootstrap output: the rate, per-coefficient intervals in ambient order
/// (lag, slopes, special), and the raw draw matrix for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub lambda_hat: f64,
    pub n: usize,
    pub m: usize,
    pub requested_replications: usize,
    pub failed_replications: usize,
    pub theta_hat: Coefficients,
    pub intervals: Vec<CoefficientIntervals>,
    pub draws: Vec<Vec<f64>>,
}

/// Centered-percentile intervals from a draw matrix: with `q*` the
/// empirical quantiles of `m^lambda (theta* - theta_hat)`, the level `1-a`
/// interval is `[theta_hat - n^-lambda q*_{1-a/2}, theta_hat - n^-lambda q*_{a/2}]`.
pub fn intervals_from_draws(
    theta_hat: &Coefficients,
    draws: &[Vec<f64>],
    m: usize,
    n: usize,
    lambda: f64,
    levels: &[f64],
) -> Vec<CoefficientIntervals> {
    let center = theta_hat.to_vec();
    let m_scale = (m as f64).powf(lambda);
    let n_scale = (n as f64).powf(-lambda);
    let mut sorted_levels = levels.to_vec();
    sorted_levels.sort_by(|a, b| a.partial_cmp(b).unwrap());

    center
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let mut scaled: Vec<f64> = draws.iter().map(|d| m_scale * (d[k] - est)).collect();
            scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let levels = sorted_levels
                .iter()
                .map(|&level| {
                    let a = 1.0 - level;
                    let q_lo = stats::quantile_sorted(&scaled, a / 2.0);
                    let q_hi = stats::quantile_sorted(&scaled, 1.0 - a / 2.0);
                    let lower = est - n_scale * q_hi;
                    let upper = est - n_scale * q_lo;
                    LevelInterval { level, lower, upper, excludes_zero: lower > 0.0 || upper < 0.0 }
                })
                .collect();
            CoefficientIntervals { estimate: est, levels }
        })
        .collect()
}

/// Run `replications` bootstrap re-estimations at sample size `m`,
/// returning the successful draws (ambient coefficient vectors) and the
/// failure count. Each replicate recomputes its own trimming threshold from
/// its own resample.
fn bootstrap_draws(
    dataset: &PanelDataset,
    m: usize,
    c: f64,
    side: TrimSide,
    de: &DeConfig,
    replications: usize,
    seed: u64,
    pass_tag: u64,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let outcomes = exec::indexed_map(replications, |b| {
        let resample_seed = seed::derive(seed, &[pass_tag, 0xb00, b as u64]);
        let resample = resample_individuals(dataset, m, resample_seed);
        let de_b = DeConfig { seed: seed::derive(seed, &[pass_tag, 0xde, b as u64]), ..de.clone() };
        pipeline::run_estimate(&resample, c, side, &de_b).map(|out| out.theta.to_vec()).ok()
    });

    let mut draws = Vec::with_capacity(replications);
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Some(d) => draws.push(d),
            None => failed += 1,
        }
    }
    if failed * 10 > replications {
        return Err(Error::FailureRate { failed, total: replications });
    }
    Ok((draws, failed))
}

/// Estimate the convergence rate by double bootstrap: run one bootstrap
/// pass at each of the two sample sizes implied by `cfg.rate_exponents`,
/// measure how the spread shrinks, and convert the decay into a rate.
pub fn estimate_rate(
    dataset: &PanelDataset,
    theta_hat: &Coefficients,
    c: f64,
    side: TrimSide,
    cfg: &BootstrapConfig,
    de: &DeConfig,
) -> Result<f64> {
    cfg.validate()?;
    let n = dataset.n_individuals();
    let m1 = ceil_pow(n, cfg.rate_exponents.0);
    let m2 = ceil_pow(n, cfg.rate_exponents.1);
    if m1 < 30 {
        return Err(Error::Domain(format!(
            "rate estimation needs ceil(n^rho1) >= 30, got m1 = {m1} from n = {n}"
        )));
    }

    let center = theta_hat.to_vec();
    let (draws1, _) =
        bootstrap_draws(dataset, m1, c, side, de, cfg.replications, cfg.seed, 0xa71)?;
    let (draws2, _) =
        bootstrap_draws(dataset, m2, c, side, de, cfg.replications, cfg.seed, 0xa72)?;
    let s1 = spread_statistic(&draws1, &center);
    let s2 = spread_statistic(&draws2, &center);
    rate_from_spreads(s1, s2, m1, m2)
}

/// m-out-of-n bootstrap confidence intervals around `theta_hat`.
pub fn bootstrap_ci(
    dataset: &PanelDataset,
    theta_hat: &Coefficients,
    c: f64,
    side: TrimSide,
    cfg: &BootstrapConfig,
    de: &DeConfig,
    lambda_hat: f64,
) -> Result<BootstrapResult> {
    cfg.validate()?;
    if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda_hat) {
        return Err(Error::Domain(format!(
            "lambda_hat must lie in [{LAMBDA_MIN}, {LAMBDA_MAX}], got {lambda_hat}"
        )));
    }
    let n = dataset.n_individuals();
    let m = cfg.m_for(n);
    let (draws, failed) =
        bootstrap_draws(dataset, m, c, side, de, cfg.replications, cfg.seed, 0xc1)?;
    let intervals = intervals_from_draws(theta_hat, &draws, m, n, lambda_hat, &cfg.levels);
    Ok(BootstrapResult {
        lambda_hat,
        n,
        m,
        requested_replications: cfg.replications,
        failed_replications: failed,
        theta_hat: theta_hat.clone(),
        intervals,
        draws,
    })
}
