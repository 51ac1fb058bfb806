//! Simulation designs for the Monte Carlo studies.
//!
//! Both benchmark designs draw a short panel (initial period plus three
//! observed periods) from the latent-utility model with a linear time trend,
//! scaled-logistic errors with unit variance, and an individual effect
//! equal to the average of the individual's covariate draws, which ties the
//! fixed effect to the regressors. The trend enters the emitted dataset as
//! an ordinary covariate column with value `t - 2`, so the estimator treats
//! its coefficient as one more slope.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::panel::{Coefficients, IndividualRecord, PanelDataset, Period};
use crate::seed;

/// Number of periods drawn per individual (initial period plus three).
const N_PERIODS: usize = 4;

/// Distribution of the special regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZDist {
    /// Standard normal.
    StandardNormal,
    /// Laplace with location 0 and scale sqrt(2)/2, i.e. unit variance but
    /// heavier tails than the normal.
    Laplace,
}

impl ZDist {
    pub fn label(&self) -> &'static str {
        match self {
            ZDist::StandardNormal => "norm",
            ZDist::Laplace => "lap",
        }
    }

    fn id(&self) -> u64 {
        match self {
            ZDist::StandardNormal => 0,
            ZDist::Laplace => 1,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ZDist::StandardNormal => rng.sample(StandardNormal),
            ZDist::Laplace => {
                let u: f64 = rng.sample(Open01);
                let scale = std::f64::consts::SQRT_2 / 2.0;
                if u < 0.5 {
                    scale * (2.0 * u).ln()
                } else {
                    -scale * (2.0 * (1.0 - u)).ln()
                }
            }
        }
    }
}

/// A simulation design: sample size, seed, covariate layout, and the true
/// coefficient point.
///
/// `theta_true.slopes` holds the random-covariate slopes followed by the
/// trend coefficient, matching the column layout of the emitted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n: usize,
    pub seed: u64,
    pub z_dist: ZDist,
    /// Number of random covariates (1 in Design 1, 2 in Design 2); the
    /// trend column comes on top of these.
    pub n_covariates: usize,
    /// Standard deviation of each random covariate draw.
    pub x_std: f64,
    pub theta_true: Coefficients,
}

impl DesignSpec {
    /// Benchmark design with one covariate:
    /// (gamma, beta_1, delta, varpi) = (2, 2, 1, 2) / sqrt(13).
    pub fn design1(z_dist: ZDist, n: usize, seed: u64) -> Self {
        let s = 13.0_f64.sqrt();
        Self {
            n,
            seed,
            z_dist,
            n_covariates: 1,
            x_std: 1.0,
            theta_true: Coefficients::new(2.0 / s, vec![2.0 / s, 1.0 / s], 2.0 / s),
        }
    }

    /// Higher-dimensional design with two covariates whose variances halve
    /// so their sum matches Design 1:
    /// (gamma, beta_1, beta_2, delta, varpi) = (2, 2, 2, 1, 2) / sqrt(17).
    pub fn design2(z_dist: ZDist, n: usize, seed: u64) -> Self {
        let s = 17.0_f64.sqrt();
        Self {
            n,
            seed,
            z_dist,
            n_covariates: 2,
            x_std: 0.5_f64.sqrt(),
            theta_true: Coefficients::new(2.0 / s, vec![2.0 / s, 2.0 / s, 1.0 / s], 2.0 / s),
        }
    }

    pub fn by_name(name: &str, z_dist: ZDist, n: usize, seed: u64) -> Result<Self> {
        match name {
            "d1" | "design1" => Ok(Self::design1(z_dist, n, seed)),
            "d2" | "design2" => Ok(Self::design2(z_dist, n, seed)),
            other => Err(Error::Domain(format!("unknown design `{other}` (expected d1 or d2)"))),
        }
    }

    /// Covariate count of the emitted dataset, including the trend column.
    pub fn p(&self) -> usize {
        self.n_covariates + 1
    }

    /// Stable tag for seed derivation and table metadata.
    pub fn design_id(&self) -> u64 {
        (self.n_covariates as u64) << 8 | self.z_dist.id()
    }

    pub fn label(&self) -> String {
        format!("d{}", self.n_covariates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_covariates == 0 {
            return Err(Error::Domain("design needs at least one covariate".into()));
        }
        if self.x_std <= 0.0 {
            return Err(Error::Domain("x_std must be positive".into()));
        }
        if self.theta_true.slopes.len() != self.p() {
            return Err(Error::Domain(format!(
                "theta_true has {} slopes, expected {} (covariates plus trend)",
                self.theta_true.slopes.len(),
                self.p()
            )));
        }
        if (self.theta_true.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "theta_true must have unit norm, got {}",
                self.theta_true.norm()
            )));
        }
        Ok(())
    }

    /// Coefficient names in the reporting order: slopes of the random
    /// covariates, then the lag, trend, and special-regressor coefficients.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_covariates).map(|k| format!("beta{k}")).collect();
        names.push("gamma".into());
        names.push("delta".into());
        names.push("varpi".into());
        names
    }

    /// Reorder a coefficient point into the reporting order.
    pub fn table_order(&self, theta: &Coefficients) -> Vec<f64> {
        let mut v: Vec<f64> = theta.slopes[..self.n_covariates].to_vec();
        v.push(theta.lag);
        v.push(theta.slopes[self.n_covariates]);
        v.push(theta.special);
        v
    }
}

/// Value of the time-trend regressor at period `t`.
pub fn trend_regressor(t: i64) -> f64 {
    (t - 2) as f64
}

/// CDF of the unit-variance scaled-logistic error at `v`.
pub(crate) fn error_cdf(v: f64) -> f64 {
    1.0 / (1.0 + (-v * PI / 3.0_f64.sqrt()).exp())
}

fn draw_error(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.sample(Open01);
    (3.0_f64.sqrt() / PI) * (u / (1.0 - u)).ln()
}

/// Latent draws for one individual: full covariate rows (trend included),
/// special regressor, errors, and the individual effect.
pub(crate) struct LatentDraw {
    pub alpha: f64,
    /// `x[t]` has length `p` (random covariates then trend), t = 0..=3.
    pub x: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Deterministic per-individual draw. Lane 0 carries covariates and errors,
/// lane 1 the special regressor, so switching the z distribution leaves the
/// other draws untouched (common random numbers across designs).
pub(crate) fn draw_latents(spec: &DesignSpec, individual: u64) -> LatentDraw {
    let mut core = seed::individual_rng(spec.seed, individual, 0);
    let mut zlane = seed::individual_rng(spec.seed, individual, 1);

    let mut x = Vec::with_capacity(N_PERIODS);
    let mut alpha = 0.0;
    for t in 0..N_PERIODS {
        let mut row = Vec::with_capacity(spec.p());
        for _ in 0..spec.n_covariates {
            let draw: f64 = core.sample::<f64, _>(StandardNormal) * spec.x_std;
            alpha += draw;
            row.push(draw);
        }
        row.push(trend_regressor(t as i64));
        x.push(row);
    }
    alpha /= 4.0;

    let eps: Vec<f64> = (0..N_PERIODS).map(|_| draw_error(&mut core)).collect();
    let z: Vec<f64> = (0..N_PERIODS).map(|_| spec.z_dist.sample(&mut zlane)).collect();

    LatentDraw { alpha, x, z, eps }
}

/// Latent utility index excluding the error: individual effect, lag term,
/// slopes (trend included), and the special regressor.
pub(crate) fn utility_index(spec: &DesignSpec, draw: &LatentDraw, t: usize, y_prev: Option<u8>) -> f64 {
    let theta = &spec.theta_true;
    let mut v = draw.alpha + theta.special * draw.z[t];
    if let Some(prev) = y_prev {
        v += theta.lag * f64::from(prev);
    }
    for (b, x) in theta.slopes.iter().zip(&draw.x[t]) {
        v += b * x;
    }
    v
}

fn simulate_individual(spec: &DesignSpec, individual: u64) -> (IndividualRecord, f64) {
    let draw = draw_latents(spec, individual);

    let y0 = u8::from(utility_index(spec, &draw, 0, None) >= draw.eps[0]);
    let mut years = Vec::with_capacity(N_PERIODS - 1);
    let mut y_prev = y0;
    for t in 1..N_PERIODS {
        let y = u8::from(utility_index(spec, &draw, t, Some(y_prev)) >= draw.eps[t]);
        years.push(Period {
            t: t as i64,
            y,
            x: draw.x[t].clone(),
            z: draw.z[t],
        });
        y_prev = y;
    }

    (
        IndividualRecord {
            id: individual.to_string(),
            t0: 0,
            y0,
            periods: years,
        },
        draw.alpha,
    )
}

/// Simulate a design. Output is bitwise reproducible for a given spec and
/// independent of the worker-thread count; individual `i` receives the same
/// draws no matter how large `n` is.
pub fn simulate(spec: &DesignSpec) -> PanelDataset {
    simulate_with_alphas(spec).0
}

/// As [`simulate`], additionally returning the latent individual effects
/// (used by diagnostics and the moment tests).
pub fn simulate_with_alphas(spec: &DesignSpec) -> (PanelDataset, Vec<f64>) {
    let rows = exec::indexed_map(spec.n, |i| simulate_individual(spec, i as u64));
    let mut individuals = Vec::with_capacity(spec.n);
    let mut alphas = Vec::with_capacity(spec.n);
    for (ind, alpha) in rows {
        individuals.push(ind);
        alphas.push(alpha);
    }
    (PanelDataset { individuals, p: spec.p() }, alphas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;

    #[test]
    fn design_constants_are_normalized() {
        let d1 = DesignSpec::design1(ZDist::StandardNormal, 10, 0);
        assert!(d1.validate().is_ok());
        let s = 13.0_f64.sqrt();
        assert_relative_eq!(d1.theta_true.lag, 2.0 / s);
        assert_relative_eq!(d1.theta_true.slopes[0], 2.0 / s);
        assert_relative_eq!(d1.theta_true.slopes[1], 1.0 / s);
        assert_relative_eq!(d1.theta_true.special, 2.0 / s);
        assert!((d1.theta_true.norm() - 1.0).abs() < 1e-12);

        let d2 = DesignSpec::design2(ZDist::Laplace, 10, 0);
        assert!(d2.validate().is_ok());
        assert!((d2.theta_true.norm() - 1.0).abs() < 1e-12);
        assert_relative_eq!(d2.theta_true.lag, 2.0 / 17.0_f64.sqrt());
    }

    #[test]
    fn trend_values() {
        assert_eq!(trend_regressor(2), 0.0);
        assert_eq!(trend_regressor(0), -2.0);
        assert_eq!(trend_regressor(3), 1.0);
    }

    #[test]
    fn trend_column_in_dataset_is_t_minus_2() {
        let ds = simulate(&DesignSpec::design1(ZDist::StandardNormal, 50, 3));
        for ind in &ds.individuals {
            for period in &ind.periods {
                assert_eq!(period.x[1], (period.t - 2) as f64);
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_and_prefix_stable() {
        let spec = DesignSpec::design1(ZDist::StandardNormal, 200, 7);
        let a = simulate(&spec);
        let b = simulate(&spec);
        assert_eq!(a, b);

        // Growing n must not reshuffle earlier individuals.
        let big = simulate(&DesignSpec { n: 400, ..spec.clone() });
        assert_eq!(&big.individuals[..200], &a.individuals[..]);
    }

    #[test]
    fn covariate_and_z_moments_match_their_laws() {
        // One million marginal draws per variable, 1% tolerance.
        let n = 334_000;
        for z_dist in [ZDist::StandardNormal, ZDist::Laplace] {
            let ds = simulate(&DesignSpec::design1(z_dist, n, 11));
            let xs: Vec<f64> = ds
                .individuals
                .iter()
                .flat_map(|i| i.periods.iter().map(|p| p.x[0]))
                .collect();
            let zs: Vec<f64> = ds
                .individuals
                .iter()
                .flat_map(|i| i.periods.iter().map(|p| p.z))
                .collect();
            assert!(xs.len() >= 1_000_000);
            let var_x = stats::sample_std(&xs).powi(2);
            let var_z = stats::sample_std(&zs).powi(2);
            assert!((var_x - 1.0).abs() < 0.01, "Var(x) = {var_x} under {z_dist:?}");
            assert!((var_z - 1.0).abs() < 0.01, "Var(z) = {var_z} under {z_dist:?}");
        }
    }

    #[test]
    fn error_law_has_unit_variance_and_matching_cdf() {
        let mut rng = crate::seed::rng(5, &[99]);
        let draws: Vec<f64> = (0..1_000_000).map(|_| draw_error(&mut rng)).collect();
        let var = stats::sample_std(&draws).powi(2);
        // 3 standard errors of the sample variance of this law.
        assert!((var - 1.0).abs() < 0.01, "error variance {var}");
        let below: f64 =
            draws.iter().filter(|&&e| e <= 0.5).count() as f64 / draws.len() as f64;
        assert!((below - error_cdf(0.5)).abs() < 0.005);
    }

    #[test]
    fn zero_coefficients_give_half_probability_per_cell() {
        // With every coefficient at zero the choice reduces to
        // 1{alpha >= eps}; symmetry makes each cell a fair coin.
        let spec = DesignSpec {
            n: 1_000_000,
            seed: 13,
            z_dist: ZDist::StandardNormal,
            n_covariates: 1,
            x_std: 1.0,
            theta_true: Coefficients::new(0.0, vec![0.0, 0.0], 0.0),
        };
        let ds = simulate(&spec);
        for t in 0..4 {
            let freq = if t == 0 {
                ds.individuals.iter().map(|i| f64::from(i.y0)).sum::<f64>() / spec.n as f64
            } else {
                ds.individuals.iter().map(|i| f64::from(i.periods[t - 1].y)).sum::<f64>()
                    / spec.n as f64
            };
            assert!((freq - 0.5).abs() < 0.002, "cell t={t}: frequency {freq}");
        }
    }

    #[test]
    fn alpha_correlates_with_covariates_by_construction() {
        let spec = DesignSpec::design1(ZDist::StandardNormal, 20_000, 17);
        let (ds, alphas) = simulate_with_alphas(&spec);
        let x1: Vec<f64> = ds.individuals.iter().map(|i| i.periods[0].x[0]).collect();
        let corr = stats::correlation(&alphas, &x1);
        assert!(corr > 0.4, "corr(alpha, x_1) = {corr}");
    }

    #[test]
    fn flipping_the_lag_coefficient_changes_transition_behavior() {
        let n = 100_000;
        let spec = DesignSpec::design1(ZDist::StandardNormal, n, 23);
        let mut flipped = spec.clone();
        flipped.theta_true.lag = -flipped.theta_true.lag;

        let persistence = |ds: &PanelDataset| {
            let stay = ds
                .individuals
                .iter()
                .filter(|i| i.periods[1].y == i.periods[0].y)
                .count();
            stay as f64 / ds.n_individuals() as f64
        };
        let p_pos = persistence(&simulate(&spec));
        let p_neg = persistence(&simulate(&flipped));
        let se = ((p_pos * (1.0 - p_pos) + p_neg * (1.0 - p_neg)) / n as f64).sqrt();
        assert!(
            p_pos - p_neg > 5.0 * se,
            "persistence {p_pos} vs {p_neg}, se {se}"
        );
    }
}
