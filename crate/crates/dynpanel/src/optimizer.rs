//! Global maximization of the piecewise-constant objective over the unit
//! sphere intersected with the half-cap `w >= iota`.
//!
//! The search runs standard rand/1/bin differential evolution in ambient
//! coordinates; every candidate is normalized onto the sphere (with the
//! sign flipped so the special-regressor coefficient is nonnegative) before
//! evaluation, and candidates that still violate the floor score minus
//! infinity. The objective has zero gradient almost everywhere, so the
//! population's diversity is what carries the search across plateaus.
//!
//! A dense deterministic sphere grid ([`grid_oracle`]) provides an
//! independent reference maximum for low-dimensional test problems.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::objective::{contributes, TrimSpec};
use crate::panel::{Coefficients, WindowSet};
use crate::seed;

/// Differential evolution settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    /// Population size; `None` means `10 * (p + 2)`.
    pub population_size: Option<usize>,
    /// Mutation weight F in (0, 2].
    pub differential_weight: f64,
    /// Crossover rate CR in [0, 1].
    pub crossover_rate: f64,
    pub max_generations: usize,
    /// Stop after this many generations without a best-value improvement.
    pub stagnation_patience: usize,
    /// Feasibility floor for the special-regressor coefficient.
    pub iota: f64,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: None,
            differential_weight: 0.8,
            crossover_rate: 0.9,
            max_generations: 400,
            stagnation_patience: 60,
            iota: 0.01,
            seed: 0,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.population_size {
            if p < 4 {
                return Err(Error::Domain(format!("population_size must be >= 4, got {p}")));
            }
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::Domain(format!(
                "differential_weight must be in (0, 2], got {}",
                self.differential_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Domain(format!(
                "crossover_rate must be in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if !(self.iota > 0.0 && self.iota < 1.0) {
            return Err(Error::Domain(format!("iota must be in (0, 1), got {}", self.iota)));
        }
        if self.max_generations == 0 {
            return Err(Error::Domain("max_generations must be >= 1".into()));
        }
        Ok(())
    }

    /// Population size for an ambient dimension.
    pub fn resolved_population(&self, dim: usize) -> usize {
        self.population_size.unwrap_or(10 * dim).max(4)
    }

    /// Stable fingerprint of every field, recorded next to results so runs
    /// can be reproduced from their sidecars.
    pub fn fingerprint(&self) -> u64 {
        let tags = [
            self.population_size.map(|p| p as u64 + 1).unwrap_or(0),
            self.differential_weight.to_bits(),
            self.crossover_rate.to_bits(),
            self.max_generations as u64,
            self.stagnation_patience as u64,
            self.iota.to_bits(),
            self.seed,
        ];
        crate::seed::derive(0x00d0_c0de, &tags)
    }
}

/// A point projected onto the unit sphere, with its feasibility under the
/// `w >= iota` floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereCandidate {
    pub point: Coefficients,
    pub feasible: bool,
}

/// Project an ambient vector onto the unit sphere. The sign of the whole
/// vector is flipped when the special-regressor coordinate is negative
/// (both signs describe the same ray through the constraint's mirror), and
/// the result is marked infeasible when that coordinate still falls below
/// `iota`.
pub fn normalize_to_sphere(v: &[f64], iota: f64) -> Result<SphereCandidate> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(Error::DegenerateVector);
    }
    let mut unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
    if unit[unit.len() - 1] < 0.0 {
        for x in &mut unit {
            *x = -*x;
        }
    }
    let feasible = unit[unit.len() - 1] >= iota;
    Ok(SphereCandidate { point: Coefficients::from_slice(&unit), feasible })
}

/// Contributing windows flattened for fast repeated evaluation. Only
/// untrimmed switcher windows with the side-appropriate weight survive ---
/// every other window adds zero for any parameter point --- while the
/// divisor keeps counting all individuals.
struct FilteredObjective {
    chis: Vec<f64>,
    signs: Vec<i64>,
    dim: usize,
    n_individuals: f64,
}

impl FilteredObjective {
    fn build(windows: &WindowSet, trim: &TrimSpec) -> Self {
        let dim = windows.dim();
        let mut chis = Vec::new();
        let mut signs = Vec::new();
        for w in windows.windows() {
            if contributes(w, trim) {
                debug_assert_eq!(w.chi_bar.len(), dim);
                chis.extend_from_slice(&w.chi_bar);
                signs.push(i64::from(w.d_switch));
            }
        }
        Self { chis, signs, dim, n_individuals: windows.n_individuals() as f64 }
    }

    fn len(&self) -> usize {
        self.signs.len()
    }

    /// Signed count for a unit vector with nonnegative last coordinate.
    fn count_unit(&self, v: &[f64]) -> i64 {
        let mut acc = 0;
        for (j, &s) in self.signs.iter().enumerate() {
            let chi = &self.chis[j * self.dim..(j + 1) * self.dim];
            let dot: f64 = chi.iter().zip(v).map(|(a, b)| a * b).sum();
            if dot > 0.0 {
                acc += s;
            }
        }
        acc
    }

    /// Signed count for a raw ambient candidate, or `None` when infeasible.
    /// The indicator only depends on the sign of the inner product, so the
    /// candidate is not materialized on the sphere; the sign flip is folded
    /// into the comparison.
    fn count_ambient(&self, v: &[f64], iota: f64) -> Option<i64> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        let w = v[self.dim - 1] / norm;
        if w.abs() < iota {
            return None;
        }
        let positive = w >= 0.0;
        let mut acc = 0;
        for (j, &s) in self.signs.iter().enumerate() {
            let chi = &self.chis[j * self.dim..(j + 1) * self.dim];
            let dot: f64 = chi.iter().zip(v).map(|(a, b)| a * b).sum();
            let agreed = if positive { dot > 0.0 } else { dot < 0.0 };
            if agreed {
                acc += s;
            }
        }
        Some(acc)
    }

    fn value(&self, count: i64) -> f64 {
        count as f64 / self.n_individuals
    }
}

/// Result of a differential evolution run.
#[derive(Debug, Clone)]
pub struct DeOutcome {
    pub theta: Coefficients,
    pub value: f64,
    /// Best value after initialization and after each generation;
    /// nondecreasing.
    pub trace: Vec<f64>,
    pub generations_run: usize,
    pub restarts_used: u32,
}

const MAX_RESTARTS: u32 = 3;

fn pick_distinct(rng: &mut ChaCha8Rng, pop: usize, forbidden: usize) -> [usize; 3] {
    let mut out = [forbidden; 3];
    for k in 0..3 {
        loop {
            let cand = rng.random_range(0..pop);
            if cand != forbidden && !out[..k].contains(&cand) {
                out[k] = cand;
                break;
            }
        }
    }
    out
}

/// Maximize the trimmed objective with rand/1/bin differential evolution.
///
/// Fully reproducible given the config seed and independent of the worker
/// thread count: trial construction consumes the RNG sequentially while the
/// (pure) fitness evaluations fan out in parallel. The reported best point
/// is the first-found member of the best plateau; later ties never replace
/// it.
pub fn maximize(windows: &WindowSet, trim: &TrimSpec, cfg: &DeConfig) -> Result<DeOutcome> {
    cfg.validate()?;
    let dim = windows.dim();
    let filtered = FilteredObjective::build(windows, trim);
    if filtered.len() == 0 {
        return Err(Error::NoSwitchers);
    }
    let pop = cfg.resolved_population(dim);

    for restart in 0..=MAX_RESTARTS {
        let mut rng = seed::rng(cfg.seed, &[0xde0, u64::from(restart)]);
        let mut members: Vec<Vec<f64>> = (0..pop)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut counts: Vec<Option<i64>> =
            exec::indexed_map(pop, |i| filtered.count_ambient(&members[i], cfg.iota));

        // First feasible maximum is the incumbent.
        let mut best: Option<(Vec<f64>, i64)> = None;
        for (member, count) in members.iter().zip(&counts) {
            if let Some(c) = *count {
                if best.as_ref().map_or(true, |(_, bc)| c > *bc) {
                    best = Some((member.clone(), c));
                }
            }
        }
        let Some((mut best_vec, mut best_count)) = best else {
            continue; // every member infeasible: reseed
        };

        let mut trace = vec![filtered.value(best_count)];
        let mut stagnant = 0usize;
        let mut generations_run = 0usize;

        for _ in 0..cfg.max_generations {
            let mut trials: Vec<Vec<f64>> = Vec::with_capacity(pop);
            for i in 0..pop {
                let [a, b, c] = pick_distinct(&mut rng, pop, i);
                let j_rand = rng.random_range(0..dim);
                let mut trial = Vec::with_capacity(dim);
                for j in 0..dim {
                    let donor = members[a][j]
                        + cfg.differential_weight * (members[b][j] - members[c][j]);
                    let cross = rng.random::<f64>() < cfg.crossover_rate;
                    trial.push(if cross || j == j_rand { donor } else { members[i][j] });
                }
                trials.push(trial);
            }

            let trial_counts: Vec<Option<i64>> =
                exec::indexed_map(pop, |i| filtered.count_ambient(&trials[i], cfg.iota));

            let mut improved = false;
            for (i, trial) in trials.into_iter().enumerate() {
                let accept = match (trial_counts[i], counts[i]) {
                    // Ties move so the population can drift across plateaus.
                    (Some(t), Some(c)) => t >= c,
                    (Some(_), None) => true,
                    (None, _) => false,
                };
                if accept {
                    if let Some(t) = trial_counts[i] {
                        if t > best_count {
                            best_count = t;
                            best_vec = trial.clone();
                            improved = true;
                        }
                    }
                    members[i] = trial;
                    counts[i] = trial_counts[i];
                }
            }

            generations_run += 1;
            trace.push(filtered.value(best_count));
            if improved {
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= cfg.stagnation_patience {
                    break;
                }
            }
        }

        let candidate = normalize_to_sphere(&best_vec, cfg.iota)?;
        debug_assert!(candidate.feasible);
        return Ok(DeOutcome {
            theta: candidate.point,
            value: filtered.value(best_count),
            trace,
            generations_run,
            restarts_used: restart,
        });
    }

    Err(Error::NoFeasiblePoint { restarts: MAX_RESTARTS, iota: cfg.iota })
}

/// Deterministic near-uniform grid on the feasible cap of the unit sphere.
///
/// Dimension 3 uses a Fibonacci lattice; other dimensions up to 4 use a
/// fixed-seed Gaussian construction (normalized Gaussians are uniform on
/// the sphere). Points from the lower half are mirrored onto the cap.
fn sphere_grid(dim: usize, resolution: usize, iota: f64) -> Vec<Vec<f64>> {
    let mut points = Vec::with_capacity(resolution);
    if dim == 3 {
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        for k in 0..resolution {
            let w = 1.0 - 2.0 * (k as f64 + 0.5) / resolution as f64;
            let r = (1.0 - w * w).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (k as f64 / golden).fract();
            let candidate = vec![r * phi.cos(), r * phi.sin(), w.abs()];
            if candidate[2] >= iota {
                points.push(candidate);
            }
        }
    } else {
        let mut rng = seed::rng(0x9818_d01d, &[dim as u64]);
        for _ in 0..resolution {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            if let Ok(cand) = normalize_to_sphere(&v, iota) {
                if cand.feasible {
                    points.push(cand.point.to_vec());
                }
            }
        }
    }
    points
}

/// Exhaustively evaluate the objective on a dense deterministic cap grid.
/// Returns the first-found best point and its value. Intended as a test
/// oracle; refuses ambient dimensions above 4.
pub fn grid_oracle(
    windows: &WindowSet,
    trim: &TrimSpec,
    resolution: usize,
    iota: f64,
) -> Result<(Coefficients, f64)> {
    let dim = windows.dim();
    if dim > 4 {
        return Err(Error::DimensionTooLarge { dim, max: 4 });
    }
    let filtered = FilteredObjective::build(windows, trim);
    let points = sphere_grid(dim, resolution, iota);
    if points.is_empty() {
        return Err(Error::NoFeasiblePoint { restarts: 0, iota });
    }
    let counts: Vec<i64> = exec::indexed_map(points.len(), |i| filtered.count_unit(&points[i]));
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Ok((Coefficients::from_slice(&points[best]), filtered.value(counts[best])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::TrimSide;
    use crate::panel::EstimationWindow;
    use approx::assert_relative_eq;

    fn window(z_mid: f64, y_mid: u8, d_switch: i8, chi_bar: Vec<f64>) -> EstimationWindow {
        EstimationWindow { individual: 0, t_mid: 2, z_mid, y_mid, d_switch, chi_bar }
    }

    fn toy_set() -> WindowSet {
        WindowSet::new(vec![window(2.0, 1, 1, vec![1.0, 2.0, -0.4])], 1, 1)
    }

    fn upper(sigma: f64) -> TrimSpec {
        TrimSpec::new(sigma, TrimSide::Upper, 1.0).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let c = normalize_to_sphere(&[0.0, 0.0, 2.0], 0.01).unwrap();
        assert!(c.feasible);
        assert_eq!(c.point.to_vec(), vec![0.0, 0.0, 1.0]);

        let c = normalize_to_sphere(&[3.0, 4.0, 0.0], 0.01).unwrap();
        assert!(!c.feasible);
        assert_relative_eq!(c.point.to_vec()[0], 0.6);

        let c = normalize_to_sphere(&[1.0, 1.0, 1.0], 0.01).unwrap();
        let third = 1.0 / 3.0_f64.sqrt();
        for v in c.point.to_vec() {
            assert_relative_eq!(v, third, epsilon = 1e-12);
        }

        let c = normalize_to_sphere(&[0.3, -0.1, -2.0], 0.01).unwrap();
        assert!(c.feasible);
        assert!(c.point.special > 0.0);
        assert!(c.point.lag < 0.0);

        assert!(matches!(
            normalize_to_sphere(&[0.0, 0.0, 0.0], 0.01),
            Err(Error::DegenerateVector)
        ));
    }

    #[test]
    fn config_validation_and_fingerprint() {
        assert!(DeConfig::default().validate().is_ok());
        assert!(DeConfig { population_size: Some(3), ..Default::default() }.validate().is_err());
        assert!(DeConfig { differential_weight: 0.0, ..Default::default() }.validate().is_err());
        assert!(DeConfig { crossover_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(DeConfig { iota: 0.0, ..Default::default() }.validate().is_err());

        let a = DeConfig::default().fingerprint();
        assert_eq!(a, DeConfig::default().fingerprint());
        assert_ne!(a, DeConfig { seed: 1, ..Default::default() }.fingerprint());
    }

    #[test]
    fn toy_problem_attains_the_maximum() {
        let out = maximize(&toy_set(), &upper(1.0), &DeConfig::default()).unwrap();
        assert_relative_eq!(out.value, 1.0);
        assert!(out.theta.is_unit_norm());
        assert!(out.theta.special >= 0.01);
    }

    #[test]
    fn fully_trimmed_problem_reports_no_switchers() {
        let err = maximize(&toy_set(), &upper(3.0), &DeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoSwitchers));
    }

    #[test]
    fn unreachable_feasibility_floor_reports_after_restarts() {
        let cfg = DeConfig { iota: 0.999_999_9, max_generations: 5, ..Default::default() };
        let err = maximize(&toy_set(), &upper(1.0), &cfg).unwrap_err();
        match err {
            Error::NoFeasiblePoint { restarts, .. } => assert_eq!(restarts, 3),
            other => panic!("expected NoFeasiblePoint, got {other:?}"),
        }
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let ws = WindowSet::new(
            vec![
                window(2.0, 1, 1, vec![1.0, 2.0, -0.4]),
                window(1.8, 1, -1, vec![0.0, -1.0, 0.7]),
                window(3.1, 1, 1, vec![-1.0, 0.3, 0.2]),
            ],
            3,
            1,
        );
        let cfg = DeConfig { seed: 42, max_generations: 80, ..Default::default() };
        let a = maximize(&ws, &upper(1.0), &cfg).unwrap();
        let b = maximize(&ws, &upper(1.0), &cfg).unwrap();
        assert_eq!(a.theta.to_vec(), b.theta.to_vec());
        assert_eq!(a.value, b.value);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn trace_is_monotone_nondecreasing() {
        let ws = WindowSet::new(
            (0..20)
                .map(|i| {
                    window(
                        2.0 + i as f64 * 0.1,
                        1,
                        if i % 3 == 0 { -1 } else { 1 },
                        vec![((i % 5) as f64 - 2.0), (i as f64 * 0.37).sin(), (i as f64 * 0.61).cos()],
                    )
                })
                .collect(),
            20,
            1,
        );
        let out = maximize(&ws, &upper(1.0), &DeConfig { seed: 9, ..Default::default() }).unwrap();
        for pair in out.trace.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn duplicating_windows_and_individuals_leaves_the_outcome_unchanged() {
        let base: Vec<EstimationWindow> = (0..10)
            .map(|i| {
                window(
                    2.5,
                    1,
                    if i % 2 == 0 { 1 } else { -1 },
                    vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 0.4 - 0.05 * i as f64],
                )
            })
            .collect();
        let mut doubled = base.clone();
        doubled.extend(base.iter().cloned());

        let ws = WindowSet::new(base, 10, 1);
        let ws2 = WindowSet::new(doubled, 20, 1);
        let cfg = DeConfig { seed: 5, max_generations: 120, ..Default::default() };
        let a = maximize(&ws, &upper(1.0), &cfg).unwrap();
        let b = maximize(&ws2, &upper(1.0), &cfg).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.theta.to_vec(), b.theta.to_vec());
    }

    #[test]
    fn grid_oracle_handles_toy_and_degenerate_cases() {
        let (theta, value) = grid_oracle(&toy_set(), &upper(1.0), 10_000, 0.01).unwrap();
        assert_relative_eq!(value, 1.0);
        assert!(theta.is_unit_norm());

        // Fully trimmed: the objective is identically zero on the grid.
        let (_, value) = grid_oracle(&toy_set(), &upper(3.0), 10_000, 0.01).unwrap();
        assert_eq!(value, 0.0);

        let wide = WindowSet::new(
            vec![window(2.0, 1, 1, vec![1.0, 0.0, 0.0, 0.0, 0.5])],
            1,
            3,
        );
        assert!(matches!(
            grid_oracle(&wide, &upper(1.0), 100, 0.01),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn de_matches_grid_oracle_on_small_instances() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for instance in 0..5 {
            let n_windows = 4 + (instance % 3);
            let windows: Vec<EstimationWindow> = (0..n_windows)
                .map(|_| {
                    window(
                        2.0 + rng.random::<f64>(),
                        1,
                        if rng.random::<f64>() < 0.5 { 1 } else { -1 },
                        vec![
                            f64::from(rng.random_range(-1..=1_i32)),
                            rng.random::<f64>() * 4.0 - 2.0,
                            rng.random::<f64>() * 4.0 - 2.0,
                        ],
                    )
                })
                .collect();
            let ws = WindowSet::new(windows, n_windows, 1);
            // Plateau exploration needs the full budget: stagnation stops
            // are for production-sized problems where improvements recur.
            let cfg = DeConfig {
                seed: 1000 + instance as u64,
                max_generations: 1500,
                stagnation_patience: 1500,
                ..Default::default()
            };
            let de = maximize(&ws, &upper(1.0), &cfg).unwrap();
            let (_, grid) = grid_oracle(&ws, &upper(1.0), 10_000, cfg.iota).unwrap();
            assert!(
                de.value >= grid - 1e-12,
                "instance {instance}: de {} < grid {grid}",
                de.value
            );
        }
    }
}
