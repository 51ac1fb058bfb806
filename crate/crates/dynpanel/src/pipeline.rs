//! The estimation chain shared by the CLI, the Monte Carlo harness, and the
//! bootstrap: extract windows, compute the trimming threshold from the
//! sample itself, and maximize.

use serde::Serialize;

use crate::error::Result;
use crate::objective::{self, TrimSide, TrimSpec};
use crate::optimizer::{self, DeConfig};
use crate::panel::{Coefficients, PanelDataset, WindowSet};

/// A full estimate with the quantities worth reporting next to it.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutcome {
    pub theta: Coefficients,
    pub value: f64,
    pub trim: TrimSpec,
    pub n_individuals: usize,
    pub n_windows: usize,
    pub n_switchers: usize,
    /// Untrimmed switcher windows with the side-appropriate weight.
    pub n_contributing: usize,
    pub generations_run: usize,
    /// Best objective value after initialization and per generation.
    pub trace: Vec<f64>,
}

/// Estimate on a dataset: the threshold is `c * std(z_mid) * sqrt(log log n)`
/// recomputed from the dataset itself, with `n` its individual count.
pub fn run_estimate(
    dataset: &PanelDataset,
    c: f64,
    side: TrimSide,
    cfg: &DeConfig,
) -> Result<EstimateOutcome> {
    let windows = WindowSet::from_dataset(dataset);
    let sigma = objective::sigma_schedule(&windows.z_mid_values(), windows.n_individuals(), c)?;
    let trim = TrimSpec::new(sigma, side, c)?;
    run_estimate_with_trim(&windows, &trim, cfg)
}

/// Estimate on pre-extracted windows with a fixed trim.
pub fn run_estimate_with_trim(
    windows: &WindowSet,
    trim: &TrimSpec,
    cfg: &DeConfig,
) -> Result<EstimateOutcome> {
    let outcome = optimizer::maximize(windows, trim, cfg)?;
    let n_switchers = windows.windows().iter().filter(|w| w.is_switcher()).count();
    Ok(EstimateOutcome {
        theta: outcome.theta,
        value: outcome.value,
        trim: trim.clone(),
        n_individuals: windows.n_individuals(),
        n_windows: windows.windows().len(),
        n_switchers,
        n_contributing: objective::count_contributing(windows, trim),
        generations_run: outcome.generations_run,
        trace: outcome.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate, DesignSpec, ZDist};
    use crate::error::Error;

    fn quick_cfg(seed: u64) -> DeConfig {
        DeConfig { max_generations: 120, stagnation_patience: 30, seed, ..Default::default() }
    }

    #[test]
    fn estimate_on_simulated_data_returns_a_feasible_unit_point() {
        let ds = simulate(&DesignSpec::design1(ZDist::StandardNormal, 2000, 71));
        let out = run_estimate(&ds, 1.0, TrimSide::Both, &quick_cfg(7)).unwrap();
        assert!(out.theta.is_unit_norm());
        assert!(out.theta.special >= 0.01);
        assert!(out.n_contributing > 0);
        assert!(out.n_switchers >= out.n_contributing);
        assert!(out.value > 0.0);
    }

    #[test]
    fn oversized_trim_constant_reports_no_switchers() {
        let ds = simulate(&DesignSpec::design1(ZDist::StandardNormal, 500, 71));
        let err = run_estimate(&ds, 50.0, TrimSide::Both, &quick_cfg(7)).unwrap_err();
        assert!(matches!(err, Error::NoSwitchers));
    }

    #[test]
    fn estimates_are_reproducible() {
        let ds = simulate(&DesignSpec::design1(ZDist::StandardNormal, 800, 5));
        let a = run_estimate(&ds, 1.0, TrimSide::Both, &quick_cfg(3)).unwrap();
        let b = run_estimate(&ds, 1.0, TrimSide::Both, &quick_cfg(3)).unwrap();
        assert_eq!(a.theta.to_vec(), b.theta.to_vec());
        assert_eq!(a.value, b.value);
    }
}
