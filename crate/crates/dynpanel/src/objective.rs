//! Trimmed maximum score sample objectives and the trimming-threshold
//! schedule.
//!
//! Each usable window contributes a sign-agreement indicator: the window's
//! switch direction `y_{t+1} - y_{t-1}` counts exactly when the middle-period
//! special regressor clears the trimming threshold on the relevant side and
//! the difference regressor agrees in sign with the candidate coefficients.
//! Values are exact sums of `{-1, 0, +1}` divided by the number of
//! individuals, so `n * Q` is always an integer and the parallel reduction
//! is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::panel::{Coefficients, EstimationWindow, WindowSet};
use crate::stats;

/// Which tail(s) of the special regressor the objective conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrimSide {
    /// Keep windows with `z_mid > sigma`, weighted by `y_mid`.
    Upper,
    /// Keep windows with `z_mid < -sigma`, weighted by `1 - y_mid`.
    Lower,
    /// Sum of the two one-sided objectives.
    Both,
}

impl TrimSide {
    pub fn label(&self) -> &'static str {
        match self {
            TrimSide::Upper => "upper",
            TrimSide::Lower => "lower",
            TrimSide::Both => "both",
        }
    }
}

impl std::str::FromStr for TrimSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(TrimSide::Upper),
            "lower" => Ok(TrimSide::Lower),
            "both" => Ok(TrimSide::Both),
            other => Err(Error::Domain(format!(
                "unknown trim side `{other}` (expected upper, lower, or both)"
            ))),
        }
    }
}

/// Trimming threshold plus the side it applies to. `c` records the schedule
/// constant that produced `sigma`, for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimSpec {
    pub sigma: f64,
    pub side: TrimSide,
    pub c: f64,
}

impl TrimSpec {
    /// A two-sided trim at `sigma = 0` would let one observation satisfy
    /// both tails, so `Both` requires a strictly positive threshold.
    pub fn new(sigma: f64, side: TrimSide, c: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Domain(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if side == TrimSide::Both && sigma == 0.0 {
            return Err(Error::Domain("side=both requires sigma > 0".into()));
        }
        Ok(Self { sigma, side, c })
    }
}

/// Trimming threshold schedule: `c * std(z) * sqrt(log log n)` with the
/// sample standard deviation over the pooled middle-period values.
pub fn sigma_schedule(z_values: &[f64], n: usize, c: f64) -> Result<f64> {
    if z_values.is_empty() {
        return Err(Error::Domain("sigma_schedule needs a nonempty z sample".into()));
    }
    if n < 16 {
        return Err(Error::Domain(format!(
            "sigma_schedule needs n >= 16 so that log log n is safely positive, got {n}"
        )));
    }
    Ok(c * stats::sample_std(z_values) * (n as f64).ln().ln().sqrt())
}

/// Contribution of one window to the upper-tail objective: the switch
/// direction, or 0 when the window is weighted out, trimmed, or disagrees
/// in sign. The strict inequality means a boundary value contributes
/// nothing.
#[inline]
fn upper_term(w: &EstimationWindow, theta: &Coefficients, sigma: f64) -> i64 {
    if w.y_mid == 1 && w.z_mid > sigma && w.d_switch != 0 && theta.dot_window(&w.chi_bar) > 0.0 {
        i64::from(w.d_switch)
    } else {
        0
    }
}

#[inline]
fn lower_term(w: &EstimationWindow, theta: &Coefficients, sigma: f64) -> i64 {
    if w.y_mid == 0 && w.z_mid < -sigma && w.d_switch != 0 && theta.dot_window(&w.chi_bar) > 0.0 {
        i64::from(w.d_switch)
    } else {
        0
    }
}

/// Integer numerator of the upper-tail objective (the sum of window terms).
pub fn qn1_numerator(windows: &WindowSet, theta: &Coefficients, sigma: f64) -> i64 {
    let ws = windows.windows();
    exec::indexed_sum_i64(ws.len(), |i| upper_term(&ws[i], theta, sigma))
}

/// Integer numerator of the lower-tail objective.
pub fn qn2_numerator(windows: &WindowSet, theta: &Coefficients, sigma: f64) -> i64 {
    let ws = windows.windows();
    exec::indexed_sum_i64(ws.len(), |i| lower_term(&ws[i], theta, sigma))
}

/// Upper-tail sample objective. The divisor is the number of individuals in
/// the dataset, not the number of windows.
pub fn qn1(windows: &WindowSet, theta: &Coefficients, sigma: f64) -> f64 {
    qn1_numerator(windows, theta, sigma) as f64 / windows.n_individuals() as f64
}

/// Lower-tail sample objective.
pub fn qn2(windows: &WindowSet, theta: &Coefficients, sigma: f64) -> f64 {
    qn2_numerator(windows, theta, sigma) as f64 / windows.n_individuals() as f64
}

/// Combined objective: side dispatch over [`qn1`], [`qn2`], or their sum.
pub fn qn(windows: &WindowSet, theta: &Coefficients, trim: &TrimSpec) -> f64 {
    match trim.side {
        TrimSide::Upper => qn1(windows, theta, trim.sigma),
        TrimSide::Lower => qn2(windows, theta, trim.sigma),
        TrimSide::Both => {
            let upper = qn1_numerator(windows, theta, trim.sigma);
            let lower = qn2_numerator(windows, theta, trim.sigma);
            (upper + lower) as f64 / windows.n_individuals() as f64
        }
    }
}

/// Whether a window can contribute to the objective under `trim` for some
/// coefficient point: it must be an untrimmed switcher with the right
/// weight.
pub fn contributes(w: &EstimationWindow, trim: &TrimSpec) -> bool {
    if w.d_switch == 0 {
        return false;
    }
    let upper = w.y_mid == 1 && w.z_mid > trim.sigma;
    let lower = w.y_mid == 0 && w.z_mid < -trim.sigma;
    match trim.side {
        TrimSide::Upper => upper,
        TrimSide::Lower => lower,
        TrimSide::Both => upper || lower,
    }
}

/// Number of windows that can contribute under `trim`.
pub fn count_contributing(windows: &WindowSet, trim: &TrimSpec) -> usize {
    windows.windows().iter().filter(|w| contributes(w, trim)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::EstimationWindow;
    use approx::assert_relative_eq;

    fn window(z_mid: f64, y_mid: u8, d_switch: i8, chi_bar: Vec<f64>) -> EstimationWindow {
        EstimationWindow { individual: 0, t_mid: 2, z_mid, y_mid, d_switch, chi_bar }
    }

    fn theta() -> Coefficients {
        Coefficients::new(0.6, vec![0.64], 0.48)
    }

    #[test]
    fn sigma_schedule_matches_direct_formula() {
        // std = 1 exactly for this sample: mean 0, ss = 2, /(3 - 1).
        let z = vec![-1.0, 0.0, 1.0];
        let got = sigma_schedule(&z, 5000, 1.0).unwrap();
        let expected = (5000.0_f64.ln().ln()).sqrt();
        assert_relative_eq!(got, expected, epsilon = 1e-15);
        assert_relative_eq!(got, 1.46357, epsilon = 2e-5);
    }

    #[test]
    fn sigma_schedule_is_linear_in_c_and_homogeneous_in_z() {
        let z = vec![0.3, -1.2, 2.4, 0.8, -0.5];
        assert_eq!(sigma_schedule(&z, 100, 0.0).unwrap(), 0.0);
        let base = sigma_schedule(&z, 100, 1.0).unwrap();
        let doubled_z: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(sigma_schedule(&doubled_z, 100, 1.0).unwrap(), 2.0 * base, epsilon = 1e-12);
        assert_relative_eq!(sigma_schedule(&z, 100, 0.9).unwrap(), 0.9 * base, epsilon = 1e-12);
    }

    #[test]
    fn sigma_schedule_rejects_small_n() {
        assert!(matches!(sigma_schedule(&[1.0, 2.0], 15, 1.0), Err(Error::Domain(_))));
        assert!(sigma_schedule(&[1.0, 2.0], 16, 1.0).is_ok());
    }

    #[test]
    fn qn1_hand_evaluated_single_window() {
        // chi_bar (1, 2, -0.4), theta (0.6, 0.64, 0.48):
        // 0.6 + 1.28 - 0.192 = 1.688 > 0, untrimmed at sigma = 1.
        let ws = WindowSet::new(vec![window(2.0, 1, 1, vec![1.0, 2.0, -0.4])], 1, 1);
        assert_relative_eq!(qn1(&ws, &theta(), 1.0), 1.0);
        // Trimmed out at sigma = 3.
        assert_relative_eq!(qn1(&ws, &theta(), 3.0), 0.0);
    }

    #[test]
    fn non_switchers_contribute_nothing_for_any_theta() {
        let ws = WindowSet::new(
            vec![
                window(2.0, 1, 0, vec![1.0, 2.0, -0.4]),
                window(-3.0, 0, 0, vec![-1.0, 5.0, 0.3]),
            ],
            2,
            1,
        );
        for t in [theta(), Coefficients::new(-0.9, vec![0.1], 0.3)] {
            assert_eq!(qn1(&ws, &t, 0.5), 0.0);
            assert_eq!(qn2(&ws, &t, 0.5), 0.0);
        }
    }

    #[test]
    fn qn2_weight_and_sign_cases() {
        // y_mid = 1 never contributes to the lower-tail objective.
        let ws = WindowSet::new(vec![window(-5.0, 1, 1, vec![1.0, 2.0, -0.4])], 1, 1);
        assert_eq!(qn2(&ws, &theta(), 1.0), 0.0);

        // chi_bar (-1, 0, 0.5): dot = -0.6 + 0.24 = -0.36 <= 0, contributes 0.
        let ws = WindowSet::new(vec![window(-2.0, 0, -1, vec![-1.0, 0.0, 0.5])], 1, 1);
        assert_eq!(qn2(&ws, &theta(), 1.0), 0.0);

        // chi_bar (-1, 2, 0.5): dot = -0.6 + 1.28 + 0.24 = 0.92 > 0,
        // so the -1 switch lands: Q_n2 = -1/n.
        let ws = WindowSet::new(vec![window(-2.0, 0, -1, vec![-1.0, 2.0, 0.5])], 1, 1);
        assert_relative_eq!(qn2(&ws, &theta(), 1.0), -1.0);
    }

    #[test]
    fn qn_dispatches_and_adds_sides() {
        let upper = window(2.0, 1, 1, vec![1.0, 2.0, -0.4]);
        let lower = window(-2.0, 0, -1, vec![-1.0, 2.0, 0.5]);
        let neutral = window(-2.0, 0, -1, vec![-1.0, 0.0, 0.5]);
        let ws = WindowSet::new(vec![upper, lower, neutral], 3, 1);
        let t = theta();

        let q1 = qn(&ws, &t, &TrimSpec::new(1.0, TrimSide::Upper, 1.0).unwrap());
        let q2 = qn(&ws, &t, &TrimSpec::new(1.0, TrimSide::Lower, 1.0).unwrap());
        let q = qn(&ws, &t, &TrimSpec::new(1.0, TrimSide::Both, 1.0).unwrap());
        assert_relative_eq!(q1, 1.0 / 3.0);
        assert_relative_eq!(q2, -1.0 / 3.0);
        assert_relative_eq!(q, q1 + q2, epsilon = 1e-15);
    }

    #[test]
    fn fully_trimmed_objective_is_zero() {
        let ws = WindowSet::new(
            vec![window(0.5, 1, 1, vec![1.0, 1.0, 1.0]), window(-0.7, 0, -1, vec![0.0, 1.0, 1.0])],
            2,
            1,
        );
        let trim = TrimSpec::new(1.0, TrimSide::Both, 1.0).unwrap();
        assert_eq!(qn(&ws, &theta(), &trim), 0.0);
        assert_eq!(count_contributing(&ws, &trim), 0);
    }

    #[test]
    fn objective_is_scale_invariant() {
        let ws = WindowSet::new(
            vec![
                window(2.0, 1, 1, vec![1.0, 2.0, -0.4]),
                window(1.7, 1, -1, vec![0.0, -1.5, 0.9]),
                window(-2.2, 0, 1, vec![-1.0, 0.4, -0.2]),
            ],
            3,
            1,
        );
        let trim = TrimSpec::new(1.0, TrimSide::Both, 1.0).unwrap();
        let t = theta();
        let scaled = Coefficients::new(2.0 * t.lag, vec![2.0 * t.slopes[0]], 2.0 * t.special);
        assert_eq!(qn(&ws, &t, &trim), qn(&ws, &scaled, &trim));
    }

    #[test]
    fn widening_the_trim_never_adds_contributors() {
        let ws = WindowSet::new(
            (0..40)
                .map(|i| {
                    window(
                        (i as f64 - 20.0) / 4.0,
                        (i % 2) as u8,
                        [(-1), 0, 1][i % 3],
                        vec![1.0, 0.5, -0.5],
                    )
                })
                .collect(),
            40,
            1,
        );
        let mut prev = usize::MAX;
        for k in 0..10 {
            let trim = TrimSpec::new(0.1 + k as f64 * 0.5, TrimSide::Both, 1.0).unwrap();
            let count = count_contributing(&ws, &trim);
            assert!(count <= prev);
            prev = count;
        }
    }

    #[test]
    fn both_side_requires_positive_sigma() {
        assert!(TrimSpec::new(0.0, TrimSide::Both, 1.0).is_err());
        assert!(TrimSpec::new(0.0, TrimSide::Upper, 1.0).is_ok());
        assert!(TrimSpec::new(f64::NAN, TrimSide::Upper, 1.0).is_err());
        assert!(TrimSpec::new(-1.0, TrimSide::Lower, 1.0).is_err());
    }
}
