//! Monte Carlo replication harness and the population-objective
//! identification check.

use serde::Serialize;

use crate::dgp::{self, DesignSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::objective::TrimSide;
use crate::optimizer::DeConfig;
use crate::panel::Coefficients;
use crate::pipeline;
use crate::seed;

/// Summary statistics for one (design, n) cell, in reporting order
/// (covariate slopes, lag, trend, special).
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub design: String,
    pub z_dist: String,
    pub n: usize,
    pub reps: usize,
    pub c: f64,
    pub side: String,
    /// Differential evolution generation budget used for every replication.
    pub de_generations: usize,
    pub coefficient_names: Vec<String>,
    /// Mean of `theta_hat - theta` per coefficient.
    pub mbias: Vec<f64>,
    /// Root mean squared deviation per coefficient.
    pub rmse: Vec<f64>,
}

/// A summary plus the per-replication estimates behind it.
#[derive(Debug, Clone, Serialize)]
pub struct McCellResult {
    pub summary: McSummary,
    /// Per replication, reporting order.
    pub estimates: Vec<Vec<f64>>,
    pub objective_values: Vec<f64>,
    pub rep_seeds: Vec<u64>,
}

pub(crate) fn summarize_deviations(estimates: &[Vec<f64>], truth: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let reps = estimates.len() as f64;
    let dim = truth.len();
    let mut mbias = vec![0.0; dim];
    let mut msq = vec![0.0; dim];
    for est in estimates {
        for k in 0..dim {
            let dev = est[k] - truth[k];
            mbias[k] += dev;
            msq[k] += dev * dev;
        }
    }
    for k in 0..dim {
        mbias[k] /= reps;
        msq[k] = (msq[k] / reps).sqrt();
    }
    (mbias, msq)
}

/// Run `reps` replications of simulate -> trim -> optimize for every sample
/// size in `n_list`. Per-replication seeds derive from the design seed, the
/// design id, the sample size, and the replication index, so any cell is
/// independently reproducible. A replication failure aborts its cell.
pub fn run_mc(
    design: &DesignSpec,
    n_list: &[usize],
    reps: usize,
    trim_c: f64,
    side: TrimSide,
    cfg: &DeConfig,
) -> Result<Vec<McCellResult>> {
    design.validate()?;
    cfg.validate()?;
    if reps < 2 {
        return Err(Error::Domain(format!("run_mc needs reps >= 2, got {reps}")));
    }

    let truth = design.table_order(&design.theta_true);
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let rep_seeds: Vec<u64> = (0..reps)
            .map(|rep| seed::derive(design.seed, &[design.design_id(), n as u64, rep as u64]))
            .collect();

        let outcomes = exec::indexed_map(reps, |rep| {
            let spec = DesignSpec { n, seed: rep_seeds[rep], ..design.clone() };
            let dataset = dgp::simulate(&spec);
            let de = DeConfig { seed: seed::derive(rep_seeds[rep], &[0xe57]), ..cfg.clone() };
            pipeline::run_estimate(&dataset, trim_c, side, &de)
                .map(|o| (design.table_order(&o.theta), o.value))
        });

        let mut estimates = Vec::with_capacity(reps);
        let mut values = Vec::with_capacity(reps);
        for outcome in outcomes {
            let (est, value) = outcome?;
            estimates.push(est);
            values.push(value);
        }

        let (mbias, rmse) = summarize_deviations(&estimates, &truth);
        out.push(McCellResult {
            summary: McSummary {
                design: design.label(),
                z_dist: design.z_dist.label().to_string(),
                n,
                reps,
                c: trim_c,
                side: side.label().to_string(),
                de_generations: cfg.max_generations,
                coefficient_names: design.coefficient_names(),
                mbias,
                rmse,
            },
            estimates,
            objective_values: values,
            rep_seeds,
        });
    }
    Ok(out)
}

/// One grid point of the Monte Carlo population objective.
#[derive(Debug, Clone, Serialize)]
pub struct PopPoint {
    /// Sign-function version of the objective.
    pub value: f64,
    /// Indicator version computed on the same draws.
    pub indicator_value: f64,
    /// Monte Carlo standard error of `value`.
    pub std_error: f64,
}

/// Population objective estimated on a grid of parameter points.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationObjective {
    pub points: Vec<PopPoint>,
    /// Draws surviving the tail conditioning.
    pub surviving: usize,
    pub total_draws: usize,
    /// Mean choice-history probability contrast among surviving draws.
    pub mean_pdiff: f64,
}

fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Partial {
    sums: Vec<f64>,
    sums_sq: Vec<f64>,
    indicator_sums: Vec<f64>,
    pdiff_sum: f64,
    count: usize,
}

/// Monte Carlo estimate of the population objective on a grid of parameter
/// points, conditioning on the upper tail `z_mid > sigma`.
///
/// Each simulated individual contributes its analytic choice-history
/// probability contrast (the error law of the design is known) times the
/// sign of the candidate index, with the post-switch history value fixed at
/// one as the upper-tail conditioning dictates. The indicator version is
/// accumulated on the same draws for the algebraic cross-check
/// `sgn = 2 * indicator - 1`.
pub fn population_objective_mc(
    design: &DesignSpec,
    sigma: f64,
    grid: &[Coefficients],
    draws: usize,
) -> Result<PopulationObjective> {
    design.validate()?;
    if grid.is_empty() {
        return Err(Error::Domain("population objective needs a nonempty grid".into()));
    }
    for theta in grid {
        if theta.dim() != design.p() + 2 {
            return Err(Error::Domain(format!(
                "grid point has dimension {}, design needs {}",
                theta.dim(),
                design.p() + 2
            )));
        }
    }

    const CHUNK: usize = 4096;
    let n_chunks = draws.div_ceil(CHUNK);
    let n_grid = grid.len();

    let partials = exec::indexed_map(n_chunks, |chunk| {
        let lo = chunk * CHUNK;
        let hi = ((chunk + 1) * CHUNK).min(draws);
        let mut part = Partial {
            sums: vec![0.0; n_grid],
            sums_sq: vec![0.0; n_grid],
            indicator_sums: vec![0.0; n_grid],
            pdiff_sum: 0.0,
            count: 0,
        };
        for i in lo..hi {
            let draw = dgp::draw_latents(design, i as u64);
            if draw.z[2] <= sigma {
                continue;
            }
            let y0 = u8::from(dgp::utility_index(design, &draw, 0, None) >= draw.eps[0]);

            // Histories share y0 and a post-switch middle choice of 1;
            // they differ in the (y1, y3) pattern: (0, 1) versus (1, 0).
            let g1 = dgp::utility_index(design, &draw, 1, Some(y0));
            let g2_after0 = dgp::utility_index(design, &draw, 2, Some(0));
            let g2_after1 = dgp::utility_index(design, &draw, 2, Some(1));
            let g3 = dgp::utility_index(design, &draw, 3, Some(1));
            let f = dgp::error_cdf;
            let p_c = (1.0 - f(g1)) * f(g2_after0) * f(g3);
            let p_d = f(g1) * f(g2_after1) * (1.0 - f(g3));
            let pdiff = p_c - p_d;

            let lag_diff = 1.0 - f64::from(y0);
            for (g, theta) in grid.iter().enumerate() {
                let mut u = theta.lag * lag_diff + theta.special * (draw.z[3] - draw.z[1]);
                for (b, (x3, x1)) in theta.slopes.iter().zip(draw.x[3].iter().zip(&draw.x[1])) {
                    u += b * (x3 - x1);
                }
                let term = pdiff * sign(u);
                part.sums[g] += term;
                part.sums_sq[g] += term * term;
                if u > 0.0 {
                    part.indicator_sums[g] += pdiff;
                }
            }
            part.pdiff_sum += pdiff;
            part.count += 1;
        }
        part
    });

    let mut sums = vec![0.0; n_grid];
    let mut sums_sq = vec![0.0; n_grid];
    let mut indicator_sums = vec![0.0; n_grid];
    let mut pdiff_sum = 0.0;
    let mut count = 0usize;
    for part in partials {
        for g in 0..n_grid {
            sums[g] += part.sums[g];
            sums_sq[g] += part.sums_sq[g];
            indicator_sums[g] += part.indicator_sums[g];
        }
        pdiff_sum += part.pdiff_sum;
        count += part.count;
    }

    const MIN_SURVIVORS: usize = 500;
    if count < MIN_SURVIVORS {
        return Err(Error::InsufficientTailDraws { surviving: count, required: MIN_SURVIVORS });
    }

    let nf = count as f64;
    let points = (0..n_grid)
        .map(|g| {
            let mean = sums[g] / nf;
            let var = (sums_sq[g] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            PopPoint {
                value: mean,
                indicator_value: indicator_sums[g] / nf,
                std_error: (var / nf).sqrt(),
            }
        })
        .collect();

    Ok(PopulationObjective {
        points,
        surviving: count,
        total_draws: draws,
        mean_pdiff: pdiff_sum / nf,
    })
}

/// Output format for [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

/// Render summaries as one row per cell with MBIAS/RMSE column pairs in
/// reporting order. All summaries must share one coefficient layout.
pub fn emit_table(summaries: &[McSummary], format: TableFormat) -> Result<String> {
    let meta = ["design", "z", "n", "reps", "c", "side", "de_generations"];
    let names: &[String] = match summaries.first() {
        Some(first) => {
            if summaries.iter().any(|s| s.coefficient_names != first.coefficient_names) {
                return Err(Error::Domain(
                    "emit_table needs summaries with a common coefficient layout".into(),
                ));
            }
            &first.coefficient_names
        }
        None => &[],
    };

    let mut columns: Vec<String> = meta.iter().map(|s| s.to_string()).collect();
    for name in names {
        columns.push(format!("mbias_{name}"));
        columns.push(format!("rmse_{name}"));
    }

    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut row = vec![
                s.design.clone(),
                s.z_dist.clone(),
                s.n.to_string(),
                s.reps.to_string(),
                format!("{:.3}", s.c),
                s.side.clone(),
                s.de_generations.to_string(),
            ];
            for k in 0..names.len() {
                row.push(format!("{:.6}", s.mbias[k]));
                row.push(format!("{:.6}", s.rmse[k]));
            }
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&columns.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let render = |cells: &[String], widths: &[usize], out: &mut String| {
                for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                    if i > 0 {
                        out.push_str("  ");
                    }
                    out.push_str(&format!("{cell:>w$}"));
                }
                out.push('\n');
            };
            render(&columns, &widths, &mut out);
            for row in &rows {
                render(row, &widths, &mut out);
            }
        }
    }
    Ok(out)
}
