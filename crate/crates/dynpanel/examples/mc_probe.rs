// Population-objective bias probe: where does the argmax of the finite-sigma
// population objective sit along the gamma geodesic through the truth?
use dynpanel::dgp::{DesignSpec, ZDist};
use dynpanel::mc::population_objective_mc;
use dynpanel::panel::Coefficients;

fn main() {
    let design = DesignSpec::design1(ZDist::StandardNormal, 0, 31);
    let truth = design.theta_true.to_vec();
    let mut grid = Vec::new();
    let offsets: Vec<f64> = (-8..=4).map(|i| i as f64 * 0.05).collect();
    for &d in &offsets {
        let mut v = truth.clone();
        v[0] += d; // gamma direction, then renormalize
        let c = dynpanel::optimizer::normalize_to_sphere(&v, 0.001).unwrap();
        grid.push(c.point);
    }
    for sigma in [1.46, 2.5, 4.0] {
        let pop = population_objective_mc(&design, sigma, &grid, 4_000_000).unwrap();
        let best = pop
            .points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap())
            .unwrap()
            .0;
        println!(
            "sigma {sigma}: surviving {} argmax offset {:+.3} (gamma_hat {:.3} vs truth {:.3})",
            pop.surviving,
            offsets[best],
            grid[best].lag,
            truth[0]
        );
        for (i, &d) in offsets.iter().enumerate() {
            if i % 2 == 0 {
                println!("  offset {d:+.2}: Q = {:.6} +- {:.6}", pop.points[i].value, pop.points[i].std_error);
            }
        }
    }
}
