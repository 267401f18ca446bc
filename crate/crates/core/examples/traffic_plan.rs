//! Lagrangian curves along σ̂ = σ̄ / ((1−t)f⁺ + t f⁻), their traffic
//! intensity and a Wardrop audit in the metric 1 + i.

use degenflow::dual::{solve_dual, DualParams};
use degenflow::grid::Grid2D;
use degenflow::potentials::PotentialSpec;
use degenflow::sources::builtin_source;
use degenflow::traffic::{
    congestion_cost, deposit_intensity, split_source, trace_curves, wardrop_audit, TrafficParams,
};

fn main() -> degenflow::Result<()> {
    let g = Grid2D::unit_square(64)?;
    let f = builtin_source(&g, "two-blocks", &serde_json::Value::Null)?.field;
    let spec = PotentialSpec::power(2.0)?;
    let sigma = solve_dual(&g, &spec, &f, &DualParams::default())?.sigma_bar;

    let (fplus, fminus) = split_source(&f)?;
    let params = TrafficParams::default();
    let plan = trace_curves(&sigma, &fplus, &fminus, &params)?;
    let intensity = deposit_intensity(&plan, &g)?;
    let magnitude = sigma.center_magnitude();
    println!("{} curves, mass {:.4}", plan.curves.len(), plan.total_weight());
    println!("terminal error {:.2e}", plan.terminal_error_rel);
    println!("|i - |sigma||_1 / |sigma|_1 = {:.2e}", intensity.sub(&magnitude).l1_norm() / magnitude.l1_norm());

    let c = &plan.curves[plan.curves.len() / 2];
    println!("curve {}: {:?} -> {:?}, length {:.4}", c.id, c.points[0], c.end(), c.length());

    let audit = wardrop_audit(&plan, &intensity, congestion_cost(spec.p() - 1.0), &params, 1)?;
    println!("wardrop: {} sampled, passing fraction {:.3}", audit.entries.len(), audit.passing_fraction);
    Ok(())
}
