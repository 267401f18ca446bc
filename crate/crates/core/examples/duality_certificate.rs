//! Douglas–Rachford on the dual and the Fenchel gap against the primal.

use degenflow::dual::{duality_gap, relative_gap, solve_dual, DualParams};
use degenflow::grid::Grid2D;
use degenflow::potentials::PotentialSpec;
use degenflow::primal::{solve_primal, PrimalParams};
use degenflow::sources::builtin_source;

fn main() -> degenflow::Result<()> {
    let g = Grid2D::unit_square(48)?;
    let f = builtin_source(&g, "four-quadrant-checker", &serde_json::Value::Null)?.field;
    let spec = PotentialSpec::power(2.0)?;

    let primal = solve_primal(&g, &spec, &f, &PrimalParams::default())?;
    let dual = solve_dual(&g, &spec, &f, &DualParams::default())?;
    let gap = duality_gap(&g, &spec, &primal, &dual, &f)?;
    println!("primal energy   {:.10}", primal.energy);
    println!("dual objective  {:.10}  ({} iterations)", dual.objective, dual.iterations);
    println!("gap {gap:.3e}, relative {:.3e}", relative_gap(gap, primal.energy, dual.objective));
    let diff = primal.sigma.sub(&dual.sigma_bar).l2_norm() / dual.sigma_bar.l2_norm();
    println!("relative flux difference {diff:.3e}, dual feasibility {:.2e}", dual.feas_residual);
    Ok(())
}
