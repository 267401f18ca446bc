//! Truncations of |∇u| on a solved dipole: per-scale alternatives, fitted
//! logarithmic moduli, and the modulus of a composition g(∇u).

use degenflow::grid::Grid2D;
use degenflow::potentials::{norm, PotentialSpec};
use degenflow::primal::{solve_primal, PrimalParams};
use degenflow::regularity::{composition_diagnostic, diagnose, DiagnosticsConfig};
use degenflow::sources::builtin_source;

fn main() -> degenflow::Result<()> {
    let g = Grid2D::unit_square(64)?;
    let f = builtin_source(&g, "gaussian-dipole", &serde_json::Value::Null)?.field;
    let u = solve_primal(&g, &PotentialSpec::power(2.0)?, &f, &PrimalParams::default())?.u;
    let grad = g.gradient(&u, false)?;

    let cfg = DiagnosticsConfig { eps0: 0.5, direction_count: 8, ..DiagnosticsConfig::default() };
    let report = diagnose(&g, &grad, &cfg)?;
    println!("scales {:?}", report.radii);
    for s in report.slices.iter().filter(|s| s.direction.is_none()) {
        let fit = s
            .fit
            .as_ref()
            .map_or("degenerate".to_string(), |f| format!("C {:.3}, residual {:.2}", f.c_fit, f.residual));
        println!("excess delta {:5}: tallies {:?}, {fit}", s.delta, s.tallies);
    }

    // g vanishes on the unit ball, so g(∇u) inherits the truncations' modulus
    let table = composition_diagnostic(&g, &grad, |z| (norm(z) - 1.0).max(0.0).powi(2), &cfg)?;
    println!("radius  composition  excess@0");
    let (comp, excess) = (table.row("composition").unwrap(), table.row("excess@0").unwrap());
    for (k, r) in table.radii.iter().enumerate() {
        println!("{r:6.4}  {:11.5}  {:8.5}", comp.values[k], excess.values[k]);
    }
    Ok(())
}
