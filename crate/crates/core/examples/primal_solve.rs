//! Damped Newton with regularization continuation on the two-blocks source;
//! the flux is the tent `min(x, 1 − x)` along the x axis.

use degenflow::grid::Grid2D;
use degenflow::potentials::PotentialSpec;
use degenflow::primal::{solve_primal, PrimalParams};
use degenflow::sources::builtin_source;

fn main() -> degenflow::Result<()> {
    let n = 64;
    let g = Grid2D::unit_square(n)?;
    let f = builtin_source(&g, "two-blocks", &serde_json::Value::Null)?.field;
    let spec = PotentialSpec::power(2.0)?;
    let sol = solve_primal(&g, &spec, &f, &PrimalParams::default())?;
    println!("energy {:.8}, residual {:.2e}, {} Newton steps", sol.energy, sol.grad_norm, sol.iterations);

    let row = n / 2;
    println!("   x      sigma_x   tent");
    for i in (0..=n).step_by(8) {
        let x = i as f64 / n as f64;
        println!("{x:5.3}  {:8.5}  {:7.5}", sol.sigma.x[g.x_face(i, row)], x.min(1.0 - x));
    }
    Ok(())
}
