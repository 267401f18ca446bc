//! Staggered grid operators, the zero-flux Poisson solver and the projection
//! onto `{div σ = f}`.

use degenflow::grid::{Grid2D, NeumannPoisson};

fn main() -> degenflow::Result<()> {
    let g = Grid2D::new(48, 32, 1.5, 1.0)?;
    let pi = std::f64::consts::PI;
    let u = g.sample(|x| (pi * x[0] / 1.5).cos() * (pi * x[1]).cos());
    let grad = g.gradient(&u, true)?;

    // adjointness of the two operators on zero-flux fields
    let s = g.sample_faces(|x| x[0] * x[1], |x| x[0] - x[1], true);
    let lhs = grad.dot(&s);
    let rhs = u.dot(&g.divergence(&s)?);
    println!("<grad u, s> = {lhs:.12}, -<u, div s> = {:.12}", -rhs);

    let mut f = g.sample(|x| x[0] - 0.75 + 0.3 * (2.0 * pi * x[1]).sin());
    f.remove_mean();
    let psi = NeumannPoisson::new(g).solve(&f)?;
    println!("poisson: mean {:.2e}, |psi|_inf {:.4}", psi.mean(), psi.max_abs());

    let projected = g.project_divergence(&s, &f)?;
    let residual = g.divergence(&projected)?.sub(&f).l2_norm() / f.l2_norm();
    println!("projection: relative divergence residual {residual:.2e}");
    Ok(())
}
