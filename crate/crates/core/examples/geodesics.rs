//! Fast marching in a metric with a slow stripe: the geodesic detours around
//! its end instead of crossing it.

use degenflow::grid::Grid2D;
use degenflow::traffic::{geodesic_distance_from, interpolate_cells, path_cost};

fn main() -> degenflow::Result<()> {
    let g = Grid2D::unit_square(128)?;
    let metric = g.sample(|x| if (0.4..=0.6).contains(&x[0]) && x[1] <= 0.5 { 3.0 } else { 1.0 });
    let (a, b) = ([0.3, 0.4], [0.7, 0.4]);
    let d = geodesic_distance_from(&g, &metric, a)?;
    println!("distance {:.4}", interpolate_cells(&d, b));
    println!("straight path {:.4}", path_cost(&g, &metric, &[a, b]));
    println!("detour path   {:.4}", path_cost(&g, &metric, &[a, [0.4, 0.5], [0.6, 0.5], b]));
    Ok(())
}
