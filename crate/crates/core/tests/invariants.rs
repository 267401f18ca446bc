use degenflow::dual::{dual_objective, solve_dual, DualParams};
use degenflow::grid::{Grid2D, ScalarField};
use degenflow::potentials::PotentialSpec;
use degenflow::primal::{primal_energy, solve_primal, PrimalParams};
use proptest::prelude::*;

const N: usize = 10;

fn source(values: Vec<f64>) -> ScalarField {
    let g = Grid2D::unit_square(N).unwrap();
    let mut f = ScalarField::new(g, values).unwrap();
    f.remove_mean();
    f
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, N * N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_duality_for_any_feasible_pair(f in values(), u in values(), s in values(), q in 1.5f64..3.0) {
        let f = source(f);
        let g = f.grid;
        let spec = PotentialSpec::power(q).unwrap();
        let u = ScalarField::new(g, u).unwrap();
        let mut flux = g.zero_flux();
        for (k, v) in flux.x.iter_mut().enumerate() {
            *v = s[k % s.len()];
        }
        flux.clamp_boundary();
        let feasible = g.project_divergence(&flux, &f).unwrap();
        let tau = g.faces_to_corners(&feasible);
        let gap = primal_energy(&g, &spec, &u, &f).unwrap() + dual_objective(&spec, &tau).unwrap();
        prop_assert!(gap >= -1e-9, "{gap}");
    }

    #[test]
    fn dual_solution_is_feasible(f in values()) {
        let f = source(f);
        let g = f.grid;
        let spec = PotentialSpec::power(2.0).unwrap();
        let d = solve_dual(&g, &spec, &f, &DualParams::default()).unwrap();
        let residual = g.divergence(&d.sigma_bar).unwrap().sub(&f).l2_norm();
        prop_assert!(residual <= 1e-8 * f.l2_norm().max(1.0));
        prop_assert!(d.sigma_bar.neumann);
    }

    #[test]
    fn primal_minimizer_beats_perturbations(f in values(), v in values(), t in -0.1f64..0.1) {
        let f = source(f);
        let g = f.grid;
        let spec = PotentialSpec::power(2.0).unwrap();
        let p = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        let moved = ScalarField {
            grid: g,
            values: p.u.values.iter().zip(&v).map(|(a, b)| a + t * b).collect(),
        };
        let e = primal_energy(&g, &spec, &moved, &f).unwrap();
        prop_assert!(e >= p.energy - 1e-8 * p.energy.abs().max(1.0), "{e} < {}", p.energy);
    }
}
