//! Dual solver: `min Σ H*(σ)` subject to `div σ = f`, `σ·n = 0`, by
//! Douglas–Rachford splitting, and the Fenchel duality gap certificate.
//!
//! The unknown is a corner field `τ` (four 2-vectors per cell) so that the
//! integrand's prox acts on full vectors and is radial. The affine constraint
//! is `div S(τ) = f` with `S(τ)` the face average of the samples; projecting
//! onto it in the sample metric amounts to one zero-flux Poisson solve,
//! `τ ← τ + ∇ψ` with `div ∇ψ = f − div S(τ)`.
//!
//! Because the primal energy is assembled on the same samples, `Σ w z·τ =
//! −Σ f u hx hy` holds exactly for feasible `τ`, and the gap
//! `P(u) + D(τ) = Σ w (H(z) + H*(τ) − z·τ)` is a sum of nonnegative
//! Fenchel–Young defects.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{poisson::check_compatible, CornerField, Grid2D, NeumannPoisson, ScalarField, VectorField};
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::primal::{primal_energy, PrimalSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualParams {
    /// Bound on the splitting residual `‖prox(2x − y) − x‖`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Prox step `τ` of the splitting.
    pub step: f64,
    /// Relaxation factor in `(0, 2)`; `1` is plain Douglas–Rachford.
    pub relaxation: f64,
    /// Return the current iterate instead of failing when the cap is reached.
    pub allow_truncation: bool,
}

impl Default for DualParams {
    fn default() -> Self {
        DualParams { tol: 1e-7, max_iterations: 20_000, step: 3e-3, relaxation: 1.0, allow_truncation: false }
    }
}

/// Output of [`solve_dual`].
#[derive(Clone, Debug)]
pub struct DualSolution {
    /// Zero-flux flux on faces with `div σ̄ = f`.
    pub sigma_bar: VectorField,
    /// Corner samples whose face average is `sigma_bar`.
    pub sigma_corners: CornerField,
    /// `Σ H*(τ)·hx·hy/4`.
    pub objective: f64,
    /// `‖div σ̄ − f‖₂`.
    pub feas_residual: f64,
    pub iterations: usize,
    /// Splitting residual `‖prox(2x − y) − x‖` at exit.
    pub last_change: f64,
    pub converged: bool,
}

/// `Σ H*(τ)` over corner samples.
pub fn dual_objective(spec: &PotentialSpec, tau: &CornerField) -> Result<f64> {
    let mut total = 0.0;
    for &t in &tau.values {
        total += spec.conjugate(t)?;
    }
    Ok(total * 0.25 * tau.grid.cell_area())
}

struct Projector<'a> {
    grid: Grid2D,
    poisson: NeumannPoisson,
    f: &'a ScalarField,
}

impl Projector<'_> {
    fn project(&self, tau: &CornerField) -> Result<CornerField> {
        let s = self.grid.corners_to_faces(tau)?;
        let rhs = self.f.sub(&self.grid.divergence(&s)?);
        let psi = self.poisson.solve(&rhs)?;
        let corr = self.grid.corner_gradient(&psi)?;
        let mut out = tau.clone();
        for (o, c) in out.values.iter_mut().zip(&corr.values) {
            o[0] += c[0];
            o[1] += c[1];
        }
        Ok(out)
    }

    fn feasibility(&self, tau: &CornerField) -> Result<(VectorField, f64)> {
        let s = self.grid.corners_to_faces(tau)?;
        let r = self.grid.divergence(&s)?.sub(self.f).l2_norm();
        Ok((s, r))
    }
}

/// Douglas–Rachford on `Σ H*(τ) + ι{div S(τ) = f}`.
pub fn solve_dual(g: &Grid2D, spec: &PotentialSpec, f: &ScalarField, params: &DualParams) -> Result<DualSolution> {
    g.check(f)?;
    check_compatible(f)?;
    if spec.kind() != PotentialKind::PowerQ || spec.reg_eps() != 0.0 {
        return Err(Error::Unsupported("dual solver needs the unregularized power potential".into()));
    }
    if spec.p() > 2.0 {
        warn!("p = {} exceeds 2; the continuity theory assumes p <= 2", spec.p());
    }
    if !(params.step > 0.0) || !(params.relaxation > 0.0 && params.relaxation < 2.0) {
        return Err(Error::ConfigInvalid("dual step must be > 0 and relaxation in (0, 2)".into()));
    }
    let proj = Projector { grid: *g, poisson: NeumannPoisson::new(*g), f };
    let (gamma, lambda) = (params.step, params.relaxation);

    let mut y = g.zero_corners();
    let mut x = proj.project(&y)?;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        x = proj.project(&y)?;
        let mut change = 0.0;
        for (yk, &xk) in y.values.iter_mut().zip(&x.values) {
            let reflected = [2.0 * xk[0] - yk[0], 2.0 * xk[1] - yk[1]];
            let z = spec.prox_conjugate(reflected, gamma);
            let d = [z[0] - xk[0], z[1] - xk[1]];
            change += d[0] * d[0] + d[1] * d[1];
            yk[0] += lambda * d[0];
            yk[1] += lambda * d[1];
        }
        last_change = (change * 0.25 * g.cell_area()).sqrt();
        if iterations % 500 == 0 {
            debug!("dual iteration {iterations}: splitting residual {last_change:.3e}");
        }
        if last_change <= params.tol {
            converged = true;
            break;
        }
    }
    if !converged && !params.allow_truncation {
        return Err(Error::MaxIterations(params.max_iterations));
    }
    let (sigma_bar, feas_residual) = proj.feasibility(&x)?;
    let objective = dual_objective(spec, &x)?;
    info!("dual: {iterations} iterations, objective {objective:.10e}, feasibility {feas_residual:.3e}");
    Ok(DualSolution { sigma_bar, sigma_corners: x, objective, feas_residual, iterations, last_change, converged })
}

/// `P(u) + D(σ̄)`; nonnegative up to round-off, zero at joint optimality.
pub fn duality_gap(
    g: &Grid2D,
    spec: &PotentialSpec,
    primal: &PrimalSolution,
    dual: &DualSolution,
    f: &ScalarField,
) -> Result<f64> {
    if primal.u.grid != *g || dual.sigma_corners.grid != *g || f.grid != *g {
        return Err(Error::GridMismatch);
    }
    let base = spec.clone().with_reg_eps(0.0)?;
    Ok(primal_energy(g, &base, &primal.u, f)? + dual_objective(&base, &dual.sigma_corners)?)
}

/// Relative gap `gap / max(|P|, |D|, 1)`.
pub fn relative_gap(gap: f64, primal_energy: f64, dual_objective: f64) -> f64 {
    gap / primal_energy.abs().max(dual_objective.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primal::{solve_primal, PrimalParams};

    fn quasi_1d(n: usize) -> (Grid2D, ScalarField) {
        let g = Grid2D::unit_square(n).unwrap();
        let f = g.sample(|x| if x[0] < 0.5 { 1.0 } else { -1.0 });
        (g, f)
    }

    fn dipole(g: &Grid2D) -> ScalarField {
        let mut f = g.sample(|x| {
            let a = ((x[0] - 0.3).powi(2) + (x[1] - 0.5).powi(2)) / 0.01;
            let b = ((x[0] - 0.7).powi(2) + (x[1] - 0.5).powi(2)) / 0.01;
            3.0 * ((-a).exp() - (-b).exp())
        });
        f.remove_mean();
        f
    }

    #[test]
    fn zero_source() {
        let g = Grid2D::unit_square(8).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let sol = solve_dual(&g, &spec, &g.zeros(), &DualParams::default()).unwrap();
        assert_eq!(sol.sigma_bar.max_abs(), 0.0);
        assert_eq!(sol.objective, 0.0);
        let primal = solve_primal(&g, &spec, &g.zeros(), &PrimalParams::default()).unwrap();
        assert_eq!(duality_gap(&g, &spec, &primal, &sol, &g.zeros()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_regularized_potential() {
        let (g, f) = quasi_1d(8);
        let spec = PotentialSpec::power(2.0).unwrap().with_reg_eps(0.1).unwrap();
        assert!(matches!(solve_dual(&g, &spec, &f, &DualParams::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gap_certifies_small_instance() {
        let (g, f) = quasi_1d(24);
        let spec = PotentialSpec::power(2.0).unwrap();
        let primal = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        let dual = solve_dual(&g, &spec, &f, &DualParams::default()).unwrap();
        let gap = duality_gap(&g, &spec, &primal, &dual, &f).unwrap();
        assert!(gap >= -1e-12);
        assert!(relative_gap(gap, primal.energy, dual.objective) <= 1e-4, "gap {gap}");
        assert!(dual.feas_residual <= 1e-8);
        let diff = primal.sigma.sub(&dual.sigma_bar).l2_norm() / dual.sigma_bar.l2_norm();
        assert!(diff <= 1e-3, "{diff}");
    }

    #[test]
    fn truncated_run_has_larger_gap() {
        let g = Grid2D::unit_square(24).unwrap();
        let f = dipole(&g);
        let spec = PotentialSpec::power(2.0).unwrap();
        let primal = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        let dual = solve_dual(&g, &spec, &f, &DualParams::default()).unwrap();
        let gap = duality_gap(&g, &spec, &primal, &dual, &f).unwrap();
        assert!(gap >= -1e-12 && relative_gap(gap, primal.energy, dual.objective) <= 1e-4, "gap {gap}");

        let params = DualParams { max_iterations: 10, allow_truncation: true, ..DualParams::default() };
        let truncated = solve_dual(&g, &spec, &f, &params).unwrap();
        assert!(!truncated.converged);
        assert!(truncated.feas_residual <= 1e-8);
        let truncated_gap = duality_gap(&g, &spec, &primal, &truncated, &f).unwrap();
        assert!(truncated_gap > gap, "{truncated_gap} vs {gap}");
    }

    #[test]
    fn flux_matches_force_where_traffic_flows() {
        let g = Grid2D::unit_square(24).unwrap();
        let f = dipole(&g);
        let spec = PotentialSpec::power(2.0).unwrap();
        let primal = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        let dual = solve_dual(&g, &spec, &f, &DualParams::default()).unwrap();
        for (a, b) in dual.sigma_corners.values.iter().zip(&primal.sigma_corners.values) {
            let na = a[0].hypot(a[1]);
            if na > 0.05 {
                let err = (a[0] - b[0]).hypot(a[1] - b[1]) / na;
                assert!(err <= 0.05, "{a:?} vs {b:?}");
            }
        }
    }
}
