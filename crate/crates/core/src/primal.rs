//! Primal solver: minimize `Σ H_ε(∇u) + Σ f u` by damped Newton with a
//! decreasing schedule of regularization strengths.
//!
//! The energy is assembled on corner samples (see [`crate::grid`]): each
//! cell contributes `hx·hy/4 · H(z)` for each of its four one-sided gradient
//! samples `z`. With this quadrature the first-order condition reads
//! `div S = f` where `S` is the face average of `F(z)`, which is exactly the
//! constraint of the dual problem.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{poisson::check_compatible, CornerField, Grid2D, ScalarField, VectorField};
use crate::potentials::PotentialSpec;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const LINE_BISECTIONS: usize = 12;
/// Stages appended (each ten times weaker) when the configured schedule ends
/// above the residual tolerance.
const MAX_EXTRA_STAGES: usize = 4;
/// Levenberg–Marquardt style shift of the Newton model: grows after damped
/// steps, shrinks after full ones.
const MIN_DAMPING: f64 = 1e-6;
const MAX_DAMPING: f64 = 1e2;
const STALL_RATIO: f64 = 0.9;
const MAX_STALLS: usize = 3;
const STALL_ACCEPT: f64 = 0.1;

/// Starting point of the Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialGuess {
    Zero,
    /// Uniform noise in `[-amplitude, amplitude]` from a seeded generator.
    Random {
        seed: u64,
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimalParams {
    /// Bound on the unregularized first-order residual `‖f − div σ‖₂` at exit.
    pub tol: f64,
    /// Residual at which a regularized stage is considered solved.
    pub stage_tol: f64,
    pub max_newton_per_stage: usize,
    /// Decreasing regularization strengths; the last stage defines the output.
    pub eps_schedule: Vec<f64>,
    pub init: InitialGuess,
}

impl Default for PrimalParams {
    fn default() -> Self {
        PrimalParams {
            tol: 1e-4,
            stage_tol: 1e-9,
            max_newton_per_stage: 500,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            init: InitialGuess::Zero,
        }
    }
}

impl PrimalParams {
    /// Multiplies every schedule entry by `factor`.
    pub fn scaled_schedule(mut self, factor: f64) -> Self {
        self.eps_schedule.iter_mut().for_each(|e| *e *= factor);
        self
    }
}

/// Output of [`solve_primal`].
#[derive(Clone, Debug)]
pub struct PrimalSolution {
    /// Mean-zero potential; not unique where `|∇u| ≤ 1`.
    pub u: ScalarField,
    /// Zero-flux flux `F(∇u)` of the unregularized potential, averaged onto faces.
    pub sigma: VectorField,
    /// Corner samples of `F(∇u)`.
    pub sigma_corners: CornerField,
    /// Unregularized primal energy.
    pub energy: f64,
    /// `‖f − div σ‖₂` for the unregularized flux.
    pub grad_norm: f64,
    pub iterations: usize,
    pub eps_schedule: Vec<f64>,
    /// Regularized energies after every accepted Newton step, per stage.
    pub energy_trace: Vec<Vec<f64>>,
}

/// `Σ H(∇u)·hx·hy/4` over corner samples plus `Σ f u hx hy`, with the
/// potential's own regularization.
pub fn primal_energy(g: &Grid2D, spec: &PotentialSpec, u: &ScalarField, f: &ScalarField) -> Result<f64> {
    g.check(u)?;
    g.check(f)?;
    check_compatible(f)?;
    Ok(energy_unchecked(g, spec, u, f))
}

fn energy_unchecked(g: &Grid2D, spec: &PotentialSpec, u: &ScalarField, f: &ScalarField) -> f64 {
    let z = g.corner_gradient(u).expect("checked grid");
    z.integrate(|z| spec.potential(z)) + u.dot(f)
}

/// `(f − div S)` with `S` the face average of `F(z)`; the energy gradient is
/// this times the cell area.
fn residual(g: &Grid2D, spec: &PotentialSpec, z: &CornerField, f: &ScalarField) -> (ScalarField, VectorField) {
    let flux = g.corners_to_faces(&z.map(|v| spec.force(v))).expect("own grid");
    let div = g.divergence(&flux).expect("own grid");
    (f.sub(&div), flux)
}

fn unregularized_residual(g: &Grid2D, base: &PotentialSpec, u: &ScalarField, f: &ScalarField) -> Result<f64> {
    let z = g.corner_gradient(u)?;
    Ok(residual(g, base, &z, f).0.l2_norm())
}

/// `(cell, coefficient)` terms of a normal difference.
type Stencil = [(usize, f64); 2];

/// Indices of the (at most two) cells entering the normal difference on each
/// face of a corner sample, with their coefficients.
fn corner_stencil(g: &Grid2D, i: usize, j: usize, k: usize) -> (Stencil, usize, Stencil, usize) {
    let (sx, sy) = (k & 1, k >> 1);
    let (hx, hy) = (g.hx(), g.hy());
    let mut ax = [(0, 0.0); 2];
    let mut nxs = 0;
    let fi = i + sx;
    if fi > 0 && fi < g.nx() {
        ax = [(g.cell(fi, j), 1.0 / hx), (g.cell(fi - 1, j), -1.0 / hx)];
        nxs = 2;
    }
    let mut ay = [(0, 0.0); 2];
    let mut nys = 0;
    let fj = j + sy;
    if fj > 0 && fj < g.ny() {
        ay = [(g.cell(i, fj), 1.0 / hy), (g.cell(i, fj - 1), -1.0 / hy)];
        nys = 2;
    }
    (ax, nxs, ay, nys)
}

/// Hessian of the sampled energy, with `shift·I` added to every sample's
/// `D²H` (a multiple of the sample Laplacian).
fn assemble_hessian(g: &Grid2D, spec: &PotentialSpec, z: &CornerField, shift: f64) -> Result<BandMatrix> {
    let n = g.cell_count();
    let w = 0.25 * g.cell_area();
    let mut m = BandMatrix::zeros(n, g.nx() + 1);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let c = g.cell(i, j);
            for k in 0..4 {
                let mut h = spec.hessian(z.values[4 * c + k])?;
                h[0][0] += shift;
                h[1][1] += shift;
                let (ax, nxs, ay, nys) = corner_stencil(g, i, j, k);
                let rows: [(&[(usize, f64)], usize); 2] = [(&ax[..nxs], 0), (&ay[..nys], 1)];
                for &(ra, alpha) in &rows {
                    for &(cb, beta) in &rows {
                        let coef = w * h[alpha][beta];
                        if coef == 0.0 {
                            continue;
                        }
                        for &(p, vp) in ra {
                            for &(q, vq) in cb {
                                // each unordered off-diagonal pair is visited twice
                                if p > q {
                                    m.add(p, q, coef * vp * vq);
                                } else if p == q {
                                    m.add(p, p, coef * vp * vq);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Step along `dir`: the full step if it passes the Armijo test, otherwise
/// the minimizer of the (convex) energy on `[0, 1]` located by bisection on
/// the directional derivative, with halving as the last resort.
#[allow(clippy::too_many_arguments)]
fn line_search(
    g: &Grid2D,
    spec: &PotentialSpec,
    f: &ScalarField,
    u: &ScalarField,
    dir: &ScalarField,
    z: &CornerField,
    energy: f64,
    slope: f64,
) -> Result<(f64, bool)> {
    let trial_energy = |t: f64| {
        let v = ScalarField { grid: *g, values: u.values.iter().zip(&dir.values).map(|(a, d)| a + t * d).collect() };
        energy_unchecked(g, spec, &v, f)
    };
    if trial_energy(1.0) <= energy + ARMIJO * slope {
        return Ok((1.0, true));
    }
    let dz = g.corner_gradient(dir)?;
    let w = 0.25 * g.cell_area();
    let lin = dir.dot(f);
    let derivative = |t: f64| {
        let mut s = 0.0;
        for (a, b) in z.values.iter().zip(&dz.values) {
            let force = spec.force([a[0] + t * b[0], a[1] + t * b[1]]);
            s += force[0] * b[0] + force[1] * b[1];
        }
        w * s + lin
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..LINE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if derivative(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = lo;
    for _ in 0..MAX_BACKTRACKS {
        if t > 0.0 && trial_energy(t) <= energy + ARMIJO * t * slope {
            return Ok((t, true));
        }
        t = if t > 0.0 { 0.5 * t } else { 0.5f64.powi(LINE_BISECTIONS as i32) };
    }
    Ok((0.0, false))
}

/// Minimizes the primal energy with continuation in `reg_eps`.
pub fn solve_primal(
    g: &Grid2D,
    spec: &PotentialSpec,
    f: &ScalarField,
    params: &PrimalParams,
) -> Result<PrimalSolution> {
    g.check(f)?;
    check_compatible(f)?;
    if params.eps_schedule.is_empty() {
        return Err(Error::ConfigInvalid("empty regularization schedule".into()));
    }
    let base = spec.clone().with_reg_eps(0.0)?;
    let area = g.cell_area();
    let mut u = match params.init {
        InitialGuess::Zero => g.zeros(),
        InitialGuess::Random { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            g.sample(|_| rng.gen_range(-amplitude..=amplitude))
        }
    };
    u.remove_mean();

    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut schedule = params.eps_schedule.clone();
    let mut stage_index = 0;
    while stage_index < schedule.len() {
        let eps = schedule[stage_index];
        stage_index += 1;
        let reg = base.clone().with_reg_eps(eps)?;
        let mut stage = Vec::new();
        let mut energy = energy_unchecked(g, &reg, &u, f);
        let mut converged = false;
        let mut prev_res = f64::INFINITY;
        let mut damping = 0.0;

        let mut stalls = 0;
        for it in 0..params.max_newton_per_stage {
            let z = g.corner_gradient(&u)?;
            let (res, _) = residual(g, &reg, &z, f);
            let res_norm = res.l2_norm();
            debug!("eps {eps:e} newton {it}: energy {energy:.12e} residual {res_norm:.3e} damping {damping:.1e}");
            if res_norm <= params.stage_tol {
                converged = true;
                break;
            }
            // samples sitting on the kink |z| = 1 can stall Newton at a small residual
            stalls = if res_norm > STALL_RATIO * prev_res { stalls + 1 } else { 0 };
            prev_res = res_norm;
            if stalls >= MAX_STALLS && res_norm <= STALL_ACCEPT * params.tol {
                debug!("eps {eps:e}: residual stalled at {res_norm:.3e}");
                converged = true;
                break;
            }
            let grad: Vec<f64> = res.values.iter().map(|r| r * area).collect();
            let mut hess = assemble_hessian(g, &reg, &z, damping)?;
            hess.pin(0);
            let mut rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
            rhs[0] = 0.0;
            let chol = hess.factor().map_err(|_| Error::LineSearchFailure(iterations))?;
            let mut dir = ScalarField { grid: *g, values: chol.solve(&rhs) };
            dir.remove_mean();
            let slope: f64 = grad.iter().zip(&dir.values).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                if slope == 0.0 {
                    converged = true;
                    break;
                }
                return Err(Error::LineSearchFailure(iterations));
            }
            let (t, accepted) = line_search(g, &reg, f, &u, &dir, &z, energy, slope)?;
            if accepted {
                for (a, d) in u.values.iter_mut().zip(&dir.values) {
                    *a += t * d;
                }
                energy = energy_unchecked(g, &reg, &u, f);
            }
            iterations += 1;
            let used = damping;
            damping = if accepted && t == 1.0 {
                if damping > MIN_DAMPING {
                    damping / 4.0
                } else {
                    0.0
                }
            } else {
                (4.0 * damping).clamp(MIN_DAMPING, MAX_DAMPING)
            };
            if !accepted {
                if used < MAX_DAMPING {
                    continue;
                }
                // no representable decrease left: the stage is at round-off level
                converged = true;
                break;
            }
            stage.push(energy);
        }
        trace.push(stage);
        if !converged {
            return Err(Error::MaxIterations(params.max_newton_per_stage));
        }
        u.remove_mean();
        if stage_index == schedule.len() {
            let grad_norm = unregularized_residual(g, &base, &u, f)?;
            if grad_norm > params.tol && schedule.len() < params.eps_schedule.len() + MAX_EXTRA_STAGES {
                debug!("residual {grad_norm:.3e} above tolerance; extending the schedule");
                schedule.push(eps / 10.0);
            }
        }
    }

    let z = g.corner_gradient(&u)?;
    let sigma_corners = z.map(|v| base.force(v));
    let sigma = g.corners_to_faces(&sigma_corners)?;
    let grad_norm = f.sub(&g.divergence(&sigma)?).l2_norm();
    let energy = energy_unchecked(g, &base, &u, f);
    info!("primal: {iterations} newton steps, energy {energy:.10e}, residual {grad_norm:.3e}");
    if grad_norm > params.tol {
        return Err(Error::MaxIterations(iterations));
    }
    Ok(PrimalSolution {
        u,
        sigma,
        sigma_corners,
        energy,
        grad_norm,
        iterations,
        eps_schedule: schedule,
        energy_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blocks(g: &Grid2D, amp: f64) -> ScalarField {
        let lx = g.lx();
        g.sample(|x| if x[0] < 0.5 * lx { amp } else { -amp })
    }

    #[test]
    fn energy_examples() {
        let g = Grid2D::unit_square(32).unwrap();
        let q2 = PotentialSpec::power(2.0).unwrap();
        let zero = g.zeros();
        assert_eq!(primal_energy(&g, &q2, &g.sample(|_| 1.0), &zero).unwrap(), 0.0);
        // the zero-flux boundary removes the outer half-columns of samples
        let e = primal_energy(&g, &q2, &g.sample(|x| 2.0 * x[0]), &zero).unwrap();
        assert!((e - 0.5 * (1.0 - 1.0 / 32.0)).abs() < 1e-12, "{e}");
        assert_eq!(primal_energy(&g, &q2, &g.sample(|x| x[0]), &zero).unwrap(), 0.0);
        assert!(matches!(primal_energy(&g, &q2, &zero, &g.sample(|_| 1.0)), Err(Error::IncompatibleSource(_))));
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = Grid2D::new(6, 5, 1.0, 1.0).unwrap();
        let spec = PotentialSpec::power(3.0).unwrap().with_reg_eps(0.05).unwrap();
        let u = g.sample(|x| 2.0 * (3.0 * x[0]).sin() + x[1] * x[1] * 3.0);
        let f = g.zeros();
        let z = g.corner_gradient(&u).unwrap();
        let hess = assemble_hessian(&g, &spec, &z, 0.0).unwrap();
        let grad_at = |v: &ScalarField| -> Vec<f64> {
            let z = g.corner_gradient(v).unwrap();
            residual(&g, &spec, &z, &f).0.values.iter().map(|r| r * g.cell_area()).collect()
        };
        let step = 1e-6;
        for c in [0, 7, 14, 29] {
            let mut up = u.clone();
            let mut um = u.clone();
            up.values[c] += step;
            um.values[c] -= step;
            let (gp, gm) = (grad_at(&up), grad_at(&um));
            let mut e = vec![0.0; g.cell_count()];
            e[c] = 1.0;
            let col = hess.mul(&e);
            for r in 0..g.cell_count() {
                let fd = (gp[r] - gm[r]) / (2.0 * step);
                assert!((fd - col[r]).abs() < 1e-6 * (1.0 + col[r].abs()), "entry ({r},{c}): {fd} vs {}", col[r]);
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let g = Grid2D::unit_square(16).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let sol = solve_primal(&g, &spec, &g.zeros(), &PrimalParams::default()).unwrap();
        assert!(sol.u.max_abs() < 1e-12);
        assert_eq!(sol.sigma.max_abs(), 0.0);
        assert_eq!(sol.energy, 0.0);
    }

    #[test]
    fn quasi_one_dimensional_profile() {
        let g = Grid2D::unit_square(32).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let f = two_blocks(&g, 1.0);
        let sol = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        for jx in 0..g.x_face_count() {
            let x = g.x_face_center(jx)[0];
            let exact = x.min(1.0 - x);
            assert!((sol.sigma.x[jx] - exact).abs() < 1e-3, "face {jx}: {} vs {exact}", sol.sigma.x[jx]);
        }
        assert!(sol.sigma.y.iter().all(|v| v.abs() < 1e-6));
        assert!(sol.grad_norm <= 1e-5);
        for stage in &sol.energy_trace {
            for w in stage.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn scaled_source_scales_the_peak() {
        let g = Grid2D::unit_square(32).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let sol = solve_primal(&g, &spec, &two_blocks(&g, 4.0), &PrimalParams::default()).unwrap();
        assert!((sol.sigma.max_abs() - 2.0).abs() < 0.04, "{}", sol.sigma.max_abs());
    }

    #[test]
    fn flux_is_feasible_to_solver_tolerance() {
        let g = Grid2D::new(24, 16, 1.5, 1.0).unwrap();
        let spec = PotentialSpec::power(3.0).unwrap();
        let mut f = g.sample(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() * 2.0);
        f.remove_mean();
        let params = PrimalParams::default();
        let sol = solve_primal(&g, &spec, &f, &params).unwrap();
        let residual = g.divergence(&sol.sigma).unwrap().sub(&f).l2_norm();
        assert!(residual <= 10.0 * params.tol, "{residual}");
    }

    #[test]
    fn halving_the_schedule_barely_moves_the_flux() {
        let g = Grid2D::unit_square(32).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let f = two_blocks(&g, 1.0);
        let a = solve_primal(&g, &spec, &f, &PrimalParams::default()).unwrap();
        let b = solve_primal(&g, &spec, &f, &PrimalParams::default().scaled_schedule(0.5)).unwrap();
        assert!(a.sigma.sub(&b.sigma).l2_norm() <= 1e-3);
    }

    #[test]
    fn random_starts_share_the_flux() {
        let g = Grid2D::unit_square(24).unwrap();
        let spec = PotentialSpec::power(2.0).unwrap();
        let bump = |x: crate::Vec2, c: f64| (-((x[0] - c).powi(2) + (x[1] - 0.5).powi(2)) / 0.01).exp();
        let mut f = g.sample(|x| 8.0 * (bump(x, 0.3) - bump(x, 0.7)));
        f.remove_mean();
        let solve = |seed| {
            let params =
                PrimalParams { init: InitialGuess::Random { seed, amplitude: 0.5 }, ..PrimalParams::default() };
            solve_primal(&g, &spec, &f, &params).unwrap()
        };
        let (a, b) = (solve(1), solve(2));
        assert!(a.sigma.sub(&b.sigma).l2_norm() <= 1e-6, "{}", a.sigma.sub(&b.sigma).l2_norm());
    }
}
