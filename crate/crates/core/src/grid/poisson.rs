//! Zero-flux Poisson problems on the staggered grid.
//!
//! The operator `−div ∘ ∇` with zero boundary flux is diagonalized by the
//! type-II cosine transform, so the transform solve is an exact inverse on
//! the mean-zero subspace. It is used as the preconditioner of a conjugate
//! gradient loop that owns the residual check and projects the constant
//! mode out of every iterate.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use super::{Grid2D, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Residual tolerance of [`NeumannPoisson::solve`], relative to `max(1, ‖rhs‖)`.
pub const POISSON_TOL: f64 = 1e-10;
const MAX_CG_ITERATIONS: usize = 200;

/// Reusable solver for `div ∇ψ = rhs` with zero boundary flux.
#[derive(Clone)]
pub struct NeumannPoisson {
    grid: Grid2D,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
    dct_x: Arc<dyn TransformType2And3<f64>>,
    dct_y: Arc<dyn TransformType2And3<f64>>,
    tol: f64,
    max_iterations: usize,
}

impl std::fmt::Debug for NeumannPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannPoisson").field("grid", &self.grid).field("tol", &self.tol).finish()
    }
}

impl NeumannPoisson {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = DctPlanner::new();
        let eig = |n: usize, h: f64| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
                    4.0 * s * s / (h * h)
                })
                .collect()
        };
        NeumannPoisson {
            grid,
            eig_x: eig(grid.nx(), grid.hx()),
            eig_y: eig(grid.ny(), grid.hy()),
            dct_x: planner.plan_dct2(grid.nx()),
            dct_y: planner.plan_dct2(grid.ny()),
            tol: POISSON_TOL,
            max_iterations: MAX_CG_ITERATIONS,
        }
    }

    pub fn with_tolerance(mut self, tol: f64, max_iterations: usize) -> Self {
        self.tol = tol;
        self.max_iterations = max_iterations;
        self
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// `−div ∇ψ` with zero boundary flux.
    pub fn apply_negative_laplacian(&self, psi: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let v = psi[c];
                let mut acc = 0.0;
                if i > 0 {
                    acc += ax * (v - psi[c - 1]);
                }
                if i + 1 < nx {
                    acc += ax * (v - psi[c + 1]);
                }
                if j > 0 {
                    acc += ay * (v - psi[c - nx]);
                }
                if j + 1 < ny {
                    acc += ay * (v - psi[c + nx]);
                }
                out[c] = acc;
            }
        }
        out
    }

    /// Exact inverse of `−div ∇` on mean-zero data by cosine transforms.
    fn spectral_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut a = rhs.to_vec();
        for row in a.chunks_exact_mut(nx) {
            self.dct_x.process_dct2(row);
        }
        let mut t = transpose(&a, nx, ny);
        for col in t.chunks_exact_mut(ny) {
            self.dct_y.process_dct2(col);
        }
        for kx in 0..nx {
            for ky in 0..ny {
                let lam = self.eig_x[kx] + self.eig_y[ky];
                let idx = kx * ny + ky;
                t[idx] = if kx == 0 && ky == 0 { 0.0 } else { t[idx] / lam };
            }
        }
        for col in t.chunks_exact_mut(ny) {
            self.dct_y.process_dct3(col);
        }
        let mut a = transpose(&t, ny, nx);
        for row in a.chunks_exact_mut(nx) {
            self.dct_x.process_dct3(row);
        }
        let scale = 4.0 / (nx * ny) as f64;
        a.iter_mut().for_each(|v| *v *= scale);
        a
    }

    /// Solves `div ∇ψ = rhs` for mean-zero `ψ`. `rhs` must integrate to zero.
    pub fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.grid.check(rhs)?;
        check_compatible(rhs)?;
        let area = self.grid.cell_area();
        let n = rhs.values.len();
        // −div ∇ψ = b with b = −rhs, mean removed
        let mut b: Vec<f64> = rhs.values.iter().map(|v| -v).collect();
        remove_mean(&mut b);
        let l2 = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() * area).sqrt();
        let target = self.tol * l2(&b).max(1.0);

        let mut x = vec![0.0; n];
        let mut r = b;
        let mut res = l2(&r);
        if res <= target {
            return Ok(ScalarField { grid: self.grid, values: x });
        }
        let mut z = self.spectral_inverse(&r);
        remove_mean(&mut z);
        let mut p = z.clone();
        let mut rz: f64 = dot(&r, &z);
        for it in 0..self.max_iterations {
            let ap = self.apply_negative_laplacian(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::SolverStagnation { iterations: it, residual: res });
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            remove_mean(&mut r);
            res = l2(&r);
            if res <= target {
                remove_mean(&mut x);
                return Ok(ScalarField { grid: self.grid, values: x });
            }
            z = self.spectral_inverse(&r);
            remove_mean(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::SolverStagnation { iterations: self.max_iterations, residual: res })
    }

    /// Zero-flux field closest to `s` with divergence `f`.
    pub fn project(&self, s: &VectorField, f: &ScalarField) -> Result<VectorField> {
        self.grid.check_vec(s)?;
        self.grid.check(f)?;
        check_compatible(f)?;
        let mut out = s.clone();
        out.clamp_boundary();
        let div = self.grid.divergence(&out)?;
        let rhs = f.sub(&div);
        let psi = self.solve(&rhs)?;
        let corr = self.grid.gradient(&psi, true)?;
        out.add_scaled(1.0, &corr);
        Ok(out)
    }
}

/// Rejects sources whose integral is not zero to `1e-10` (relative to `‖f‖₁` when larger than one).
pub fn check_compatible(f: &ScalarField) -> Result<()> {
    let total = f.integral();
    if total.abs() > 1e-10 * f.l1_norm().max(1.0) {
        return Err(Error::IncompatibleSource(total));
    }
    Ok(())
}

fn transpose(a: &[f64], cols: usize, rows: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectral_inverse_is_exact() {
        let g = Grid2D::new(12, 10, 1.2, 0.8).unwrap();
        let solver = NeumannPoisson::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut psi: Vec<f64> = (0..g.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        remove_mean(&mut psi);
        let b = solver.apply_negative_laplacian(&psi);
        let back = solver.spectral_inverse(&b);
        for (a, c) in psi.iter().zip(&back) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn project_zero_and_feasible_inputs() {
        let g = Grid2D::unit_square(16).unwrap();
        let solver = NeumannPoisson::new(g);
        let out = solver.project(&g.zero_flux(), &g.zeros()).unwrap();
        assert_eq!(out.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = g.zero_flux();
        s.x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.y.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.clamp_boundary();
        let f = g.divergence(&s).unwrap();
        let out = solver.project(&s, &f).unwrap();
        assert!(out.sub(&s).max_abs() < 1e-10);
    }

    #[test]
    fn project_dipole() {
        let g = Grid2D::unit_square(32).unwrap();
        let solver = NeumannPoisson::new(g);
        let mut f = g.zeros();
        f.values[g.cell(8, 16)] = 1.0;
        f.values[g.cell(24, 16)] = -1.0;
        let out = solver.project(&g.zero_flux(), &f).unwrap();
        let div = g.divergence(&out).unwrap();
        assert!(div.sub(&f).l2_norm() <= 1e-10);
        let twice = solver.project(&out, &f).unwrap();
        assert!(twice.sub(&out).max_abs() <= 1e-9);
    }

    #[test]
    fn incompatible_source_is_rejected() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = g.sample(|_| 1.0);
        assert!(matches!(NeumannPoisson::new(g).solve(&f), Err(Error::IncompatibleSource(_))));
    }
}
