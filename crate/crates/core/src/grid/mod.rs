//! Uniform staggered (MAC) discretization of a rectangle.
//!
//! Scalars live at cell centers, stored row-major with `i` running along `x`.
//! The `x`-component of a vector field lives on the `(nx+1)·ny` vertical faces,
//! the `y`-component on the `nx·(ny+1)` horizontal faces. Zero-flux boundaries
//! are represented by boundary faces that are exactly zero.
//!
//! Nonlinear functionals of the full gradient are evaluated on *corner
//! samples*: each cell carries four 2-vectors, one per cell corner, built from
//! the normal differences on the two faces meeting at that corner. Every
//! interior face is shared by exactly four corner samples, so averaging
//! samples back onto faces is the adjoint of sampling, up to the factor four.

mod io;
pub(crate) mod poisson;

pub use io::{read_field, write_field, Field, FieldKind};
pub use poisson::NeumannPoisson;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

/// Uniform rectangular grid on `[0, lx] × [0, ly]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl TryFrom<RawGrid> for Grid2D {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        Grid2D::new(r.nx, r.ny, r.lx, r.ly)
    }
}

impl From<Grid2D> for RawGrid {
    fn from(g: Grid2D) -> Self {
        RawGrid { nx: g.nx, ny: g.ny, lx: g.lx, ly: g.ly }
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells per side, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("side lengths {lx}, {ly} must be positive")));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    /// `n × n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid2D::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn x_face_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn y_face_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, c: usize) -> Vec2 {
        let (i, j) = self.cell_ij(c);
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn x_face_center(&self, f: usize) -> Vec2 {
        let (i, j) = (f % (self.nx + 1), f / (self.nx + 1));
        [i as f64 * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn y_face_center(&self, f: usize) -> Vec2 {
        let (i, j) = (f % self.nx, f / self.nx);
        [(i as f64 + 0.5) * self.hx(), j as f64 * self.hy()]
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x[0] >= 0.0 && x[0] <= self.lx && x[1] >= 0.0 && x[1] <= self.ly
    }

    /// Cell containing `x` (points on the outer boundary map to the adjacent cell).
    pub fn locate(&self, x: Vec2) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let i = ((x[0] / self.hx()) as usize).min(self.nx - 1);
        let j = ((x[1] / self.hy()) as usize).min(self.ny - 1);
        Some(self.cell(i, j))
    }

    /// Samples a function at cell centers.
    pub fn sample(&self, mut f: impl FnMut(Vec2) -> f64) -> ScalarField {
        let values = (0..self.cell_count()).map(|c| f(self.cell_center(c))).collect();
        ScalarField { grid: *self, values }
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField { grid: *self, values: vec![0.0; self.cell_count()] }
    }

    /// Zero vector field with zero-flux boundary.
    pub fn zero_flux(&self) -> VectorField {
        VectorField { grid: *self, x: vec![0.0; self.x_face_count()], y: vec![0.0; self.y_face_count()], neumann: true }
    }

    pub fn zero_corners(&self) -> CornerField {
        CornerField { grid: *self, values: vec![[0.0; 2]; 4 * self.cell_count()] }
    }

    /// Vector field from analytic components sampled at face centers; boundary
    /// faces are zeroed when `neumann` is set.
    pub fn sample_faces(&self, fx: impl Fn(Vec2) -> f64, fy: impl Fn(Vec2) -> f64, neumann: bool) -> VectorField {
        let mut v = self.zero_flux();
        v.neumann = neumann;
        for f in 0..self.x_face_count() {
            v.x[f] = fx(self.x_face_center(f));
        }
        for f in 0..self.y_face_count() {
            v.y[f] = fy(self.y_face_center(f));
        }
        if neumann {
            v.clamp_boundary();
        }
        v
    }

    /// Discrete gradient on faces. With `neumann` the boundary faces are zero;
    /// otherwise they copy the adjacent interior face.
    pub fn gradient(&self, u: &ScalarField, neumann: bool) -> Result<VectorField> {
        self.check(u)?;
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx(), self.hy());
        let mut g = self.zero_flux();
        g.neumann = neumann;
        for j in 0..ny {
            for i in 1..nx {
                g.x[self.x_face(i, j)] = (u.values[self.cell(i, j)] - u.values[self.cell(i - 1, j)]) / hx;
            }
            if !neumann {
                g.x[self.x_face(0, j)] = g.x[self.x_face(1, j)];
                g.x[self.x_face(nx, j)] = g.x[self.x_face(nx - 1, j)];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                g.y[self.y_face(i, j)] = (u.values[self.cell(i, j)] - u.values[self.cell(i, j - 1)]) / hy;
            }
        }
        if !neumann {
            for i in 0..nx {
                g.y[self.y_face(i, 0)] = g.y[self.y_face(i, 1)];
                g.y[self.y_face(i, ny)] = g.y[self.y_face(i, ny - 1)];
            }
        }
        Ok(g)
    }

    /// Cell-centered divergence of a face field.
    pub fn divergence(&self, s: &VectorField) -> Result<ScalarField> {
        self.check_vec(s)?;
        let (hx, hy) = (self.hx(), self.hy());
        let mut out = self.zeros();
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.values[self.cell(i, j)] = (s.x[self.x_face(i + 1, j)] - s.x[self.x_face(i, j)]) / hx
                    + (s.y[self.y_face(i, j + 1)] - s.y[self.y_face(i, j)]) / hy;
            }
        }
        Ok(out)
    }

    /// `s + ∇ψ` with `div ∇ψ = f − div s`: the smallest zero-flux correction
    /// making the divergence equal to `f`.
    pub fn project_divergence(&self, s: &VectorField, f: &ScalarField) -> Result<VectorField> {
        NeumannPoisson::new(*self).project(s, f)
    }

    /// Corner samples of the zero-flux gradient of `u`.
    pub fn corner_gradient(&self, u: &ScalarField) -> Result<CornerField> {
        let g = self.gradient(u, true)?;
        Ok(self.faces_to_corners(&g))
    }

    /// Corner samples reading the normal component from each corner's two faces.
    pub fn faces_to_corners(&self, v: &VectorField) -> CornerField {
        let mut out = self.zero_corners();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell(i, j);
                for k in 0..4 {
                    let (sx, sy) = (k & 1, k >> 1);
                    out.values[4 * c + k] = [v.x[self.x_face(i + sx, j)], v.y[self.y_face(i, j + sy)]];
                }
            }
        }
        out
    }

    /// Zero-flux face field holding, on each interior face, the mean normal
    /// component of the four corner samples that touch it.
    pub fn corners_to_faces(&self, t: &CornerField) -> Result<VectorField> {
        if t.grid != *self {
            return Err(Error::GridMismatch);
        }
        let mut out = self.zero_flux();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell(i, j);
                for k in 0..4 {
                    let (sx, sy) = (k & 1, k >> 1);
                    let v = t.values[4 * c + k];
                    out.x[self.x_face(i + sx, j)] += 0.25 * v[0];
                    out.y[self.y_face(i, j + sy)] += 0.25 * v[1];
                }
            }
        }
        out.clamp_boundary();
        Ok(out)
    }

    /// Cell-centered gradient obtained by averaging the two faces of each cell.
    pub fn center_gradient(&self, v: &VectorField) -> Result<Vec<Vec2>> {
        self.check_vec(v)?;
        Ok((0..self.cell_count())
            .map(|c| {
                let (i, j) = self.cell_ij(c);
                [
                    0.5 * (v.x[self.x_face(i, j)] + v.x[self.x_face(i + 1, j)]),
                    0.5 * (v.y[self.y_face(i, j)] + v.y[self.y_face(i, j + 1)]),
                ]
            })
            .collect())
    }

    /// Cells whose centers lie in the closed ball `|x − center| ≤ r`.
    pub fn ball_region(&self, center: Vec2, r: f64) -> Result<CellSet> {
        self.region(center, -1.0, r)
    }

    /// Cells whose centers satisfy `r_in < |x − center| ≤ r_out`.
    pub fn annulus_region(&self, center: Vec2, r_in: f64, r_out: f64) -> Result<CellSet> {
        if !(r_in >= 0.0 && r_in < r_out) {
            return Err(Error::InvalidGrid(format!("annulus radii {r_in} < {r_out} required")));
        }
        self.region(center, r_in, r_out)
    }

    fn region(&self, center: Vec2, r_in: f64, r_out: f64) -> Result<CellSet> {
        if !(r_out > 0.0) || !self.contains(center) {
            return Err(Error::RegionOutOfDomain);
        }
        let (hx, hy) = (self.hx(), self.hy());
        let i_lo = (((center[0] - r_out) / hx - 0.5).floor().max(0.0)) as usize;
        let j_lo = (((center[1] - r_out) / hy - 0.5).floor().max(0.0)) as usize;
        let i_hi = ((((center[0] + r_out) / hx - 0.5).ceil()).max(0.0) as usize).min(self.nx - 1);
        let j_hi = ((((center[1] + r_out) / hy - 0.5).ceil()).max(0.0) as usize).min(self.ny - 1);
        let mut cells = Vec::new();
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                let c = self.cell(i, j);
                let x = self.cell_center(c);
                let d = (x[0] - center[0]).hypot(x[1] - center[1]);
                if d <= r_out && d > r_in {
                    cells.push(c);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(CellSet { cells })
    }

    /// Whether the ball lies inside the domain.
    pub fn ball_fits(&self, center: Vec2, r: f64) -> bool {
        center[0] - r >= -1e-12
            && center[1] - r >= -1e-12
            && center[0] + r <= self.lx + 1e-12
            && center[1] + r <= self.ly + 1e-12
    }

    pub(crate) fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid != *self || u.values.len() != self.cell_count() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn check_vec(&self, v: &VectorField) -> Result<()> {
        if v.grid != *self || v.x.len() != self.x_face_count() || v.y.len() != self.y_face_count() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Cell-centered scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldFormat("non-finite cell value".into()));
        }
        Ok(ScalarField { grid, values })
    }

    /// `∫ f` as the cell-area weighted sum.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Subtracts the mean and returns the amount removed.
    pub fn remove_mean(&mut self) -> f64 {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
        m
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        ScalarField { grid: self.grid, values }
    }
}

/// Face-centered vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    /// Components on vertical faces, `(nx+1)·ny`, index `j·(nx+1) + i`.
    pub x: Vec<f64>,
    /// Components on horizontal faces, `nx·(ny+1)`, index `j·nx + i`.
    pub y: Vec<f64>,
    /// Boundary faces are held at zero (`σ·n = 0`).
    pub neumann: bool,
}

impl VectorField {
    /// Zeroes every boundary face and marks the field as zero-flux.
    pub fn clamp_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.x[g.x_face(0, j)] = 0.0;
            self.x[g.x_face(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.y[g.y_face(i, 0)] = 0.0;
            self.y[g.y_face(i, g.ny)] = 0.0;
        }
        self.neumann = true;
    }

    /// Face inner product with weight `hx·hy` per face.
    pub fn dot(&self, other: &VectorField) -> f64 {
        let sx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let sy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        (sx + sy) * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a - b).collect(),
            neumann: self.neumann && other.neumann,
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &VectorField) {
        self.x.iter_mut().zip(&other.x).for_each(|(a, b)| *a += alpha * b);
        self.y.iter_mut().zip(&other.y).for_each(|(a, b)| *a += alpha * b);
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise magnitude at cell centers from face-averaged components.
    pub fn center_magnitude(&self) -> ScalarField {
        let centers = self.grid.center_gradient(self).expect("field lives on its own grid");
        ScalarField { grid: self.grid, values: centers.iter().map(|v| v[0].hypot(v[1])).collect() }
    }
}

/// Four 2-vector samples per cell, one per corner.
///
/// Sample `k` of cell `c` is stored at `4c + k`; bit 0 of `k` selects the east
/// (1) or west (0) face, bit 1 the north (1) or south (0) face.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerField {
    pub grid: Grid2D,
    pub values: Vec<Vec2>,
}

impl CornerField {
    /// `Σ w(z)` with weight `hx·hy/4` per sample.
    pub fn integrate(&self, w: impl Fn(Vec2) -> f64) -> f64 {
        self.values.iter().map(|&z| w(z)).sum::<f64>() * 0.25 * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> CornerField {
        CornerField { grid: self.grid, values: self.values.iter().map(|&z| f(z)).collect() }
    }

    /// Weighted `L²` distance to another sample set.
    pub fn l2_distance(&self, other: &CornerField) -> f64 {
        let s: f64 =
            self.values.iter().zip(&other.values).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum();
        (s * 0.25 * self.grid.cell_area()).sqrt()
    }
}

/// Sorted list of cell indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSet {
    pub cells: Vec<usize>,
}

impl CellSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn contains(&self, c: usize) -> bool {
        self.cells.binary_search(&c).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: &Grid2D, rng: &mut ChaCha8Rng) -> ScalarField {
        g.sample(|_| rng.gen_range(-1.0..1.0))
    }

    fn random_flux(g: &Grid2D, rng: &mut ChaCha8Rng) -> VectorField {
        let mut s = g.zero_flux();
        s.x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.y.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.clamp_boundary();
        s
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        let g = Grid2D::new(8, 4, 2.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.x_face_count(), 36);
        assert_eq!(g.y_face_count(), 40);
    }

    #[test]
    fn gradient_of_linear_and_constant() {
        let g = Grid2D::unit_square(8).unwrap();
        let u = g.sample(|x| x[0]);
        let grad = g.gradient(&u, false).unwrap();
        assert!(grad.x.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(grad.y.iter().all(|v| v.abs() < 1e-12));
        let grad_n = g.gradient(&u, true).unwrap();
        assert_eq!(grad_n.x[g.x_face(0, 3)], 0.0);
        assert!((grad_n.x[g.x_face(4, 3)] - 1.0).abs() < 1e-12);
        let c = g.sample(|_| 3.5);
        assert!(g.gradient(&c, true).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = Grid2D::unit_square(4).unwrap();
        let u = g.sample(|x| x[0] * x[0]);
        let grad = g.gradient(&u, true).unwrap();
        assert!((grad.x[g.x_face(2, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn divergence_examples() {
        let g = Grid2D::unit_square(8).unwrap();
        let mut s = g.sample_faces(|_| 1.0, |_| 1.0, false);
        s.clamp_boundary();
        let d = g.divergence(&s).unwrap();
        assert_eq!(d.values[g.cell(3, 3)], 0.0);
        assert_eq!(d.values[g.cell(0, 3)], 1.0 / g.hx());
        let u = g.sample(|x| 0.5 * x[0] * x[0]);
        let lap = g.divergence(&g.gradient(&u, true).unwrap()).unwrap();
        for j in 0..8 {
            for i in 1..7 {
                assert!((lap.values[g.cell(i, j)] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_divergence_adjoint() {
        let g = Grid2D::new(13, 9, 1.3, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = random_field(&g, &mut rng);
            let s = random_flux(&g, &mut rng);
            let lhs = g.gradient(&u, true).unwrap().dot(&s);
            let rhs = u.dot(&g.divergence(&s).unwrap());
            let scale = lhs.abs().max(rhs.abs());
            assert!((lhs + rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn corner_sampling_is_adjoint_of_face_averaging() {
        let g = Grid2D::new(7, 6, 1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_flux(&g, &mut rng);
        let mut t = g.zero_corners();
        t.values.iter_mut().for_each(|v| *v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let ct = g.faces_to_corners(&s);
        let lhs: f64 = ct.values.iter().zip(&t.values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        let rhs = 4.0 * g.corners_to_faces(&t).unwrap().dot(&s) / g.cell_area();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        let back = g.corners_to_faces(&ct).unwrap();
        assert!(back.sub(&s).max_abs() < 1e-15);
    }

    #[test]
    fn regions() {
        let g = Grid2D::unit_square(64).unwrap();
        assert!(matches!(g.ball_region([0.5, 0.5], 0.4 * g.hx()), Err(Error::EmptyRegion)));
        let all = g.ball_region([0.5, 0.5], 0.75).unwrap();
        assert_eq!(all.len(), g.cell_count());
        let disk = g.ball_region([0.5, 0.5], 0.25).unwrap();
        let frac = disk.len() as f64 / 4096.0;
        let area = std::f64::consts::PI * 0.0625;
        assert!((frac - area).abs() < 0.05 * area);
        let ring = g.annulus_region([0.5, 0.5], 0.1, 0.25).unwrap();
        let inner = g.ball_region([0.5, 0.5], 0.1).unwrap();
        assert_eq!(ring.len() + inner.len(), disk.len());
        assert!(ring.cells.iter().all(|c| !inner.contains(*c)));
        assert!(matches!(g.ball_region([1.5, 0.5], 0.1), Err(Error::RegionOutOfDomain)));
        assert!(g.ball_region([0.3, 0.7], 2.0 * g.hx()).is_ok());
    }

    proptest! {
        #[test]
        fn balls_of_two_cells_are_never_empty(cx in 0.0f64..1.0, cy in 0.0f64..1.0) {
            let g = Grid2D::unit_square(16).unwrap();
            prop_assert!(g.ball_region([cx, cy], 2.0 * g.hx()).is_ok());
        }

        #[test]
        fn affine_gradient_is_exact(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -1.0f64..1.0) {
            let g = Grid2D::new(9, 7, 1.0, 0.5).unwrap();
            let u = g.sample(|x| a * x[0] + b * x[1] + c);
            let grad = g.gradient(&u, false).unwrap();
            prop_assert!(grad.x.iter().all(|v| (v - a).abs() < 1e-10));
            prop_assert!(grad.y.iter().all(|v| (v - b).abs() < 1e-10));
        }
    }
}
