//! Degenerate convex potentials and the pointwise convex analysis built on them.
//!
//! Every potential here is radial, `H(z) = h(|z|)`, with `h` vanishing on `[0, 1]`
//! so that the force `F = ∇H` is zero on the whole closed unit ball. Writing
//! `φ = h'` for the radial force profile,
//!
//! ```text
//! F(z)    = φ(|z|) z/|z|
//! D²H(z)  = φ'(r) n nᵀ + (φ(r)/r) (I − n nᵀ),   n = z/|z|, r = |z|
//! ```
//!
//! The power family is `h(r) = (r − 1)₊^q / q`. An optional quadratic
//! regularizer `(reg_eps/2)|z|²` is added on top of either family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

/// Radius below which certified bounds are never computed.
pub const MIN_WORKING_RADIUS: f64 = 4.0;

const FLOOR_SAMPLES: usize = 8192;
const FLOOR_SAFETY: f64 = 1.0 - 1e-9;
const PROX_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// 2×2 symmetric matrix stored as `[[a00, a01], [a10, a11]]`.
pub type Mat2 = [[f64; 2]; 2];

/// Smallest and largest eigenvalue of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    let off = 0.5 * (m[0][1] + m[1][0]);
    let rad = d.hypot(off);
    (tr - rad, tr + rad)
}

/// Which radial profile backs the potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    #[serde(rename = "power_q")]
    PowerQ,
    #[serde(rename = "custom-table")]
    CustomTable,
}

/// Piecewise-linear radial force profile `φ(r)` for custom potentials.
///
/// Knots start at `r = 1` with `φ = 0`; `φ` is nondecreasing and is extended
/// linearly with the last slope beyond the final knot. `h = ∫φ` is then
/// piecewise quadratic and evaluated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub radii: Vec<f64>,
    pub force: Vec<f64>,
}

impl RadialTable {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPotential(format!("custom table: {m}")));
        if self.radii.len() < 2 || self.radii.len() != self.force.len() {
            return bad("need at least two knots with matching force values");
        }
        if self.radii[0] != 1.0 || self.force[0] != 0.0 {
            return bad("first knot must be (r = 1, force = 0)");
        }
        for w in self.radii.windows(2) {
            if !(w[1] > w[0]) {
                return bad("radii must be strictly increasing");
            }
        }
        for w in self.force.windows(2) {
            if !(w[1] >= w[0]) {
                return bad("force must be nondecreasing");
            }
        }
        if self.force.iter().chain(&self.radii).any(|v| !v.is_finite()) {
            return bad("non-finite entry");
        }
        Ok(())
    }

    fn segment(&self, r: f64) -> usize {
        let n = self.radii.len();
        match self.radii.partition_point(|&k| k <= r) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn slope(&self, i: usize) -> f64 {
        (self.force[i + 1] - self.force[i]) / (self.radii[i + 1] - self.radii[i])
    }

    fn phi(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 0.0;
        }
        let i = self.segment(r);
        self.force[i] + self.slope(i) * (r - self.radii[i])
    }

    fn dphi(&self, r: f64) -> f64 {
        if r < 1.0 {
            return 0.0;
        }
        self.slope(self.segment(r))
    }

    fn h(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 0.0;
        }
        let last = self.segment(r);
        let mut acc = 0.0;
        for i in 0..last {
            let w = self.radii[i + 1] - self.radii[i];
            acc += 0.5 * (self.force[i] + self.force[i + 1]) * w;
        }
        let t = r - self.radii[last];
        acc + self.force[last] * t + 0.5 * self.slope(last) * t * t
    }
}

/// A degenerate convex potential `H` together with its regularization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PotentialSpec {
    kind: PotentialKind,
    q: f64,
    p: f64,
    reg_eps: f64,
    hess_cap: f64,
    table: Option<RadialTable>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: PotentialKind,
    q: f64,
    #[serde(default)]
    reg_eps: f64,
    #[serde(default = "default_hess_cap")]
    hess_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<RadialTable>,
}

fn default_hess_cap() -> f64 {
    10.0
}

impl TryFrom<RawSpec> for PotentialSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = match raw.kind {
            PotentialKind::PowerQ => PotentialSpec::power(raw.q)?,
            PotentialKind::CustomTable => {
                let table = raw
                    .table
                    .ok_or_else(|| Error::InvalidPotential("custom-table potential without `table`".into()))?;
                PotentialSpec::custom(raw.q, table)?
            }
        };
        spec.with_reg_eps(raw.reg_eps)?.with_hess_cap(raw.hess_cap)
    }
}

impl From<PotentialSpec> for RawSpec {
    fn from(s: PotentialSpec) -> Self {
        RawSpec { kind: s.kind, q: s.q, reg_eps: s.reg_eps, hess_cap: s.hess_cap, table: s.table }
    }
}

/// Value of `H*` with a flag telling whether the closed form was used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugateValue {
    pub value: f64,
    pub closed_form: bool,
}

impl PotentialSpec {
    /// `H_(q)(z) = (|z| − 1)₊^q / q`.
    pub fn power(q: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidPotential(format!("exponent q = {q} must exceed 1")));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::PowerQ,
            q,
            p: q / (q - 1.0),
            reg_eps: 0.0,
            hess_cap: default_hess_cap(),
            table: None,
        })
    }

    /// Tabulated radial potential. `q` only records the growth exponent used to
    /// pick the conjugate pair; the profile itself comes from the table.
    pub fn custom(q: f64, table: RadialTable) -> Result<Self> {
        table.validate()?;
        let mut spec = PotentialSpec::power(q)?;
        spec.kind = PotentialKind::CustomTable;
        spec.table = Some(table);
        Ok(spec)
    }

    pub fn with_reg_eps(mut self, reg_eps: f64) -> Result<Self> {
        if !(reg_eps >= 0.0) || !reg_eps.is_finite() {
            return Err(Error::InvalidPotential(format!("reg_eps = {reg_eps} must be >= 0")));
        }
        self.reg_eps = reg_eps;
        Ok(self)
    }

    pub fn with_hess_cap(mut self, hess_cap: f64) -> Result<Self> {
        if !(hess_cap > 0.0) || !hess_cap.is_finite() {
            return Err(Error::InvalidPotential(format!("hess_cap = {hess_cap} must be > 0")));
        }
        self.hess_cap = hess_cap;
        Ok(self)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn reg_eps(&self) -> f64 {
        self.reg_eps
    }
    pub fn hess_cap(&self) -> f64 {
        self.hess_cap
    }

    /// Radial force profile `φ(r)` without the regularizer.
    fn phi(&self, r: f64) -> f64 {
        match &self.table {
            None => {
                if r <= 1.0 {
                    0.0
                } else {
                    (r - 1.0).powf(self.q - 1.0)
                }
            }
            Some(t) => t.phi(r),
        }
    }

    fn dphi(&self, r: f64) -> Result<f64> {
        match &self.table {
            None => {
                if r < 1.0 {
                    Ok(0.0)
                } else if r == 1.0 {
                    // inner one-sided value; for q < 2 the outer one is infinite
                    if self.q < 2.0 {
                        Err(Error::DegenerateKink)
                    } else {
                        Ok(0.0)
                    }
                } else {
                    Ok((self.q - 1.0) * (r - 1.0).powf(self.q - 2.0))
                }
            }
            Some(t) => Ok(t.dphi(r)),
        }
    }

    fn h(&self, r: f64) -> f64 {
        match &self.table {
            None => {
                if r <= 1.0 {
                    0.0
                } else {
                    (r - 1.0).powf(self.q) / self.q
                }
            }
            Some(t) => t.h(r),
        }
    }

    /// Regularized radial force `φ(r) + reg_eps·r`.
    fn phi_reg(&self, r: f64) -> f64 {
        self.phi(r) + self.reg_eps * r
    }

    /// `H(z) + (reg_eps/2)|z|²`.
    pub fn potential(&self, z: Vec2) -> f64 {
        let r = norm(z);
        self.h(r) + 0.5 * self.reg_eps * r * r
    }

    /// `F(z) = ∇H(z)`, including the regularizer.
    pub fn force(&self, z: Vec2) -> Vec2 {
        let r = norm(z);
        let scale = if r > 1.0 { self.phi(r) / r } else { 0.0 } + self.reg_eps;
        [scale * z[0], scale * z[1]]
    }

    /// Force of the unregularized potential, whatever `reg_eps` is.
    pub fn force_unregularized(&self, z: Vec2) -> Vec2 {
        let r = norm(z);
        if r <= 1.0 {
            return [0.0, 0.0];
        }
        let scale = self.phi(r) / r;
        [scale * z[0], scale * z[1]]
    }

    /// `D²H(z)`, including the regularizer.
    pub fn hessian(&self, z: Vec2) -> Result<Mat2> {
        let r = norm(z);
        let mut m = [[0.0; 2]; 2];
        if r >= 1.0 {
            let radial = self.dphi(r)?;
            if r > 1.0 {
                let tangential = self.phi(r) / r;
                let n = [z[0] / r, z[1] / r];
                for i in 0..2 {
                    for j in 0..2 {
                        let id = if i == j { 1.0 } else { 0.0 };
                        m[i][j] = radial * n[i] * n[j] + tangential * (id - n[i] * n[j]);
                    }
                }
            }
        }
        m[0][0] += self.reg_eps;
        m[1][1] += self.reg_eps;
        Ok(m)
    }

    /// Smallest Hessian eigenvalue on the circle `|z| = r` (`r > 1`).
    fn radial_min_eig(&self, r: f64) -> Result<f64> {
        let tangential = self.phi(r) / r;
        Ok(self.dphi(r)?.min(tangential) + self.reg_eps)
    }

    /// Lower bound `c_δ` for the Hessian on `1 + δ ≤ |z| ≤ 4`.
    pub fn ellipticity_floor(&self, delta: f64) -> Result<f64> {
        self.ellipticity_floor_on(delta, MIN_WORKING_RADIUS)
    }

    /// Lower bound `c_δ` on `1 + δ ≤ |z| ≤ max(4, radius)`, taken as the
    /// minimum over a fine radial sample (endpoints included) shrunk by a
    /// relative safety factor.
    pub fn ellipticity_floor_on(&self, delta: f64, radius: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidPotential(format!("delta = {delta} must be > 0")));
        }
        let lo = 1.0 + delta;
        let hi = radius.max(MIN_WORKING_RADIUS).max(lo);
        let mut min_eig = f64::INFINITY;
        for k in 0..=FLOOR_SAMPLES {
            let r = lo + (hi - lo) * k as f64 / FLOOR_SAMPLES as f64;
            min_eig = min_eig.min(self.radial_min_eig(r)?);
        }
        if let Some(t) = &self.table {
            // slopes change only at knots; sample both sides of each
            for &k in &t.radii {
                for r in [k * (1.0 - 1e-12), k] {
                    if r >= lo && r <= hi {
                        min_eig = min_eig.min(self.radial_min_eig(r)?);
                    }
                }
            }
        }
        if !(min_eig > 0.0) {
            return Err(Error::NotElliptic { delta, min_eig });
        }
        Ok(min_eig * FLOOR_SAFETY)
    }

    /// Largest Hessian eigenvalue sampled on `|z| ≤ radius`.
    pub fn max_hessian_eigenvalue(&self, radius: f64) -> f64 {
        let mut best = self.reg_eps;
        for k in 1..=FLOOR_SAMPLES {
            let r = radius * k as f64 / FLOOR_SAMPLES as f64;
            if r <= 1.0 {
                continue;
            }
            if let Ok(d) = self.dphi(r) {
                best = best.max(d.max(self.phi(r) / r) + self.reg_eps);
            }
        }
        best
    }

    /// Radius on which certified bounds are needed, given the largest
    /// gradient magnitude observed on a discrete solution.
    pub fn working_radius(max_grad: f64) -> f64 {
        MIN_WORKING_RADIUS.max(2.0 * max_grad)
    }

    /// `H*(σ) = |σ| + |σ|^p / p` for the unregularized power potential.
    pub fn conjugate(&self, sigma: Vec2) -> Result<f64> {
        if self.kind != PotentialKind::PowerQ || self.reg_eps != 0.0 {
            return Err(Error::Unsupported(
                "closed-form conjugate exists only for the unregularized power potential".into(),
            ));
        }
        let s = norm(sigma);
        Ok(s + s.powf(self.p) / self.p)
    }

    /// Closed-form conjugate when available, otherwise the radial Legendre
    /// transform `sup_r (r|σ| − h(r))` evaluated through the inverse force.
    pub fn conjugate_or_numerical(&self, sigma: Vec2) -> Result<ConjugateValue> {
        if let Ok(value) = self.conjugate(sigma) {
            return Ok(ConjugateValue { value, closed_form: true });
        }
        let s = norm(sigma);
        let r = self.invert_radial_force(s)?;
        let value = r * s - (self.h(r) + 0.5 * self.reg_eps * r * r);
        Ok(ConjugateValue { value, closed_form: false })
    }

    /// Smallest radius `r ≥ 0` with `φ(r) + reg_eps·r = s`.
    fn invert_radial_force(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        if self.table.is_none() && self.reg_eps == 0.0 {
            return Ok(1.0 + s.powf(1.0 / (self.q - 1.0)));
        }
        // with reg_eps > 0 the root may sit inside the dead ball
        let mut lo = 0.0;
        let mut hi = 2.0;
        let mut grow = 0;
        while self.phi_reg(hi) < s {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 200 || !hi.is_finite() {
                return Err(Error::InversionFailed(s));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.phi_reg(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `argmin_σ ½|σ − σ0|² + τ (|σ| + |σ|^p / p)`.
    ///
    /// The problem is radial; the magnitude solves
    /// `s − |σ0| + τ (1 + s^(p−1)) = 0` on `[0, |σ0| − τ]` by bisection.
    pub fn prox_conjugate(&self, sigma0: Vec2, tau: f64) -> Vec2 {
        let s0 = norm(sigma0);
        if s0 <= tau {
            return [0.0, 0.0];
        }
        let s = prox_radius(s0, tau, self.p);
        let scale = s / s0;
        [scale * sigma0[0], scale * sigma0[1]]
    }

    /// `h_(1+δ)(z·e)` for any `z` with `F(z) = a`.
    ///
    /// All preimages of `a ≠ 0` coincide (the force is injective outside the
    /// closed unit ball); every preimage of `0` lies in the closed unit ball
    /// and is killed by the truncation.
    pub fn gamma_delta(&self, a: Vec2, delta: f64, e: Vec2) -> Result<f64> {
        let s = norm(a);
        if s == 0.0 {
            return Ok(0.0);
        }
        let r = self.invert_radial_force(s)?;
        let z = [r * a[0] / s, r * a[1] / s];
        Ok((dot(z, e) - (1.0 + delta)).max(0.0))
    }
}

/// Magnitude of the conjugate prox for `|σ0| = s0 > τ`.
pub(crate) fn prox_radius(s0: f64, tau: f64, p: f64) -> f64 {
    if p == 2.0 {
        return (s0 - tau) / (1.0 + tau);
    }
    let residual = |s: f64| s - s0 + tau * (1.0 + s.powf(p - 1.0));
    let mut lo = 0.0;
    let mut hi = s0 - tau;
    let tol = PROX_TOL * s0.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
