//! Traffic built from an optimal flux: integral curves of
//! `σ̂(t, x) = σ̄(x) / ((1−t) f⁺(x) + t f⁻(x))`, their deposited intensity
//! `i_Q`, and a Wardrop audit of the curves against fast-marching geodesics
//! in the congestion metric `g(i_Q)`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use log::{debug, trace, warn};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, Grid2D, ScalarField, VectorField};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// Time step of the RK4 integrator; rounded so that `1/dt` is an integer.
    pub dt: f64,
    /// Cells with `f⁺` above this value seed one curve each.
    pub seed_threshold: f64,
    /// Floor of the denominator of `σ̂`; `1e−6·max f⁺` when absent.
    pub kappa: Option<f64>,
    /// Bound on `‖div σ̄ − f‖₂ / ‖f‖₂`.
    pub feasibility_tol: f64,
    /// Nested subdivisions allowed for a step that moves farther than a cell.
    pub max_refinements: usize,
    /// Fraction of the total weight that may stall before tracing fails.
    pub max_stalled_fraction: f64,
    /// Audit tolerance on `cost / distance − 1`.
    pub slack: f64,
    /// Mass-weighted fraction of audited curves that must pass.
    pub pass_fraction: f64,
    /// Number of curves audited; all of them when absent.
    pub audit_sample: Option<usize>,
    /// Exponent `s` of the congestion cost `g(i) = 1 + i^s`; `p − 1` when absent.
    pub congestion_exponent: Option<f64>,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            dt: 1.0 / 256.0,
            seed_threshold: 0.0,
            kappa: None,
            feasibility_tol: 1e-6,
            max_refinements: 3,
            max_stalled_fraction: 1e-2,
            slack: 0.05,
            pass_fraction: 0.95,
            audit_sample: Some(64),
            congestion_exponent: None,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return bad("traffic dt must lie in (0, 1]");
        }
        if self.kappa.is_some_and(|k| !(k > 0.0)) {
            return bad("kappa must be positive");
        }
        if !(0.0..1.0).contains(&self.max_stalled_fraction) {
            return bad("max_stalled_fraction must lie in [0, 1)");
        }
        if !(self.feasibility_tol > 0.0) || !(self.slack >= 0.0) {
            return bad("feasibility_tol must be positive and slack nonnegative");
        }
        if !(self.pass_fraction > 0.0 && self.pass_fraction <= 1.0) {
            return bad("pass_fraction must lie in (0, 1]");
        }
        if self.audit_sample == Some(0) {
            return bad("audit_sample must be positive");
        }
        if self.congestion_exponent.is_some_and(|s| !(s > 0.0)) {
            return bad("congestion_exponent must be positive");
        }
        Ok(())
    }
}

/// `g(i) = 1 + i^s`.
pub fn congestion_cost(exponent: f64) -> impl Fn(f64) -> f64 {
    move |i: f64| 1.0 + i.max(0.0).powf(exponent)
}

/// One traced curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: usize,
    pub start_cell: usize,
    /// Mass carried, `f⁺·cellArea` at the seed.
    pub weight: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Stopped before `t = 1`, on the boundary or stalled.
    pub truncated: bool,
    /// Passed through points where the denominator of `σ̂` was floored.
    pub clamped: bool,
    /// Stopped where no refinement brought a step below one cell; this happens
    /// where the denominator of `σ̂` is tiny and the curve speed explodes.
    #[serde(default)]
    pub stalled: bool,
}

impl Curve {
    pub fn end(&self) -> Vec2 {
        *self.points.last().expect("curves have at least one vertex")
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardropEntry {
    pub curve: usize,
    pub weight: f64,
    /// `∫ g(i_Q)` along the polyline.
    pub cost: f64,
    /// Fast-marching distance between the endpoints.
    pub distance: f64,
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardropAudit {
    pub entries: Vec<WardropEntry>,
    /// Mass-weighted fraction of audited curves with `ratio ≤ 1 + slack`.
    pub passing_fraction: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct TrafficPlan {
    pub curves: Vec<Curve>,
    pub intensity: Option<ScalarField>,
    /// `Σ |endpoint mass − f⁻·cellArea|` over cells.
    pub terminal_error: f64,
    /// `terminal_error / Σ f⁻·cellArea`.
    pub terminal_error_rel: f64,
    pub truncated_weight: f64,
    pub wardrop: Option<WardropAudit>,
}

impl TrafficPlan {
    pub fn total_weight(&self) -> f64 {
        self.curves.iter().map(|c| c.weight).sum()
    }

    /// `curve,t,x,y,weight`, one row per vertex.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("curve,t,x,y,weight\n");
        for c in &self.curves {
            for (t, p) in c.times.iter().zip(&c.points) {
                let _ = writeln!(out, "{},{},{},{},{}", c.id, t, p[0], p[1], c.weight);
            }
        }
        out
    }
}

/// `(max(f, 0), max(−f, 0))`.
pub fn split_source(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    crate::grid::poisson::check_compatible(f)?;
    Ok((f.map(|v| v.max(0.0)), f.map(|v| (-v).max(0.0))))
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Linear interpolation weights on nodes `0..n` at fractional index `s`.
fn bracket(s: f64, n: usize) -> (usize, usize, f64) {
    if n < 2 {
        return (0, 0, 0.0);
    }
    let s = s.clamp(0.0, (n - 1) as f64);
    let i0 = (s.floor() as usize).min(n - 2);
    (i0, i0 + 1, s - i0 as f64)
}

fn bilinear(values: &[f64], stride: usize, rows: usize, si: f64, sj: f64) -> f64 {
    let (i0, i1, a) = bracket(si, stride);
    let (j0, j1, b) = bracket(sj, rows);
    let v = |i: usize, j: usize| values[j * stride + i];
    (1.0 - b) * ((1.0 - a) * v(i0, j0) + a * v(i1, j0)) + b * ((1.0 - a) * v(i0, j1) + a * v(i1, j1))
}

/// Bilinear interpolation of a cell-centered field, constant beyond the
/// outermost centers.
pub fn interpolate_cells(field: &ScalarField, x: Vec2) -> f64 {
    let g = field.grid;
    bilinear(&field.values, g.nx(), g.ny(), x[0] / g.hx() - 0.5, x[1] / g.hy() - 0.5)
}

/// Bilinear interpolation of both flux components from their faces.
pub fn interpolate_faces(v: &VectorField, x: Vec2) -> Vec2 {
    let g = v.grid;
    let (sx, sy) = (x[0] / g.hx(), x[1] / g.hy());
    [bilinear(&v.x, g.nx() + 1, g.ny(), sx, sy - 0.5), bilinear(&v.y, g.nx(), g.ny() + 1, sx - 0.5, sy)]
}

fn inside(g: &Grid2D, x: Vec2) -> bool {
    let tol = 1e-12 * g.lx().max(g.ly());
    x[0] >= -tol && x[1] >= -tol && x[0] <= g.lx() + tol && x[1] <= g.ly() + tol
}

struct Transport<'a> {
    grid: Grid2D,
    sigma: &'a VectorField,
    fplus: &'a ScalarField,
    fminus: &'a ScalarField,
    kappa: f64,
}

impl Transport<'_> {
    fn eval(&self, t: f64, x: Vec2) -> Result<(Vec2, bool)> {
        if !inside(&self.grid, x) {
            return Err(Error::OutOfDomain(x[0], x[1]));
        }
        let s = interpolate_faces(self.sigma, x);
        let den = (1.0 - t) * interpolate_cells(self.fplus, x) + t * interpolate_cells(self.fminus, x);
        let clamped = den < self.kappa;
        if clamped {
            trace!("sigma_hat denominator {den:e} floored at ({}, {}), t = {t}", x[0], x[1]);
        }
        let den = den.max(self.kappa);
        Ok(([s[0] / den, s[1] / den], clamped))
    }
}

/// `σ̂(t, x)` with the denominator floored at `kappa`.
pub fn sigma_hat(
    sigma_bar: &VectorField,
    fplus: &ScalarField,
    fminus: &ScalarField,
    t: f64,
    x: Vec2,
    kappa: f64,
) -> Result<Vec2> {
    let g = sigma_bar.grid;
    g.check_vec(sigma_bar)?;
    g.check(fplus)?;
    g.check(fminus)?;
    if !(kappa > 0.0) {
        return Err(Error::ConfigInvalid("kappa must be positive".into()));
    }
    Ok(Transport { grid: g, sigma: sigma_bar, fplus, fminus, kappa }.eval(t, x)?.0)
}

fn project_inside(g: &Grid2D, x: Vec2) -> Vec2 {
    [x[0].clamp(0.0, g.lx()), x[1].clamp(0.0, g.ly())]
}

/// Largest `s ∈ [0, 1]` with `a + s (b − a)` in the closed domain.
fn exit_fraction(g: &Grid2D, a: Vec2, b: Vec2) -> f64 {
    let mut s: f64 = 1.0;
    for (k, hi) in [(0, g.lx()), (1, g.ly())] {
        let d = b[k] - a[k];
        if b[k] < 0.0 && d != 0.0 {
            s = s.min(-a[k] / d);
        }
        if b[k] > hi && d != 0.0 {
            s = s.min((hi - a[k]) / d);
        }
    }
    s.clamp(0.0, 1.0)
}

/// Upper bound on the number of substeps one refinement splits a step into.
const MAX_PIECES: usize = 4096;

struct Tracer<'a> {
    field: Transport<'a>,
    cell: f64,
    max_level: usize,
}

enum Step {
    Continue,
    Stop,
}

impl Tracer<'_> {
    fn rk4(&self, t: f64, x: Vec2, dt: f64, clamped: &mut bool) -> Result<Vec2> {
        let g = &self.field.grid;
        let mut stage = |s: f64, y: Vec2| -> Result<Vec2> {
            let (v, c) = self.field.eval(s, project_inside(g, y))?;
            *clamped |= c;
            Ok(v)
        };
        let k1 = stage(t, x)?;
        let k2 = stage(t + 0.5 * dt, [x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]])?;
        let k3 = stage(t + 0.5 * dt, [x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]])?;
        let k4 = stage(t + dt, [x[0] + dt * k3[0], x[1] + dt * k3[1]])?;
        Ok([
            x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ])
    }

    fn advance(&self, curve: &mut Curve, t: f64, dt: f64, level: usize) -> Result<Step> {
        let x = curve.end();
        let mut clamped = false;
        let next = self.rk4(t, x, dt, &mut clamped)?;
        let moved = dist(x, next);
        if moved > self.cell {
            if level >= self.max_level {
                debug!("curve {} stalls at {x:?}, t = {t}: a refined step still moves {moved:.3e}", curve.id);
                curve.clamped |= clamped;
                curve.stalled = true;
                curve.truncated = true;
                return Ok(Step::Stop);
            }
            let pieces = ((2.0 * moved / self.cell).ceil() as usize).clamp(2, MAX_PIECES);
            let sub = dt / pieces as f64;
            for k in 0..pieces {
                if let Step::Stop = self.advance(curve, t + k as f64 * sub, sub, level + 1)? {
                    return Ok(Step::Stop);
                }
            }
            return Ok(Step::Continue);
        }
        curve.clamped |= clamped;
        let g = &self.field.grid;
        if inside(g, next) {
            curve.points.push(next);
            curve.times.push(t + dt);
            return Ok(Step::Continue);
        }
        let s = exit_fraction(g, x, next);
        curve.points.push(project_inside(g, [x[0] + s * (next[0] - x[0]), x[1] + s * (next[1] - x[1])]));
        curve.times.push(t + s * dt);
        curve.truncated = true;
        Ok(Step::Stop)
    }
}

/// Seeds one curve per cell with `f⁺ > seed_threshold` and integrates it over
/// `t ∈ [0, 1]`; fills the terminal deposition error.
pub fn trace_curves(
    sigma_bar: &VectorField,
    fplus: &ScalarField,
    fminus: &ScalarField,
    params: &TrafficParams,
) -> Result<TrafficPlan> {
    params.validate()?;
    let g = sigma_bar.grid;
    g.check_vec(sigma_bar)?;
    g.check(fplus)?;
    g.check(fminus)?;
    let f = fplus.sub(fminus);
    let mismatch = g.divergence(sigma_bar)?.sub(&f).l2_norm();
    let scale = f.l2_norm();
    let feas = if scale > 0.0 { mismatch / scale } else { mismatch };
    if feas > params.feasibility_tol {
        return Err(Error::InfeasibleFlux(feas));
    }
    let fmax = fplus.values.iter().copied().fold(0.0, f64::max);
    if fmax == 0.0 {
        return Ok(TrafficPlan::default());
    }
    let kappa = params.kappa.unwrap_or(1e-6 * fmax);
    let tracer = Tracer {
        field: Transport { grid: g, sigma: sigma_bar, fplus, fminus, kappa },
        cell: g.hx().min(g.hy()),
        max_level: params.max_refinements,
    };
    let steps = (1.0 / params.dt).round().max(1.0) as usize;
    let dt = 1.0 / steps as f64;
    let area = g.cell_area();

    let mut curves = Vec::new();
    for c in 0..g.cell_count() {
        if fplus.values[c] <= params.seed_threshold {
            continue;
        }
        let mut curve = Curve {
            id: curves.len(),
            start_cell: c,
            weight: fplus.values[c] * area,
            times: vec![0.0],
            points: vec![g.cell_center(c)],
            truncated: false,
            clamped: false,
            stalled: false,
        };
        for k in 0..steps {
            if let Step::Stop = tracer.advance(&mut curve, k as f64 * dt, dt, 0)? {
                break;
            }
        }
        // the last node lands on t = 1 up to round-off
        if !curve.truncated {
            *curve.times.last_mut().expect("nonempty") = 1.0;
        }
        curves.push(curve);
    }

    let mut ends = vec![0.0; g.cell_count()];
    let mut truncated_weight = 0.0;
    for c in &curves {
        if c.truncated {
            truncated_weight += c.weight;
        } else {
            ends[cell_of(&g, c.end())] += c.weight;
        }
    }
    let terminal_error: f64 = ends.iter().zip(&fminus.values).map(|(e, m)| (e - m * area).abs()).sum();
    let target: f64 = fminus.values.iter().sum::<f64>() * area;
    let clamped = curves.iter().filter(|c| c.clamped).count();
    let truncated = curves.iter().filter(|c| c.truncated).count();
    if clamped > 0 {
        warn!("{clamped} of {} curves crossed points where the denominator was floored", curves.len());
    }
    let stalled = curves.iter().filter(|c| c.stalled).count();
    if stalled > 0 {
        let weight: f64 = curves.iter().filter(|c| c.stalled).map(|c| c.weight).sum();
        let total: f64 = curves.iter().map(|c| c.weight).sum();
        warn!("{stalled} curves carrying {:.3e} of the mass stalled before t = 1", weight / total);
        if weight > params.max_stalled_fraction * total {
            return Err(Error::StepTooLarge);
        }
    }
    debug!("traced {} curves, {truncated} stopped early", curves.len());
    Ok(TrafficPlan {
        curves,
        intensity: None,
        terminal_error,
        terminal_error_rel: if target > 0.0 { terminal_error / target } else { terminal_error },
        truncated_weight,
        wardrop: None,
    })
}

/// Cell containing `x`, with points on the boundary assigned to the adjacent cell.
fn cell_of(g: &Grid2D, x: Vec2) -> usize {
    let i = ((x[0] / g.hx()).floor().max(0.0) as usize).min(g.nx() - 1);
    let j = ((x[1] / g.hy()).floor().max(0.0) as usize).min(g.ny() - 1);
    g.cell(i, j)
}

/// Splits the segment `a → b` at grid lines; calls `visit(cell, length)`.
fn walk_segment(g: &Grid2D, a: Vec2, b: Vec2, mut visit: impl FnMut(usize, f64)) {
    let len = dist(a, b);
    if len == 0.0 {
        return;
    }
    let mut cuts = vec![0.0, 1.0];
    for (k, h, n) in [(0, g.hx(), g.nx()), (1, g.hy(), g.ny())] {
        let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
        let d = b[k] - a[k];
        if d == 0.0 {
            continue;
        }
        let first = (lo / h).floor() as isize + 1;
        let last = ((hi / h).ceil() as isize - 1).min(n as isize);
        for line in first.max(0)..=last {
            let s = (line as f64 * h - a[k]) / d;
            if s > 0.0 && s < 1.0 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            let m = 0.5 * (w[0] + w[1]);
            let mid = [a[0] + m * (b[0] - a[0]), a[1] + m * (b[1] - a[1])];
            visit(cell_of(g, mid), (w[1] - w[0]) * len);
        }
    }
}

/// Traffic intensity: each segment adds `weight·length/cellArea` to the cells
/// it crosses.
pub fn deposit_intensity(plan: &TrafficPlan, g: &Grid2D) -> Result<ScalarField> {
    if plan.curves.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let mut values = vec![0.0; g.cell_count()];
    let inv_area = 1.0 / g.cell_area();
    for c in &plan.curves {
        for w in c.points.windows(2) {
            walk_segment(g, w[0], w[1], |cell, len| values[cell] += c.weight * len * inv_area);
        }
    }
    Ok(ScalarField { grid: *g, values })
}

/// `∫ metric` along a polyline, with the metric constant on cells.
pub fn path_cost(g: &Grid2D, metric: &ScalarField, points: &[Vec2]) -> f64 {
    let mut total = 0.0;
    for w in points.windows(2) {
        walk_segment(g, w[0], w[1], |cell, len| total += metric.values[cell] * len);
    }
    total
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Cells closer to a source than the larger of these two radii (in cell
/// widths and in fractions of the shorter side) start from the straight-line
/// distance instead of the upwind update.
const EXACT_START_CELLS: f64 = 3.0;
const EXACT_START_FRACTION: f64 = 0.1;

fn check_metric(g: &Grid2D, metric: &ScalarField) -> Result<()> {
    g.check(metric)?;
    match metric.values.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        Some(&m) => Err(Error::NonpositiveMetric(m)),
        None => Ok(()),
    }
}

/// Tentative values near the point `x0` sitting in cell `c0`.
fn exact_start(g: &Grid2D, metric: &ScalarField, x0: Vec2, c0: usize, d: &mut [f64]) {
    let r = (EXACT_START_CELLS * g.hx().max(g.hy())).max(EXACT_START_FRACTION * g.lx().min(g.ly()));
    let (i0, j0) = g.cell_ij(c0);
    let (ri, rj) = ((r / g.hx()).ceil() as isize, (r / g.hy()).ceil() as isize);
    for j in (j0 as isize - rj).max(0)..=(j0 as isize + rj).min(g.ny() as isize - 1) {
        for i in (i0 as isize - ri).max(0)..=(i0 as isize + ri).min(g.nx() as isize - 1) {
            let c = g.cell(i as usize, j as usize);
            let len = dist(x0, g.cell_center(c));
            if len <= r {
                d[c] = d[c].min(len * 0.5 * (metric.values[c] + metric.values[c0]));
            }
        }
    }
}

fn fast_march(g: &Grid2D, metric: &ScalarField, mut d: Vec<f64>) -> ScalarField {
    let n = g.cell_count();
    let (hx, hy) = (g.hx(), g.hy());
    let mut known = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(Key, usize)>> =
        (0..n).filter(|&c| d[c].is_finite()).map(|c| Reverse((Key(d[c]), c))).collect();
    while let Some(Reverse((Key(dc), c))) = heap.pop() {
        if known[c] || dc > d[c] {
            continue;
        }
        known[c] = true;
        let (i, j) = g.cell_ij(c);
        let mut neighbors = Vec::with_capacity(4);
        if i > 0 {
            neighbors.push(c - 1);
        }
        if i + 1 < g.nx() {
            neighbors.push(c + 1);
        }
        if j > 0 {
            neighbors.push(c - g.nx());
        }
        if j + 1 < g.ny() {
            neighbors.push(c + g.nx());
        }
        for nb in neighbors {
            if known[nb] {
                continue;
            }
            let (ni, nj) = g.cell_ij(nb);
            let along = |a: Option<usize>, b: Option<usize>| {
                let v = |k: Option<usize>| k.filter(|&k| known[k]).map_or(f64::INFINITY, |k| d[k]);
                v(a).min(v(b))
            };
            let a = along(ni.checked_sub(1).map(|_| nb - 1), (ni + 1 < g.nx()).then_some(nb + 1));
            let b = along(nj.checked_sub(1).map(|_| nb - g.nx()), (nj + 1 < g.ny()).then_some(nb + g.nx()));
            let cand = upwind(a, b, hx, hy, metric.values[nb]);
            if cand < d[nb] {
                d[nb] = cand;
                heap.push(Reverse((Key(cand), nb)));
            }
        }
    }
    ScalarField { grid: *g, values: d }
}

/// Solves `((d − a)/hx)² + ((d − b)/hy)² = m²` with one-sided fallbacks.
fn upwind(a: f64, b: f64, hx: f64, hy: f64, m: f64) -> f64 {
    let one = (a + m * hx).min(b + m * hy);
    if !a.is_finite() || !b.is_finite() {
        return one;
    }
    let (wa, wb) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let sum = wa + wb;
    let mid = (wa * a + wb * b) / sum;
    let disc = mid * mid - (wa * a * a + wb * b * b - m * m) / sum;
    if disc < 0.0 {
        return one;
    }
    let d = mid + disc.sqrt();
    if d >= a.max(b) {
        d.min(one)
    } else {
        one
    }
}

/// First-order fast marching for `|∇d| = metric` with `d = 0` at the centers
/// of the source cells.
pub fn geodesic_distance(g: &Grid2D, metric: &ScalarField, sources: &CellSet) -> Result<ScalarField> {
    check_metric(g, metric)?;
    if sources.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut d = vec![f64::INFINITY; g.cell_count()];
    for &s in &sources.cells {
        if s >= d.len() {
            return Err(Error::GridMismatch);
        }
        exact_start(g, metric, g.cell_center(s), s, &mut d);
    }
    Ok(fast_march(g, metric, d))
}

/// Distance field from an arbitrary point of the domain.
pub fn geodesic_distance_from(g: &Grid2D, metric: &ScalarField, x0: Vec2) -> Result<ScalarField> {
    check_metric(g, metric)?;
    if !inside(g, x0) {
        return Err(Error::OutOfDomain(x0[0], x0[1]));
    }
    let mut d = vec![f64::INFINITY; g.cell_count()];
    exact_start(g, metric, x0, cell_of(g, x0), &mut d);
    Ok(fast_march(g, metric, d))
}

/// Compares each sampled curve's cost in the metric `gfun(i_Q)` with the
/// geodesic distance between its endpoints.
pub fn wardrop_audit(
    plan: &TrafficPlan,
    intensity: &ScalarField,
    gfun: impl Fn(f64) -> f64,
    params: &TrafficParams,
    seed: u64,
) -> Result<WardropAudit> {
    if plan.curves.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let g = intensity.grid;
    let metric = intensity.map(&gfun);
    check_metric(&g, &metric)?;
    let ids: Vec<usize> = match params.audit_sample {
        Some(k) if k < plan.curves.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = sample(&mut rng, plan.curves.len(), k).into_vec();
            ids.sort_unstable();
            ids
        }
        _ => (0..plan.curves.len()).collect(),
    };
    let mut entries = Vec::with_capacity(ids.len());
    for id in ids {
        let curve = &plan.curves[id];
        let cost = path_cost(&g, &metric, &curve.points);
        let d = geodesic_distance_from(&g, &metric, curve.points[0])?;
        let distance = interpolate_cells(&d, curve.end());
        let ratio = if distance > 0.0 { cost / distance } else { 1.0 };
        entries.push(WardropEntry {
            curve: curve.id,
            weight: curve.weight,
            cost,
            distance,
            ratio,
            flagged: ratio > 1.0 + params.slack,
        });
    }
    let total: f64 = entries.iter().map(|e| e.weight).sum();
    let good: f64 = entries.iter().filter(|e| !e.flagged).map(|e| e.weight).sum();
    let passing_fraction = if total > 0.0 { good / total } else { 1.0 };
    Ok(WardropAudit { passed: passing_fraction >= params.pass_fraction, passing_fraction, entries })
}
