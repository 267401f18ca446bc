//! Measurements on solved fields: truncations `(∂_e u − (1+δ))₊`, dyadic
//! oscillations, annulus Dirichlet energies, the three-alternatives
//! classification, fitted logarithmic moduli, and the De Giorgi recursion.
//!
//! Pointwise functionals of `∇u` use the cell-centered gradient obtained by
//! face averaging; energies stay on faces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, Grid2D, ScalarField, VectorField};
use crate::potentials::{dot, norm};
use crate::Vec2;

/// Balls smaller than this many cells in radius are not measured.
const RESOLUTION_FLOOR_CELLS: f64 = 4.0;
pub const MIN_SCALES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Ratio `R_(n+1) / R_n` of successive balls.
    pub eps0: f64,
    pub decay_factor: f64,
    /// Exponent of the small-oscillation threshold `R^β`.
    pub beta: f64,
    /// Constant `c` of the energy alternative `E_n ≥ c·M_n²`.
    pub energy_const: f64,
    /// Strictly decreasing positive truncation levels.
    pub delta_list: Vec<f64>,
    pub direction_count: usize,
    /// Center of the nested balls; the domain center when absent.
    pub center: Option<Vec2>,
    /// Outermost radius; `0.45` of the shorter side when absent.
    pub radius: Option<f64>,
    /// Cells closer than this to the boundary are left out of modulus tables.
    pub interior_margin: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            eps0: 0.3,
            decay_factor: 7.0 / 8.0,
            beta: beta_from_surplus(1.0),
            energy_const: 0.01,
            delta_list: vec![0.2, 0.1, 0.05, 0.025],
            direction_count: 16,
            center: None,
            radius: None,
            interior_margin: 0.1,
        }
    }
}

/// `β = ε/(2+ε)` for a source with integrability surplus `ε`.
pub fn beta_from_surplus(eps: f64) -> f64 {
    eps / (2.0 + eps)
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return bad("eps0 must lie in (0, 1)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad("decay_factor must lie in (0, 1)");
        }
        if !(self.energy_const > 0.0) {
            return bad("energy_const must be positive");
        }
        if self.delta_list.is_empty()
            || !self.delta_list.iter().all(|d| *d > 0.0 && d.is_finite())
            || self.delta_list.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("delta_list must be strictly decreasing and positive");
        }
        if self.direction_count < 8 {
            return bad("direction_count must be at least 8");
        }
        if !(self.interior_margin >= 0.0) {
            return bad("interior_margin must be nonnegative");
        }
        if self.radius.is_some_and(|r| !(r > 0.0)) {
            return bad("radius must be positive");
        }
        Ok(())
    }

    /// Unit vectors at angles `2πk/K`.
    pub fn directions(&self) -> Vec<Vec2> {
        let k = self.direction_count as f64;
        (0..self.direction_count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / k;
                [a.cos(), a.sin()]
            })
            .collect()
    }

    pub fn center_in(&self, g: &Grid2D) -> Vec2 {
        self.center.unwrap_or([0.5 * g.lx(), 0.5 * g.ly()])
    }

    pub fn radius_in(&self, g: &Grid2D) -> f64 {
        self.radius.unwrap_or(0.45 * g.lx().min(g.ly()))
    }
}

fn check_unit(e: Vec2) -> Result<()> {
    if (norm(e) - 1.0).abs() > 1e-9 {
        return Err(Error::ConfigInvalid(format!("direction {e:?} is not a unit vector")));
    }
    Ok(())
}

/// `(∇u·e − (1+δ))₊` at cell centers.
pub fn compute_truncation(g: &Grid2D, gradu: &VectorField, e: Vec2, delta: f64) -> Result<ScalarField> {
    check_unit(e)?;
    let centers = g.center_gradient(gradu)?;
    Ok(ScalarField { grid: *g, values: centers.iter().map(|z| (dot(*z, e) - (1.0 + delta)).max(0.0)).collect() })
}

/// `(|∇u| − (1+δ))₊` at cell centers.
pub fn compute_excess_modulus(g: &Grid2D, gradu: &VectorField, delta: f64) -> Result<ScalarField> {
    let centers = g.center_gradient(gradu)?;
    Ok(ScalarField { grid: *g, values: centers.iter().map(|z| (norm(*z) - (1.0 + delta)).max(0.0)).collect() })
}

fn check_region(field: &ScalarField, region: &CellSet) -> Result<()> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.cells.iter().any(|&c| c >= field.values.len()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `max − min` of the field over the region.
pub fn oscillation(field: &ScalarField, region: &CellSet) -> Result<f64> {
    check_region(field, region)?;
    let (lo, hi) = region
        .cells
        .iter()
        .map(|&c| field.values[c])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// Sum over faces with both neighbors in the region of
/// `|difference / spacing|²·hx·hy`.
pub fn dirichlet_energy(g: &Grid2D, field: &ScalarField, region: &CellSet) -> Result<f64> {
    g.check(field)?;
    check_region(field, region)?;
    let mut inside = vec![false; g.cell_count()];
    for &c in &region.cells {
        inside[c] = true;
    }
    let v = &field.values;
    let (hx, hy) = (g.hx(), g.hy());
    let mut total = 0.0;
    for &c in &region.cells {
        let (i, j) = g.cell_ij(c);
        if i + 1 < g.nx() && inside[c + 1] {
            total += ((v[c + 1] - v[c]) / hx).powi(2);
        }
        if j + 1 < g.ny() && inside[c + g.nx()] {
            total += ((v[c + g.nx()] - v[c]) / hy).powi(2);
        }
    }
    Ok(total * hx * hy)
}

/// Measurements on one ball `B_(R_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub n: usize,
    pub radius: f64,
    pub oscillation: f64,
    /// Energy on `B_(R_n) ∖ B_(R_(n+1))`; absent on the innermost ball.
    pub annulus_energy: Option<f64>,
    /// `M_(n+1) ≤ decay_factor·M_n`.
    pub decay: Option<bool>,
    /// `E_n ≥ energy_const·M_n²`.
    pub energy: Option<bool>,
    /// `M_n ≤ R_n^β`.
    pub small: bool,
    /// None of the three alternatives holds at this scale.
    pub no_alternative: bool,
}

/// Counts of scales where each alternative holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub decay: usize,
    pub energy: usize,
    pub small: usize,
    pub none: usize,
}

/// Radii `R0·eps0ⁿ` down to the resolution floor.
pub fn scale_radii(g: &Grid2D, r0: f64, eps0: f64) -> Vec<f64> {
    let floor = RESOLUTION_FLOOR_CELLS * g.hx().max(g.hy());
    let mut radii = Vec::new();
    let mut r = r0;
    while r >= floor * (1.0 - 1e-12) {
        radii.push(r);
        r *= eps0;
    }
    radii
}

/// Three-alternatives measurement on nested balls around `center`.
pub fn classify_scales(
    g: &Grid2D,
    field: &ScalarField,
    center: Vec2,
    r0: f64,
    cfg: &DiagnosticsConfig,
) -> Result<Vec<ScaleRecord>> {
    g.check(field)?;
    if !g.ball_fits(center, r0) || !(r0 > 0.0) {
        return Err(Error::RegionOutOfDomain);
    }
    let radii = scale_radii(g, r0, cfg.eps0);
    if radii.len() < MIN_SCALES {
        return Err(Error::ConfigInvalid(format!(
            "only {} scales above the {RESOLUTION_FLOOR_CELLS}-cell floor; at least {MIN_SCALES} needed",
            radii.len()
        )));
    }
    let osc: Vec<f64> = radii.iter().map(|&r| oscillation(field, &g.ball_region(center, r)?)).collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(radii.len());
    for (n, &r) in radii.iter().enumerate() {
        let m = osc[n];
        let small = m <= r.powf(cfg.beta);
        let (annulus_energy, decay, energy) = match radii.get(n + 1) {
            Some(&inner) => {
                let e = match g.annulus_region(center, inner, r) {
                    Ok(ring) => dirichlet_energy(g, field, &ring)?,
                    Err(Error::EmptyRegion) => 0.0,
                    Err(err) => return Err(err),
                };
                (Some(e), Some(osc[n + 1] <= cfg.decay_factor * m), Some(e >= cfg.energy_const * m * m))
            }
            None => (None, None, None),
        };
        let no_alternative = decay.is_some() && !(decay == Some(true) || energy == Some(true) || small);
        records.push(ScaleRecord {
            n,
            radius: r,
            oscillation: m,
            annulus_energy,
            decay,
            energy,
            small,
            no_alternative,
        });
    }
    Ok(records)
}

pub fn tally(records: &[ScaleRecord]) -> Tallies {
    let mut t = Tallies::default();
    for r in records {
        t.decay += usize::from(r.decay == Some(true));
        t.energy += usize::from(r.energy == Some(true));
        t.small += usize::from(r.small);
        t.none += usize::from(r.no_alternative);
    }
    t
}

/// Least-squares fit `M ≈ C |ln R|^(−1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub c_fit: f64,
    /// Relative RMS of the residual; zero when all `M` vanish.
    pub residual: f64,
}

/// Fits `M = C |ln R|^(−1/2)` through the origin.
pub fn fit_log_modulus(pairs: &[(f64, f64)]) -> Result<LogFit> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} pairs given, at least 3 needed", pairs.len())));
    }
    if pairs.iter().any(|&(r, m)| !(r > 0.0 && r < 1.0) || !m.is_finite()) {
        return Err(Error::DegenerateFit("radii must lie in (0, 1)".into()));
    }
    if pairs.iter().all(|&(r, _)| r == pairs[0].0) {
        return Err(Error::DegenerateFit("all radii are equal".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|&(r, _)| r.ln().abs().powf(-0.5)).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxm: f64 = xs.iter().zip(pairs).map(|(x, &(_, m))| x * m).sum();
    let c_fit = (sxm / sxx).max(0.0);
    let sq: f64 = xs.iter().zip(pairs).map(|(x, &(_, m))| (m - c_fit * x).powi(2)).sum();
    let norm_m: f64 = pairs.iter().map(|&(_, m)| m * m).sum();
    let residual = if norm_m == 0.0 { 0.0 } else { (sq / norm_m).sqrt() };
    Ok(LogFit { c_fit, residual })
}

/// `c^(−1/β) b^(−(β+1)/β²)`: starting values at or below it drive the
/// recursion to zero.
pub fn degiorgi_threshold(c: f64, b: f64, beta: f64) -> f64 {
    c.powf(-1.0 / beta) * b.powf(-(beta + 1.0) / (beta * beta))
}

/// Iterates `Y_(n+1) = c bⁿ Y_n^(1+β)` from `Y_1`; returns `Y_1 ..= Y_(n_max)`
/// and whether `Y_(n_max) ≤ 1e−6·Y_1` (or the sequence hit zero).
pub fn degiorgi_recursion(c: f64, b: f64, beta: f64, y1: f64, n_max: usize) -> (Vec<f64>, bool) {
    let mut seq = Vec::with_capacity(n_max);
    seq.push(y1);
    for n in 1..n_max.max(1) {
        let y = seq[n - 1];
        seq.push(c * b.powi(n as i32) * y.powf(1.0 + beta));
    }
    let last = *seq.last().expect("nonempty");
    let converged = seq.contains(&0.0) || last <= 1e-6 * y1;
    (seq, converged)
}

/// Measured modulus `ω(r) = max |v(x) − v(y)|` over pairs of cells of a mask
/// with `|x − y| ≤ r`, for each requested `r`.
pub fn measured_modulus(g: &Grid2D, field: &ScalarField, mask: &[bool], radii: &[f64]) -> Result<Vec<f64>> {
    g.check(field)?;
    if mask.len() != g.cell_count() {
        return Err(Error::GridMismatch);
    }
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let (hx, hy) = (g.hx(), g.hy());
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let di_max = (rmax / hx).floor() as isize;
    let dj_max = (rmax / hy).floor() as isize;
    // one half plane of offsets; each unordered pair is visited once
    let mut offsets = Vec::new();
    for di in 0..=di_max {
        for dj in -dj_max..=dj_max {
            if di == 0 && dj <= 0 {
                continue;
            }
            let d = (di as f64 * hx).hypot(dj as f64 * hy);
            if d <= rmax * (1.0 + 1e-12) {
                offsets.push((di, dj, d));
            }
        }
    }
    let v = &field.values;
    let per_offset: Vec<f64> = offsets
        .iter()
        .map(|&(di, dj, _)| {
            let mut best = 0.0f64;
            for j in 0.max(-dj)..ny.min(ny - dj) {
                for i in 0..nx - di {
                    let a = (j * nx + i) as usize;
                    let b = ((j + dj) * nx + i + di) as usize;
                    if mask[a] && mask[b] {
                        best = best.max((v[a] - v[b]).abs());
                    }
                }
            }
            best
        })
        .collect();
    Ok(radii
        .iter()
        .map(|&r| {
            offsets
                .iter()
                .zip(&per_offset)
                .filter(|((_, _, d), _)| *d <= r * (1.0 + 1e-12))
                .map(|(_, m)| *m)
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Cells whose centers are at least `margin` from the boundary.
pub fn interior_mask(g: &Grid2D, margin: f64) -> Vec<bool> {
    (0..g.cell_count())
        .map(|c| {
            let x = g.cell_center(c);
            x[0] >= margin && x[1] >= margin && g.lx() - x[0] >= margin && g.ly() - x[1] >= margin
        })
        .collect()
}

/// Dyadic ladder `R·2^(−k)` down to one cell.
pub fn dyadic_ladder(g: &Grid2D, r0: f64) -> Vec<f64> {
    let h = g.hx().max(g.hy());
    let mut out = Vec::new();
    let mut r = r0;
    while r >= h * (1.0 - 1e-12) {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// One row of a [`ModulusTable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub label: String,
    pub delta: Option<f64>,
    pub direction: Option<Vec2>,
    pub values: Vec<f64>,
}

/// Measured moduli of several fields on a common ladder of distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub radii: Vec<f64>,
    pub rows: Vec<ModulusRow>,
}

impl ModulusTable {
    pub fn row(&self, label: &str) -> Option<&ModulusRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

fn check_vanishing(gfun: &impl Fn(Vec2) -> f64) -> Result<()> {
    const RADII: usize = 32;
    const ANGLES: usize = 64;
    for k in 0..=RADII {
        let r = k as f64 / RADII as f64;
        for a in 0..ANGLES {
            let t = std::f64::consts::TAU * a as f64 / ANGLES as f64;
            let value = gfun([r * t.cos(), r * t.sin()]);
            if value != 0.0 {
                return Err(Error::NotVanishingOnBall { radius: r, value });
            }
        }
    }
    Ok(())
}

/// Moduli of `g(∇u)` next to those of the truncation family at `δ = 0`.
pub fn composition_diagnostic(
    g: &Grid2D,
    gradu: &VectorField,
    gfun: impl Fn(Vec2) -> f64,
    cfg: &DiagnosticsConfig,
) -> Result<ModulusTable> {
    cfg.validate()?;
    check_vanishing(&gfun)?;
    let centers = g.center_gradient(gradu)?;
    let composed = ScalarField { grid: *g, values: centers.iter().map(|z| gfun(*z)).collect() };
    let radii = dyadic_ladder(g, cfg.radius_in(g));
    let mask = interior_mask(g, cfg.interior_margin);
    let mut rows = vec![ModulusRow {
        label: "composition".into(),
        delta: None,
        direction: None,
        values: measured_modulus(g, &composed, &mask, &radii)?,
    }];
    rows.extend(truncation_rows(g, gradu, 0.0, cfg, &mask, &radii)?);
    Ok(ModulusTable { radii, rows })
}

fn truncation_rows(
    g: &Grid2D,
    gradu: &VectorField,
    delta: f64,
    cfg: &DiagnosticsConfig,
    mask: &[bool],
    radii: &[f64],
) -> Result<Vec<ModulusRow>> {
    let mut rows = vec![ModulusRow {
        label: format!("excess@{delta}"),
        delta: Some(delta),
        direction: None,
        values: measured_modulus(g, &compute_excess_modulus(g, gradu, delta)?, mask, radii)?,
    }];
    for (k, e) in cfg.directions().into_iter().enumerate() {
        rows.push(ModulusRow {
            label: format!("direction{k}@{delta}"),
            delta: Some(delta),
            direction: Some(e),
            values: measured_modulus(g, &compute_truncation(g, gradu, e, delta)?, mask, radii)?,
        });
    }
    Ok(rows)
}

/// Classification of one truncated field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub delta: f64,
    /// `None` for the excess `(|∇u| − (1+δ))₊`.
    pub direction: Option<Vec2>,
    pub scales: Vec<ScaleRecord>,
    pub tallies: Tallies,
    /// Fit of the oscillations against `|ln R|^(−1/2)`; absent when degenerate.
    pub fit: Option<LogFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub center: Vec2,
    pub radii: Vec<f64>,
    pub slices: Vec<Slice>,
    /// Measured moduli of every slice's field on a dyadic ladder.
    pub moduli: ModulusTable,
}

impl ContinuityReport {
    /// One row per scale, per `δ`, per direction.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta,direction_x,direction_y,n,radius,oscillation,annulus_energy,decay,energy,small,no_alternative\n",
        );
        let opt = |v: Option<bool>| v.map_or(String::new(), |b| b.to_string());
        for s in &self.slices {
            let (dx, dy) = s.direction.map_or((String::new(), String::new()), |e| (e[0].to_string(), e[1].to_string()));
            for r in &s.scales {
                let _ = writeln!(
                    out,
                    "{},{dx},{dy},{},{},{},{},{},{},{},{}",
                    s.delta,
                    r.n,
                    r.radius,
                    r.oscillation,
                    r.annulus_energy.map_or(String::new(), |e| e.to_string()),
                    opt(r.decay),
                    opt(r.energy),
                    r.small,
                    r.no_alternative
                );
            }
        }
        out
    }
}

/// Full diagnostics of a face gradient: every `δ` of the config, the excess
/// and each direction.
pub fn diagnose(g: &Grid2D, gradu: &VectorField, cfg: &DiagnosticsConfig) -> Result<ContinuityReport> {
    cfg.validate()?;
    let center = cfg.center_in(g);
    let r0 = cfg.radius_in(g);
    let radii = scale_radii(g, r0, cfg.eps0);
    let ladder = dyadic_ladder(g, r0);
    let mask = interior_mask(g, cfg.interior_margin);
    let mut slices = Vec::new();
    let mut rows = Vec::new();
    for &delta in &cfg.delta_list {
        let mut fields = vec![(format!("excess@{delta}"), None, compute_excess_modulus(g, gradu, delta)?)];
        for (k, e) in cfg.directions().into_iter().enumerate() {
            fields.push((format!("direction{k}@{delta}"), Some(e), compute_truncation(g, gradu, e, delta)?));
        }
        for (label, direction, field) in fields {
            let scales = classify_scales(g, &field, center, r0, cfg)?;
            let pairs: Vec<(f64, f64)> = scales.iter().map(|s| (s.radius, s.oscillation)).collect();
            let fit = fit_log_modulus(&pairs).ok();
            rows.push(ModulusRow {
                label,
                delta: Some(delta),
                direction,
                values: measured_modulus(g, &field, &mask, &ladder)?,
            });
            slices.push(Slice { delta, direction, tallies: tally(&scales), scales, fit });
        }
    }
    Ok(ContinuityReport { center, radii, slices, moduli: ModulusTable { radii: ladder, rows } })
}
