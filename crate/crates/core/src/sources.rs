//! Analytic right-hand sides, evaluated at cell centers and made mean-zero.
//!
//! | name | parameters (defaults) |
//! |---|---|
//! | `two-blocks` | `amplitude` (1): `+a` left of the vertical midline, `−a` right of it |
//! | `four-quadrant-checker` | `amplitude` (1): `±a` alternating over the four quadrants |
//! | `gaussian-dipole` | `amplitude` (8), `width` (0.1), `centers` ([[0.3,0.5],[0.7,0.5]]), `weights` ([1,1]) |
//! | `annular-ring` | `amplitude` (1), `inner_radius` (0.15), `ring` ([0.3,0.4]) |
//!
//! Only `gaussian-dipole` is smooth; the others jump across interfaces.
//!
//! Positions are fractions of the domain sides; radii and widths are
//! fractions of the shorter side.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::Vec2;

pub const SOURCE_NAMES: [&str; 4] = ["two-blocks", "four-quadrant-checker", "gaussian-dipole", "annular-ring"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockParams {
    pub amplitude: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams { amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipoleParams {
    pub amplitude: f64,
    pub width: f64,
    pub centers: [Vec2; 2],
    /// Weights of the positive and the negative bump.
    pub weights: [f64; 2],
}

impl Default for DipoleParams {
    fn default() -> Self {
        DipoleParams { amplitude: 8.0, width: 0.1, centers: [[0.3, 0.5], [0.7, 0.5]], weights: [1.0, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingParams {
    pub amplitude: f64,
    pub inner_radius: f64,
    pub ring: [f64; 2],
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams { amplitude: 1.0, inner_radius: 0.15, ring: [0.3, 0.4] }
    }
}

/// Regularity class of a source before sampling. The solvers only need
/// `f ∈ L²`; the continuity diagnostics assume `f ∈ W^(1,p)`, which jump
/// sources violate. Recorded, never enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSmoothness {
    /// Piecewise constant with jumps: `L^∞` but not `W^(1,p)`.
    Discontinuous,
    Smooth,
    /// Read from a field file.
    Unknown,
}

pub fn source_smoothness(name: &str) -> SourceSmoothness {
    match name {
        "gaussian-dipole" => SourceSmoothness::Smooth,
        "two-blocks" | "four-quadrant-checker" | "annular-ring" => SourceSmoothness::Discontinuous,
        _ => SourceSmoothness::Unknown,
    }
}

/// A sampled source together with the constant removed to make it mean-zero.
#[derive(Clone, Debug)]
pub struct Source {
    pub field: ScalarField,
    pub subtracted_mean: f64,
}

fn params<T: DeserializeOwned + Default>(name: &str, value: &Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).map_err(|e| Error::ConfigInvalid(format!("parameters of `{name}`: {e}")))
}

fn finite(name: &str, checks: &[(bool, &str)]) -> Result<()> {
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, what)) => Err(Error::ConfigInvalid(format!("`{name}`: {what}"))),
        None => Ok(()),
    }
}

/// Evaluates a named source; `params` is a JSON object or `null` for defaults.
pub fn builtin_source(g: &Grid2D, name: &str, params_value: &Value) -> Result<Source> {
    let (lx, ly) = (g.lx(), g.ly());
    let side = lx.min(ly);
    let mut field = match name {
        "two-blocks" => {
            let p: BlockParams = params(name, params_value)?;
            finite(name, &[(p.amplitude.is_finite(), "amplitude must be finite")])?;
            g.sample(|x| if x[0] < 0.5 * lx { p.amplitude } else { -p.amplitude })
        }
        "four-quadrant-checker" => {
            let p: BlockParams = params(name, params_value)?;
            finite(name, &[(p.amplitude.is_finite(), "amplitude must be finite")])?;
            g.sample(|x| if (x[0] < 0.5 * lx) == (x[1] < 0.5 * ly) { p.amplitude } else { -p.amplitude })
        }
        "gaussian-dipole" => {
            let p: DipoleParams = params(name, params_value)?;
            finite(
                name,
                &[
                    (p.amplitude.is_finite(), "amplitude must be finite"),
                    (p.width > 0.0, "width must be positive"),
                    (p.weights.iter().all(|w| *w >= 0.0), "weights must be nonnegative"),
                ],
            )?;
            let w = p.width * side;
            let bump = |x: Vec2, c: Vec2| {
                let d2 = (x[0] - c[0] * lx).powi(2) + (x[1] - c[1] * ly).powi(2);
                (-d2 / (w * w)).exp()
            };
            g.sample(|x| p.amplitude * (p.weights[0] * bump(x, p.centers[0]) - p.weights[1] * bump(x, p.centers[1])))
        }
        "annular-ring" => {
            let p: RingParams = params(name, params_value)?;
            finite(
                name,
                &[
                    (p.amplitude.is_finite(), "amplitude must be finite"),
                    (p.inner_radius > 0.0, "inner_radius must be positive"),
                    (p.inner_radius <= p.ring[0] && p.ring[0] < p.ring[1], "need inner_radius <= ring[0] < ring[1]"),
                    (p.ring[1] <= 0.5, "ring must fit in the domain"),
                ],
            )?;
            let center = [0.5 * lx, 0.5 * ly];
            let r = |x: Vec2| (x[0] - center[0]).hypot(x[1] - center[1]) / side;
            let disk = g.sample(|x| f64::from(u8::from(r(x) <= p.inner_radius)));
            let ring = g.sample(|x| f64::from(u8::from(r(x) > p.ring[0] && r(x) <= p.ring[1])));
            let (nd, nr) = (disk.values.iter().sum::<f64>(), ring.values.iter().sum::<f64>());
            if nd == 0.0 || nr == 0.0 {
                return Err(Error::ConfigInvalid("annular-ring is not resolved by the grid".into()));
            }
            // the ring carries exactly the disk's mass on the discrete grid
            let neg = p.amplitude * nd / nr;
            ScalarField {
                grid: *g,
                values: disk.values.iter().zip(&ring.values).map(|(d, r)| p.amplitude * d - neg * r).collect(),
            }
        }
        _ => return Err(Error::UnknownSource(name.to_string())),
    };
    let subtracted_mean = field.remove_mean();
    Ok(Source { field, subtracted_mean })
}
