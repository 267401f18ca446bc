//! Field files: one JSON header line followed by a little-endian `f64` payload.
//!
//! ```text
//! {"type":"vector","nx":64,"ny":64,"lx":1.0,"ly":1.0,"neumann":true}\n
//! <x-face values><y-face values>
//! ```
//!
//! Scalar payloads are the `nx·ny` cell values in row-major order; corner
//! payloads are `4·nx·ny` pairs `(zx, zy)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CornerField, Grid2D, ScalarField, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
    Corner,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(rename = "type")]
    kind: FieldKind,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    neumann: bool,
}

/// Any field that can be stored in a field file.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
    Corner(CornerField),
}

impl Field {
    pub fn grid(&self) -> Grid2D {
        match self {
            Field::Scalar(f) => f.grid,
            Field::Vector(f) => f.grid,
            Field::Corner(f) => f.grid,
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Field::Scalar(f) => Ok(f),
            _ => Err(Error::FieldFormat("expected a scalar field".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            Field::Vector(f) => Ok(f),
            _ => Err(Error::FieldFormat("expected a vector field".into())),
        }
    }

    pub fn into_corner(self) -> Result<CornerField> {
        match self {
            Field::Corner(f) => Ok(f),
            _ => Err(Error::FieldFormat("expected a corner field".into())),
        }
    }

    /// Plot-ready CSV. Values are printed in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Field::Scalar(f) => {
                out.push_str("i,j,x,y,value\n");
                for (c, v) in f.values.iter().enumerate() {
                    let (i, j) = f.grid.cell_ij(c);
                    let x = f.grid.cell_center(c);
                    let _ = writeln!(out, "{i},{j},{},{},{v}", x[0], x[1]);
                }
            }
            Field::Vector(f) => {
                let g = f.grid;
                out.push_str("component,i,j,x,y,value\n");
                for (k, v) in f.x.iter().enumerate() {
                    let x = g.x_face_center(k);
                    let _ = writeln!(out, "x,{},{},{},{},{v}", k % (g.nx() + 1), k / (g.nx() + 1), x[0], x[1]);
                }
                for (k, v) in f.y.iter().enumerate() {
                    let x = g.y_face_center(k);
                    let _ = writeln!(out, "y,{},{},{},{},{v}", k % g.nx(), k / g.nx(), x[0], x[1]);
                }
            }
            Field::Corner(f) => {
                out.push_str("i,j,corner,zx,zy\n");
                for (k, v) in f.values.iter().enumerate() {
                    let (i, j) = f.grid.cell_ij(k / 4);
                    let _ = writeln!(out, "{i},{j},{},{},{}", k % 4, v[0], v[1]);
                }
            }
        }
        out
    }
}

impl From<ScalarField> for Field {
    fn from(f: ScalarField) -> Self {
        Field::Scalar(f)
    }
}
impl From<VectorField> for Field {
    fn from(f: VectorField) -> Self {
        Field::Vector(f)
    }
}
impl From<CornerField> for Field {
    fn from(f: CornerField) -> Self {
        Field::Corner(f)
    }
}

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let g = field.grid();
    let (kind, neumann, payload): (FieldKind, bool, Vec<f64>) = match field {
        Field::Scalar(f) => (FieldKind::Scalar, false, f.values.clone()),
        Field::Vector(f) => (FieldKind::Vector, f.neumann, f.x.iter().chain(&f.y).copied().collect()),
        Field::Corner(f) => (FieldKind::Corner, false, f.values.iter().flatten().copied().collect()),
    };
    let header = Header { kind, nx: g.nx(), ny: g.ny(), lx: g.lx(), ly: g.ly(), neumann };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(8 * payload.len());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<Field> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::FieldFormat("missing header line".into()));
    }
    let header: Header = serde_json::from_slice(&line)?;
    let grid = Grid2D::new(header.nx, header.ny, header.lx, header.ly)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::FieldFormat("payload is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect();
    let expect = match header.kind {
        FieldKind::Scalar => grid.cell_count(),
        FieldKind::Vector => grid.x_face_count() + grid.y_face_count(),
        FieldKind::Corner => 8 * grid.cell_count(),
    };
    if values.len() != expect {
        return Err(Error::FieldFormat(format!("expected {expect} values, found {}", values.len())));
    }
    Ok(match header.kind {
        FieldKind::Scalar => Field::Scalar(ScalarField { grid, values }),
        FieldKind::Vector => {
            let (x, y) = values.split_at(grid.x_face_count());
            Field::Vector(VectorField { grid, x: x.to_vec(), y: y.to_vec(), neumann: header.neumann })
        }
        FieldKind::Corner => {
            Field::Corner(CornerField { grid, values: values.chunks_exact(2).map(|p| [p[0], p[1]]).collect() })
        }
    })
}
