//! On-disk formats: operator, polynomial, shape/domain and hypersurface JSON,
//! and the binary grid-function format.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use avar_core::domain::{select_hypersurface, Hypersurface, Shape, Side, VoxelDomain};
use avar_core::grid::{GridFunction, GridKind};
use avar_core::polynomial::PolynomialVectorField;
use avar_core::Operator;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog;
use crate::json;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl From<avar_core::Error> for FormatError {
    fn from(e: avar_core::Error) -> Self {
        FormatError::Invalid(e.to_string())
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    /// One row-major `k x N` matrix per direction.
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl OperatorSpec {
    pub fn from_operator(op: &Operator) -> Self {
        Self {
            name: op.name().map(str::to_string),
            d: op.dim_space(),
            n: op.dim_from(),
            k: op.dim_to(),
            matrices: op
                .matrices()
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_operator(&self) -> FormatResult<Operator> {
        Ok(Operator::from_row_major(
            self.name.as_deref(),
            self.d,
            self.n,
            self.k,
            &self.matrices,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub alpha: Vec<u32>,
    pub component: usize,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub terms: Vec<TermSpec>,
}

impl PolynomialSpec {
    pub fn from_field(p: &PolynomialVectorField) -> Self {
        Self {
            d: p.dim_space(),
            n: p.dim_values(),
            terms: p
                .terms()
                .map(|(alpha, component, coeff)| TermSpec {
                    alpha: alpha.to_vec(),
                    component,
                    coeff,
                })
                .collect(),
        }
    }

    pub fn to_field(&self) -> FormatResult<PolynomialVectorField> {
        Ok(PolynomialVectorField::from_terms(
            self.d,
            self.n,
            self.terms
                .iter()
                .map(|t| (t.alpha.clone(), t.component, t.coeff)),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ShapeSpec {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    #[serde(rename = "halfspace")]
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// Occupancy flags (0 or 1), row-major with the last axis fastest.
    Mask {
        origin: Vec<f64>,
        spacing: f64,
        dims: Vec<usize>,
        cells: Vec<u8>,
    },
}

impl ShapeSpec {
    pub fn to_shape(&self) -> FormatResult<Shape> {
        let shape = match self.clone() {
            ShapeSpec::Box { lo, hi } => Shape::Box { lo, hi },
            ShapeSpec::Ball { center, radius } => Shape::Ball { center, radius },
            ShapeSpec::HalfSpace { normal, offset } => Shape::HalfSpace { normal, offset },
            ShapeSpec::Mask {
                origin,
                spacing,
                dims,
                cells,
            } => {
                if cells.iter().any(|&c| c > 1) {
                    return Err(FormatError::Invalid("mask cells must be 0 or 1".into()));
                }
                Shape::Mask {
                    origin,
                    spacing,
                    dims,
                    cells: cells.into_iter().map(|c| c == 1).collect(),
                }
            }
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn from_shape(shape: &Shape) -> Self {
        match shape.clone() {
            Shape::Box { lo, hi } => ShapeSpec::Box { lo, hi },
            Shape::Ball { center, radius } => ShapeSpec::Ball { center, radius },
            Shape::HalfSpace { normal, offset } => ShapeSpec::HalfSpace { normal, offset },
            Shape::Mask {
                origin,
                spacing,
                dims,
                cells,
            } => ShapeSpec::Mask {
                origin,
                spacing,
                dims,
                cells: cells.into_iter().map(u8::from).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

impl DomainSpec {
    pub fn with_h(&self, h: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            h: Some(h),
        }
    }

    /// Builds a connected voxel domain; `h` must be set.
    pub fn build(&self) -> FormatResult<VoxelDomain> {
        let h = self
            .h
            .ok_or_else(|| FormatError::Invalid("domain spec has no spacing h".into()))?;
        if matches!(self.shape, ShapeSpec::HalfSpace { .. }) {
            return Err(FormatError::Invalid(
                "a half-space is unbounded and cannot be a domain".into(),
            ));
        }
        Ok(VoxelDomain::build(self.shape.to_shape()?, h, true)?)
    }

    /// SHA-256 of the canonical JSON encoding, lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(json::to_string(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSpec {
    Inside,
    Outside,
}

impl From<SideSpec> for Side {
    fn from(s: SideSpec) -> Self {
        match s {
            SideSpec::Inside => Side::Inside,
            SideSpec::Outside => Side::Outside,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypersurfaceSpec {
    pub omega: ShapeSpec,
    #[serde(default = "default_side")]
    pub side: SideSpec,
}

fn default_side() -> SideSpec {
    SideSpec::Inside
}

impl HypersurfaceSpec {
    pub fn select(&self, domain: &VoxelDomain) -> FormatResult<Hypersurface> {
        Ok(select_hypersurface(
            domain,
            &self.omega.to_shape()?,
            self.side.into(),
        )?)
    }

    /// `left` and `right` are the faces `x_1 = lo_1` and `x_1 = hi_1` of the
    /// domain's bounding box, `boundary` is all of `partial Omega`.
    pub fn preset(name: &str, domain: &VoxelDomain, shape: &ShapeSpec) -> FormatResult<Self> {
        let d = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut e1 = vec![0.0; d];
        match name {
            "left" => {
                e1[0] = 1.0;
                Ok(Self {
                    omega: ShapeSpec::HalfSpace {
                        normal: e1,
                        offset: lo[0],
                    },
                    side: SideSpec::Outside,
                })
            }
            "right" => {
                e1[0] = -1.0;
                Ok(Self {
                    omega: ShapeSpec::HalfSpace {
                        normal: e1,
                        offset: -hi[0],
                    },
                    side: SideSpec::Outside,
                })
            }
            "boundary" => Ok(Self {
                omega: shape.clone(),
                side: SideSpec::Inside,
            }),
            other => Err(FormatError::Invalid(format!(
                "unknown gamma preset {other:?} (expected left, right or boundary)"
            ))),
        }
    }
}

/// Named domains: `interval`, `unit-square`, `unit-cube`, `unit-disk`, `unit-ball`.
pub fn domain_preset(name: &str) -> Option<DomainSpec> {
    let shape = match name {
        "interval" => ShapeSpec::Box {
            lo: vec![0.0],
            hi: vec![1.0],
        },
        "unit-square" => ShapeSpec::Box {
            lo: vec![0.0; 2],
            hi: vec![1.0; 2],
        },
        "unit-cube" => ShapeSpec::Box {
            lo: vec![0.0; 3],
            hi: vec![1.0; 3],
        },
        "unit-disk" => ShapeSpec::Ball {
            center: vec![0.0; 2],
            radius: 1.0,
        },
        "unit-ball" => ShapeSpec::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        },
        _ => return None,
    };
    Some(DomainSpec { shape, h: None })
}

/// Inline JSON (leading `{`) or the contents of a file.
pub fn read_source(arg: &str) -> FormatResult<String> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).map_err(|e| FormatError::Invalid(format!("cannot read {arg}: {e}")))
}

/// A catalog name, inline JSON or a JSON file.
pub fn load_operator(arg: &str) -> FormatResult<Operator> {
    if let Some(entry) = catalog::lookup(arg) {
        return Ok(entry.operator);
    }
    let spec: OperatorSpec = serde_json::from_str(&read_source(arg)?)?;
    spec.to_operator()
}

/// A preset name, inline JSON or a JSON file.
pub fn load_domain(arg: &str) -> FormatResult<DomainSpec> {
    if let Some(spec) = domain_preset(arg) {
        return Ok(spec);
    }
    Ok(serde_json::from_str(&read_source(arg)?)?)
}

pub fn load_shape(arg: &str) -> FormatResult<ShapeSpec> {
    Ok(serde_json::from_str(&read_source(arg)?)?)
}

/// Either a full hypersurface spec or a bare shape for `omega`.
pub fn load_hypersurface(arg: &str) -> FormatResult<HypersurfaceSpec> {
    let text = read_source(arg)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("omega").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(HypersurfaceSpec {
            omega: serde_json::from_value(value)?,
            side: SideSpec::Inside,
        })
    }
}

const GRID_MAGIC: &[u8; 4] = b"AVGF";
const GRID_VERSION: u32 = 1;

/// Writes `magic, version, kind, dim_space, count, components` (u32 LE)
/// followed by the values as f64 LE, point-major.
pub fn write_grid_function<W: Write>(
    mut w: W,
    u: &GridFunction,
    dim_space: usize,
) -> io::Result<()> {
    let kind = match u.kind() {
        GridKind::Cell => 0u32,
        GridKind::Facet => 1u32,
    };
    w.write_all(GRID_MAGIC)?;
    for v in [
        GRID_VERSION,
        kind,
        dim_space as u32,
        u.len() as u32,
        u.components() as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Reads the binary format back; returns the function and its `dim_space`.
pub fn read_grid_function<R: Read>(mut r: R) -> FormatResult<(GridFunction, usize)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(FormatError::Invalid("not a grid-function file".into()));
    }
    let mut header = [0u32; 5];
    for h in header.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *h = u32::from_le_bytes(b);
    }
    let [version, kind, dim_space, count, components] = header;
    if version != GRID_VERSION {
        return Err(FormatError::Invalid(format!(
            "unsupported grid-function version {version}"
        )));
    }
    let kind = match kind {
        0 => GridKind::Cell,
        1 => GridKind::Facet,
        k => return Err(FormatError::Invalid(format!("unknown grid kind {k}"))),
    };
    let total = count as usize * components as usize;
    let mut bytes = vec![0u8; total * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((
        GridFunction::new(kind, components as usize, values)?,
        dim_space as usize,
    ))
}

pub fn save_grid_function(path: &Path, u: &GridFunction, dim_space: usize) -> FormatResult<()> {
    let file = fs::File::create(path)?;
    write_grid_function(io::BufWriter::new(file), u, dim_space)?;
    Ok(())
}
