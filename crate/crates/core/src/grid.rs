//! Grid functions and the discrete operator `A_h`.
//!
//! `A_h u = sum_j A_j D_j u` with `D_j` the central difference when both
//! neighbors along `e_j` are in the domain, the one-sided difference when
//! only one is, and zero for a cell isolated along that axis.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{Hypersurface, VoxelDomain};
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, CsrMatrix};
use crate::operator::Operator;
use crate::polynomial::PolynomialVectorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Cell,
    Facet,
}

/// Values at cell or facet centers, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    kind: GridKind,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(kind: GridKind, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::InvalidInput(alloc::format!(
                "{} values do not split into {} components",
                values.len(),
                components
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid values must be finite".into()));
        }
        Ok(Self {
            kind,
            components,
            values,
        })
    }

    pub fn zeros(kind: GridKind, count: usize, components: usize) -> Self {
        Self {
            kind,
            components,
            values: vec![0.0; count * components],
        }
    }

    /// Samples `f` at every cell center of `domain`.
    pub fn from_fn<F>(domain: &VoxelDomain, components: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut values = vec![0.0; domain.num_cells() * components];
        for c in 0..domain.num_cells() {
            let x = domain.cell_center(c);
            f(&x, &mut values[c * components..(c + 1) * components]);
        }
        Self {
            kind: GridKind::Cell,
            components,
            values,
        }
    }

    pub fn from_polynomial(domain: &VoxelDomain, p: &PolynomialVectorField) -> Result<Self> {
        check_len("polynomial dimension", domain.dim(), p.dim_space())?;
        Ok(Self::from_fn(domain, p.dim_values(), |x, out| {
            p.evaluate_into(x, out)
        }))
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kind: self.kind,
            components: self.components,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Result<Self> {
        if self.kind != other.kind
            || self.components != other.components
            || self.values.len() != other.values.len()
        {
            return Err(Error::InvalidInput(
                "grid functions have different layouts".into(),
            ));
        }
        Ok(Self {
            kind: self.kind,
            components: self.components,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    fn expect_cells(&self, domain: &VoxelDomain, components: usize) -> Result<()> {
        if self.kind != GridKind::Cell {
            return Err(Error::InvalidInput(
                "expected a cell-valued grid function".into(),
            ));
        }
        check_len("grid components", components, self.components)?;
        check_len("grid cells", domain.num_cells(), self.len())
    }
}

/// Weighted `L^p` norm `(sum h^d |u_c|^p)^(1/p)` of a cell function.
pub fn cell_lp_norm(domain: &VoxelDomain, u: &GridFunction, p: f64) -> f64 {
    let w = domain.cell_volume();
    let n = u.components();
    let s: f64 = (0..u.len())
        .map(|c| libm::pow(norm(&u.values[c * n..(c + 1) * n]), p))
        .sum();
    libm::pow(w * s, 1.0 / p)
}

/// Difference weights `(cell, coefficient)` for `D_j` at `cell`.
fn stencil(domain: &VoxelDomain, cell: usize, j: usize) -> ([(usize, f64); 2], usize) {
    let inv_h = 1.0 / domain.h();
    match (domain.neighbor(cell, j, -1), domain.neighbor(cell, j, 1)) {
        (Some(m), Some(p)) => ([(p, 0.5 * inv_h), (m, -0.5 * inv_h)], 2),
        (None, Some(p)) => ([(p, inv_h), (cell, -inv_h)], 2),
        (Some(m), None) => ([(cell, inv_h), (m, -inv_h)], 2),
        (None, None) => ([(cell, 0.0), (cell, 0.0)], 0),
    }
}

/// `A_h` as a sparse `(cells * k) x (cells * N)` matrix.
pub fn discrete_operator(op: &Operator, domain: &VoxelDomain) -> Result<CsrMatrix> {
    check_len("operator dimension", domain.dim(), op.dim_space())?;
    let (n, k) = (op.dim_from(), op.dim_to());
    let cells = domain.num_cells();
    let mut triplets = Vec::new();
    for c in 0..cells {
        for j in 0..op.dim_space() {
            let a = op.matrix(j);
            let (st, len) = stencil(domain, c, j);
            for &(nb, w) in &st[..len] {
                for r in 0..k {
                    for col in 0..n {
                        let v = a[(r, col)];
                        if v != 0.0 {
                            triplets.push((c * k + r, nb * n + col, w * v));
                        }
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(cells * k, cells * n, triplets))
}

pub fn apply_discrete(
    op: &Operator,
    domain: &VoxelDomain,
    u: &GridFunction,
) -> Result<GridFunction> {
    check_len("operator dimension", domain.dim(), op.dim_space())?;
    u.expect_cells(domain, op.dim_from())?;
    let (n, k) = (op.dim_from(), op.dim_to());
    let mut out = vec![0.0; domain.num_cells() * k];
    let mut du = vec![0.0; n];
    for c in 0..domain.num_cells() {
        let o = &mut out[c * k..(c + 1) * k];
        for j in 0..op.dim_space() {
            let (st, len) = stencil(domain, c, j);
            if len == 0 {
                continue;
            }
            for (i, d) in du.iter_mut().enumerate() {
                *d = st[0].1 * u.values[st[0].0 * n + i] + st[1].1 * u.values[st[1].0 * n + i];
            }
            op.apply_to_columns(j, &du, o);
        }
    }
    GridFunction::new(GridKind::Cell, k, out)
}

/// `sum_cells h^d |A_h u|`.
pub fn total_a_variation(op: &Operator, domain: &VoxelDomain, u: &GridFunction) -> Result<f64> {
    let au = apply_discrete(op, domain, u)?;
    Ok(cell_lp_norm(domain, &au, 1.0))
}

/// Piecewise-constant trace: each facet takes the value of its adjacent
/// domain cell on the declared side.
pub fn trace_restrict(
    domain: &VoxelDomain,
    u: &GridFunction,
    gamma: &Hypersurface,
) -> Result<GridFunction> {
    if u.kind() != GridKind::Cell {
        return Err(Error::InvalidInput(
            "trace needs a cell-valued grid function".into(),
        ));
    }
    check_len("grid cells", domain.num_cells(), u.len())?;
    check_len("hypersurface dimension", domain.dim(), gamma.dim_space())?;
    let cells = gamma.side_cells()?;
    let n = u.components();
    let mut values = Vec::with_capacity(cells.len() * n);
    for c in cells {
        values.extend_from_slice(u.at(c));
    }
    GridFunction::new(GridKind::Facet, n, values)
}

/// `sum_facets h^(d-1) |A[nu] tr u|` over the boundary facets of the domain.
pub fn boundary_term(op: &Operator, domain: &VoxelDomain, u: &GridFunction) -> Result<f64> {
    check_len("operator dimension", domain.dim(), op.dim_space())?;
    u.expect_cells(domain, op.dim_from())?;
    let d = domain.dim();
    let mut s = 0.0;
    for f in domain.facets() {
        s += norm(&op.tensor_apply(u.at(f.cell), &f.normal(d))?);
    }
    Ok(domain.facet_area() * s)
}

/// The three terms of the extension-by-zero identity
/// `|A u~| = |A u|(Omega) + |tr u (x)_A nu| H^(d-1)(partial Omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionReport {
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
}

impl ExtensionReport {
    /// `|total - (interior + boundary)| / total` (0 when all terms vanish).
    pub fn relative_defect(&self) -> f64 {
        let sum = self.interior + self.boundary;
        let scale = self.total.max(sum);
        if scale == 0.0 {
            0.0
        } else {
            (self.total - sum).abs() / scale
        }
    }
}

/// Extends `u` by zero to the bounding lattice box enlarged by `margin` cells.
///
/// In the enlarged box, domain cells keep the domain stencil and an outside
/// cell `x` uses `D_j u~(x) = sum_{s = +-1} s u(x + s e_j) / h` over its domain
/// neighbors, the one-sided difference across the boundary.
pub fn extend_by_zero(
    op: &Operator,
    domain: &VoxelDomain,
    u: &GridFunction,
    margin: usize,
) -> Result<(VoxelDomain, GridFunction, ExtensionReport)> {
    if margin == 0 {
        return Err(Error::InvalidInput(
            "extension margin must be at least one cell".into(),
        ));
    }
    let au = apply_discrete(op, domain, u)?;
    let interior = cell_lp_norm(domain, &au, 1.0);
    let boundary = boundary_term(op, domain, u)?;
    let d = domain.dim();
    let (n, k) = (op.dim_from(), op.dim_to());
    let mut tmp = vec![0.0; k];

    let (lo, extent) = domain.bounding_lattice();
    let big_lo: Vec<i64> = lo.iter().map(|l| l - margin as i64).collect();
    let big_extent: Vec<usize> = extent.iter().map(|e| e + 2 * margin).collect();
    let big = VoxelDomain::lattice_box(domain.origin(), domain.h(), &big_lo, &big_extent)?;
    let mut ext = GridFunction::zeros(GridKind::Cell, big.num_cells(), n);
    let mut inside = vec![None; big.num_cells()];
    for (b, idx) in big.cells().iter().enumerate() {
        if let Some(c) = domain.index_of(idx) {
            inside[b] = Some(c);
            ext.values_mut()[b * n..(b + 1) * n].copy_from_slice(u.at(c));
        }
    }
    let inv_h = 1.0 / domain.h();
    let mut total = 0.0;
    let mut du = vec![0.0; n];
    let mut nb = vec![0i64; d];
    for (b, idx) in big.cells().iter().enumerate() {
        if let Some(c) = inside[b] {
            total += domain.cell_volume() * norm(au.at(c));
            continue;
        }
        tmp.iter_mut().for_each(|t| *t = 0.0);
        let mut touched = false;
        for j in 0..d {
            du.iter_mut().for_each(|v| *v = 0.0);
            let mut any = false;
            for s in [-1i64, 1] {
                nb.copy_from_slice(idx);
                nb[j] += s;
                if let Some(c) = domain.index_of(&nb) {
                    any = true;
                    for (i, v) in du.iter_mut().enumerate() {
                        *v += s as f64 * u.at(c)[i] * inv_h;
                    }
                }
            }
            if any {
                touched = true;
                op.apply_to_columns(j, &du, &mut tmp);
            }
        }
        if touched {
            total += domain.cell_volume() * norm(&tmp);
        }
    }
    Ok((
        big,
        ext,
        ExtensionReport {
            interior,
            boundary,
            total,
        },
    ))
}
