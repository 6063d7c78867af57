//! Voxel discretizations of domains and hypersurfaces.
//!
//! Cells live on the lattice `origin + (i + 1/2) h`, `i in Z^d`. A domain is
//! the set of cells whose centers lie in its shape.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::projection::{DiscreteMeasure, MeasureKind};

/// Lattice index of a cell.
pub type CellIndex = Vec<i64>;

const NONE: u32 = u32::MAX;

/// Shapes from which domains and auxiliary sets `omega` are built.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : <normal, x> < offset}`.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// Cells of a regular grid with lower corner `origin`, `dims` cells per
    /// axis and row-major occupancy flags (last axis fastest).
    Mask {
        origin: Vec<f64>,
        spacing: f64,
        dims: Vec<usize>,
        cells: Vec<bool>,
    },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::HalfSpace { normal, .. } => normal.len(),
            Shape::Mask { origin, .. } => origin.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidInput("shape has dimension 0".into()));
        }
        match self {
            Shape::Box { lo, hi } => {
                check_len("box upper corner", d, hi.len())?;
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
                {
                    return Err(Error::InvalidInput(
                        "box needs lo < hi in every coordinate".into(),
                    ));
                }
            }
            Shape::Ball { center, radius } => {
                if !(*radius > 0.0) || !radius.is_finite() || center.iter().any(|c| !c.is_finite())
                {
                    return Err(Error::InvalidInput(
                        "ball needs a finite positive radius".into(),
                    ));
                }
            }
            Shape::HalfSpace { normal, offset } => {
                if crate::linalg::norm(normal) == 0.0 || !offset.is_finite() {
                    return Err(Error::InvalidInput(
                        "half-space needs a nonzero normal".into(),
                    ));
                }
            }
            Shape::Mask {
                spacing,
                dims,
                cells,
                ..
            } => {
                check_len("mask dims", d, dims.len())?;
                check_len("mask cells", dims.iter().product(), cells.len())?;
                if !(*spacing > 0.0) {
                    return Err(Error::InvalidInput("mask spacing must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a < v && v < b),
            Shape::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 < radius * radius
            }
            Shape::HalfSpace { normal, offset } => crate::linalg::dot(normal, x) < *offset,
            Shape::Mask {
                origin,
                spacing,
                dims,
                cells,
            } => {
                let mut flat = 0usize;
                for ((v, o), n) in x.iter().zip(origin).zip(dims) {
                    let t = libm::floor((v - o) / spacing);
                    if t < 0.0 || t >= *n as f64 {
                        return false;
                    }
                    flat = flat * n + t as usize;
                }
                cells[flat]
            }
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            Shape::Box { lo, hi } => alloc::format!("box {:?}..{:?}", lo, hi),
            Shape::Ball { center, radius } => {
                alloc::format!("ball center {:?} radius {}", center, radius)
            }
            Shape::HalfSpace { normal, offset } => {
                alloc::format!("half-space <{:?}, x> < {}", normal, offset)
            }
            Shape::Mask { dims, .. } => alloc::format!("mask {:?}", dims),
        }
    }

    /// Lattice origin used when this shape generates a domain: the lower
    /// corner for boxes and masks, the center for balls.
    fn lattice_origin(&self) -> Result<Vec<f64>> {
        match self {
            Shape::Box { lo, .. } => Ok(lo.clone()),
            Shape::Ball { center, .. } => Ok(center.clone()),
            Shape::Mask { origin, .. } => Ok(origin.clone()),
            Shape::HalfSpace { .. } => Err(Error::InvalidInput("a half-space is unbounded".into())),
        }
    }

    /// Closed lattice index range covering the shape.
    fn index_bounds(&self, origin: &[f64], h: f64) -> Result<(Vec<i64>, Vec<i64>)> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Mask {
                origin,
                spacing,
                dims,
                ..
            } => (
                origin.clone(),
                origin
                    .iter()
                    .zip(dims)
                    .map(|(o, n)| o + spacing * *n as f64)
                    .collect(),
            ),
            Shape::HalfSpace { .. } => {
                return Err(Error::InvalidInput("a half-space is unbounded".into()))
            }
        };
        let a = lo
            .iter()
            .zip(origin)
            .map(|(l, o)| libm::floor((l - o) / h) as i64 - 1)
            .collect();
        let b = hi
            .iter()
            .zip(origin)
            .map(|(u, o)| libm::ceil((u - o) / h) as i64 + 1)
            .collect();
        Ok((a, b))
    }
}

/// A face between an inside cell and an outside lattice cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Index into the domain's cell list.
    pub cell: usize,
    pub axis: usize,
    /// `+1` if the outside neighbor is in the `+e_axis` direction.
    pub orientation: i8,
    pub center: Vec<f64>,
}

impl Facet {
    pub fn normal(&self, d: usize) -> Vec<f64> {
        let mut n = vec![0.0; d];
        n[self.axis] = self.orientation as f64;
        n
    }
}

/// Cell-center discretization of a bounded domain.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelDomain {
    h: f64,
    origin: Vec<f64>,
    cells: Vec<CellIndex>,
    lo: Vec<i64>,
    extent: Vec<usize>,
    lookup: Vec<u32>,
    /// `neighbors[c * 2d + 2j]` is the `-e_j` neighbor, `+1` the `+e_j` one.
    neighbors: Vec<u32>,
    facets: Vec<Facet>,
    connected: bool,
    shape: Shape,
}

impl VoxelDomain {
    pub fn build_box(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        Self::build(
            Shape::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            h,
            false,
        )
    }

    pub fn build_ball(center: &[f64], radius: f64, h: f64) -> Result<Self> {
        Self::build(
            Shape::Ball {
                center: center.to_vec(),
                radius,
            },
            h,
            false,
        )
    }

    /// Builds from a mask shape; with `require_connected` a disconnected cell
    /// set is an error.
    pub fn build_from_mask(mask: Shape, h: f64, require_connected: bool) -> Result<Self> {
        if !matches!(mask, Shape::Mask { .. }) {
            return Err(Error::InvalidInput("expected a mask shape".into()));
        }
        Self::build(mask, h, require_connected)
    }

    /// Builds the domain of any bounded shape.
    pub fn build(shape: Shape, h: f64, require_connected: bool) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput("spacing h must be positive".into()));
        }
        shape.validate()?;
        let origin = shape.lattice_origin()?;
        let (a, b) = shape.index_bounds(&origin, h)?;
        let d = origin.len();
        let mut cells = Vec::new();
        let mut idx = a.clone();
        let mut center = vec![0.0; d];
        loop {
            for j in 0..d {
                center[j] = origin[j] + (idx[j] as f64 + 0.5) * h;
            }
            if shape.contains(&center) {
                cells.push(idx.clone());
            }
            if !advance(&mut idx, &a, &b) {
                break;
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidInput(alloc::format!(
                "{} contains no cell centers at h = {}",
                shape.describe(),
                h
            )));
        }
        let domain = Self::from_cells(origin, h, cells, shape);
        if require_connected && !domain.connected {
            return Err(Error::InvalidInput("domain is not face-connected".into()));
        }
        Ok(domain)
    }

    /// Full lattice box `lo..lo+extent` (cells ordered row-major).
    pub fn lattice_box(origin: &[f64], h: f64, lo: &[i64], extent: &[usize]) -> Result<Self> {
        check_len("lattice extent", lo.len(), extent.len())?;
        if extent.contains(&0) {
            return Err(Error::InvalidInput("lattice box has an empty axis".into()));
        }
        let hi: Vec<i64> = lo
            .iter()
            .zip(extent)
            .map(|(l, e)| l + *e as i64 - 1)
            .collect();
        let mut cells = Vec::new();
        let mut idx = lo.to_vec();
        loop {
            cells.push(idx.clone());
            if !advance(&mut idx, lo, &hi) {
                break;
            }
        }
        let shape = Shape::Box {
            lo: origin
                .iter()
                .zip(lo)
                .map(|(o, l)| o + *l as f64 * h)
                .collect(),
            hi: origin
                .iter()
                .zip(&hi)
                .map(|(o, u)| o + (*u + 1) as f64 * h)
                .collect(),
        };
        Ok(Self::from_cells(origin.to_vec(), h, cells, shape))
    }

    fn from_cells(origin: Vec<f64>, h: f64, cells: Vec<CellIndex>, shape: Shape) -> Self {
        let d = origin.len();
        let lo: Vec<i64> = (0..d)
            .map(|j| cells.iter().map(|c| c[j]).min().unwrap())
            .collect();
        let hi: Vec<i64> = (0..d)
            .map(|j| cells.iter().map(|c| c[j]).max().unwrap())
            .collect();
        let extent: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a + 1) as usize)
            .collect();
        let mut lookup = vec![NONE; extent.iter().product()];
        for (i, c) in cells.iter().enumerate() {
            lookup[flat_index(&lo, &extent, c).unwrap()] = i as u32;
        }
        let mut domain = Self {
            h,
            origin,
            cells,
            lo,
            extent,
            lookup,
            neighbors: Vec::new(),
            facets: Vec::new(),
            connected: false,
            shape,
        };
        let mut neighbors = vec![NONE; domain.cells.len() * 2 * d];
        let mut facets = Vec::new();
        let mut nb = vec![0i64; d];
        for (i, c) in domain.cells.iter().enumerate() {
            for j in 0..d {
                for (s, orient) in [(0usize, -1i8), (1, 1)] {
                    nb.copy_from_slice(c);
                    nb[j] += orient as i64;
                    match domain.index_of(&nb) {
                        Some(n) => neighbors[i * 2 * d + 2 * j + s] = n as u32,
                        None => {
                            let mut center = domain.center_of(c);
                            center[j] += 0.5 * orient as f64 * h;
                            facets.push(Facet {
                                cell: i,
                                axis: j,
                                orientation: orient,
                                center,
                            });
                        }
                    }
                }
            }
        }
        domain.neighbors = neighbors;
        domain.facets = facets;
        domain.connected = domain.flood_fill_count() == domain.cells.len();
        domain
    }

    fn flood_fill_count(&self) -> usize {
        let d = self.dim();
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for &n in &self.neighbors[c * 2 * d..(c + 1) * 2 * d] {
                if n != NONE && !seen[n as usize] {
                    seen[n as usize] = true;
                    count += 1;
                    queue.push_back(n as usize);
                }
            }
        }
        count
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Lower lattice corner and extent of the bounding box of the cells.
    pub fn bounding_lattice(&self) -> (&[i64], &[usize]) {
        (&self.lo, &self.extent)
    }

    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.h, self.dim() as f64)
    }

    pub fn facet_area(&self) -> f64 {
        libm::pow(self.h, self.dim() as f64 - 1.0)
    }

    pub fn volume(&self) -> f64 {
        self.num_cells() as f64 * self.cell_volume()
    }

    pub fn perimeter(&self) -> f64 {
        self.facets.len() as f64 * self.facet_area()
    }

    pub fn center_of(&self, idx: &[i64]) -> Vec<f64> {
        self.origin
            .iter()
            .zip(idx)
            .map(|(o, i)| o + (*i as f64 + 0.5) * self.h)
            .collect()
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.center_of(&self.cells[cell])
    }

    pub fn index_of(&self, idx: &[i64]) -> Option<usize> {
        let f = flat_index(&self.lo, &self.extent, idx)?;
        match self.lookup[f] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    /// Neighbor of `cell` in direction `orientation * e_axis`.
    pub fn neighbor(&self, cell: usize, axis: usize, orientation: i8) -> Option<usize> {
        let s = if orientation > 0 { 1 } else { 0 };
        match self.neighbors[cell * 2 * self.dim() + 2 * axis + s] {
            NONE => None,
            n => Some(n as usize),
        }
    }

    /// True when all `2d` face neighbors are domain cells.
    pub fn is_interior(&self, cell: usize) -> bool {
        let d = self.dim();
        self.neighbors[cell * 2 * d..(cell + 1) * 2 * d]
            .iter()
            .all(|&n| n != NONE)
    }

    /// Axis-aligned bounding box of the cells as `(lo, hi)` corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self
            .origin
            .iter()
            .zip(&self.lo)
            .map(|(o, l)| o + *l as f64 * self.h)
            .collect();
        let hi = self
            .origin
            .iter()
            .zip(self.lo.iter().zip(&self.extent))
            .map(|(o, (l, e))| o + (*l + *e as i64) as f64 * self.h)
            .collect();
        (lo, hi)
    }

    /// Volume measure on the given cells (all cells when `None`).
    pub fn volume_measure(&self, cells: Option<&[usize]>) -> Result<DiscreteMeasure> {
        let all: Vec<usize>;
        let cells = match cells {
            Some(c) => c,
            None => {
                all = (0..self.num_cells()).collect();
                &all
            }
        };
        if let Some(bad) = cells.iter().find(|&&c| c >= self.num_cells()) {
            return Err(Error::InvalidInput(alloc::format!(
                "cell {} is not in the domain",
                bad
            )));
        }
        DiscreteMeasure::new(
            self.dim(),
            cells.iter().map(|&c| self.cell_center(c)).collect(),
            vec![self.cell_volume(); cells.len()],
            MeasureKind::Volume,
        )
    }

    /// Cells whose centers lie in `shape`.
    pub fn cells_in(&self, shape: &Shape) -> Vec<usize> {
        (0..self.num_cells())
            .filter(|&c| shape.contains(&self.cell_center(c)))
            .collect()
    }
}

fn flat_index(lo: &[i64], extent: &[usize], idx: &[i64]) -> Option<usize> {
    let mut f = 0usize;
    for ((i, l), e) in idx.iter().zip(lo).zip(extent) {
        let t = i - l;
        if t < 0 || t >= *e as i64 {
            return None;
        }
        f = f * e + t as usize;
    }
    Some(f)
}

/// Row-major increment within `a..=b`; false once exhausted.
fn advance(idx: &mut [i64], a: &[i64], b: &[i64]) -> bool {
    for j in (0..idx.len()).rev() {
        if idx[j] < b[j] {
            idx[j] += 1;
            return true;
        }
        idx[j] = a[j];
    }
    false
}

/// Which side of `Gamma` the trace is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The `omega` side.
    Inside,
    Outside,
}

/// A face of the voxelized `partial omega` that touches the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFacet {
    /// Lattice cell in `omega`.
    pub inner: CellIndex,
    /// Neighboring lattice cell outside `omega`.
    pub outer: CellIndex,
    pub axis: usize,
    /// Direction from `inner` to `outer`, i.e. the normal out of `omega`.
    pub orientation: i8,
    pub center: Vec<f64>,
    pub inner_cell: Option<usize>,
    pub outer_cell: Option<usize>,
}

impl SurfaceFacet {
    pub fn normal(&self, d: usize) -> Vec<f64> {
        let mut n = vec![0.0; d];
        n[self.axis] = self.orientation as f64;
        n
    }

    /// Domain cell on the given side, if it belongs to the domain.
    pub fn side_cell(&self, side: Side) -> Option<usize> {
        match side {
            Side::Inside => self.inner_cell,
            Side::Outside => self.outer_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypersurface {
    pub facets: Vec<SurfaceFacet>,
    pub side: Side,
    pub source: String,
    dim_space: usize,
    facet_area: f64,
}

impl Hypersurface {
    pub fn dim_space(&self) -> usize {
        self.dim_space
    }

    pub fn facet_area(&self) -> f64 {
        self.facet_area
    }

    pub fn area(&self) -> f64 {
        self.facets.len() as f64 * self.facet_area
    }

    /// Surface measure at the facet centers.
    pub fn measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(
            self.dim_space,
            self.facets.iter().map(|f| f.center.clone()).collect(),
            vec![self.facet_area; self.facets.len()],
            MeasureKind::Surface,
        )
    }

    /// Domain cells adjacent to each facet on the declared side.
    pub fn side_cells(&self) -> Result<Vec<usize>> {
        self.facets
            .iter()
            .map(|f| {
                f.side_cell(self.side).ok_or_else(|| {
                    Error::InvalidInput(alloc::format!(
                        "facet at {:?} has no domain cell on the {:?} side",
                        f.center,
                        self.side
                    ))
                })
            })
            .collect()
    }
}

/// Voxelized `partial omega ∩ closure(Omega)`: lattice faces between a cell
/// in `omega` and one outside it, where at least one of the two is a domain
/// cell. `omega` membership is decided at cell centers.
pub fn select_hypersurface(
    domain: &VoxelDomain,
    omega: &Shape,
    side: Side,
) -> Result<Hypersurface> {
    check_len("omega dimension", domain.dim(), omega.dim())?;
    omega.validate()?;
    let d = domain.dim();
    let h = domain.h();
    let mut facets = Vec::new();
    let mut nb = vec![0i64; d];
    for (i, c) in domain.cells().iter().enumerate() {
        let c_in = omega.contains(&domain.center_of(c));
        for j in 0..d {
            for orient in [-1i8, 1] {
                nb.copy_from_slice(c);
                nb[j] += orient as i64;
                let n_in = omega.contains(&domain.center_of(&nb));
                let n_cell = domain.index_of(&nb);
                let facet = if c_in && !n_in {
                    Some((c.clone(), nb.clone(), orient, Some(i), n_cell))
                } else if !c_in && n_in && n_cell.is_none() {
                    Some((nb.clone(), c.clone(), -orient, None, Some(i)))
                } else {
                    None
                };
                if let Some((inner, outer, orientation, inner_cell, outer_cell)) = facet {
                    let mut center = domain.center_of(c);
                    center[j] += 0.5 * orient as f64 * h;
                    facets.push(SurfaceFacet {
                        inner,
                        outer,
                        axis: j,
                        orientation,
                        center,
                        inner_cell,
                        outer_cell,
                    });
                }
            }
        }
    }
    if facets.is_empty() {
        return Err(Error::InvalidInput(alloc::format!(
            "the boundary of {} does not meet the domain at h = {}",
            omega.describe(),
            h
        )));
    }
    Ok(Hypersurface {
        facets,
        side,
        source: omega.describe(),
        dim_space: d,
        facet_area: domain.facet_area(),
    })
}
