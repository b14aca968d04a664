//! Shapes, regular grids and quadrature windows.
//!
//! A [`Shape`] is a nonempty compact set given either as a finite point set
//! or as a raster [`Mask`]. Masks use cell-center semantics: a true cell
//! means its center point belongs to the set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::{Integrand, Profile};

pub const MAX_GRID_DIM: usize = 3;

/// Default cap on the number of cells of a quadrature window.
pub const DEFAULT_MAX_CELLS: usize = 1 << 26;

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{x:?}")))
    }
}

/// A regular lattice of cell centers `origin + i·spacing`, axis 0 fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: f64,
    dims: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: f64, dims: Vec<usize>) -> Result<Self> {
        let n = origin.len();
        if n == 0 || n > MAX_GRID_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if dims.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: dims.len() });
        }
        check_finite(&origin)?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
        }
        if dims.contains(&0) {
            return Err(Error::param("dims", "every grid axis needs at least one cell"));
        }
        Ok(Grid { origin, spacing, dims })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Number of lines along axis 0.
    pub fn line_count(&self) -> usize {
        self.len() / self.dims[0]
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing
    }

    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_GRID_DIM] {
        let mut out = [0; MAX_GRID_DIM];
        for (axis, &d) in self.dims.iter().enumerate() {
            out[axis] = idx % d;
            idx /= d;
        }
        out
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.dims).rev().fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn center_into(&self, idx: usize, out: &mut [f64]) {
        let ix = self.unravel(idx);
        for axis in 0..self.dim() {
            out[axis] = self.coord(axis, ix[axis]);
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.center_into(idx, &mut out);
        out
    }

    /// Lower corner of the region covered by the cells.
    pub fn lower(&self) -> Vec<f64> {
        self.origin.iter().map(|o| o - 0.5 * self.spacing).collect()
    }

    /// Upper corner of the region covered by the cells.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(a, self.dims[a] - 1) + 0.5 * self.spacing).collect()
    }

    /// The cell whose box contains `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<[usize; MAX_GRID_DIM]> {
        let mut out = [0; MAX_GRID_DIM];
        for axis in 0..self.dim() {
            let k = ((x[axis] - self.origin[axis]) / self.spacing).round();
            if !(k >= 0.0 && k < self.dims[axis] as f64) {
                return None;
            }
            out[axis] = k as usize;
        }
        Some(out)
    }

    /// Integer offset of `other`'s lattice inside this one, when both share the
    /// spacing and their cell centers coincide.
    pub fn lattice_offset(&self, other: &Grid) -> Option<Vec<i64>> {
        if self.dim() != other.dim() || (self.spacing - other.spacing).abs() > 1e-9 * self.spacing {
            return None;
        }
        let mut out = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let k = (other.origin[axis] - self.origin[axis]) / self.spacing;
            let r = k.round();
            if (k - r).abs() > 1e-6 {
                return None;
            }
            out.push(r as i64);
        }
        Some(out)
    }
}

/// A finite point set in `R^N`, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::param("coords", format!("length {} is not a multiple of {dim}", coords.len())));
        }
        if coords.is_empty() {
            return Err(Error::EmptyShape("point set has no points".into()));
        }
        check_finite(&coords)?;
        Ok(PointSet { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or_else(|| Error::EmptyShape("no points".into()))?;
        let mut coords = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    /// Points along the segment from `a` to `b` with spacing at most `pitch`,
    /// both endpoints included.
    pub fn segment(a: &[f64], b: &[f64], pitch: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        if !(pitch > 0.0) {
            return Err(Error::param("pitch", "must be positive"));
        }
        let len = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let n = (len / pitch).ceil().max(1.0) as usize;
        let mut coords = Vec::with_capacity((n + 1) * a.len());
        for i in 0..=n {
            let t = i as f64 / n as f64;
            coords.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
        }
        Self::new(a.len(), coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }
}

/// A boolean raster on a [`Grid`], with at least one true cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mask {
    grid: Grid,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(grid: Grid, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::param("cells", format!("{} cells for a grid of {}", cells.len(), grid.len())));
        }
        if !cells.iter().any(|&c| c) {
            return Err(Error::EmptyShape("mask has no true cell".into()));
        }
        Ok(Mask { grid, cells })
    }

    /// Marks the cells whose center satisfies `pred`.
    pub fn from_fn(grid: Grid, pred: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let cells = (0..grid.len())
            .map(|i| {
                grid.center_into(i, &mut x);
                pred(&x)
            })
            .collect();
        Self::new(grid, cells)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
    /// Cell count times cell volume.
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }
    pub fn contains_cell(&self, idx: usize) -> bool {
        self.cells[idx]
    }
    pub fn true_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i)
    }
}

/// A nonempty compact set in `R^N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Points(PointSet),
    Mask(Mask),
}

impl From<PointSet> for Shape {
    fn from(p: PointSet) -> Self {
        Shape::Points(p)
    }
}

impl From<Mask> for Shape {
    fn from(m: Mask) -> Self {
        Shape::Mask(m)
    }
}

impl Shape {
    /// Point-set shape from a list of coordinates.
    pub fn points<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        PointSet::from_rows(rows).map(Shape::Points)
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Points(p) => p.dim(),
            Shape::Mask(m) => m.dim(),
        }
    }

    /// Point-set view: the points themselves, or the true cell centers.
    pub fn to_point_set(&self) -> PointSet {
        match self {
            Shape::Points(p) => p.clone(),
            Shape::Mask(m) => {
                let n = m.dim();
                let mut coords = Vec::with_capacity(m.count() * n);
                let mut x = vec![0.0; n];
                for i in m.true_indices() {
                    m.grid.center_into(i, &mut x);
                    coords.extend_from_slice(&x);
                }
                PointSet { dim: n, coords }
            }
        }
    }

    fn for_each_point(&self, mut f: impl FnMut(&[f64])) {
        match self {
            Shape::Points(p) => p.iter().for_each(f),
            Shape::Mask(m) => {
                let mut x = vec![0.0; m.dim()];
                for i in m.true_indices() {
                    m.grid.center_into(i, &mut x);
                    f(&x);
                }
            }
        }
    }

    /// Axis-aligned bounding box of the points (or true cell centers).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        self.for_each_point(|x| {
            for a in 0..n {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        });
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.dim();
        let mut sum = vec![0.0; n];
        let mut count = 0usize;
        self.for_each_point(|x| {
            for a in 0..n {
                sum[a] += x[a];
            }
            count += 1;
        });
        sum.iter().map(|s| s / count as f64).collect()
    }

    /// `max_{y ∈ s} |y − c|`, over points or true cell centers.
    pub fn radius_about(&self, c: &[f64]) -> f64 {
        let mut r2: f64 = 0.0;
        self.for_each_point(|x| r2 = r2.max(x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()));
        r2.sqrt()
    }

    /// Radius of the smallest origin-centered closed ball containing the
    /// shape: exact for point sets, over cell corners for masks.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Points(p) => p.iter().map(|x| x.iter().map(|c| c * c).sum::<f64>()).fold(0.0, f64::max).sqrt(),
            Shape::Mask(m) => {
                let half = 0.5 * m.grid.spacing();
                let mut r2: f64 = 0.0;
                self.for_each_point(|x| {
                    let far: f64 = x.iter().map(|c| (c.abs() + half).powi(2)).sum();
                    r2 = r2.max(far);
                });
                r2.sqrt()
            }
        }
    }

    /// `t·s`. Masks keep their raster with scaled origin and spacing.
    pub fn scaled(&self, t: f64) -> Result<Shape> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("t", format!("scale must be positive, got {t}")));
        }
        Ok(match self {
            Shape::Points(p) => {
                Shape::Points(PointSet { dim: p.dim, coords: p.coords.iter().map(|c| c * t).collect() })
            }
            Shape::Mask(m) => {
                let grid =
                    Grid::new(m.grid.origin.iter().map(|o| o * t).collect(), m.grid.spacing * t, m.grid.dims.clone())?;
                Shape::Mask(Mask { grid, cells: m.cells.clone() })
            }
        })
    }

    /// `s + v`.
    pub fn translated(&self, v: &[f64]) -> Result<Shape> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        check_finite(v)?;
        Ok(match self {
            Shape::Points(p) => {
                let coords = p.coords.iter().enumerate().map(|(i, c)| c + v[i % p.dim]).collect();
                Shape::Points(PointSet { dim: p.dim, coords })
            }
            Shape::Mask(m) => {
                let origin = m.grid.origin.iter().zip(v).map(|(o, d)| o + d).collect();
                let grid = Grid::new(origin, m.grid.spacing, m.grid.dims.clone())?;
                Shape::Mask(Mask { grid, cells: m.cells.clone() })
            }
        })
    }

    pub fn as_mask(&self) -> Option<&Mask> {
        match self {
            Shape::Mask(m) => Some(m),
            Shape::Points(_) => None,
        }
    }
}

/// The true cell centers of a mask as a point set. Point sets pass through.
pub fn mask_to_points(s: &Shape) -> Shape {
    Shape::Points(s.to_point_set())
}

/// Rasterizes `s` onto the window grid: a cell is marked when its center lies
/// within `spacing·√N/2` of a point of `s`.
pub fn points_to_mask(s: &Shape, w: &Window) -> Result<Shape> {
    let grid = w.grid();
    let n = grid.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
    }
    let h = grid.spacing();
    let reach = h * (n as f64).sqrt() / 2.0;
    let reach2 = reach * reach * (1.0 + 1e-12);
    let mut cells = vec![false; grid.len()];
    let lower = grid.lower();
    let upper = grid.upper();
    let mut err = None;
    s.for_each_point(|x| {
        if err.is_some() {
            return;
        }
        if (0..n).any(|a| x[a] < lower[a] || x[a] > upper[a]) {
            err = Some(Error::OutsideWindow { coords: x.to_vec() });
            return;
        }
        let mut lo = [0usize; MAX_GRID_DIM];
        let mut hi = [0usize; MAX_GRID_DIM];
        for a in 0..n {
            let k = (x[a] - grid.origin()[a]) / h;
            lo[a] = ((k - reach / h).floor().max(0.0)) as usize;
            hi[a] = ((k + reach / h).ceil() as usize).min(grid.dims()[a] - 1);
        }
        let mut idx = [0usize; MAX_GRID_DIM];
        idx[..n].copy_from_slice(&lo[..n]);
        loop {
            let d2: f64 = (0..n).map(|a| (grid.coord(a, idx[a]) - x[a]).powi(2)).sum();
            if d2 <= reach2 {
                cells[grid.ravel(&idx[..n])] = true;
            }
            let mut a = 0;
            loop {
                if a == n {
                    return;
                }
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
                a += 1;
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Mask::new(grid.clone(), cells).map(Shape::Mask)
}

/// How much of `‖v‖^p` the truncated integral may lose outside the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TailBudget {
    /// Fraction of `‖φ(|x|)‖_p^p`.
    Relative(f64),
    Absolute(f64),
}

impl Default for TailBudget {
    fn default() -> Self {
        TailBudget::Relative(1e-8)
    }
}

impl TailBudget {
    pub fn absolute(&self, pr: &Profile) -> f64 {
        match *self {
            TailBudget::Absolute(a) => a,
            TailBudget::Relative(r) => r * pr.norm_pow(),
        }
    }
}

/// A truncated quadrature domain: a grid of cells plus the tail budget it
/// was certified for.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    grid: Grid,
    tail_budget: f64,
}

impl Window {
    /// Window whose cell centers are the multiples of `spacing` covering the
    /// box `center ± half_extent`.
    pub fn new(center: &[f64], half_extent: &[f64], spacing: f64, tail_budget: f64) -> Result<Self> {
        Self::anchored(center, half_extent, spacing, tail_budget, &vec![0.0; center.len()])
    }

    /// Like [`Window::new`] with the lattice shifted to pass through `anchor`.
    pub fn anchored(
        center: &[f64],
        half_extent: &[f64],
        spacing: f64,
        tail_budget: f64,
        anchor: &[f64],
    ) -> Result<Self> {
        let n = center.len();
        if half_extent.len() != n || anchor.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: half_extent.len() });
        }
        check_finite(center)?;
        if half_extent.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::param("half_extent", "components must be positive"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", "must be positive"));
        }
        if !(tail_budget > 0.0) {
            return Err(Error::param("tail_budget", "must be positive"));
        }
        let mut origin = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(n);
        for a in 0..n {
            let lo = ((center[a] - half_extent[a] - anchor[a]) / spacing).floor();
            let hi = ((center[a] + half_extent[a] - anchor[a]) / spacing).ceil();
            origin.push(anchor[a] + lo * spacing);
            dims.push((hi - lo) as usize + 1);
        }
        Ok(Window { grid: Grid::new(origin, spacing, dims)?, tail_budget })
    }

    pub fn from_grid(grid: Grid, tail_budget: f64) -> Result<Self> {
        if !(tail_budget > 0.0) {
            return Err(Error::param("tail_budget", "must be positive"));
        }
        Ok(Window { grid, tail_budget })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }
    pub fn tail_budget(&self) -> f64 {
        self.tail_budget
    }
    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> Vec<f64> {
        self.grid.lower().iter().zip(self.grid.upper()).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn half_extent(&self) -> Vec<f64> {
        self.grid.lower().iter().zip(self.grid.upper()).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    /// Radius of the largest ball about `c` inside the covered box.
    pub fn inscribed_radius(&self, c: &[f64]) -> f64 {
        let lo = self.grid.lower();
        let hi = self.grid.upper();
        (0..self.dim()).map(|a| (c[a] - lo[a]).min(hi[a] - c[a])).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let lo = self.grid.lower();
        let hi = self.grid.upper();
        (0..self.dim()).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
    }

    pub fn contains_shape(&self, s: &Shape) -> bool {
        if s.dim() != self.dim() {
            return false;
        }
        let (lo, hi) = s.bounding_box();
        self.contains(&lo) && self.contains(&hi)
    }

    /// Certified bound on the part of `∫ ψ(u)^p` lost outside the window for
    /// any shape inside `B_R(c)`.
    pub fn tail_mass(&self, pr: &Profile, c: &[f64], radius: f64, which: Integrand) -> f64 {
        pr.outer_mass(radius, self.inscribed_radius(c), which)
    }

    /// The smallest window (on the lattice of the first mask with the same
    /// spacing, else the multiples of `spacing`) whose certified tail for the
    /// union of `shapes` is below the budget.
    pub fn auto(shapes: &[&Shape], pr: &Profile, spacing: f64, budget: TailBudget, max_cells: usize) -> Result<Self> {
        let first = shapes.first().ok_or_else(|| Error::EmptyShape("no shapes to window".into()))?;
        let n = first.dim();
        if n > MAX_GRID_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if let Some(s) = shapes.iter().find(|s| s.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
        }
        if pr.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: pr.dim() });
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", "must be positive"));
        }
        let (center, radius) = enclosing_ball(shapes);
        let anchor = shapes
            .iter()
            .filter_map(|s| s.as_mask())
            .find(|m| (m.grid().spacing() - spacing).abs() <= 1e-9 * spacing)
            .map(|m| m.grid().origin().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        Self::auto_ball(&center, radius, pr, spacing, budget, max_cells, &anchor)
    }

    /// Window certified for every shape inside the ball `B_radius(center)`,
    /// on the lattice through `anchor`.
    pub fn auto_ball(
        center: &[f64],
        radius: f64,
        pr: &Profile,
        spacing: f64,
        budget: TailBudget,
        max_cells: usize,
        anchor: &[f64],
    ) -> Result<Self> {
        let n = center.len();
        if n == 0 || n > MAX_GRID_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        let eps = budget.absolute(pr);
        if !(eps > 0.0) {
            return Err(Error::param("tail_budget", "must be positive"));
        }
        let rho = certified_radius(pr, radius, eps)?;
        let required: u128 = (0..n)
            .map(|a| {
                let lo = ((center[a] - rho - anchor[a]) / spacing).floor();
                let hi = ((center[a] + rho - anchor[a]) / spacing).ceil();
                (hi - lo + 1.0).max(1.0) as u128
            })
            .product();
        if required > max_cells as u128 {
            return Err(Error::WindowTooLarge { required, cap: max_cells });
        }
        Self::anchored(center, &vec![rho; n], spacing, eps, anchor)
    }
}

/// Center of the bounding box of the union, and the radius about it.
pub fn enclosing_ball(shapes: &[&Shape]) -> (Vec<f64>, f64) {
    let n = shapes[0].dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for s in shapes {
        let (l, h) = s.bounding_box();
        for a in 0..n {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(h[a]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let radius = shapes.iter().map(|s| s.radius_about(&center)).fold(0.0, f64::max);
    (center, radius)
}

/// Smallest ρ ≥ R (up to bisection tolerance, rounded up) whose radial tail
/// is at most `eps`.
fn certified_radius(pr: &Profile, radius: f64, eps: f64) -> Result<f64> {
    let len = pr.decay_length();
    if pr.is_sup_norm() {
        return Ok(radius + pr.phi_inv(eps.min(1.0)).max(len));
    }
    let tail = |rho: f64| pr.outer_mass(radius, rho, Integrand::Value);
    let mut lo = radius;
    let mut hi = radius + len;
    while tail(hi) > eps {
        lo = hi;
        hi = radius + 2.0 * (hi - radius);
        if hi - radius > 1e9 * len {
            return Err(Error::Numerical(format!("tail budget {eps:e} unreachable")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 * len {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(origin: [f64; 2], h: f64, dims: [usize; 2]) -> Grid {
        Grid::new(origin.to_vec(), h, dims.to_vec()).unwrap()
    }

    #[test]
    fn bounding_radius_examples() {
        assert_eq!(Shape::points(&[[3.0, 4.0]]).unwrap().bounding_radius(), 5.0);
        assert_eq!(Shape::points(&[[0.0, 0.0], [1.0, 0.0]]).unwrap().bounding_radius(), 1.0);
        let sq = Mask::from_fn(grid2([0.0, 0.0], 0.1, [11, 11]), |_| true).unwrap();
        let r = Shape::Mask(sq).bounding_radius();
        // Oracle: exhaustive max over the corners of every cell.
        let mut best: f64 = 0.0;
        for i in 0..11 {
            for j in 0..11 {
                for (dx, dy) in [(-0.05, -0.05), (-0.05, 0.05), (0.05, -0.05), (0.05, 0.05)] {
                    let (x, y) = (i as f64 * 0.1 + dx, j as f64 * 0.1 + dy);
                    best = best.max((x * x + y * y).sqrt());
                }
            }
        }
        assert!((r - best).abs() < 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 0.1 * 2f64.sqrt());
    }

    #[test]
    fn mask_point_round_trip() {
        let grid = grid2([-1.0, -1.0], 0.25, [9, 9]);
        let m = Mask::from_fn(grid.clone(), |x| x[0] * x[0] + 2.0 * x[1] * x[1] < 0.6).unwrap();
        let w = Window::from_grid(grid, 1e-8).unwrap();
        let back = points_to_mask(&mask_to_points(&Shape::Mask(m.clone())), &w).unwrap();
        assert_eq!(back, Shape::Mask(m));
    }

    #[test]
    fn single_cell_at_origin() {
        let grid = grid2([-0.5, -0.5], 0.5, [3, 3]);
        let m = Mask::from_fn(grid, |x| x[0] == 0.0 && x[1] == 0.0).unwrap();
        assert_eq!(mask_to_points(&Shape::Mask(m)), Shape::points(&[[0.0, 0.0]]).unwrap());
    }

    #[test]
    fn disk_cell_count() {
        let h = 0.05;
        let grid = grid2([-1.2, -1.2], h, [49, 49]);
        let disk = Mask::from_fn(grid, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap();
        let expected = std::f64::consts::PI / (h * h);
        assert!((disk.count() as f64 - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn point_outside_window_is_rejected() {
        let w = Window::new(&[0.0, 0.0], &[1.0, 1.0], 0.1, 1e-8).unwrap();
        let s = Shape::points(&[[0.0, 0.0], [3.0, 0.5]]).unwrap();
        match points_to_mask(&s, &w) {
            Err(Error::OutsideWindow { coords }) => assert_eq!(coords, vec![3.0, 0.5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_lattice_and_extent() {
        let w = Window::new(&[0.3], &[1.0], 0.1, 1e-8).unwrap();
        assert!(w.contains(&[-0.7]) && w.contains(&[1.3]));
        let g = w.grid();
        let k = g.origin()[0] / 0.1;
        assert!((k - k.round()).abs() < 1e-9);
        assert!(w.inscribed_radius(&[0.3]) >= 1.0);
    }

    #[test]
    fn auto_window_meets_budget() {
        let pr = Profile::exp(2.0, 2, 2.0).unwrap();
        let s = Shape::points(&[[0.0, 0.0], [1.0, 0.5]]).unwrap();
        let w = Window::auto(&[&s], &pr, 0.05, TailBudget::Relative(1e-8), DEFAULT_MAX_CELLS).unwrap();
        let (c, r) = enclosing_ball(&[&s]);
        let tail = w.tail_mass(&pr, &c, r, Integrand::Value);
        assert!(tail <= 1e-8 * pr.norm_pow(), "{tail}");
        assert!(w.contains_shape(&s));
        let err = Window::auto(&[&s], &pr, 1e-4, TailBudget::Relative(1e-8), 1000).unwrap_err();
        assert!(matches!(err, Error::WindowTooLarge { .. }));
    }

    #[test]
    fn auto_window_follows_mask_lattice() {
        let pr = Profile::exp(2.0, 2, 2.0).unwrap();
        let grid = grid2([0.013, -0.021], 0.05, [5, 5]);
        let m = Shape::Mask(Mask::from_fn(grid.clone(), |_| true).unwrap());
        let w = Window::auto(&[&m], &pr, 0.05, TailBudget::default(), DEFAULT_MAX_CELLS).unwrap();
        assert!(w.grid().lattice_offset(&grid).is_some());
    }

    #[test]
    fn ravel_inverts_unravel() {
        let g = Grid::new(vec![0.0; 3], 1.0, vec![3, 4, 5]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(i)[..3]), i);
        }
    }
}
