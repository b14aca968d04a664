//! Distance functions `u_A`, signed distances `b_A` and their gradients.
//!
//! Fields over grids are exact: masks go through the separable Euclidean
//! distance transform (lower envelope of parabolas, one pass per axis), and
//! point sets use the same envelope along each grid line with the squared
//! perpendicular offsets of the points as parabola heights.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{points_to_mask, Grid, Mask, PointSet, Shape, Window, MAX_GRID_DIM};
use crate::error::{Error, Result};

/// Scratch space for [`lower_envelope`].
#[derive(Default)]
pub(crate) struct EnvelopeScratch {
    v: Vec<u32>,
    z: Vec<f64>,
}

/// Lower envelope of the parabolas `(x − pos[k])² + height[k]` evaluated at
/// `x0 + i·step`. `pos` must be sorted ascending. Writes the squared distance
/// and the index of the winning parabola.
pub(crate) fn lower_envelope(
    pos: &[f64],
    height: &[f64],
    x0: f64,
    step: f64,
    out_d2: &mut [f64],
    out_arg: &mut [u32],
    s: &mut EnvelopeScratch,
) {
    let (v, z) = (&mut s.v, &mut s.z);
    v.clear();
    z.clear();
    if pos.is_empty() {
        out_d2.fill(f64::INFINITY);
        out_arg.fill(u32::MAX);
        return;
    }
    v.push(0);
    z.push(f64::NEG_INFINITY);
    'outer: for q in 1..pos.len() {
        let (pq, fq) = (pos[q], height[q]);
        loop {
            let k = *v.last().unwrap() as usize;
            let (pk, fk) = (pos[k], height[k]);
            if pq == pk {
                if fq >= fk {
                    continue 'outer;
                }
            } else {
                let cross = (fq - fk) / (2.0 * (pq - pk)) + 0.5 * (pq + pk);
                if cross > *z.last().unwrap() {
                    v.push(q as u32);
                    z.push(cross);
                    continue 'outer;
                }
            }
            v.pop();
            z.pop();
            if v.is_empty() {
                v.push(q as u32);
                z.push(f64::NEG_INFINITY);
                continue 'outer;
            }
        }
    }
    let mut k = 0;
    for (i, (d, a)) in out_d2.iter_mut().zip(out_arg.iter_mut()).enumerate() {
        let x = x0 + i as f64 * step;
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let j = v[k] as usize;
        *d = (x - pos[j]).powi(2) + height[j];
        *a = j as u32;
    }
}

/// A distance field sampled at the cell centers of a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceField {
    grid: Grid,
    values: Vec<f64>,
    signed: bool,
}

impl DistanceField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Multilinear interpolation of the cell values; `None` outside the
    /// hull of the cell centers.
    pub fn sample(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let n = g.dim();
        if x.len() != n {
            return None;
        }
        let mut base = [0usize; MAX_GRID_DIM];
        let mut frac = [0.0; MAX_GRID_DIM];
        for a in 0..n {
            let k = (x[a] - g.origin()[a]) / g.spacing();
            let last = (g.dims()[a] - 1) as f64;
            if !(k >= -1e-9 && k <= last + 1e-9) {
                return None;
            }
            let k = k.clamp(0.0, last);
            let b = k.floor().min((last - 1.0).max(0.0));
            base[a] = b as usize;
            frac[a] = k - b;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = [0usize; MAX_GRID_DIM];
            for a in 0..n {
                let up = (corner >> a) & 1 == 1;
                idx[a] = (base[a] + usize::from(up)).min(g.dims()[a] - 1);
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                total += w * self.values[g.ravel(&idx[..n])];
            }
        }
        Some(total)
    }
}

fn check_point(s: &Shape, x: &[f64]) -> Result<()> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: x.len() });
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("{x:?}")));
    }
    Ok(())
}

/// `u_s(x) = min_{y∈s} |x − y|`, exact over points or true cell centers.
pub fn distance_at(s: &Shape, x: &[f64]) -> Result<f64> {
    check_point(s, x)?;
    Ok(nearest_two(s, x).0.sqrt())
}

/// Squared distances to the nearest and second-nearest points, and the
/// nearest point.
fn nearest_two(s: &Shape, x: &[f64]) -> (f64, f64, Vec<f64>) {
    let pts = s.to_point_set();
    let mut best = (f64::INFINITY, f64::INFINITY, 0usize);
    for (i, y) in pts.iter().enumerate() {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        if d2 < best.0 {
            best = (d2, best.0, i);
        } else if d2 < best.1 {
            best.1 = d2;
        }
    }
    (best.0, best.1, pts.point(best.2).to_vec())
}

/// The spatial gradient of `u_s`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gradient {
    /// `∇u(x)`; the zero vector inside the set.
    Defined(Vec<f64>),
    /// `x` has several nearest points.
    NonDifferentiable,
}

/// `∇u_s(x) = (x − y)/|x − y|` for the unique nearest point `y` of a point
/// set; central differences of `u` with step one cell for masks.
pub fn grad_u(s: &Shape, x: &[f64]) -> Result<Gradient> {
    check_point(s, x)?;
    let n = s.dim();
    match s {
        Shape::Points(_) => {
            let (d2, second, y) = nearest_two(s, x);
            if d2 == 0.0 {
                return Ok(Gradient::Defined(vec![0.0; n]));
            }
            let d = d2.sqrt();
            if second.sqrt() - d <= 1e-12 * (1.0 + d) {
                return Ok(Gradient::NonDifferentiable);
            }
            Ok(Gradient::Defined(x.iter().zip(&y).map(|(a, b)| (a - b) / d).collect()))
        }
        Shape::Mask(m) => {
            if nearest_two(s, x).0 == 0.0 {
                return Ok(Gradient::Defined(vec![0.0; n]));
            }
            let h = m.grid().spacing();
            let mut g = vec![0.0; n];
            let mut probe = x.to_vec();
            for a in 0..n {
                probe[a] = x[a] + h;
                let up = distance_at(s, &probe)?;
                probe[a] = x[a] - h;
                let down = distance_at(s, &probe)?;
                probe[a] = x[a];
                g[a] = (up - down) / (2.0 * h);
            }
            Ok(Gradient::Defined(g))
        }
    }
}

/// Exact Euclidean distance transform of a mask on its own grid.
pub fn edt(m: &Mask) -> DistanceField {
    let (d2, _) = raster_edt(m.cells(), m.grid());
    DistanceField { grid: m.grid().clone(), values: d2.into_iter().map(f64::sqrt).collect(), signed: false }
}

/// `b = u_A − u_{complement}` on the mask's own grid. The complement includes
/// everything outside the grid.
pub fn signed_distance(m: &Mask) -> Result<DistanceField> {
    let values = signed_values(m.cells(), m.grid())?;
    Ok(DistanceField { grid: m.grid().clone(), values, signed: true })
}

/// `u_s` at every cell center of `grid`.
pub fn distance_field(s: &Shape, grid: &Grid) -> Result<DistanceField> {
    let src = FieldSource::new(s, grid, false)?;
    let values = src.full(false);
    Ok(DistanceField { grid: grid.clone(), values, signed: false })
}

/// `b_s` at every cell center of `grid`; equal to `u_s` for point sets, whose
/// interior is empty.
pub fn signed_field(s: &Shape, grid: &Grid) -> Result<DistanceField> {
    let src = FieldSource::new(s, grid, true)?;
    let values = src.full(true);
    Ok(DistanceField { grid: grid.clone(), values, signed: true })
}

fn signed_values(cells: &[bool], grid: &Grid) -> Result<Vec<f64>> {
    if cells.iter().all(|&c| c) {
        return Err(Error::ComplementEmpty);
    }
    let (inside, _) = raster_edt(cells, grid);
    let comp = complement_distance(cells, grid);
    Ok(inside.iter().zip(&comp).map(|(d2, c)| d2.sqrt() - c).collect())
}

/// Distance to the complement of `cells`, where the complement also contains
/// everything outside the covered box of the grid.
fn complement_distance(cells: &[bool], grid: &Grid) -> Vec<f64> {
    let flipped: Vec<bool> = cells.iter().map(|c| !c).collect();
    let (d2, _) = raster_edt(&flipped, grid);
    let lo = grid.lower();
    let hi = grid.upper();
    let mut x = vec![0.0; grid.dim()];
    d2.iter()
        .enumerate()
        .map(|(i, &d)| {
            grid.center_into(i, &mut x);
            let border = (0..grid.dim()).map(|a| (x[a] - lo[a]).min(hi[a] - x[a])).fold(f64::INFINITY, f64::min);
            d.sqrt().min(border)
        })
        .collect()
}

/// Squared EDT (in length units) and the flat index of the nearest true cell.
/// Lines without any finite entry stay infinite until a later pass fills them.
pub(crate) fn raster_edt(cells: &[bool], grid: &Grid) -> (Vec<f64>, Vec<u32>) {
    let dims = grid.dims();
    let n = grid.dim();
    let len = grid.len();
    let mut d2 = vec![f64::INFINITY; len];
    let mut feat = vec![u32::MAX; len];

    // Axis 0: lines are contiguous.
    let n0 = dims[0];
    d2.par_chunks_mut(n0).zip(feat.par_chunks_mut(n0)).enumerate().for_each_init(
        || (EnvelopeScratch::default(), Vec::new(), Vec::new(), vec![0u32; n0]),
        |(sc, pos, hgt, arg), (line, (dl, fl))| {
            pos.clear();
            hgt.clear();
            let row = &cells[line * n0..(line + 1) * n0];
            for (i, &c) in row.iter().enumerate() {
                if c {
                    pos.push(i as f64);
                    hgt.push(0.0);
                }
            }
            if pos.is_empty() {
                return;
            }
            lower_envelope(pos, hgt, 0.0, 1.0, dl, arg, sc);
            for (f, &a) in fl.iter_mut().zip(arg.iter()) {
                *f = (line * n0 + pos[a as usize] as usize) as u32;
            }
        },
    );

    for axis in 1..n {
        let na = dims[axis];
        let stride: usize = dims[..axis].iter().product();
        let starts: Vec<usize> = (0..len).filter(|&i| (i / stride).is_multiple_of(na)).collect();
        let lines: Vec<(Vec<f64>, Vec<u32>)> = starts
            .par_iter()
            .map_init(
                || (EnvelopeScratch::default(), Vec::new(), Vec::new(), Vec::new()),
                |(sc, pos, hgt, src), &start| {
                    pos.clear();
                    hgt.clear();
                    src.clear();
                    for j in 0..na {
                        let idx = start + j * stride;
                        if d2[idx].is_finite() {
                            pos.push(j as f64);
                            hgt.push(d2[idx]);
                            src.push(idx);
                        }
                    }
                    let mut out = vec![f64::INFINITY; na];
                    let mut arg = vec![u32::MAX; na];
                    if !pos.is_empty() {
                        lower_envelope(pos, hgt, 0.0, 1.0, &mut out, &mut arg, sc);
                        for a in arg.iter_mut() {
                            *a = feat[src[*a as usize]];
                        }
                    }
                    (out, arg)
                },
            )
            .collect();
        for (&start, (out, arg)) in starts.iter().zip(lines) {
            for j in 0..na {
                d2[start + j * stride] = out[j];
                feat[start + j * stride] = arg[j];
            }
        }
    }
    let h2 = grid.spacing() * grid.spacing();
    d2.iter_mut().for_each(|d| *d *= h2);
    (d2, feat)
}

/// Points sorted by their first coordinate, with the remaining coordinates
/// stored alongside.
#[derive(Clone, Debug)]
pub(crate) struct SortedPoints {
    dim: usize,
    xs: Vec<f64>,
    rest: Vec<f64>,
}

impl SortedPoints {
    pub(crate) fn new(p: &PointSet) -> Self {
        let dim = p.dim();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p.point(a)[0].total_cmp(&p.point(b)[0]));
        let xs = order.iter().map(|&i| p.point(i)[0]).collect();
        let rest = order.iter().flat_map(|&i| p.point(i)[1..].to_vec()).collect();
        SortedPoints { dim, xs, rest }
    }

    pub(crate) fn len(&self) -> usize {
        self.xs.len()
    }

    fn point_into(&self, k: usize, out: &mut [f64]) {
        out[0] = self.xs[k];
        let m = self.dim - 1;
        out[1..].copy_from_slice(&self.rest[k * m..(k + 1) * m]);
    }

    /// Squared distance from `q` to the nearest point, scanning outward from
    /// the first coordinate of `q` until the slab exceeds the best distance.
    pub(crate) fn nearest_d2(&self, q: &[f64]) -> f64 {
        let m = self.dim - 1;
        let start = self.xs.partition_point(|&x| x < q[0]);
        let mut best = f64::INFINITY;
        let dist2 = |k: usize, best: f64| {
            let mut d = (self.xs[k] - q[0]).powi(2);
            for a in 0..m {
                if d >= best {
                    break;
                }
                d += (self.rest[k * m + a] - q[a + 1]).powi(2);
            }
            d
        };
        let mut up = start;
        let mut down = start;
        loop {
            let mut moved = false;
            if up < self.xs.len() {
                let dx = self.xs[up] - q[0];
                if dx * dx < best {
                    best = best.min(dist2(up, best));
                    up += 1;
                    moved = true;
                } else {
                    up = self.xs.len();
                }
            }
            if down > 0 {
                let dx = q[0] - self.xs[down - 1];
                if dx * dx < best {
                    best = best.min(dist2(down - 1, best));
                    down -= 1;
                    moved = true;
                } else {
                    down = 0;
                }
            }
            if !moved {
                return best;
            }
        }
    }
}

/// `max_{a∈A} min_{b∈B} |a − b|`.
pub(crate) fn directed_hausdorff(a: &PointSet, b: &SortedPoints) -> f64 {
    a.coords().par_chunks(a.dim()).map(|q| b.nearest_d2(q)).reduce(|| 0.0, f64::max).sqrt()
}

enum Inner {
    Points(SortedPoints),
    Raster { d2: Vec<f64>, feat: Vec<u32> },
}

/// `u_A` (and `b_A` on request) over a window grid, produced one axis-0 line
/// at a time.
pub(crate) struct FieldSource {
    grid: Grid,
    inner: Inner,
    complement: Option<Vec<f64>>,
}

#[derive(Default)]
pub(crate) struct LineScratch {
    env: EnvelopeScratch,
    heights: Vec<f64>,
    arg: Vec<u32>,
    d2: Vec<f64>,
}

impl FieldSource {
    /// A mask on the window lattice goes through the raster transform; any
    /// other shape is treated as the point set of its points or cell centers.
    /// With `signed`, masks off the lattice are first rasterized onto it.
    pub(crate) fn new(s: &Shape, grid: &Grid, signed: bool) -> Result<Self> {
        if s.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: s.dim() });
        }
        let on_lattice = match s {
            Shape::Mask(m) => embed_cells(m, grid)?,
            Shape::Points(_) => None,
        };
        let on_lattice = match (on_lattice, s, signed) {
            (None, Shape::Mask(_), true) => {
                let w = Window::from_grid(grid.clone(), 1.0)?;
                let Shape::Mask(m) = points_to_mask(s, &w)? else { unreachable!() };
                Some(m.cells().to_vec())
            }
            (cells, _, _) => cells,
        };
        Ok(match on_lattice {
            Some(cells) => {
                let complement = if signed { Some(complement_distance(&cells, grid)) } else { None };
                let (d2, feat) = raster_edt(&cells, grid);
                FieldSource { grid: grid.clone(), inner: Inner::Raster { d2, feat }, complement }
            }
            None => FieldSource {
                grid: grid.clone(),
                inner: Inner::Points(SortedPoints::new(&s.to_point_set())),
                complement: None,
            },
        })
    }

    pub(crate) fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Fills `u` with `u_A` (or `b_A` when `signed`) along line `line`, and
    /// `near` (row-major, `N` per cell) with the nearest point when given.
    pub(crate) fn line(
        &self,
        line: usize,
        sc: &mut LineScratch,
        u: &mut [f64],
        near: Option<&mut [f64]>,
        signed: bool,
    ) {
        let g = &self.grid;
        let n = g.dim();
        let n0 = g.dims()[0];
        match &self.inner {
            Inner::Raster { d2, feat } => {
                let base = line * n0;
                for i in 0..n0 {
                    u[i] = d2[base + i].sqrt();
                }
                if let Some(near) = near {
                    for i in 0..n0 {
                        g.center_into(feat[base + i] as usize, &mut near[i * n..(i + 1) * n]);
                    }
                }
                if signed {
                    if let Some(comp) = &self.complement {
                        for i in 0..n0 {
                            u[i] -= comp[base + i];
                        }
                    }
                }
            }
            Inner::Points(sp) => {
                let ix = g.unravel(line * n0);
                let m = n - 1;
                sc.heights.clear();
                for k in 0..sp.len() {
                    let mut h = 0.0;
                    for a in 0..m {
                        h += (g.coord(a + 1, ix[a + 1]) - sp.rest[k * m + a]).powi(2);
                    }
                    sc.heights.push(h);
                }
                sc.arg.resize(n0, 0);
                sc.d2.resize(n0, 0.0);
                lower_envelope(&sp.xs, &sc.heights, g.origin()[0], g.spacing(), &mut sc.d2, &mut sc.arg, &mut sc.env);
                for i in 0..n0 {
                    u[i] = sc.d2[i].max(0.0).sqrt();
                }
                if let Some(near) = near {
                    for i in 0..n0 {
                        sp.point_into(sc.arg[i] as usize, &mut near[i * n..(i + 1) * n]);
                    }
                }
            }
        }
    }

    pub(crate) fn full(&self, signed: bool) -> Vec<f64> {
        let n0 = self.grid.dims()[0];
        let mut out = vec![0.0; self.grid.len()];
        out.par_chunks_mut(n0)
            .enumerate()
            .for_each_init(LineScratch::default, |sc, (line, chunk)| self.line(line, sc, chunk, None, signed));
        out
    }
}

/// The mask's cells transferred onto `grid` when the two lattices coincide.
/// Fails when the lattices coincide but the mask has true cells outside.
pub(crate) fn embed_cells(m: &Mask, grid: &Grid) -> Result<Option<Vec<bool>>> {
    let Some(offset) = grid.lattice_offset(m.grid()) else { return Ok(None) };
    let n = grid.dim();
    let mut cells = vec![false; grid.len()];
    for i in m.true_indices() {
        let src = m.grid().unravel(i);
        let mut dst = [0usize; MAX_GRID_DIM];
        for a in 0..n {
            let k = src[a] as i64 + offset[a];
            if k < 0 || k >= grid.dims()[a] as i64 {
                return Err(Error::OutsideWindow { coords: m.grid().center(i) });
            }
            dst[a] = k as usize;
        }
        cells[grid.ravel(&dst[..n])] = true;
    }
    Ok(Some(cells))
}
