//! Plain file formats for shapes, fields, boundaries and per-sample values.
//!
//! * Point files: a `# dim N` header, then one point per line.
//! * Text grids: `# origin x y` and `# spacing h` headers, then rows of cell
//!   values. The first row has the highest `y`; the origin is the center of
//!   cell `(0, 0)`. In 3-D, slices of increasing `z` are separated by blank
//!   lines. Masks use `0`/`1`, fields use decimals.
//! * Binary PGM (`P5`, maxval 255, a cell is set at ≥ 128) with a sidecar
//!   `<file>.hdr` holding the same `# origin` and `# spacing` lines.
//! * Boundary files: one `x y` per line; value files: one number per line.
//!
//! Lines starting with `#` other than the headers, and blank lines in point,
//! boundary and value files, are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dists::DistanceField;
use crate::domain::{Grid, Mask, PointSet, Shape};
use crate::error::{Error, Result};

fn parse_err(what: &str, reason: impl Into<String>) -> Error {
    Error::Parse { what: what.to_string(), reason: reason.into() }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| parse_err(&path.display().to_string(), e.to_string()))
}

fn numbers(line: &str, what: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(what, format!("line {lineno}: bad number {t:?}"))))
        .collect()
}

/// Reads a shape, telling the format apart by its first bytes.
pub fn read_shape(path: &Path) -> Result<Shape> {
    let bytes = fs::read(path).map_err(|e| parse_err(&path.display().to_string(), e.to_string()))?;
    if bytes.starts_with(b"P5") {
        return read_pgm(path);
    }
    let text = String::from_utf8(bytes).map_err(|_| parse_err(&path.display().to_string(), "not UTF-8 text"))?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first.starts_with("# dim") {
        parse_points(&text).map(Shape::Points)
    } else if first.starts_with("# origin") {
        parse_mask(&text).map(Shape::Mask)
    } else {
        Err(parse_err(&path.display().to_string(), "expected a '# dim N', '# origin ...' header or a P5 image"))
    }
}

pub fn parse_points(text: &str) -> Result<PointSet> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# dim") {
            let n: usize =
                rest.trim().parse().map_err(|_| parse_err("points", format!("line {}: bad dimension", i + 1)))?;
            dim = Some(n);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = dim.ok_or_else(|| parse_err("points", "missing '# dim N' header"))?;
        let row = numbers(line, "points", i + 1)?;
        if row.len() != n {
            return Err(parse_err("points", format!("line {}: expected {n} coordinates, found {}", i + 1, row.len())));
        }
        coords.extend(row);
    }
    let n = dim.ok_or_else(|| parse_err("points", "missing '# dim N' header"))?;
    PointSet::new(n, coords)
}

pub fn format_points(p: &PointSet) -> String {
    let mut out = format!("# dim {}\n", p.dim());
    for x in p.iter() {
        let row: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Origin and spacing headers of a grid file.
fn parse_header(text: &str, what: &str) -> Result<(Vec<f64>, f64)> {
    let mut origin = None;
    let mut spacing = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# origin") {
            origin = Some(numbers(rest, what, i + 1)?);
        } else if let Some(rest) = line.strip_prefix("# spacing") {
            let v = numbers(rest, what, i + 1)?;
            if v.len() != 1 {
                return Err(parse_err(what, format!("line {}: spacing takes one number", i + 1)));
            }
            spacing = Some(v[0]);
        }
    }
    let origin = origin.ok_or_else(|| parse_err(what, "missing '# origin' header"))?;
    let spacing = spacing.ok_or_else(|| parse_err(what, "missing '# spacing' header"))?;
    if origin.is_empty() || origin.len() > 3 {
        return Err(parse_err(what, format!("origin has {} coordinates; grids support 1 to 3", origin.len())));
    }
    Ok((origin, spacing))
}

/// Rows of values after the headers, with slice breaks for 3-D grids.
fn parse_grid_values(text: &str, what: &str) -> Result<(Grid, Vec<f64>)> {
    let (origin, spacing) = parse_header(text, what)?;
    let n = origin.len();
    let mut slices: Vec<Vec<Vec<f64>>> = vec![vec![]];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !slices.last().expect("nonempty").is_empty() {
                slices.push(vec![]);
            }
            continue;
        }
        slices.last_mut().expect("nonempty").push(numbers(line, what, i + 1)?);
    }
    if slices.last().is_some_and(|s| s.is_empty()) {
        slices.pop();
    }
    let rows = slices.first().map_or(0, |s| s.len());
    let cols = slices.first().and_then(|s| s.first()).map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(parse_err(what, "no grid rows"));
    }
    for s in &slices {
        if s.len() != rows || s.iter().any(|r| r.len() != cols) {
            return Err(parse_err(what, "rows or slices have unequal lengths"));
        }
    }
    let dims = match n {
        1 if rows == 1 && slices.len() == 1 => vec![cols],
        2 if slices.len() == 1 => vec![cols, rows],
        3 => vec![cols, rows, slices.len()],
        _ => return Err(parse_err(what, format!("the rows do not form a {n}-D grid"))),
    };
    let grid = Grid::new(origin, spacing, dims)?;
    let mut values = vec![0.0; grid.len()];
    for (z, s) in slices.iter().enumerate() {
        for (r, row) in s.iter().enumerate() {
            let y = rows - 1 - r;
            for (x, &v) in row.iter().enumerate() {
                let idx = match n {
                    1 => x,
                    2 => grid.ravel(&[x, y]),
                    _ => grid.ravel(&[x, y, z]),
                };
                values[idx] = v;
            }
        }
    }
    Ok((grid, values))
}

pub fn parse_mask(text: &str) -> Result<Mask> {
    let (grid, values) = parse_grid_values(text, "mask")?;
    if let Some(v) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(parse_err("mask", format!("cell value {v} is neither 0 nor 1")));
    }
    Mask::new(grid, values.iter().map(|&v| v == 1.0).collect())
}

fn header(grid: &Grid) -> String {
    let origin: Vec<String> = grid.origin().iter().map(|c| format!("{c}")).collect();
    format!("# origin {}\n# spacing {}\n", origin.join(" "), grid.spacing())
}

fn format_grid(grid: &Grid, cell: impl Fn(usize) -> String) -> String {
    let mut out = header(grid);
    let d = grid.dims();
    let (nx, ny, nz) = (d[0], d.get(1).copied().unwrap_or(1), d.get(2).copied().unwrap_or(1));
    for z in 0..nz {
        if z > 0 {
            out.push('\n');
        }
        for r in 0..ny {
            let y = ny - 1 - r;
            let row: Vec<String> = (0..nx)
                .map(|x| {
                    let idx = match grid.dim() {
                        1 => x,
                        2 => grid.ravel(&[x, y]),
                        _ => grid.ravel(&[x, y, z]),
                    };
                    cell(idx)
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn format_mask(m: &Mask) -> String {
    format_grid(m.grid(), |i| if m.contains_cell(i) { "1".into() } else { "0".into() })
}

/// Text grid of real values, for plotting.
pub fn format_field(grid: &Grid, values: &[f64]) -> String {
    format_grid(grid, |i| format!("{:.9e}", values[i]))
}

pub fn parse_field(text: &str) -> Result<(Grid, Vec<f64>)> {
    parse_grid_values(text, "field")
}

pub fn write_field(path: &Path, f: &DistanceField) -> Result<()> {
    write_text(path, &format_field(f.grid(), f.values()))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Reads a `P5` image with its `<file>.hdr` sidecar.
pub fn read_pgm(path: &Path) -> Result<Shape> {
    let what = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| parse_err(&what, e.to_string()))?;
    let (origin, spacing) = parse_header(&read_text(&sidecar(path))?, &what)?;
    if origin.len() != 2 {
        return Err(parse_err(&what, "PGM masks are 2-D"));
    }
    // Header: magic, width, height, maxval, separated by whitespace and
    // comments, then a single whitespace byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(&what, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(&what, format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if fields[0] != "P5" || maxval != 255 {
        return Err(parse_err(&what, "expected a binary P5 image with maxval 255"));
    }
    let data = bytes.get(pos..pos + w * h).ok_or_else(|| parse_err(&what, "pixel data is truncated"))?;
    let grid = Grid::new(origin, spacing, vec![w, h])?;
    let mut cells = vec![false; grid.len()];
    for r in 0..h {
        for x in 0..w {
            cells[grid.ravel(&[x, h - 1 - r])] = data[r * w + x] >= 128;
        }
    }
    Mask::new(grid, cells).map(Shape::Mask)
}

pub fn write_pgm(path: &Path, m: &Mask) -> Result<()> {
    let g = m.grid();
    if g.dim() != 2 {
        return Err(Error::UnsupportedDimension(g.dim()));
    }
    let (w, h) = (g.dims()[0], g.dims()[1]);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for x in 0..w {
            bytes.push(if m.contains_cell(g.ravel(&[x, h - 1 - r])) { 255 } else { 0 });
        }
    }
    fs::write(path, bytes).map_err(|e| parse_err(&path.display().to_string(), e.to_string()))?;
    write_text(&sidecar(path), &header(g))
}

/// Writes a shape as a point file, or a mask as a text grid (or PGM when the
/// path ends in `.pgm`).
pub fn write_shape(path: &Path, s: &Shape) -> Result<()> {
    match s {
        Shape::Points(p) => write_text(path, &format_points(p)),
        Shape::Mask(m) if path.extension().is_some_and(|e| e == "pgm") => write_pgm(path, m),
        Shape::Mask(m) => write_text(path, &format_mask(m)),
    }
}

pub fn parse_boundary(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = numbers(line, "boundary", i + 1)?;
        if v.len() != 2 {
            return Err(parse_err("boundary", format!("line {}: expected 'x y'", i + 1)));
        }
        out.push([v[0], v[1]]);
    }
    Ok(out)
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = numbers(line, "values", i + 1)?;
        if v.len() != 1 {
            return Err(parse_err("values", format!("line {}: expected one number", i + 1)));
        }
        out.push(v[0]);
    }
    Ok(out)
}

pub fn read_boundary(path: &Path) -> Result<Vec<[f64; 2]>> {
    parse_boundary(&read_text(path)?)
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    parse_values(&read_text(path)?)
}
