//! File formats: cochain CSV and binary, connection binary, PPM heatmaps.

use crate::cochain::{CellField, Cochain, DecError, Layout};
use crate::complex::{Complex, ComplexBuilder, ComplexError};
use crate::gauge::{Group, GroupError, LatticeConnection};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

pub const COCHAIN_MAGIC: &[u8; 8] = b"NLHCOCH1";
pub const CONNECTION_MAGIC: &[u8; 8] = b"NLHCONN1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("bad magic: expected {expected}")]
    Magic { expected: &'static str },
    #[error("truncated binary file")]
    Truncated,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Dec(#[from] DecError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(io_err(path))
}

/// CSV text: first line `degree,n,dims...` (degree suffixed with `d` for
/// dual storage), then `cell_index,component...` per cell. Floats use the
/// shortest representation that parses back to the same value.
pub fn cochain_to_csv(cx: &Complex, c: &Cochain) -> String {
    let mut s = String::new();
    let suffix = if c.layout() == Layout::Dual { "d" } else { "" };
    write!(s, "{}{},{}", c.degree(), suffix, cx.dim()).unwrap();
    for d in cx.dims() {
        write!(s, ",{d}").unwrap();
    }
    s.push('\n');
    for i in 0..c.num_cells() {
        write!(s, "{i}").unwrap();
        for v in c.cell(i) {
            write!(s, ",{v:?}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Parse cochain CSV; the grid must match `cx`.
pub fn cochain_from_csv(cx: &Complex, text: &str) -> Result<Cochain, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(IoError::Format { line: 1, msg: "empty file".into() })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let bad = |msg: &str| IoError::Format { line: 1, msg: msg.into() };
    if fields.len() < 2 {
        return Err(bad("header needs degree,n,dims"));
    }
    let (deg_s, layout) = match fields[0].strip_suffix('d') {
        Some(d) => (d, Layout::Dual),
        None => (fields[0], Layout::Primal),
    };
    let degree: usize = deg_s.parse().map_err(|_| bad("bad degree"))?;
    let n: usize = fields[1].parse().map_err(|_| bad("bad dimension"))?;
    let dims: Vec<usize> =
        fields[2..].iter().map(|f| f.parse()).collect::<Result<_, _>>().map_err(|_| bad("bad dims"))?;
    if n != cx.dim() || dims != cx.dims() {
        return Err(IoError::Shape(format!("file grid {dims:?} does not match {:?}", cx.dims())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let idx: usize = parts[0].parse().map_err(|_| IoError::Format { line: ln + 1, msg: "bad index".into() })?;
        if idx != rows.len() {
            return Err(IoError::Format { line: ln + 1, msg: format!("expected cell {}", rows.len()) });
        }
        let vals = parts[1..]
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| IoError::Format { line: ln + 1, msg: "bad value".into() })?;
        if let Some(first) = rows.first() {
            if first.len() != vals.len() {
                return Err(IoError::Format { line: ln + 1, msg: "ragged row".into() });
            }
        }
        rows.push(vals);
    }
    let ncomp = rows.first().map_or(1, |r| r.len());
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Cochain::from_values_with(cx, degree, layout, ncomp, values)?)
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], IoError> {
        let s = self.b.get(self.at..self.at + k).ok_or(IoError::Truncated)?;
        self.at += k;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Binary: magic, then u64 degree, layout (0 primal, 1 dual), n, dims,
/// value components, cell count, and the values as f64, all little-endian.
pub fn cochain_to_bytes(cx: &Complex, c: &Cochain) -> Vec<u8> {
    let mut b = Vec::with_capacity(64 + 8 * c.values().len());
    b.extend_from_slice(COCHAIN_MAGIC);
    let mut put = |v: u64| b.extend_from_slice(&v.to_le_bytes());
    put(c.degree() as u64);
    put((c.layout() == Layout::Dual) as u64);
    put(cx.dim() as u64);
    for &d in cx.dims() {
        put(d as u64);
    }
    put(c.ncomp() as u64);
    put(c.num_cells() as u64);
    for v in c.values() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn cochain_from_bytes(cx: &Complex, bytes: &[u8]) -> Result<Cochain, IoError> {
    let mut r = Reader { b: bytes, at: 0 };
    if r.take(8)? != COCHAIN_MAGIC {
        return Err(IoError::Magic { expected: "NLHCOCH1" });
    }
    let degree = r.u64()? as usize;
    let layout = if r.u64()? == 1 { Layout::Dual } else { Layout::Primal };
    let n = r.u64()? as usize;
    let dims = (0..n).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    if dims != cx.dims() {
        return Err(IoError::Shape(format!("file grid {dims:?} does not match {:?}", cx.dims())));
    }
    let ncomp = r.u64()? as usize;
    let count = r.u64()? as usize;
    let values = (0..count * ncomp).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    Ok(Cochain::from_values_with(cx, degree, layout, ncomp, values)?)
}

/// Binary: magic, u64 group id, u64 n, u64 dims, f64 spacings, f64 origin,
/// u64 periodic flags, then each link's matrix entries as f64 in edge
/// order (SU(2) as 4 complex entries re/im, SO(3) as 9 reals, row-major).
pub fn connection_to_bytes(conn: &LatticeConnection) -> Vec<u8> {
    let cx = conn.complex();
    let mut b = Vec::new();
    b.extend_from_slice(CONNECTION_MAGIC);
    b.extend_from_slice(&conn.group().id().to_le_bytes());
    b.extend_from_slice(&(cx.dim() as u64).to_le_bytes());
    for &d in cx.dims() {
        b.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in cx.spacing().iter().chain(cx.origin()) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for &p in cx.periodic() {
        b.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for l in conn.links() {
        for v in l.matrix_data() {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

pub fn connection_from_bytes(bytes: &[u8]) -> Result<LatticeConnection, IoError> {
    let mut r = Reader { b: bytes, at: 0 };
    if r.take(8)? != CONNECTION_MAGIC {
        return Err(IoError::Magic { expected: "NLHCONN1" });
    }
    let id = r.u64()?;
    let group = Group::from_id(id).ok_or_else(|| IoError::Shape(format!("unknown group id {id}")))?;
    let n = r.u64()? as usize;
    let dims = (0..n).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let h = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let origin = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let periodic = (0..n).map(|_| r.u64().map(|p| p != 0)).collect::<Result<Vec<_>, _>>()?;
    let cx = ComplexBuilder::new(&dims).spacings(&h).origin(&origin).periodic(&periodic).build()?;
    let m = group.matrix_len();
    let mut links = Vec::with_capacity(cx.num_cells(1));
    for _ in 0..cx.num_cells(1) {
        let data = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        links.push(group.from_matrix_data(&data)?);
    }
    LatticeConnection::from_links(&cx, group, links).map_err(|e| IoError::Shape(e.to_string()))
}

/// Blue-white-red ramp on [0, 1].
fn ramp(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
}

/// P6 heatmap of one component of a top-cell field. Axis 0 runs left to
/// right and axis 1 bottom to top; 3D and higher grids show the slice at
/// the middle index of the remaining axes.
pub fn heatmap_ppm(cx: &Complex, field: &CellField, comp: usize, scale: usize) -> Vec<u8> {
    let n = cx.dim();
    let dims = cx.dims();
    let w = dims[0];
    let h = if n > 1 { dims[1] } else { 1 };
    let mut pos: Vec<i64> = dims.iter().map(|&d| (d / 2) as i64).collect();
    let full = (1u32 << n) - 1;
    let mut vals = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            pos[0] = i as i64;
            if n > 1 {
                pos[1] = j as i64;
            }
            let c = cx.cell_index(n, full, &pos).unwrap();
            vals[j * w + i] = field.get(c, comp);
        }
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let s = scale.max(1);
    let mut out = format!("P6\n{} {}\n255\n", w * s, h * s).into_bytes();
    for row in (0..h * s).rev() {
        for col in 0..w * s {
            out.extend_from_slice(&ramp((vals[(row / s) * w + col / s] - lo) / span));
        }
    }
    out
}

/// Convergence table `iter,energy,residual,max_q`.
pub fn convergence_csv(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut s = String::from("iter,energy,residual,max_q\n");
    for (i, e, r, q) in rows {
        writeln!(s, "{i},{e:?},{r:?},{q:?}").unwrap();
    }
    s
}

/// Two-column series `r,seminorm`.
pub fn series_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        writeln!(s, "{a:?},{b:?}").unwrap();
    }
    s
}
