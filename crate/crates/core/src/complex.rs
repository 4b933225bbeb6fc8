//! Structured cubical complexes on coordinate boxes.
//!
//! A `Complex` owns the cell layout of an n-dimensional box (n <= 4), the
//! spacing per axis, optional periodic axes and a per-vertex Riemannian
//! metric together with its inverse, volume density and Christoffel symbols.
//!
//! Cells of degree p are grouped by orientation: the set of axes they span,
//! stored as a bit mask. Orientations are ordered lexicographically by their
//! sorted axis tuple; within an orientation cells are stored row-major with
//! the last axis fastest. The global cell index of a p-cell is the block
//! offset plus its row-major position.

use nalgebra::DMatrix;
use thiserror::Error;

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("dimension {0} unsupported (expected 1..={MAX_DIM})")]
    Dimension(usize),
    #[error("axis {axis}: cell count must be positive")]
    ZeroCells { axis: usize },
    #[error("axis {axis}: periodic axes need at least 2 cells")]
    PeriodicTooSmall { axis: usize },
    #[error("axis {axis}: spacing {value} must be positive and finite")]
    Spacing { axis: usize, value: f64 },
    #[error("metric is not positive-definite at vertex {vertex}")]
    MetricNotPositive { vertex: usize },
    #[error("metric data has length {got}, expected {expected}")]
    MetricShape { got: usize, expected: usize },
    #[error("{what}: length {got}, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
}

/// How the per-vertex metric is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Identity,
    /// n diagonal entries per vertex.
    Diagonal(Vec<f64>),
    /// Conformal factor: g = exp(2u) I with one `u` per vertex.
    Conformal(Vec<f64>),
    /// Full n x n row-major matrix per vertex.
    Explicit(Vec<f64>),
    /// Chart of the unit 2-sphere with coordinates (theta, phi):
    /// g = diag(1, sin^2 theta). Only valid for n = 2.
    RoundSphere,
}

/// Orientation block of p-cells.
#[derive(Debug, Clone)]
pub struct Block {
    pub mask: u32,
    pub axes: Vec<usize>,
    pub extents: Vec<usize>,
    strides: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    #[inline]
    pub fn position(&self, local: usize, pos: &mut [i64]) {
        let mut rem = local;
        for i in (0..pos.len()).rev() {
            pos[i] = (rem % self.extents[i]) as i64;
            rem /= self.extents[i];
        }
    }
}

#[derive(Debug, Clone)]
struct MetricData {
    flat: bool,
    g: Vec<f64>,
    ginv: Vec<f64>,
    sqrt_g: Vec<f64>,
    christoffel: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Complex {
    n: usize,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    periodic: Vec<bool>,
    blocks: Vec<Vec<Block>>,
    counts: Vec<usize>,
    metric: MetricData,
}

/// Builder for [`Complex`].
#[derive(Debug, Clone)]
pub struct ComplexBuilder {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    periodic: Vec<bool>,
    metric: MetricSpec,
}

impl ComplexBuilder {
    pub fn new(dims: &[usize]) -> Self {
        let n = dims.len();
        ComplexBuilder {
            dims: dims.to_vec(),
            spacing: vec![1.0; n],
            origin: vec![0.0; n],
            periodic: vec![false; n],
            metric: MetricSpec::Identity,
        }
    }

    /// Uniform spacing on every axis.
    pub fn spacing(mut self, h: f64) -> Self {
        self.spacing = vec![h; self.dims.len()];
        self
    }

    pub fn spacings(mut self, h: &[f64]) -> Self {
        self.spacing = h.to_vec();
        self
    }

    pub fn origin(mut self, origin: &[f64]) -> Self {
        self.origin = origin.to_vec();
        self
    }

    pub fn periodic(mut self, periodic: &[bool]) -> Self {
        self.periodic = periodic.to_vec();
        self
    }

    pub fn metric(mut self, metric: MetricSpec) -> Self {
        self.metric = metric;
        self
    }

    /// Sample an explicit metric from a function of the vertex coordinates.
    pub fn metric_fn<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64>,
    {
        let n = self.dims.len();
        let shape: Vec<usize> = (0..n)
            .map(|i| if self.periodic.get(i).copied().unwrap_or(false) { self.dims[i] } else { self.dims[i] + 1 })
            .collect();
        let nv: usize = shape.iter().product();
        let mut data = Vec::with_capacity(nv * n * n);
        let mut pos = vec![0usize; n];
        let mut x = vec![0.0; n];
        for v in 0..nv {
            let mut rem = v;
            for i in (0..n).rev() {
                pos[i] = rem % shape[i];
                rem /= shape[i];
            }
            for i in 0..n {
                x[i] = self.origin.get(i).copied().unwrap_or(0.0)
                    + pos[i] as f64 * self.spacing.get(i).copied().unwrap_or(1.0);
            }
            let m = f(&x);
            for r in 0..n {
                for c in 0..n {
                    data.push(m[(r, c)]);
                }
            }
        }
        self.metric = MetricSpec::Explicit(data);
        self
    }

    pub fn build(self) -> Result<Complex, ComplexError> {
        Complex::new(self.dims, self.spacing, self.origin, self.periodic, self.metric)
    }
}

/// All orientation masks of degree p in lexicographic order of sorted axes.
pub fn orientations(n: usize, p: usize) -> Vec<u32> {
    fn rec(start: usize, n: usize, left: usize, acc: u32, out: &mut Vec<u32>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for a in start..n {
            rec(a + 1, n, left - 1, acc | (1 << a), out);
        }
    }
    let mut out = Vec::new();
    if p <= n {
        rec(0, n, p, 0, &mut out);
    }
    out
}

#[inline]
pub fn mask_axes(mask: u32) -> Vec<usize> {
    (0..32).filter(|a| mask & (1 << a) != 0).collect()
}

/// Sign of the permutation sorting the concatenation (first, second) of two
/// disjoint sorted axis sets.
#[inline]
pub fn shuffle_sign(first: u32, second: u32) -> f64 {
    let mut inversions = 0;
    for s in mask_axes(first) {
        inversions += (second & ((1u32 << s) - 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Determinant of a small square matrix given row-major.
pub(crate) fn small_det(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if m[r * k + col].abs() > m[piv * k + col].abs() {
                piv = r;
            }
        }
        if m[piv * k + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let d = m[col * k + col];
        det *= d;
        for r in col + 1..k {
            let f = m[r * k + col] / d;
            if f != 0.0 {
                for c in col..k {
                    m[r * k + c] -= f * m[col * k + c];
                }
            }
        }
    }
    det
}

/// Metric quantities evaluated at a point (cell center).
#[derive(Debug, Clone)]
pub struct PointMetric {
    pub n: usize,
    pub flat: bool,
    pub sqrt_g: f64,
    pub ginv: Vec<f64>,
}

impl PointMetric {
    pub fn flat(n: usize) -> Self {
        let mut ginv = vec![0.0; n * n];
        for i in 0..n {
            ginv[i * n + i] = 1.0;
        }
        PointMetric { n, flat: true, sqrt_g: 1.0, ginv }
    }

    /// Raised-index form metric g^{IJ}: determinant of the inverse metric
    /// restricted to rows I and columns J.
    pub fn form_inner(&self, i_mask: u32, j_mask: u32) -> f64 {
        if self.flat {
            return if i_mask == j_mask { 1.0 } else { 0.0 };
        }
        let ri = mask_axes(i_mask);
        let cj = mask_axes(j_mask);
        let k = ri.len();
        if k == 0 {
            return 1.0;
        }
        let mut sub = [0.0; 16];
        for (a, &r) in ri.iter().enumerate() {
            for (b, &c) in cj.iter().enumerate() {
                sub[a * k + b] = self.ginv[r * self.n + c];
            }
        }
        small_det(&mut sub[..k * k], k)
    }
}

impl Complex {
    fn new(
        dims: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        periodic: Vec<bool>,
        metric: MetricSpec,
    ) -> Result<Self, ComplexError> {
        let n = dims.len();
        if n == 0 || n > MAX_DIM {
            return Err(ComplexError::Dimension(n));
        }
        for (what, len) in [("spacing", spacing.len()), ("origin", origin.len()), ("periodic", periodic.len())] {
            if len != n {
                return Err(ComplexError::Length { what, got: len, expected: n });
            }
        }
        for (axis, &d) in dims.iter().enumerate() {
            if d == 0 {
                return Err(ComplexError::ZeroCells { axis });
            }
            if periodic[axis] && d < 2 {
                return Err(ComplexError::PeriodicTooSmall { axis });
            }
        }
        for (axis, &h) in spacing.iter().enumerate() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(ComplexError::Spacing { axis, value: h });
            }
        }
        let mut blocks = Vec::with_capacity(n + 1);
        let mut counts = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut offset = 0;
            let mut list = Vec::new();
            for mask in orientations(n, p) {
                let extents: Vec<usize> = (0..n)
                    .map(|i| {
                        if periodic[i] || mask & (1 << i) != 0 {
                            dims[i]
                        } else {
                            dims[i] + 1
                        }
                    })
                    .collect();
                let mut strides = vec![1usize; n];
                for i in (0..n.saturating_sub(1)).rev() {
                    strides[i] = strides[i + 1] * extents[i + 1];
                }
                let len: usize = extents.iter().product();
                list.push(Block { mask, axes: mask_axes(mask), extents, strides, offset, len });
                offset += len;
            }
            counts.push(offset);
            blocks.push(list);
        }
        let mut cx = Complex {
            n,
            dims,
            spacing,
            origin,
            periodic,
            blocks,
            counts,
            metric: MetricData {
                flat: true,
                g: Vec::new(),
                ginv: Vec::new(),
                sqrt_g: Vec::new(),
                christoffel: Vec::new(),
            },
        };
        cx.install_metric(metric)?;
        Ok(cx)
    }

    fn install_metric(&mut self, spec: MetricSpec) -> Result<(), ComplexError> {
        let n = self.n;
        let nv = self.counts[0];
        let g: Vec<f64> = match spec {
            MetricSpec::Identity => {
                self.metric.flat = true;
                let mut g = vec![0.0; nv * n * n];
                for v in 0..nv {
                    for i in 0..n {
                        g[v * n * n + i * n + i] = 1.0;
                    }
                }
                self.metric.g = g.clone();
                self.metric.ginv = g;
                self.metric.sqrt_g = vec![1.0; nv];
                self.metric.christoffel = vec![0.0; nv * n * n * n];
                return Ok(());
            }
            MetricSpec::Diagonal(d) => {
                if d.len() != nv * n {
                    return Err(ComplexError::MetricShape { got: d.len(), expected: nv * n });
                }
                let mut g = vec![0.0; nv * n * n];
                for v in 0..nv {
                    for i in 0..n {
                        g[v * n * n + i * n + i] = d[v * n + i];
                    }
                }
                g
            }
            MetricSpec::Conformal(u) => {
                if u.len() != nv {
                    return Err(ComplexError::MetricShape { got: u.len(), expected: nv });
                }
                let mut g = vec![0.0; nv * n * n];
                for v in 0..nv {
                    let s = (2.0 * u[v]).exp();
                    for i in 0..n {
                        g[v * n * n + i * n + i] = s;
                    }
                }
                g
            }
            MetricSpec::Explicit(m) => {
                if m.len() != nv * n * n {
                    return Err(ComplexError::MetricShape { got: m.len(), expected: nv * n * n });
                }
                m
            }
            MetricSpec::RoundSphere => {
                if n != 2 {
                    return Err(ComplexError::Dimension(n));
                }
                let mut g = vec![0.0; nv * 4];
                let mut x = vec![0.0; 2];
                for v in 0..nv {
                    self.vertex_coords(v, &mut x);
                    g[v * 4] = 1.0;
                    g[v * 4 + 3] = x[0].sin().powi(2);
                }
                g
            }
        };
        let mut ginv = vec![0.0; nv * n * n];
        let mut sqrt_g = vec![0.0; nv];
        for v in 0..nv {
            let m = DMatrix::from_row_slice(n, n, &g[v * n * n..(v + 1) * n * n]);
            let sym = (&m - m.transpose()).abs().max() <= 1e-12 * m.abs().max().max(1.0);
            let chol = if sym { m.clone().cholesky() } else { None };
            let chol = chol.ok_or(ComplexError::MetricNotPositive { vertex: v })?;
            let det = chol.determinant();
            if !(det > 0.0) {
                return Err(ComplexError::MetricNotPositive { vertex: v });
            }
            let inv = chol.inverse();
            for r in 0..n {
                for c in 0..n {
                    ginv[v * n * n + r * n + c] = inv[(r, c)];
                }
            }
            sqrt_g[v] = det.sqrt();
        }
        self.metric.flat = false;
        self.metric.g = g;
        self.metric.ginv = ginv;
        self.metric.sqrt_g = sqrt_g;
        self.metric.christoffel = self.compute_christoffel();
        Ok(())
    }

    /// Partial derivative of a per-vertex quantity along `axis` at vertex `v`:
    /// centered in the interior and across periodic seams, second-order
    /// one-sided at the boundary.
    pub fn vertex_derivative<F: Fn(usize) -> f64>(&self, v: usize, axis: usize, f: F) -> f64 {
        let h = self.spacing[axis];
        let mut pos = vec![0i64; self.n];
        self.blocks[0][0].position(v, &mut pos);
        let at = |off: i64| -> Option<usize> {
            let mut q = pos.clone();
            q[axis] += off;
            self.cell_index(0, 0, &q)
        };
        match (at(-1), at(1)) {
            (Some(m), Some(p)) => (f(p) - f(m)) / (2.0 * h),
            (None, Some(p)) => match at(2) {
                Some(pp) => (-3.0 * f(v) + 4.0 * f(p) - f(pp)) / (2.0 * h),
                None => (f(p) - f(v)) / h,
            },
            (Some(m), None) => match at(-2) {
                Some(mm) => (3.0 * f(v) - 4.0 * f(m) + f(mm)) / (2.0 * h),
                None => (f(v) - f(m)) / h,
            },
            (None, None) => 0.0,
        }
    }

    fn compute_christoffel(&self) -> Vec<f64> {
        let n = self.n;
        let nv = self.counts[0];
        let nn = n * n;
        let mut out = vec![0.0; nv * n * nn];
        // dg[b][d][c] = d_b g_{dc}
        let mut dg = vec![0.0; n * nn];
        for v in 0..nv {
            for b in 0..n {
                for d in 0..n {
                    for c in 0..n {
                        dg[b * nn + d * n + c] =
                            self.vertex_derivative(v, b, |w| self.metric.g[w * nn + d * n + c]);
                    }
                }
            }
            let ginv = &self.metric.ginv[v * nn..(v + 1) * nn];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut s = 0.0;
                        for d in 0..n {
                            s += ginv[a * n + d]
                                * (dg[b * nn + d * n + c] + dg[c * nn + d * n + b] - dg[d * nn + b * n + c]);
                        }
                        out[v * n * nn + a * nn + b * n + c] = 0.5 * s;
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_flat(&self) -> bool {
        self.metric.flat
    }

    /// Volume of one top cell in coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn num_cells(&self, p: usize) -> usize {
        self.counts[p]
    }

    pub fn num_vertices(&self) -> usize {
        self.counts[0]
    }

    pub fn blocks(&self, p: usize) -> &[Block] {
        &self.blocks[p]
    }

    pub fn block(&self, p: usize, mask: u32) -> &Block {
        self.blocks[p]
            .iter()
            .find(|b| b.mask == mask)
            .expect("orientation mask of wrong degree")
    }

    /// Global index of the p-cell with orientation `mask` based at `pos`,
    /// wrapping periodic axes; `None` if it falls outside the box.
    #[inline]
    pub fn cell_index(&self, p: usize, mask: u32, pos: &[i64]) -> Option<usize> {
        let block = self.blocks[p].iter().find(|b| b.mask == mask)?;
        let mut idx = 0usize;
        for i in 0..self.n {
            let ext = block.extents[i] as i64;
            let mut x = pos[i];
            if self.periodic[i] {
                x = x.rem_euclid(ext);
            } else if x < 0 || x >= ext {
                return None;
            }
            idx += x as usize * block.strides[i];
        }
        Some(block.offset + idx)
    }

    /// Orientation mask and base position of a global p-cell index.
    pub fn cell_of(&self, p: usize, index: usize, pos: &mut [i64]) -> u32 {
        for b in &self.blocks[p] {
            if index < b.offset + b.len {
                b.position(index - b.offset, pos);
                return b.mask;
            }
        }
        panic!("cell index {index} out of range for degree {p}");
    }

    pub fn vertex_coords(&self, v: usize, x: &mut [f64]) {
        let mut pos = vec![0i64; self.n];
        self.blocks[0][0].position(v, &mut pos);
        for i in 0..self.n {
            x[i] = self.origin[i] + pos[i] as f64 * self.spacing[i];
        }
    }

    /// Coordinates of the center of a cell with orientation `mask` at `pos`.
    pub fn center_of(&self, mask: u32, pos: &[i64], x: &mut [f64]) {
        for i in 0..self.n {
            let half = if mask & (1 << i) != 0 { 0.5 } else { 0.0 };
            x[i] = self.origin[i] + (pos[i] as f64 + half) * self.spacing[i];
        }
    }

    pub fn cell_center(&self, p: usize, index: usize) -> Vec<f64> {
        let mut pos = vec![0i64; self.n];
        let mask = self.cell_of(p, index, &mut pos);
        let mut x = vec![0.0; self.n];
        self.center_of(mask, &pos, &mut x);
        x
    }

    /// Metric matrix g_{ab} at a vertex (row-major).
    pub fn metric_at_vertex(&self, v: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.metric.g[v * nn..(v + 1) * nn]
    }

    pub fn inverse_metric_at_vertex(&self, v: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.metric.ginv[v * nn..(v + 1) * nn]
    }

    pub fn sqrt_g_at_vertex(&self, v: usize) -> f64 {
        self.metric.sqrt_g[v]
    }

    /// Christoffel symbol Gamma^a_{bc} at vertex v.
    #[inline]
    pub fn christoffel(&self, v: usize, a: usize, b: usize, c: usize) -> f64 {
        let n = self.n;
        self.metric.christoffel[v * n * n * n + a * n * n + b * n + c]
    }

    /// Metric at the center of a cell, from the average of g over the cell's
    /// vertices.
    pub fn metric_at_cell(&self, mask: u32, pos: &[i64]) -> PointMetric {
        if self.metric.flat {
            return PointMetric::flat(self.n);
        }
        let n = self.n;
        let nn = n * n;
        let axes = mask_axes(mask);
        let corners = 1usize << axes.len();
        let mut acc = vec![0.0; nn];
        let mut q = pos.to_vec();
        let mut count = 0;
        for corner in 0..corners {
            q.copy_from_slice(pos);
            for (k, &a) in axes.iter().enumerate() {
                if corner & (1 << k) != 0 {
                    q[a] += 1;
                }
            }
            if let Some(v) = self.cell_index(0, 0, &q) {
                for (a, b) in acc.iter_mut().zip(&self.metric.g[v * nn..(v + 1) * nn]) {
                    *a += b;
                }
                count += 1;
            }
        }
        for a in acc.iter_mut() {
            *a /= count as f64;
        }
        let m = DMatrix::from_row_slice(n, n, &acc);
        let chol = m.cholesky().expect("averaged metric stays positive-definite");
        let det = chol.determinant();
        let inv = chol.inverse();
        let mut ginv = vec![0.0; nn];
        for r in 0..n {
            for c in 0..n {
                ginv[r * n + c] = inv[(r, c)];
            }
        }
        PointMetric { n, flat: false, sqrt_g: det.sqrt(), ginv }
    }

    /// Number of p-faces of each orientation inside one top cell.
    pub fn faces_per_orientation(&self, p: usize) -> usize {
        1 << (self.n - p)
    }

    /// Global indices of the p-faces with orientation `mask` of the top cell
    /// based at `pos`.
    pub fn top_cell_faces(&self, p: usize, mask: u32, pos: &[i64], out: &mut Vec<usize>) {
        out.clear();
        let free: Vec<usize> = (0..self.n).filter(|a| mask & (1 << a) == 0).collect();
        let mut q = pos.to_vec();
        for corner in 0..(1usize << free.len()) {
            q.copy_from_slice(pos);
            for (k, &a) in free.iter().enumerate() {
                if corner & (1 << k) != 0 {
                    q[a] += 1;
                }
            }
            out.push(self.cell_index(p, mask, &q).expect("face of an existing top cell"));
        }
    }

    /// Whether a vertex lies on a non-periodic boundary face.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let mut pos = vec![0i64; self.n];
        self.blocks[0][0].position(v, &mut pos);
        (0..self.n).any(|i| !self.periodic[i] && (pos[i] == 0 || pos[i] == self.dims[i] as i64))
    }

    /// Whether a cell lies entirely inside a boundary face of the box.
    pub fn is_boundary_cell(&self, p: usize, index: usize) -> bool {
        let mut pos = vec![0i64; self.n];
        let mask = self.cell_of(p, index, &mut pos);
        (0..self.n).any(|i| {
            !self.periodic[i] && mask & (1 << i) == 0 && (pos[i] == 0 || pos[i] == self.dims[i] as i64)
        })
    }

    /// Whether a cell keeps a margin of `margin` cells from every
    /// non-periodic boundary.
    pub fn is_interior_cell(&self, p: usize, index: usize, margin: i64) -> bool {
        let mut pos = vec![0i64; self.n];
        let mask = self.cell_of(p, index, &mut pos);
        (0..self.n).all(|i| {
            if self.periodic[i] {
                return true;
            }
            let upper = self.dims[i] as i64 - if mask & (1 << i) != 0 { 1 } else { 0 };
            pos[i] >= margin && pos[i] <= upper - margin
        })
    }

    /// Length of the box along an axis.
    pub fn extent(&self, axis: usize) -> f64 {
        self.dims[axis] as f64 * self.spacing[axis]
    }

    /// A copy of this complex with a different (uniform) spacing and the
    /// identity metric; handy for refinement studies.
    pub fn flat_like(&self) -> Complex {
        ComplexBuilder::new(&self.dims)
            .spacings(&self.spacing)
            .origin(&self.origin)
            .periodic(&self.periodic)
            .build()
            .expect("validated geometry")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubical_counts_2d() {
        let cx = ComplexBuilder::new(&[4, 4]).spacing(0.25).build().unwrap();
        assert_eq!(cx.num_cells(0), 25);
        assert_eq!(cx.num_cells(1), 40);
        assert_eq!(cx.num_cells(2), 16);
    }

    #[test]
    fn cubical_counts_3d_product_formula() {
        let (a, b, c) = (3usize, 4usize, 5usize);
        let cx = ComplexBuilder::new(&[a, b, c]).build().unwrap();
        assert_eq!(cx.num_cells(0), (a + 1) * (b + 1) * (c + 1));
        assert_eq!(cx.num_cells(1), a * (b + 1) * (c + 1) + (a + 1) * b * (c + 1) + (a + 1) * (b + 1) * c);
        assert_eq!(cx.num_cells(2), a * b * (c + 1) + a * (b + 1) * c + (a + 1) * b * c);
        assert_eq!(cx.num_cells(3), a * b * c);
    }

    #[test]
    fn periodic_counts() {
        let cx = ComplexBuilder::new(&[4, 5]).periodic(&[true, true]).build().unwrap();
        assert_eq!(cx.num_cells(0), 20);
        assert_eq!(cx.num_cells(1), 40);
        assert_eq!(cx.num_cells(2), 20);
    }

    #[test]
    fn rejects_bad_spacing_and_metric() {
        assert!(matches!(
            ComplexBuilder::new(&[2, 2]).spacing(0.0).build(),
            Err(ComplexError::Spacing { axis: 0, .. })
        ));
        let nv = 9;
        let mut diag = vec![1.0; nv * 2];
        diag[4 * 2 + 1] = -1.0;
        assert_eq!(
            ComplexBuilder::new(&[2, 2]).metric(MetricSpec::Diagonal(diag)).build().unwrap_err(),
            ComplexError::MetricNotPositive { vertex: 4 }
        );
    }

    #[test]
    fn flat_metric_has_unit_volume_and_no_christoffels() {
        let cx = ComplexBuilder::new(&[3, 3, 3]).spacing(0.1).build().unwrap();
        for v in 0..cx.num_vertices() {
            assert_eq!(cx.sqrt_g_at_vertex(v), 1.0);
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        assert_eq!(cx.christoffel(v, a, b, c), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_conformal_factor_matches_identity() {
        let cx = ComplexBuilder::new(&[3, 2]).metric(MetricSpec::Conformal(vec![0.0; 12])).build().unwrap();
        for v in 0..cx.num_vertices() {
            assert_eq!(cx.sqrt_g_at_vertex(v), 1.0);
            assert_eq!(cx.inverse_metric_at_vertex(v), &[1.0, 0.0, 0.0, 1.0]);
            assert_eq!(cx.christoffel(v, 0, 1, 1), 0.0);
        }
    }

    #[test]
    fn sphere_christoffels_match_closed_form() {
        let n = 32;
        let h = 1.0 / n as f64;
        let cx = ComplexBuilder::new(&[n, n])
            .spacing(h)
            .origin(&[0.5, 0.0])
            .metric(MetricSpec::RoundSphere)
            .build()
            .unwrap();
        let mut x = [0.0; 2];
        for v in 0..cx.num_vertices() {
            if cx.is_boundary_vertex(v) {
                continue;
            }
            cx.vertex_coords(v, &mut x);
            let t = x[0];
            assert!((cx.christoffel(v, 0, 1, 1) + t.sin() * t.cos()).abs() < 2.0 * h * h);
            assert!((cx.christoffel(v, 1, 0, 1) - t.cos() / t.sin()).abs() < 4.0 * h * h);
            assert!(cx.christoffel(v, 0, 0, 0).abs() < 1e-14);
        }
    }

    #[test]
    fn shuffle_signs() {
        assert_eq!(shuffle_sign(0b01, 0b10), 1.0);
        assert_eq!(shuffle_sign(0b10, 0b01), -1.0);
        assert_eq!(shuffle_sign(0b010, 0b101), -1.0);
        assert_eq!(shuffle_sign(0b101, 0b010), -1.0);
    }
}
