//! Cochains on a [`Complex`] and per-cell fields.

use crate::complex::{mask_axes, Complex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecError {
    #[error("degree {degree} out of range for operation on an {n}-dimensional complex")]
    Degree { degree: usize, n: usize },
    #[error("expected a {expected:?} cochain, got {got:?}")]
    Layout { expected: Layout, got: Layout },
    #[error("cochain has {got} values, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("cochains are incompatible: {0}")]
    Mismatch(&'static str),
    #[error("ball of radius {radius} around the center escapes the domain (max admissible radius {max_radius})")]
    BallEscapes { radius: f64, max_radius: f64 },
    #[error("ball of radius {radius} contains {cells} cell(s); at least 2 required")]
    BallTooSmall { radius: f64, cells: usize },
}

/// Where the values of a cochain live.
///
/// A primal p-cochain stores the form component with label S on the p-cells
/// of orientation S. A dual k-cochain is a k-form whose component with label
/// K is stored on the primal (n-k)-cells of orientation complementary to K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Primal,
    Dual,
}

/// A (possibly vector-valued) p-form sampled on oriented cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    degree: usize,
    layout: Layout,
    ncomp: usize,
    values: Vec<f64>,
}

impl Cochain {
    pub fn zeros(cx: &Complex, degree: usize) -> Self {
        Self::zeros_with(cx, degree, Layout::Primal, 1)
    }

    pub fn zeros_with(cx: &Complex, degree: usize, layout: Layout, ncomp: usize) -> Self {
        assert!(degree <= cx.dim(), "degree {degree} exceeds dimension");
        assert!(ncomp >= 1);
        let cells = cx.num_cells(index_degree(cx.dim(), degree, layout));
        Cochain { degree, layout, ncomp, values: vec![0.0; cells * ncomp] }
    }

    /// Scalar primal cochain from raw values.
    pub fn from_values(cx: &Complex, degree: usize, values: Vec<f64>) -> Result<Self, DecError> {
        Self::from_values_with(cx, degree, Layout::Primal, 1, values)
    }

    pub fn from_values_with(
        cx: &Complex,
        degree: usize,
        layout: Layout,
        ncomp: usize,
        values: Vec<f64>,
    ) -> Result<Self, DecError> {
        if degree > cx.dim() {
            return Err(DecError::Degree { degree, n: cx.dim() });
        }
        let expected = cx.num_cells(index_degree(cx.dim(), degree, layout)) * ncomp;
        if values.len() != expected || ncomp == 0 {
            return Err(DecError::Length { got: values.len(), expected });
        }
        Ok(Cochain { degree, layout, ncomp, values })
    }

    /// Scalar primal cochain sampling `f(label, center)` at every cell.
    pub fn from_fn<F: Fn(u32, &[f64]) -> f64>(cx: &Complex, degree: usize, f: F) -> Self {
        let mut c = Self::zeros(cx, degree);
        let mut pos = vec![0i64; cx.dim()];
        let mut x = vec![0.0; cx.dim()];
        for b in cx.blocks(degree) {
            for local in 0..b.len {
                b.position(local, &mut pos);
                cx.center_of(b.mask, &pos, &mut x);
                c.values[b.offset + local] = f(b.mask, &x);
            }
        }
        c
    }

    /// Vector-valued primal cochain; `f` writes `ncomp` values.
    pub fn from_fn_vec<F: Fn(u32, &[f64], &mut [f64])>(cx: &Complex, degree: usize, ncomp: usize, f: F) -> Self {
        let mut c = Self::zeros_with(cx, degree, Layout::Primal, ncomp);
        let mut pos = vec![0i64; cx.dim()];
        let mut x = vec![0.0; cx.dim()];
        for b in cx.blocks(degree) {
            for local in 0..b.len {
                b.position(local, &mut pos);
                cx.center_of(b.mask, &pos, &mut x);
                let i = b.offset + local;
                f(b.mask, &x, &mut c.values[i * ncomp..(i + 1) * ncomp]);
            }
        }
        c
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
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

    /// Number of cells carrying values.
    pub fn num_cells(&self) -> usize {
        self.values.len() / self.ncomp
    }

    /// Degree of the primal cells the values are stored on.
    pub fn index_degree(&self, n: usize) -> usize {
        index_degree(n, self.degree, self.layout)
    }

    #[inline]
    pub fn get(&self, cell: usize, comp: usize) -> f64 {
        self.values[cell * self.ncomp + comp]
    }

    #[inline]
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    #[inline]
    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.values[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn same_shape(&self, other: &Cochain) -> bool {
        self.degree == other.degree
            && self.layout == other.layout
            && self.ncomp == other.ncomp
            && self.values.len() == other.values.len()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.clone();
        c.scale(s);
        c
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Cochain) -> Result<(), DecError> {
        if !self.same_shape(other) {
            return Err(DecError::Mismatch("axpy on cochains of different shape"));
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub fn index_degree(n: usize, degree: usize, layout: Layout) -> usize {
    match layout {
        Layout::Primal => degree,
        Layout::Dual => n - degree,
    }
}

/// Values attached to top-dimensional cells, `ncomp` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn zeros(cx: &Complex, ncomp: usize) -> Self {
        CellField { ncomp, values: vec![0.0; cx.num_cells(cx.dim()) * ncomp] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(cx: &Complex, f: F) -> Self {
        let n = cx.dim();
        let values = (0..cx.num_cells(n)).map(|c| f(&cx.cell_center(n, c))).collect();
        CellField { ncomp: 1, values }
    }

    pub fn from_fn_vec<F: Fn(&[f64], &mut [f64])>(cx: &Complex, ncomp: usize, f: F) -> Self {
        let n = cx.dim();
        let mut out = Self::zeros(cx, ncomp);
        for c in 0..cx.num_cells(n) {
            f(&cx.cell_center(n, c), &mut out.values[c * ncomp..(c + 1) * ncomp]);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.ncomp
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, cell: usize, comp: usize) -> f64 {
        self.values[cell * self.ncomp + comp]
    }

    #[inline]
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Average every form component of a primal cochain onto the top cells.
///
/// The result has `C(n,p) * ncomp` components per cell, ordered by label
/// (lexicographic) and then by value component.
pub fn to_cell_field(cx: &Complex, c: &Cochain) -> CellField {
    assert_eq!(c.layout(), Layout::Primal);
    let n = cx.dim();
    let p = c.degree();
    let blocks = cx.blocks(p);
    let nc = c.ncomp();
    let ncomp = blocks.len() * nc;
    let mut out = CellField::zeros(cx, ncomp);
    let top = &cx.blocks(n)[0];
    let mut pos = vec![0i64; n];
    let mut faces = Vec::new();
    for cell in 0..top.len {
        top.position(cell, &mut pos);
        for (bi, b) in blocks.iter().enumerate() {
            cx.top_cell_faces(p, b.mask, &pos, &mut faces);
            let w = 1.0 / faces.len() as f64;
            for &f in &faces {
                for k in 0..nc {
                    out.values[cell * ncomp + bi * nc + k] += w * c.get(f, k);
                }
            }
        }
    }
    out
}

/// Labels (form component masks) of a cochain's storage blocks, in block
/// order.
pub fn block_labels(cx: &Complex, c: &Cochain) -> Vec<u32> {
    let n = cx.dim();
    let full = (1u32 << n) - 1;
    cx.blocks(c.index_degree(n))
        .iter()
        .map(|b| match c.layout() {
            Layout::Primal => b.mask,
            Layout::Dual => full & !b.mask,
        })
        .collect()
}

/// Axes of a mask, re-exported for downstream convenience.
pub fn label_axes(mask: u32) -> Vec<usize> {
    mask_axes(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexBuilder;

    #[test]
    fn value_count_matches_cells() {
        let cx = ComplexBuilder::new(&[3, 4]).build().unwrap();
        assert_eq!(Cochain::zeros(&cx, 1).values().len(), cx.num_cells(1));
        let dual = Cochain::zeros_with(&cx, 1, Layout::Dual, 3);
        assert_eq!(dual.values().len(), 3 * cx.num_cells(1));
        assert!(Cochain::from_values(&cx, 2, vec![0.0; 5]).is_err());
    }

    #[test]
    fn cell_field_averages_faces() {
        let cx = ComplexBuilder::new(&[2, 2]).build().unwrap();
        let c = Cochain::from_fn(&cx, 1, |m, x| if m == 1 { x[1] } else { 0.0 });
        let f = to_cell_field(&cx, &c);
        assert_eq!(f.ncomp, 2);
        for cell in 0..f.len() {
            let y = cx.cell_center(2, cell)[1];
            assert_eq!(f.get(cell, 0), y);
            assert_eq!(f.get(cell, 1), 0.0);
        }
    }
}
