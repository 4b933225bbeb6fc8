//! Difference quotients, their commutation with d and delta, and the
//! Gaffney ratio.

use super::VerifyError;
use crate::cochain::Cochain;
use crate::complex::Complex;
use crate::ops;
use serde::Serialize;

fn lattice_step(cx: &Complex, axis: usize, step: f64) -> Result<i64, VerifyError> {
    let h = cx.spacing()[axis];
    let k = (step / h).round();
    if k < 1.0 || (k * h - step).abs() > 1e-12 * step.abs() {
        return Err(VerifyError::Step { step, h });
    }
    Ok(k as i64)
}

/// (c(x + step e_axis) - c(x)) / step on every cell whose shift exists;
/// other cells are zero and flagged false.
pub fn difference_quotient(
    cx: &Complex,
    c: &Cochain,
    axis: usize,
    step: f64,
) -> Result<(Cochain, Vec<bool>), VerifyError> {
    if axis >= cx.dim() {
        return Err(VerifyError::Shape(format!("axis {axis} out of range")));
    }
    let k = lattice_step(cx, axis, step)?;
    let sd = c.index_degree(cx.dim());
    let mut out = c.scaled(0.0);
    let mut valid = vec![false; c.num_cells()];
    let mut pos = vec![0i64; cx.dim()];
    for i in 0..c.num_cells() {
        let mask = cx.cell_of(sd, i, &mut pos);
        pos[axis] += k;
        if let Some(j) = cx.cell_index(sd, mask, &pos) {
            valid[i] = true;
            for comp in 0..c.ncomp() {
                out.cell_mut(i)[comp] = (c.get(j, comp) - c.get(i, comp)) / step;
            }
        }
    }
    Ok((out, valid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationReport {
    pub compared_d: usize,
    pub max_diff_d: f64,
    /// None on curved metrics.
    pub compared_delta: Option<usize>,
    pub max_diff_delta: Option<f64>,
}

/// Compare Delta(d c) with d(Delta c), and Delta(delta c) with
/// delta(Delta c) away from the boundary on flat metrics.
pub fn commutation_check(cx: &Complex, c: &Cochain, axis: usize, step: f64) -> Result<CommutationReport, VerifyError> {
    let k = lattice_step(cx, axis, step)?;
    let mut compared_d = 0;
    let mut max_diff_d: f64 = 0.0;
    if c.degree() < cx.dim() {
        let (lhs, valid) = difference_quotient(cx, &ops::d(cx, c)?, axis, step)?;
        let rhs = ops::d(cx, &difference_quotient(cx, c, axis, step)?.0)?;
        for (i, &ok) in valid.iter().enumerate() {
            if ok {
                compared_d += 1;
                for comp in 0..c.ncomp() {
                    max_diff_d = max_diff_d.max((lhs.get(i, comp) - rhs.get(i, comp)).abs());
                }
            }
        }
    }
    let (compared_delta, max_diff_delta) = if cx.is_flat() && c.degree() > 0 {
        let (lhs, valid) = difference_quotient(cx, &ops::codifferential(cx, c)?, axis, step)?;
        let rhs = ops::codifferential(cx, &difference_quotient(cx, c, axis, step)?.0)?;
        let p = c.degree() - 1;
        let mut cnt = 0;
        let mut m: f64 = 0.0;
        for (i, &ok) in valid.iter().enumerate() {
            if ok && cx.is_interior_cell(p, i, k + 2) {
                cnt += 1;
                for comp in 0..c.ncomp() {
                    m = m.max((lhs.get(i, comp) - rhs.get(i, comp)).abs());
                }
            }
        }
        (Some(cnt), Some(m))
    } else {
        (None, None)
    };
    Ok(CommutationReport { compared_d, max_diff_d, compared_delta, max_diff_delta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaffneyReport {
    pub grad_sq: f64,
    pub d_sq: f64,
    pub delta_sq: f64,
    pub l2_sq: f64,
    /// |grad A|^2 / (|dA|^2 + |delta A|^2 + |A|^2).
    pub full_ratio: f64,
    /// |grad A|^2 / |dA|^2; None when dA vanishes.
    pub coulomb_ratio: Option<f64>,
    /// dA vanishes while A does not.
    pub pure_gradient: bool,
}

/// Squared L2 norm of the forward differences of a primal 1-cochain
/// between parallel edges.
pub fn gradient_norm_sq(cx: &Complex, a: &Cochain) -> f64 {
    let n = cx.dim();
    let mut pos = vec![0i64; n];
    let mut s = 0.0;
    for e in 0..a.num_cells() {
        let mask = cx.cell_of(1, e, &mut pos);
        for b in 0..n {
            pos[b] += 1;
            if let Some(f) = cx.cell_index(1, mask, &pos) {
                let h = cx.spacing()[b];
                for comp in 0..a.ncomp() {
                    let d = (a.get(f, comp) - a.get(e, comp)) / h;
                    s += d * d;
                }
            }
            pos[b] -= 1;
        }
    }
    s * cx.cell_volume()
}

pub fn gaffney_ratio(cx: &Complex, a: &Cochain) -> Result<GaffneyReport, VerifyError> {
    if a.degree() != 1 {
        return Err(VerifyError::Shape("gaffney ratio takes a 1-cochain".into()));
    }
    let da = ops::d(cx, a)?;
    let sa = ops::codifferential(cx, a)?;
    let grad_sq = gradient_norm_sq(cx, a);
    let d_sq = ops::inner(cx, &da, &da)?;
    let delta_sq = ops::inner(cx, &sa, &sa)?;
    let l2_sq = ops::inner(cx, a, a)?;
    let pure_gradient = l2_sq > 0.0 && d_sq <= 1e-24 * grad_sq.max(l2_sq);
    let denom = d_sq + delta_sq + l2_sq;
    Ok(GaffneyReport {
        grad_sq,
        d_sq,
        delta_sq,
        l2_sq,
        full_ratio: if denom > 0.0 { grad_sq / denom } else { 0.0 },
        coulomb_ratio: (!pure_gradient && d_sq > 0.0).then(|| grad_sq / d_sq),
        pure_gradient,
    })
}
