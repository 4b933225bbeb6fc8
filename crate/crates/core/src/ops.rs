//! Exterior calculus on cochains: d, Hodge star, codifferential, wedge,
//! inner products and the pointwise quadratic form Q.
//!
//! Values are read as form components at cell centers. The star contracts
//! components with the metric at the cell and keeps the index set, so a
//! primal p-cochain maps to a dual (n-p)-cochain on the same cells. Other
//! components needed by off-diagonal metric terms are averaged from the
//! nearest cells of their own orientation.

use crate::cochain::{CellField, Cochain, DecError, Layout};
use crate::complex::{shuffle_sign, Complex, PointMetric};

/// Average of cochain values stored on cells of orientation `src` at the
/// cells nearest to the center of the `tgt` cell at `pos`. Writes `ncomp`
/// values into `out`; cells outside the box are skipped.
pub fn interpolate(cx: &Complex, c: &Cochain, src: u32, tgt: u32, pos: &[i64], out: &mut [f64]) {
    let n = cx.dim();
    let p = c.index_degree(n);
    let nc = c.ncomp();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut moving = [0usize; 4];
    let mut deltas = [0i64; 4];
    let mut m = 0;
    for i in 0..n {
        let in_s = src & (1 << i) != 0;
        let in_t = tgt & (1 << i) != 0;
        if in_t && !in_s {
            moving[m] = i;
            deltas[m] = 1;
            m += 1;
        } else if in_s && !in_t {
            moving[m] = i;
            deltas[m] = -1;
            m += 1;
        }
    }
    let mut q = pos.to_vec();
    let mut count = 0usize;
    for corner in 0..(1usize << m) {
        q.copy_from_slice(pos);
        for k in 0..m {
            if corner & (1 << k) != 0 {
                q[moving[k]] += deltas[k];
            }
        }
        if let Some(idx) = cx.cell_index(p, src, &q) {
            for k in 0..nc {
                out[k] += c.get(idx, k);
            }
            count += 1;
        }
    }
    if count > 1 {
        let w = 1.0 / count as f64;
        out.iter_mut().for_each(|v| *v *= w);
    }
}

/// Exterior derivative of a primal or dual cochain.
pub fn d(cx: &Complex, c: &Cochain) -> Result<Cochain, DecError> {
    let n = cx.dim();
    let p = c.degree();
    if p >= n {
        return Err(DecError::Degree { degree: p, n });
    }
    match c.layout() {
        Layout::Primal => Ok(d_primal(cx, c)),
        Layout::Dual => Ok(d_dual(cx, c)),
    }
}

fn d_primal(cx: &Complex, c: &Cochain) -> Cochain {
    let n = cx.dim();
    let p = c.degree();
    let nc = c.ncomp();
    let h = cx.spacing();
    let mut out = Cochain::zeros_with(cx, p + 1, Layout::Primal, nc);
    let mut pos = vec![0i64; n];
    let mut q = vec![0i64; n];
    for b in cx.blocks(p + 1) {
        for local in 0..b.len {
            b.position(local, &mut pos);
            let o = b.offset + local;
            for (j, &s) in b.axes.iter().enumerate() {
                let face = b.mask & !(1 << s);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 } / h[s];
                q.copy_from_slice(&pos);
                let lo = cx.cell_index(p, face, &q).expect("lower face exists");
                q[s] += 1;
                let hi = cx.cell_index(p, face, &q).expect("upper face exists");
                for k in 0..nc {
                    out.values_mut()[o * nc + k] += sign * (c.get(hi, k) - c.get(lo, k));
                }
            }
        }
    }
    out
}

fn d_dual(cx: &Complex, c: &Cochain) -> Cochain {
    let n = cx.dim();
    let k = c.degree();
    let nc = c.ncomp();
    let h = cx.spacing();
    let full = (1u32 << n) - 1;
    let src_deg = n - k;
    let tgt_deg = src_deg - 1;
    let mut out = Cochain::zeros_with(cx, k + 1, Layout::Dual, nc);
    let mut pos = vec![0i64; n];
    let mut q = vec![0i64; n];
    for b in cx.blocks(tgt_deg) {
        let comp = full & !b.mask;
        for local in 0..b.len {
            b.position(local, &mut pos);
            let o = b.offset + local;
            for (j, a) in (0..n).filter(|a| comp & (1 << a) != 0).enumerate() {
                let src = b.mask | (1 << a);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 } / h[a];
                q.copy_from_slice(&pos);
                let up = cx.cell_index(src_deg, src, &q);
                q[a] -= 1;
                let down = cx.cell_index(src_deg, src, &q);
                for kk in 0..nc {
                    let vu = up.map_or(0.0, |i| c.get(i, kk));
                    let vd = down.map_or(0.0, |i| c.get(i, kk));
                    out.values_mut()[o * nc + kk] += sign * (vu - vd);
                }
            }
        }
    }
    out
}

/// Hodge star. Primal p-cochains map to dual (n-p)-cochains and back.
pub fn star(cx: &Complex, c: &Cochain) -> Cochain {
    let n = cx.dim();
    let nc = c.ncomp();
    let full = (1u32 << n) - 1;
    let idx_deg = c.index_degree(n);
    let (out_degree, out_layout) = match c.layout() {
        Layout::Primal => (n - c.degree(), Layout::Dual),
        Layout::Dual => (n - c.degree(), Layout::Primal),
    };
    let mut out = Cochain::zeros_with(cx, out_degree, out_layout, nc);
    let blocks = cx.blocks(idx_deg);
    let mut pos = vec![0i64; n];
    let mut tmp = vec![0.0; nc];
    for b in blocks {
        // Label raised by the metric and the permutation sign.
        let (raise, sign) = match c.layout() {
            Layout::Primal => (b.mask, shuffle_sign(b.mask, full & !b.mask)),
            Layout::Dual => (full & !b.mask, shuffle_sign(full & !b.mask, b.mask)),
        };
        for local in 0..b.len {
            let o = b.offset + local;
            if cx.is_flat() {
                for k in 0..nc {
                    out.values_mut()[o * nc + k] = sign * c.get(o, k);
                }
                continue;
            }
            b.position(local, &mut pos);
            let pm = cx.metric_at_cell(b.mask, &pos);
            for src in blocks {
                let label = match c.layout() {
                    Layout::Primal => src.mask,
                    Layout::Dual => full & !src.mask,
                };
                let gij = pm.form_inner(raise, label);
                if gij == 0.0 {
                    continue;
                }
                if src.mask == b.mask {
                    for k in 0..nc {
                        out.values_mut()[o * nc + k] += sign * pm.sqrt_g * gij * c.get(o, k);
                    }
                } else {
                    interpolate(cx, c, src.mask, b.mask, &pos, &mut tmp);
                    for k in 0..nc {
                        out.values_mut()[o * nc + k] += sign * pm.sqrt_g * gij * tmp[k];
                    }
                }
            }
        }
    }
    out
}

/// Codifferential of a primal p-cochain: (-1)^{n(p+1)+1} * d *.
pub fn codifferential(cx: &Complex, c: &Cochain) -> Result<Cochain, DecError> {
    let n = cx.dim();
    let p = c.degree();
    if p == 0 {
        return Err(DecError::Degree { degree: 0, n });
    }
    if c.layout() != Layout::Primal {
        return Err(DecError::Layout { expected: Layout::Primal, got: c.layout() });
    }
    let mut out = star(cx, &d(cx, &star(cx, c))?);
    if (n * (p + 1) + 1) % 2 == 1 {
        out.scale(-1.0);
    }
    Ok(out)
}

/// L2 inner product of two primal cochains of equal degree.
pub fn inner(cx: &Complex, a: &Cochain, b: &Cochain) -> Result<f64, DecError> {
    if !a.same_shape(b) {
        return Err(DecError::Mismatch("inner product of cochains of different shape"));
    }
    if a.layout() != Layout::Primal {
        return Err(DecError::Layout { expected: Layout::Primal, got: a.layout() });
    }
    let n = cx.dim();
    let full = (1u32 << n) - 1;
    let sb = star(cx, b);
    let nc = a.ncomp();
    let mut acc = 0.0;
    for blk in cx.blocks(a.degree()) {
        let sign = shuffle_sign(blk.mask, full & !blk.mask);
        let mut s = 0.0;
        for i in blk.offset..blk.offset + blk.len {
            for k in 0..nc {
                s += a.get(i, k) * sb.get(i, k);
            }
        }
        acc += sign * s;
    }
    Ok(acc * cx.cell_volume())
}

pub fn norm(cx: &Complex, a: &Cochain) -> f64 {
    inner(cx, a, a).expect("same shape").max(0.0).sqrt()
}

/// Wedge product of a scalar primal p-cochain with a primal q-cochain, with
/// both factors averaged to the (p+q)-cells.
pub fn wedge(cx: &Complex, a: &Cochain, b: &Cochain) -> Result<Cochain, DecError> {
    let n = cx.dim();
    let (p, q) = (a.degree(), b.degree());
    if p + q > n {
        return Err(DecError::Degree { degree: p + q, n });
    }
    if a.layout() != Layout::Primal || b.layout() != Layout::Primal {
        return Err(DecError::Layout { expected: Layout::Primal, got: Layout::Dual });
    }
    if a.ncomp() != 1 {
        return Err(DecError::Mismatch("left wedge factor must be scalar"));
    }
    let nc = b.ncomp();
    let mut out = Cochain::zeros_with(cx, p + q, Layout::Primal, nc);
    let mut pos = vec![0i64; n];
    let mut ta = [0.0];
    let mut tb = vec![0.0; nc];
    for t in cx.blocks(p + q) {
        let subsets: Vec<u32> = cx.blocks(p).iter().map(|s| s.mask).filter(|&s| s & !t.mask == 0).collect();
        for local in 0..t.len {
            t.position(local, &mut pos);
            let o = t.offset + local;
            for &s in &subsets {
                let rest = t.mask & !s;
                let sign = shuffle_sign(s, rest);
                interpolate(cx, a, s, t.mask, &pos, &mut ta);
                interpolate(cx, b, rest, t.mask, &pos, &mut tb);
                for k in 0..nc {
                    out.values_mut()[o * nc + k] += sign * ta[0] * tb[k];
                }
            }
        }
    }
    Ok(out)
}

/// Pointwise squared norm Q on top cells.
///
/// Diagonal terms use the mean of squared values over the faces of each
/// orientation; cross terms between different orientations use the product
/// of face means. Vector-valued cochains sum over value components.
pub fn pointwise_q(cx: &Complex, c: &Cochain) -> Result<CellField, DecError> {
    if c.layout() != Layout::Primal {
        return Err(DecError::Layout { expected: Layout::Primal, got: c.layout() });
    }
    let n = cx.dim();
    let p = c.degree();
    let nc = c.ncomp();
    let blocks = cx.blocks(p);
    let nb = blocks.len();
    let top = &cx.blocks(n)[0];
    let full = (1u32 << n) - 1;
    let mut out = CellField::zeros(cx, 1);
    let mut pos = vec![0i64; n];
    let mut faces = Vec::new();
    let mut mean = vec![0.0; nb * nc];
    let mut msq = vec![0.0; nb];
    for cell in 0..top.len {
        top.position(cell, &mut pos);
        for (bi, b) in blocks.iter().enumerate() {
            cx.top_cell_faces(p, b.mask, &pos, &mut faces);
            let w = 1.0 / faces.len() as f64;
            msq[bi] = 0.0;
            for k in 0..nc {
                mean[bi * nc + k] = 0.0;
            }
            for &f in &faces {
                for k in 0..nc {
                    let v = c.get(f, k);
                    mean[bi * nc + k] += w * v;
                    msq[bi] += w * v * v;
                }
            }
        }
        let pm = if cx.is_flat() { PointMetric::flat(n) } else { cx.metric_at_cell(full, &pos) };
        let mut qv = 0.0;
        for (bi, b) in blocks.iter().enumerate() {
            qv += pm.form_inner(b.mask, b.mask) * msq[bi];
            if pm.flat {
                continue;
            }
            for (bj, bb) in blocks.iter().enumerate() {
                if bj == bi {
                    continue;
                }
                let g = pm.form_inner(b.mask, bb.mask);
                if g != 0.0 {
                    for k in 0..nc {
                        qv += g * mean[bi * nc + k] * mean[bj * nc + k];
                    }
                }
            }
        }
        out.values[cell] = qv;
    }
    Ok(out)
}
