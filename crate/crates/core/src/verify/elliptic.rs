//! Coefficients a_kj = (rho/2 + Q rho') delta_kj - rho' (s_k F, s_j F) of the
//! divergence-form operator L(Q) = sum d_k(a_kj d_j Q), and the smallest
//! constant in L(Q) + C (Q + k)^q (|grad A| + |A|^2) Q >= 0.

use super::VerifyError;
use crate::cochain::{label_axes, to_cell_field, CellField, Cochain};
use crate::complex::{Complex, ComplexBuilder};
use crate::density::DensityModel;
use crate::gauge::{curvature, LatticeConnection};
use nalgebra::DMatrix;
use serde::Serialize;

/// Cell-centered field data for the check.
#[derive(Debug, Clone)]
pub struct EllipticInput {
    pub complex: Complex,
    /// Form degree of F.
    pub degree: usize,
    /// Value components per form component (3 for gauge fields).
    pub nvalue: usize,
    /// F per top cell, ordered by form label then value component.
    pub f: CellField,
    /// The potential A per top cell.
    pub a: CellField,
}

impl EllipticInput {
    /// Scalar flow: F = omega, A = phi.
    pub fn from_flow(cx: &Complex, omega: &Cochain, phi: &Cochain) -> Self {
        EllipticInput {
            complex: cx.clone(),
            degree: omega.degree(),
            nvalue: omega.ncomp(),
            f: to_cell_field(cx, omega),
            a: to_cell_field(cx, phi),
        }
    }

    /// Gauge field: F from plaquette logs, A from link logs.
    pub fn from_connection(conn: &LatticeConnection) -> Result<Self, VerifyError> {
        let cx = conn.complex();
        let f = curvature(conn)?;
        let a = conn.potential()?;
        Ok(EllipticInput {
            complex: cx.clone(),
            degree: 2,
            nvalue: 3,
            f: to_cell_field(cx, &f),
            a: to_cell_field(cx, &a),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticReport {
    pub interior_cells: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Interior cells where a_kj is not positive-definite.
    pub indefinite_cells: Vec<usize>,
    pub l_min: f64,
    pub l_max_abs: f64,
    pub tol_h: f64,
    /// Smallest admissible constant, None if no finite constant works.
    pub c: Option<f64>,
    /// Cells where the weight vanishes but L(Q) < -tol_h.
    pub infeasible_cells: Vec<usize>,
    pub c_max: f64,
    pub pass: bool,
}

/// Sign of the permutation sorting (k, rest) into increasing order.
fn insertion_sign(k: usize, rest: u32) -> f64 {
    if (rest & ((1u32 << k) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn neighbor(cx: &Complex, pos: &mut [i64], axis: usize, d: i64) -> Option<usize> {
    let n = cx.dim();
    pos[axis] += d;
    let r = cx.cell_index(n, (1u32 << n) - 1, pos);
    pos[axis] -= d;
    r
}

/// Coefficient matrix at one cell.
pub fn coefficient_matrix(
    n: usize,
    degree: usize,
    nvalue: usize,
    labels: &[u32],
    comps: &[f64],
    model: &DensityModel,
) -> Result<(DMatrix<f64>, f64), VerifyError> {
    let q: f64 = comps.iter().map(|v| v * v).sum();
    let (rho, drho) = model.rho_drho(q)?;
    let mut s = DMatrix::zeros(n, n);
    if degree > 0 {
        // (s_k F, s_j F) = sum over (p-1)-labels M and values c of
        // F^c_{kM} F^c_{jM} with the antisymmetric extension.
        for (li, &lk) in labels.iter().enumerate() {
            for k in label_axes(lk) {
                let m = lk & !(1 << k);
                let sk = insertion_sign(k, m);
                for (lj_i, &lj) in labels.iter().enumerate() {
                    if lj & m != m || (lj & !m).count_ones() != 1 {
                        continue;
                    }
                    let j = (lj & !m).trailing_zeros() as usize;
                    let sj = insertion_sign(j, m);
                    for c in 0..nvalue {
                        s[(k, j)] += sk * sj * comps[li * nvalue + c] * comps[lj_i * nvalue + c];
                    }
                }
            }
        }
    }
    let a = DMatrix::identity(n, n) * (0.5 * rho + q * drho) - s * drho;
    Ok((a, q))
}

/// Ellipticity of a_kj on interior cells and the smallest constant making
/// the inequality hold up to tol_h = c0 h max|L(Q)|.
pub fn elliptic_inequality_check(
    input: &EllipticInput,
    model: &DensityModel,
    k: f64,
    q_exp: f64,
    c0: f64,
) -> Result<EllipticReport, VerifyError> {
    let cx = &input.complex;
    let n = cx.dim();
    let labels: Vec<u32> = cx.blocks(input.degree).iter().map(|b| b.mask).collect();
    let ncomp = labels.len() * input.nvalue;
    if input.f.ncomp != ncomp {
        return Err(VerifyError::Shape(format!("F has {} components, expected {ncomp}", input.f.ncomp)));
    }
    let ncell = cx.num_cells(n);
    let top = &cx.blocks(n)[0];
    let h = cx.spacing();
    let mut coef = Vec::with_capacity(ncell);
    let mut qf = vec![0.0; ncell];
    for c in 0..ncell {
        let (a, q) = coefficient_matrix(n, input.degree, input.nvalue, &labels, input.f.cell(c), model)?;
        coef.push(a);
        qf[c] = q;
    }
    let mut pos = vec![0i64; n];
    // Centered gradient of Q and flux a grad Q where both neighbors exist.
    let mut flux: Vec<Option<Vec<f64>>> = vec![None; ncell];
    for c in 0..ncell {
        top.position(c, &mut pos);
        let mut g = vec![0.0; n];
        let mut ok = true;
        for j in 0..n {
            match (neighbor(cx, &mut pos, j, 1), neighbor(cx, &mut pos, j, -1)) {
                (Some(p), Some(m)) => g[j] = (qf[p] - qf[m]) / (2.0 * h[j]),
                _ => ok = false,
            }
        }
        if ok {
            flux[c] = Some((0..n).map(|kk| (0..n).map(|j| coef[c][(kk, j)] * g[j]).sum()).collect());
        }
    }
    let mut interior = Vec::new();
    let mut lq = Vec::new();
    for c in 0..ncell {
        top.position(c, &mut pos);
        let mut acc = 0.0;
        let mut ok = true;
        for kk in 0..n {
            let fp = neighbor(cx, &mut pos, kk, 1).and_then(|p| flux[p].as_ref());
            let fm = neighbor(cx, &mut pos, kk, -1).and_then(|m| flux[m].as_ref());
            match (fp, fm) {
                (Some(p), Some(m)) => acc += (p[kk] - m[kk]) / (2.0 * h[kk]),
                _ => ok = false,
            }
        }
        if ok {
            interior.push(c);
            lq.push(acc);
        }
    }

    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut indefinite = Vec::new();
    for &c in &interior {
        let e = coef[c].clone().symmetric_eigenvalues();
        let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
        min_eig = min_eig.min(lo);
        max_eig = max_eig.max(e.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if lo <= 0.0 {
            indefinite.push(c);
        }
    }

    let l_min = lq.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_max_abs = lq.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let hmax = h.iter().cloned().fold(0.0, f64::max);
    let tol_h = c0 * hmax * l_max_abs;
    let acomp = input.a.ncomp;
    let mut c_needed: f64 = 0.0;
    let mut infeasible = Vec::new();
    for (&c, &l) in interior.iter().zip(&lq) {
        if l >= -tol_h {
            continue;
        }
        top.position(c, &mut pos);
        let a2: f64 = input.a.cell(c).iter().map(|v| v * v).sum();
        let mut g2 = 0.0;
        for b in 0..n {
            let p = neighbor(cx, &mut pos, b, 1).unwrap();
            let m = neighbor(cx, &mut pos, b, -1).unwrap();
            for comp in 0..acomp {
                let d = (input.a.get(p, comp) - input.a.get(m, comp)) / (2.0 * h[b]);
                g2 += d * d;
            }
        }
        let w = (qf[c] + k).powf(q_exp) * (g2.sqrt() + a2) * qf[c];
        if w > 0.0 {
            c_needed = c_needed.max((-tol_h - l) / w);
        } else {
            infeasible.push(c);
        }
    }
    let c_max = 1e6;
    let c = (infeasible.is_empty() && c_needed <= c_max).then_some(c_needed);
    let pass = !interior.is_empty() && indefinite.is_empty() && c.is_some();
    Ok(EllipticReport {
        interior_cells: interior.len(),
        min_eigenvalue: if interior.is_empty() { 0.0 } else { min_eig },
        max_eigenvalue: if interior.is_empty() { 0.0 } else { max_eig },
        indefinite_cells: indefinite,
        l_min: if lq.is_empty() { 0.0 } else { l_min },
        l_max_abs,
        tol_h,
        c,
        infeasible_cells: infeasible,
        c_max,
        pass,
    })
}

/// Input from closed-form F and A on a flat box.
pub fn input_from_fns<F, A>(dims: &[usize], h: f64, degree: usize, f: F, a: A) -> Result<EllipticInput, VerifyError>
where
    F: Fn(&[f64], &mut [f64]),
    A: Fn(&[f64], &mut [f64]),
{
    let cx = ComplexBuilder::new(dims).spacing(h).build().map_err(|e| VerifyError::Shape(e.to_string()))?;
    let nlab = cx.blocks(degree).len();
    let fcell = CellField::from_fn_vec(&cx, nlab, f);
    let acell = CellField::from_fn_vec(&cx, cx.dim(), a);
    Ok(EllipticInput { complex: cx, degree, nvalue: 1, f: fcell, a: acell })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density_gives_half_identity() {
        let (a, _) = coefficient_matrix(3, 2, 1, &[3, 5, 6], &[0.3, -0.2, 1.0], &DensityModel::Constant).unwrap();
        assert_eq!(a, DMatrix::identity(3, 3) * 0.5);
    }

    #[test]
    fn two_form_contraction_matches_vector_form() {
        // In 3D a 2-form F_{ab} is dual to a vector f; (s_k F, s_j F) = |f|^2 d_kj - f_k f_j.
        let model = DensityModel::polytropic(2.0).unwrap();
        let comps = [0.3, -0.2, 0.4]; // F01, F02, F12
        let (a, q) = coefficient_matrix(3, 2, 1, &[3, 5, 6], &comps, &model).unwrap();
        let (rho, drho) = model.rho_drho(q).unwrap();
        let f = nalgebra::Vector3::new(0.4, 0.2, 0.3); // (F12, -F02, F01)
        let expect = DMatrix::identity(3, 3) * (0.5 * rho) + DMatrix::from_fn(3, 3, |i, j| drho * f[i] * f[j]);
        assert!((a - expect).abs().max() < 1e-15);
    }

    #[test]
    fn vanishing_field_holds_with_zero_constant() {
        let input = input_from_fns(&[6, 6, 6], 0.2, 2, |_, f| f.fill(0.0), |_, a| a.fill(0.0)).unwrap();
        let r = elliptic_inequality_check(&input, &DensityModel::Constant, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.c, Some(0.0));
        assert_eq!(r.l_max_abs, 0.0);
        assert!(r.pass);
    }
}
