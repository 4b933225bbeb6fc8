//! Group-valued link connections, plaquette curvature, the rho-weighted
//! energy with its exact lattice gradient, and the Euler-Lagrange and
//! Bianchi diagnostics.

use super::group::{random_algebra, Algebra, Group, GroupElement, GroupError};
use crate::cochain::{CellField, Cochain, DecError, Layout};
use crate::complex::Complex;
use crate::density::{DensityError, DensityModel};
use crate::ops;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("plaquette {plaquette}: holonomy at the log cut locus (angle {angle})")]
    PlaquetteLog { plaquette: usize, angle: f64 },
    #[error("link {link}: element at the log cut locus (angle {angle})")]
    LinkLog { link: usize, angle: f64 },
    #[error("density undefined at cell {cell}: {source}")]
    Domain { cell: usize, source: DensityError },
    #[error("origin vertex {0} lies on the boundary")]
    OriginOnBoundary(usize),
    #[error("{what}: got {got} entries, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
    #[error("mixed groups: {0:?} and {1:?}")]
    GroupMismatch(Group, Group),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Dec(#[from] DecError),
}

fn plaquette_log(plaquette: usize) -> impl Fn(GroupError) -> GaugeError {
    move |e| match e {
        GroupError::LogBranch { angle } => GaugeError::PlaquetteLog { plaquette, angle },
        other => GaugeError::Group(other),
    }
}

fn link_log(link: usize) -> impl Fn(GroupError) -> GaugeError {
    move |e| match e {
        GroupError::LogBranch { angle } => GaugeError::LinkLog { link, angle },
        other => GaugeError::Group(other),
    }
}

/// One element per oriented edge, in cochain order. The reversed edge
/// carries the inverse.
#[derive(Debug, Clone)]
pub struct LatticeConnection {
    group: Group,
    complex: Complex,
    links: Vec<GroupElement>,
}

/// Oriented plaquette in the (a, b) plane, a < b, based at a vertex:
/// links U_a(x), U_b(x+a), U_a(x+b), U_b(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaquette {
    pub a: usize,
    pub b: usize,
    pub base: usize,
    pub links: [usize; 4],
}

/// All plaquettes indexed like the 2-cells of the complex.
pub fn plaquettes(cx: &Complex) -> Vec<Plaquette> {
    let n = cx.dim();
    let mut out = Vec::with_capacity(cx.num_cells(2));
    let mut pos = vec![0i64; n];
    let mut q = vec![0i64; n];
    for blk in cx.blocks(2) {
        let (a, b) = (blk.axes[0], blk.axes[1]);
        for local in 0..blk.len {
            blk.position(local, &mut pos);
            let e = |axis: usize, shift: Option<usize>, q: &mut Vec<i64>| {
                q.copy_from_slice(&pos);
                if let Some(s) = shift {
                    q[s] += 1;
                }
                cx.cell_index(1, 1 << axis, q).expect("plaquette link")
            };
            let links = [e(a, None, &mut q), e(b, Some(a), &mut q), e(a, Some(b), &mut q), e(b, None, &mut q)];
            let base = cx.cell_index(0, 0, &pos).expect("plaquette base");
            out.push(Plaquette { a, b, base, links });
        }
    }
    out
}

impl LatticeConnection {
    /// All links equal to the identity. Gauge fields use the Euclidean
    /// metric of the complex's coordinates.
    pub fn identity(cx: &Complex, group: Group) -> Self {
        let complex = cx.flat_like();
        let links = vec![group.identity(); complex.num_cells(1)];
        LatticeConnection { group, complex, links }
    }

    pub fn from_links(cx: &Complex, group: Group, links: Vec<GroupElement>) -> Result<Self, GaugeError> {
        if links.len() != cx.num_cells(1) {
            return Err(GaugeError::Length { what: "links", got: links.len(), expected: cx.num_cells(1) });
        }
        if let Some(l) = links.iter().find(|l| l.group() != group) {
            return Err(GaugeError::GroupMismatch(group, l.group()));
        }
        Ok(LatticeConnection { group, complex: cx.flat_like(), links })
    }

    /// Independent random links exp(X) with |X| < amplitude.
    pub fn random<R: Rng + ?Sized>(cx: &Complex, group: Group, amplitude: f64, rng: &mut R) -> Self {
        let mut c = Self::identity(cx, group);
        for l in c.links.iter_mut() {
            *l = group.random(rng, amplitude);
        }
        c
    }

    /// Links exp(h_a A_a(midpoint)) from a continuum potential; `f(axis, x)`
    /// returns the algebra component A_axis at x.
    pub fn from_potential<F: Fn(usize, &[f64]) -> Algebra>(cx: &Complex, group: Group, f: F) -> Self {
        let mut c = Self::identity(cx, group);
        let n = cx.dim();
        let mut pos = vec![0i64; n];
        let mut x = vec![0.0; n];
        for blk in cx.blocks(1) {
            let axis = blk.axes[0];
            let h = cx.spacing()[axis];
            for local in 0..blk.len {
                blk.position(local, &mut pos);
                cx.center_of(blk.mask, &pos, &mut x);
                c.links[blk.offset + local] = group.exp(&(f(axis, &x) * h));
            }
        }
        c
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn complex(&self) -> &Complex {
        &self.complex
    }

    pub fn links(&self) -> &[GroupElement] {
        &self.links
    }

    pub fn links_mut(&mut self) -> &mut [GroupElement] {
        &mut self.links
    }

    pub fn link(&self, e: usize) -> GroupElement {
        self.links[e]
    }

    pub fn set_link(&mut self, e: usize, u: GroupElement) {
        self.links[e] = u;
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Edge of the given axis based at `pos`.
    pub fn edge(&self, axis: usize, pos: &[i64]) -> Option<usize> {
        self.complex.cell_index(1, 1 << axis, pos)
    }

    /// Endpoints (tail, head) of an edge.
    pub fn edge_vertices(&self, e: usize) -> (usize, usize) {
        let cx = &self.complex;
        let mut pos = vec![0i64; cx.dim()];
        let mask = cx.cell_of(1, e, &mut pos);
        let tail = cx.cell_index(0, 0, &pos).unwrap();
        pos[mask.trailing_zeros() as usize] += 1;
        let head = cx.cell_index(0, 0, &pos).unwrap();
        (tail, head)
    }

    pub fn holonomy(&self, p: &Plaquette) -> GroupElement {
        let u = &self.links;
        u[p.links[0]] * u[p.links[1]] * u[p.links[2]].inverse() * u[p.links[3]].inverse()
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.links.iter().map(|l| l.unitarity_defect()).fold(0.0, f64::max)
    }

    /// Connection potential A = log(U) / h as an algebra-valued 1-cochain.
    pub fn potential(&self) -> Result<Cochain, GaugeError> {
        let cx = &self.complex;
        let mut a = Cochain::zeros_with(cx, 1, Layout::Primal, 3);
        for blk in cx.blocks(1) {
            let h = cx.spacing()[blk.axes[0]];
            for e in blk.offset..blk.offset + blk.len {
                let x = self.links[e].log().map_err(link_log(e))? / h;
                a.cell_mut(e).copy_from_slice(x.as_slice());
            }
        }
        Ok(a)
    }
}

#[inline]
pub(crate) fn get3(c: &Cochain, i: usize) -> Algebra {
    let v = c.cell(i);
    Vector3::new(v[0], v[1], v[2])
}

#[inline]
pub(crate) fn add3(c: &mut Cochain, i: usize, x: &Algebra) {
    let v = c.cell_mut(i);
    v[0] += x[0];
    v[1] += x[1];
    v[2] += x[2];
}

/// Plaquette curvature F_p = log(holonomy) / (h_a h_b).
pub fn curvature(conn: &LatticeConnection) -> Result<Cochain, GaugeError> {
    let cx = conn.complex();
    let mut f = Cochain::zeros_with(cx, 2, Layout::Primal, 3);
    let h = cx.spacing();
    for (i, p) in plaquettes(cx).iter().enumerate() {
        let x = conn.holonomy(p).log().map_err(plaquette_log(i))? / (h[p.a] * h[p.b]);
        f.cell_mut(i).copy_from_slice(x.as_slice());
    }
    Ok(f)
}

/// Pointwise Q = |F|^2 on top cells.
pub fn gauge_q(conn: &LatticeConnection) -> Result<CellField, GaugeError> {
    let f = curvature(conn)?;
    Ok(ops::pointwise_q(conn.complex(), &f)?)
}

fn energy_from_q(cx: &Complex, q: &CellField, model: &DensityModel) -> Result<f64, GaugeError> {
    let mut e = 0.0;
    for (cell, &qc) in q.values.iter().enumerate() {
        e += model.stored_energy(qc).map_err(|source| GaugeError::Domain { cell, source })?;
    }
    Ok(0.5 * e * cx.cell_volume())
}

/// Half the sum over top cells of the integral of rho up to Q, times the
/// cell volume.
pub fn gauge_energy(conn: &LatticeConnection, model: &DensityModel) -> Result<f64, GaugeError> {
    energy_from_q(conn.complex(), &gauge_q(conn)?, model)
}

/// Per-plaquette weights: (sum over adjacent cells of w(cell)) / faces
/// per orientation, and the number of adjacent cells.
fn plaquette_cell_sums(cx: &Complex, w: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let n = cx.dim();
    let mut sum = vec![0.0; cx.num_cells(2)];
    let mut count = vec![0u32; cx.num_cells(2)];
    let top = &cx.blocks(n)[0];
    let mut pos = vec![0i64; n];
    let mut faces = Vec::new();
    for cell in 0..top.len {
        top.position(cell, &mut pos);
        for blk in cx.blocks(2) {
            cx.top_cell_faces(2, blk.mask, &pos, &mut faces);
            for &f in &faces {
                sum[f] += w[cell];
                count[f] += 1;
            }
        }
    }
    (sum, count)
}

fn cell_rho(q: &CellField, model: &DensityModel) -> Result<Vec<f64>, GaugeError> {
    q.values
        .iter()
        .enumerate()
        .map(|(cell, &qc)| model.rho(qc).map_err(|source| GaugeError::Domain { cell, source }))
        .collect()
}

/// Gradient of the energy with respect to left perturbations
/// U -> exp(tX) U of each link, as algebra coefficients per link.
pub fn energy_gradient(conn: &LatticeConnection, model: &DensityModel) -> Result<Cochain, GaugeError> {
    let cx = conn.complex();
    let f = curvature(conn)?;
    let q = ops::pointwise_q(cx, &f)?;
    let rho = cell_rho(&q, model)?;
    let m = cx.faces_per_orientation(2) as f64;
    let (kappa, _) = plaquette_cell_sums(cx, &rho);
    let vol = cx.cell_volume();
    let h = cx.spacing();
    let u = conn.links();
    let mut g = Cochain::zeros_with(cx, 1, Layout::Primal, 3);
    for (i, p) in plaquettes(cx).iter().enumerate() {
        let gp = get3(&f, i) * (kappa[i] * vol / m / (h[p.a] * h[p.b]));
        let [l1, l2, l3, l4] = p.links;
        let m2 = u[l1];
        let m3 = u[l1] * u[l2] * u[l3].inverse();
        let m4 = m3 * u[l4].inverse();
        add3(&mut g, l1, &gp);
        add3(&mut g, l2, &m2.inverse().adjoint(&gp));
        add3(&mut g, l3, &-m3.inverse().adjoint(&gp));
        add3(&mut g, l4, &-m4.inverse().adjoint(&gp));
    }
    Ok(g)
}

/// Vertex-valued gauge transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    pub group: Group,
    pub elems: Vec<GroupElement>,
}

impl GaugeTransform {
    pub fn identity(cx: &Complex, group: Group) -> Self {
        GaugeTransform { group, elems: vec![group.identity(); cx.num_vertices()] }
    }

    pub fn constant(cx: &Complex, g: GroupElement) -> Self {
        GaugeTransform { group: g.group(), elems: vec![g; cx.num_vertices()] }
    }

    /// g(x) = exp(f(x)).
    pub fn from_fn<F: Fn(&[f64]) -> Algebra>(cx: &Complex, group: Group, f: F) -> Self {
        let mut x = vec![0.0; cx.dim()];
        let elems = (0..cx.num_vertices())
            .map(|v| {
                cx.vertex_coords(v, &mut x);
                group.exp(&f(&x))
            })
            .collect();
        GaugeTransform { group, elems }
    }

    /// Independent random element at every vertex.
    pub fn random<R: Rng + ?Sized>(cx: &Complex, group: Group, amplitude: f64, rng: &mut R) -> Self {
        let elems = (0..cx.num_vertices()).map(|_| group.random(rng, amplitude)).collect();
        GaugeTransform { group, elems }
    }

    pub fn compose(&self, other: &GaugeTransform) -> GaugeTransform {
        let elems = self.elems.iter().zip(&other.elems).map(|(a, b)| a * b).collect();
        GaugeTransform { group: self.group, elems }
    }
}

/// U_{x->y} -> g(x) U g(y)^{-1}.
pub fn apply_gauge(conn: &LatticeConnection, g: &GaugeTransform) -> Result<LatticeConnection, GaugeError> {
    if g.elems.len() != conn.complex().num_vertices() {
        return Err(GaugeError::Length { what: "gauge", got: g.elems.len(), expected: conn.complex().num_vertices() });
    }
    if g.group != conn.group() {
        return Err(GaugeError::GroupMismatch(conn.group(), g.group));
    }
    let mut out = conn.clone();
    for e in 0..conn.num_links() {
        let (t, h) = conn.edge_vertices(e);
        out.links[e] = g.elems[t] * conn.links[e] * g.elems[h].inverse();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when the largest per-link gradient norm is at most this.
    pub tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    /// Let boundary links move (natural boundary condition) instead of
    /// holding them fixed.
    pub free_boundary: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { tol: 1e-8, max_iters: 20_000, initial_step: 1e-3, free_boundary: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeReport {
    pub status: MinimizeStatus,
    pub iterations: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub grad_sup: f64,
    pub energy_history: Vec<f64>,
    pub grad_history: Vec<f64>,
}

fn movable_links(conn: &LatticeConnection, free_boundary: bool) -> Vec<bool> {
    let cx = conn.complex();
    (0..conn.num_links()).map(|e| free_boundary || !cx.is_boundary_cell(1, e)).collect()
}

/// Gradient descent on the link manifold with Armijo backtracking.
///
/// Trial steps that leave the density domain are rejected like steps that
/// fail the sufficient-decrease test. Step lengths start from the
/// Barzilai-Borwein estimate of the previous iteration.
pub fn minimize(
    conn: &LatticeConnection,
    model: &DensityModel,
    opts: &MinimizeOptions,
) -> Result<(LatticeConnection, MinimizeReport), GaugeError> {
    let movable = movable_links(conn, opts.free_boundary);
    let mut cur = conn.clone();
    let mut energy = gauge_energy(&cur, model)?;
    let mut report = MinimizeReport {
        status: MinimizeStatus::MaxIterations,
        iterations: 0,
        initial_energy: energy,
        final_energy: energy,
        grad_sup: f64::INFINITY,
        energy_history: vec![energy],
        grad_history: Vec::new(),
    };
    let mut grad = masked_gradient(&cur, model, &movable)?;
    let mut eta = opts.initial_step;
    let mut prev: Option<(Cochain, f64)> = None;
    for iter in 0..=opts.max_iters {
        let sup = (0..grad.num_cells()).map(|e| get3(&grad, e).norm()).fold(0.0, f64::max);
        report.grad_sup = sup;
        report.grad_history.push(sup);
        report.iterations = iter;
        if sup <= opts.tol {
            report.status = MinimizeStatus::Converged;
            break;
        }
        if iter == opts.max_iters {
            break;
        }
        if let Some((gp, step)) = &prev {
            // s = -step * g_prev, y = g - g_prev.
            let mut ss = 0.0;
            let mut sy = 0.0;
            for (a, b) in gp.values().iter().zip(grad.values()) {
                ss += step * step * a * a;
                sy += -step * a * (b - a);
            }
            if sy > 0.0 {
                eta = (ss / sy).clamp(1e-12, 1e6);
            }
        }
        let g2: f64 = grad.values().iter().map(|v| v * v).sum();
        let slack = 1e-15 * energy.abs();
        let mut accepted = None;
        for _ in 0..60 {
            let trial = step_links(&cur, &grad, -eta);
            match gauge_energy(&trial, model) {
                Ok(et) if et <= energy - 1e-4 * eta * g2 + slack => {
                    accepted = Some((trial, et));
                    break;
                }
                Ok(_) | Err(GaugeError::Domain { .. }) | Err(GaugeError::PlaquetteLog { .. }) => eta *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, et)) = accepted else {
            report.status = MinimizeStatus::LineSearchFailed;
            break;
        };
        cur = trial;
        energy = et;
        report.energy_history.push(energy);
        let g_new = masked_gradient(&cur, model, &movable)?;
        prev = Some((std::mem::replace(&mut grad, g_new), eta));
    }
    report.final_energy = energy;
    Ok((cur, report))
}

fn masked_gradient(conn: &LatticeConnection, model: &DensityModel, movable: &[bool]) -> Result<Cochain, GaugeError> {
    let mut g = energy_gradient(conn, model)?;
    for (e, &m) in movable.iter().enumerate() {
        if !m {
            g.cell_mut(e).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(g)
}

/// U -> exp(t X) U for every link.
pub fn step_links(conn: &LatticeConnection, x: &Cochain, t: f64) -> LatticeConnection {
    let mut out = conn.clone();
    let group = conn.group();
    for e in 0..conn.num_links() {
        let v = get3(x, e);
        if v != Vector3::zeros() {
            out.links[e] = (group.exp(&(v * t)) * conn.links[e]).normalized();
        }
    }
    out
}

/// rho-weighted curvature G_p = rho_bar_p F_p, where rho_bar_p averages
/// rho(Q) over the cells adjacent to the plaquette.
pub fn weighted_curvature(conn: &LatticeConnection, model: &DensityModel) -> Result<Cochain, GaugeError> {
    let cx = conn.complex();
    let mut f = curvature(conn)?;
    let q = ops::pointwise_q(cx, &f)?;
    let rho = cell_rho(&q, model)?;
    let (sum, count) = plaquette_cell_sums(cx, &rho);
    for p in 0..f.num_cells() {
        let r = sum[p] / count[p] as f64;
        f.cell_mut(p).iter_mut().for_each(|v| *v *= r);
    }
    Ok(f)
}

/// Bracket term -sum_a [A_a, G_ab] on b-edges, with both factors averaged
/// to the edge.
fn bracket_term(cx: &Complex, a: &Cochain, g: &Cochain) -> Cochain {
    let n = cx.dim();
    let mut out = Cochain::zeros_with(cx, 1, Layout::Primal, 3);
    let mut pos = vec![0i64; n];
    let mut ta = [0.0; 3];
    let mut tg = [0.0; 3];
    for blk in cx.blocks(1) {
        let b = blk.axes[0];
        for local in 0..blk.len {
            blk.position(local, &mut pos);
            let e = blk.offset + local;
            let mut acc = Vector3::zeros();
            for ax in (0..n).filter(|&ax| ax != b) {
                let plane = (1u32 << ax) | (1u32 << b);
                let sign = if ax < b { 1.0 } else { -1.0 };
                ops::interpolate(cx, a, 1 << ax, blk.mask, &pos, &mut ta);
                ops::interpolate(cx, g, plane, blk.mask, &pos, &mut tg);
                let av = Vector3::from(ta);
                let gv = Vector3::from(tg);
                acc -= av.cross(&gv) * sign;
            }
            add3(&mut out, e, &acc);
        }
    }
    out
}

/// Strong Euler-Lagrange residual delta(rho F) + bracket term, per link.
pub fn el_residual(conn: &LatticeConnection, model: &DensityModel) -> Result<Cochain, GaugeError> {
    let cx = conn.complex();
    let g = weighted_curvature(conn, model)?;
    let a = conn.potential()?;
    let mut r = ops::codifferential(cx, &g)?;
    r.axpy(1.0, &bracket_term(cx, &a, &g))?;
    Ok(r)
}

/// Random algebra-valued test 1-cochain vanishing on boundary links.
pub fn random_test_form(cx: &Complex, seed: u64) -> Cochain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Cochain::zeros_with(cx, 1, Layout::Primal, 3);
    for e in 0..cx.num_cells(1) {
        let v = random_algebra(&mut rng, 1.0);
        if !cx.is_boundary_cell(1, e) {
            z.cell_mut(e).copy_from_slice(v.as_slice());
        }
    }
    z
}

/// sqrt(|z|^2 + |dz|^2 + |delta z|^2).
pub fn sobolev_norm(cx: &Complex, z: &Cochain) -> Result<f64, GaugeError> {
    let dz = ops::d(cx, z)?;
    let sz = ops::codifferential(cx, z)?;
    let s = ops::inner(cx, z, z)? + ops::inner(cx, &dz, &dz)? + ops::inner(cx, &sz, &sz)?;
    Ok(s.sqrt())
}

/// Weak pairing |<dz, rho F> + <z, bracket term>| for one test form.
pub fn weak_pairing(conn: &LatticeConnection, model: &DensityModel, z: &Cochain) -> Result<f64, GaugeError> {
    let cx = conn.complex();
    let g = weighted_curvature(conn, model)?;
    let a = conn.potential()?;
    let dz = ops::d(cx, z)?;
    let b = bracket_term(cx, &a, &g);
    Ok(ops::inner(cx, &dz, &g)? + ops::inner(cx, z, &b)?)
}

/// Largest normalized weak residual over `num_tests` random test forms.
pub fn weak_residual(
    conn: &LatticeConnection,
    model: &DensityModel,
    num_tests: usize,
    seed: u64,
) -> Result<f64, GaugeError> {
    let cx = conn.complex();
    let mut worst: f64 = 0.0;
    for t in 0..num_tests {
        let z = random_test_form(cx, seed.wrapping_add(t as u64));
        let norm = sobolev_norm(cx, &z)?;
        if norm == 0.0 {
            continue;
        }
        worst = worst.max(weak_pairing(conn, model, &z)?.abs() / norm);
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct BianchiReport {
    /// Distance from the identity of the conjugated face product, per cube.
    pub exact_defect: Vec<f64>,
    pub max_exact_defect: f64,
    /// dF + [A ^ F] at cube centers (empty for n = 2).
    pub log_residual: Option<Cochain>,
    pub max_log_residual: f64,
    /// Largest distance from the identity of hol(p) hol(reversed p).
    pub reverse_defect: f64,
}

/// Exact cube identity and log-level residual of the Bianchi identity.
pub fn bianchi_residual(conn: &LatticeConnection) -> Result<BianchiReport, GaugeError> {
    let cx = conn.complex();
    let n = cx.dim();
    let u = conn.links();
    let plaqs = plaquettes(cx);
    let hol: Vec<GroupElement> = plaqs.iter().map(|p| conn.holonomy(p)).collect();
    let reverse_defect = plaqs
        .iter()
        .zip(&hol)
        .map(|(p, h)| {
            let rev = u[p.links[3]] * u[p.links[2]] * u[p.links[1]].inverse() * u[p.links[0]].inverse();
            (h * &rev).distance_from_identity()
        })
        .fold(0.0, f64::max);
    if n < 3 {
        return Ok(BianchiReport {
            exact_defect: Vec::new(),
            max_exact_defect: 0.0,
            log_residual: None,
            max_log_residual: 0.0,
            reverse_defect,
        });
    }
    let f = curvature(conn)?;
    let a = conn.potential()?;
    let df = ops::d(cx, &f)?;
    let mut res = df.clone();
    let mut exact = Vec::with_capacity(cx.num_cells(3));
    let mut pos = vec![0i64; n];
    let mut q = vec![0i64; n];
    let mut t = [[0.0; 3]; 6];
    for blk in cx.blocks(3) {
        let (ia, ib, ic) = (blk.axes[0], blk.axes[1], blk.axes[2]);
        let (mab, mac, mbc) = ((1u32 << ia) | (1 << ib), (1u32 << ia) | (1 << ic), (1u32 << ib) | (1 << ic));
        for local in 0..blk.len {
            blk.position(local, &mut pos);
            let cube = blk.offset + local;
            let mut at = |mask: u32, shift: Option<usize>, deg: usize| {
                q.copy_from_slice(&pos);
                if let Some(s) = shift {
                    q[s] += 1;
                }
                cx.cell_index(deg, mask, &q).expect("cube face")
            };
            let h_ab = hol[at(mab, None, 2)];
            let h_ac = hol[at(mac, None, 2)];
            let h_bc = hol[at(mbc, None, 2)];
            let h_ac_b = hol[at(mac, Some(ib), 2)];
            let h_ab_c = hol[at(mab, Some(ic), 2)];
            let h_bc_a = hol[at(mbc, Some(ia), 2)];
            let ua = u[at(1 << ia, None, 1)];
            let ub = u[at(1 << ib, None, 1)];
            let uc = u[at(1 << ic, None, 1)];
            let prod = h_ab
                * (ub * h_ac_b * ub.inverse())
                * h_bc
                * (uc * h_ab_c.inverse() * uc.inverse())
                * h_ac.inverse()
                * (ua * h_bc_a.inverse() * ua.inverse());
            exact.push(prod.distance_from_identity());

            for (k, (src, cochain)) in
                [(1u32 << ia, &a), (1 << ib, &a), (1 << ic, &a), (mbc, &f), (mac, &f), (mab, &f)].iter().enumerate()
            {
                ops::interpolate(cx, cochain, *src, blk.mask, &pos, &mut t[k]);
            }
            let v = |k: usize| Vector3::from(t[k]);
            let br = v(0).cross(&v(3)) - v(1).cross(&v(4)) + v(2).cross(&v(5));
            add3(&mut res, cube, &br);
        }
    }
    let max_exact_defect = exact.iter().cloned().fold(0.0, f64::max);
    let max_log_residual = (0..res.num_cells()).map(|c| get3(&res, c).norm()).fold(0.0, f64::max);
    Ok(BianchiReport { exact_defect: exact, max_exact_defect, log_residual: Some(res), max_log_residual, reverse_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexBuilder;

    #[test]
    fn identity_links_are_flat() {
        let cx = ComplexBuilder::new(&[3, 3, 3]).build().unwrap();
        let c = LatticeConnection::identity(&cx, Group::SU2);
        assert_eq!(curvature(&c).unwrap().max_abs(), 0.0);
        assert_eq!(gauge_energy(&c, &DensityModel::Constant).unwrap(), 0.0);
        assert_eq!(energy_gradient(&c, &DensityModel::Constant).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cube_identity_on_random_links() {
        let cx = ComplexBuilder::new(&[3, 3, 3]).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for group in [Group::SU2, Group::SO3] {
            let c = LatticeConnection::random(&cx, group, 1.0, &mut rng);
            let r = bianchi_residual(&c).unwrap();
            assert!(r.max_exact_defect < 1e-12, "{}", r.max_exact_defect);
            assert!(r.reverse_defect < 1e-12);
        }
    }

    #[test]
    fn edge_vertices_wrap_on_periodic_axes() {
        let cx = ComplexBuilder::new(&[3, 3]).periodic(&[true, false]).build().unwrap();
        let c = LatticeConnection::identity(&cx, Group::SO3);
        let e = c.edge(0, &[2, 1]).unwrap();
        let (t, h) = c.edge_vertices(e);
        assert_eq!(t, cx.cell_index(0, 0, &[2, 1]).unwrap());
        assert_eq!(h, cx.cell_index(0, 0, &[0, 1]).unwrap());
    }
}
