//! Abelian nonlinear Hodge system for 1-forms: omega = d phi + lambda with
//! delta(rho(Q) omega) = 0, solved by minimizing the stored energy.

use crate::cochain::{CellField, Cochain, DecError};
use crate::complex::Complex;
use crate::density::{certify_condition2, DensityError, DensityModel};
use crate::linalg::{pcg, Csr};
use crate::ops;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("sonic limit reached at cell {cell}: Q = {q} >= Q_cap = {q_cap}")]
    Sonic { cell: usize, q: f64, q_cap: f64 },
    #[error("density undefined at cell {cell}: {source}")]
    Domain { cell: usize, source: DensityError },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("ellipticity bound fails on [0, {q_cap}] at Q = {at}")]
    Ellipticity { q_cap: f64, at: f64 },
    #[error("lambda is not closed: max |d lambda| = {0:e}")]
    NotClosed(f64),
    #[error("boundary data has {got} values, expected {expected}")]
    Boundary { got: usize, expected: usize },
    #[error(transparent)]
    Dec(#[from] DecError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Boundary condition on one face of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FaceCondition {
    Dirichlet,
    /// Zero normal flux; the face vertices are free.
    Neumann,
}

#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub complex: Complex,
    pub density: DensityModel,
    /// (low, high) face conditions per axis; ignored on periodic axes.
    pub faces: Vec<[FaceCondition; 2]>,
    /// Potential values; only entries at Dirichlet vertices are used.
    pub boundary_values: Vec<f64>,
    /// Closed 1-cochain carrying the circulation.
    pub lambda: Cochain,
}

impl FlowProblem {
    pub fn new(
        complex: Complex,
        density: DensityModel,
        faces: Vec<[FaceCondition; 2]>,
        boundary_values: Vec<f64>,
        lambda: Option<Cochain>,
    ) -> Result<Self, FlowError> {
        let nv = complex.num_vertices();
        if boundary_values.len() != nv {
            return Err(FlowError::Boundary { got: boundary_values.len(), expected: nv });
        }
        if faces.len() != complex.dim() {
            return Err(FlowError::Boundary { got: faces.len(), expected: complex.dim() });
        }
        let lambda = lambda.unwrap_or_else(|| Cochain::zeros(&complex, 1));
        if lambda.degree() != 1 || lambda.values().len() != complex.num_cells(1) {
            return Err(FlowError::Dec(DecError::Length { got: lambda.values().len(), expected: complex.num_cells(1) }));
        }
        if complex.dim() >= 2 {
            let dl = ops::d(&complex, &lambda)?;
            let scale = lambda.max_abs() / complex.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
            if dl.max_abs() > 1e-12 * scale.max(1.0) {
                return Err(FlowError::NotClosed(dl.max_abs()));
            }
        }
        Ok(FlowProblem { complex, density, faces, boundary_values, lambda })
    }

    /// Dirichlet problem on every face with boundary values from `f`.
    pub fn dirichlet<F: Fn(&[f64]) -> f64>(complex: Complex, density: DensityModel, f: F) -> Result<Self, FlowError> {
        let n = complex.dim();
        let mut x = vec![0.0; n];
        let values = (0..complex.num_vertices())
            .map(|v| {
                complex.vertex_coords(v, &mut x);
                f(&x)
            })
            .collect();
        Self::new(complex, density, vec![[FaceCondition::Dirichlet; 2]; n], values, None)
    }

    /// Whether a vertex carries prescribed potential.
    pub fn is_dirichlet(&self, v: usize) -> bool {
        let cx = &self.complex;
        let mut pos = vec![0i64; cx.dim()];
        cx.blocks(0)[0].position(v, &mut pos);
        (0..cx.dim()).any(|i| {
            !cx.periodic()[i]
                && ((pos[i] == 0 && self.faces[i][0] == FaceCondition::Dirichlet)
                    || (pos[i] == cx.dims()[i] as i64 && self.faces[i][1] == FaceCondition::Dirichlet))
        })
    }

    /// Free vertices; with no Dirichlet data the first vertex is pinned.
    pub fn free_vertices(&self) -> Vec<bool> {
        let nv = self.complex.num_vertices();
        let mut free: Vec<bool> = (0..nv).map(|v| !self.is_dirichlet(v)).collect();
        if free.iter().all(|&f| f) {
            free[0] = false;
        }
        free
    }

    /// Potential with Dirichlet values and zeros elsewhere.
    pub fn initial_potential(&self) -> Cochain {
        let free = self.free_vertices();
        let vals = (0..free.len()).map(|v| if free[v] { 0.0 } else { self.boundary_values[v] }).collect();
        Cochain::from_values(&self.complex, 0, vals).expect("vertex count")
    }

    pub fn omega(&self, phi: &Cochain) -> Result<Cochain, FlowError> {
        let mut w = ops::d(&self.complex, phi)?;
        w.axpy(1.0, &self.lambda)?;
        Ok(w)
    }
}

/// Per-cell stencil data shared by energy, residual and Hessian.
struct Stencil {
    n: usize,
    nc: usize,
    m: usize,
    verts: Vec<usize>,
    edges: Vec<usize>,
    corners: Vec<(usize, usize)>,
    ginv: Vec<f64>,
    weight: Vec<f64>,
    inv_h: Vec<f64>,
}

impl Stencil {
    fn new(cx: &Complex) -> Self {
        let n = cx.dim();
        let nc = 1usize << n;
        let m = nc / 2;
        let full = (nc - 1) as u32;
        let mut corners = Vec::with_capacity(n * m);
        for i in 0..n {
            for c in 0..nc {
                if c & (1 << i) == 0 {
                    corners.push((c, c | (1 << i)));
                }
            }
        }
        let top = &cx.blocks(n)[0];
        let ncell = top.len;
        let mut verts = Vec::with_capacity(ncell * nc);
        let mut edges = Vec::with_capacity(ncell * n * m);
        let mut ginv = Vec::with_capacity(ncell * n * n);
        let mut weight = Vec::with_capacity(ncell);
        let mut pos = vec![0i64; n];
        let mut q = vec![0i64; n];
        let vol = cx.cell_volume();
        for cell in 0..ncell {
            top.position(cell, &mut pos);
            for c in 0..nc {
                for k in 0..n {
                    q[k] = pos[k] + ((c >> k) & 1) as i64;
                }
                verts.push(cx.cell_index(0, 0, &q).expect("cell vertex"));
            }
            for (e, &(lo, _)) in corners.iter().enumerate() {
                let axis = e / m;
                for k in 0..n {
                    q[k] = pos[k] + ((lo >> k) & 1) as i64;
                }
                edges.push(cx.cell_index(1, 1 << axis, &q).expect("cell edge"));
            }
            let pm = cx.metric_at_cell(full, &pos);
            ginv.extend_from_slice(&pm.ginv);
            weight.push(pm.sqrt_g * vol);
        }
        let inv_h = cx.spacing().iter().map(|h| 1.0 / h).collect();
        Stencil { n, nc, m, verts, edges, corners, ginv, weight, inv_h }
    }

    fn ncell(&self) -> usize {
        self.weight.len()
    }

    /// Local edge values, Q, and B x for one cell.
    fn local(&self, cell: usize, phi: &[f64], lambda: &[f64], w: &mut [f64], bx: &mut [f64], mean: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let verts = &self.verts[cell * self.nc..(cell + 1) * self.nc];
        let edges = &self.edges[cell * n * m..(cell + 1) * n * m];
        let g = &self.ginv[cell * n * n..(cell + 1) * n * n];
        let mut q = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for k in 0..m {
                let e = i * m + k;
                let (lo, hi) = self.corners[e];
                let val = (phi[verts[hi]] - phi[verts[lo]]) * self.inv_h[i] + lambda[edges[e]];
                w[e] = val;
                s += val;
                s2 += val * val;
            }
            mean[i] = s / m as f64;
            q += g[i * n + i] * s2 / m as f64;
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    q += g[i * n + j] * mean[i] * mean[j];
                }
            }
        }
        for i in 0..n {
            let mut cross = 0.0;
            for j in 0..n {
                if j != i {
                    cross += g[i * n + j] * mean[j];
                }
            }
            for k in 0..m {
                let e = i * m + k;
                bx[e] = (g[i * n + i] * w[e] + cross) / m as f64;
            }
        }
        q
    }
}

/// Per-iteration solver record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub max_q: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub phi: Cochain,
    pub omega: Cochain,
    pub q: CellField,
    pub max_q: f64,
    /// max Q / Q_crit when the density has a sonic value.
    pub mach_ratio: Option<f64>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub log: Vec<IterRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    /// Max-norm residual tolerance; defaults by density kind when `None`.
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub q_cap_epsilon: f64,
    pub cg_rtol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: None, max_iters: 100, q_cap_epsilon: 0.05, cg_rtol: 1e-14 }
    }
}

struct Evaluator<'a> {
    problem: &'a FlowProblem,
    st: Stencil,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a FlowProblem) -> Self {
        Evaluator { problem, st: Stencil::new(&problem.complex) }
    }

    fn q_field(&self, phi: &[f64]) -> Vec<f64> {
        let st = &self.st;
        let nm = st.n * st.m;
        let (mut w, mut bx, mut mean) = (vec![0.0; nm], vec![0.0; nm], vec![0.0; st.n]);
        let lambda = self.problem.lambda.values();
        (0..st.ncell()).map(|c| st.local(c, phi, lambda, &mut w, &mut bx, &mut mean)).collect()
    }

    fn energy(&self, phi: &[f64], density: &DensityModel) -> Result<f64, FlowError> {
        let q = self.q_field(phi);
        let mut e = 0.0;
        for (cell, &qc) in q.iter().enumerate() {
            let wq = density.stored_energy(qc).map_err(|source| FlowError::Domain { cell, source })?;
            e += 0.5 * wq * self.st.weight[cell];
        }
        Ok(e)
    }

    /// dE/dphi at every vertex.
    fn gradient(&self, phi: &[f64], density: &DensityModel) -> Result<Vec<f64>, FlowError> {
        let st = &self.st;
        let nm = st.n * st.m;
        let (mut w, mut bx, mut mean) = (vec![0.0; nm], vec![0.0; nm], vec![0.0; st.n]);
        let lambda = self.problem.lambda.values();
        let mut g = vec![0.0; phi.len()];
        for cell in 0..st.ncell() {
            let q = st.local(cell, phi, lambda, &mut w, &mut bx, &mut mean);
            let rho = density.rho(q).map_err(|source| FlowError::Domain { cell, source })?;
            let verts = &st.verts[cell * st.nc..(cell + 1) * st.nc];
            let s = st.weight[cell] * rho;
            for e in 0..nm {
                let (lo, hi) = st.corners[e];
                let ge = s * bx[e] * st.inv_h[e / st.m];
                g[verts[hi]] += ge;
                g[verts[lo]] -= ge;
            }
        }
        Ok(g)
    }

    fn hessian(&self, phi: &[f64], density: &DensityModel, index: &[usize], nfree: usize) -> Result<Csr, FlowError> {
        let st = &self.st;
        let (n, m, nc) = (st.n, st.m, st.nc);
        let nm = n * m;
        let (mut w, mut bx, mut mean) = (vec![0.0; nm], vec![0.0; nm], vec![0.0; n]);
        let lambda = self.problem.lambda.values();
        let mut kmat = vec![0.0; nm * nm];
        let mut dk = vec![0.0; nm * nc];
        let mut hv = vec![0.0; nc * nc];
        let mut trip = Vec::with_capacity(st.ncell() * nc * nc);
        for cell in 0..st.ncell() {
            let q = st.local(cell, phi, lambda, &mut w, &mut bx, &mut mean);
            let (rho, drho) = density.rho_drho(q).map_err(|source| FlowError::Domain { cell, source })?;
            let g = &st.ginv[cell * n * n..(cell + 1) * n * n];
            let wt = st.weight[cell];
            let mf = m as f64;
            for e in 0..nm {
                let i = e / m;
                for f in 0..nm {
                    let j = f / m;
                    let b = if i == j {
                        if e == f {
                            g[i * n + i] / mf
                        } else {
                            0.0
                        }
                    } else {
                        g[i * n + j] / (mf * mf)
                    };
                    kmat[e * nm + f] = wt * (rho * b + 2.0 * drho * bx[e] * bx[f]);
                }
            }
            // K D, then D^T (K D).
            dk.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..nm {
                for f in 0..nm {
                    let (lo, hi) = st.corners[f];
                    let s = kmat[e * nm + f] * st.inv_h[f / m];
                    dk[e * nc + hi] += s;
                    dk[e * nc + lo] -= s;
                }
            }
            hv.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..nm {
                let (lo, hi) = st.corners[e];
                let s = st.inv_h[e / m];
                for b in 0..nc {
                    hv[hi * nc + b] += s * dk[e * nc + b];
                    hv[lo * nc + b] -= s * dk[e * nc + b];
                }
            }
            let verts = &st.verts[cell * nc..(cell + 1) * nc];
            for a in 0..nc {
                let ra = index[verts[a]];
                if ra == usize::MAX {
                    continue;
                }
                for b in 0..nc {
                    let cb = index[verts[b]];
                    if cb != usize::MAX {
                        trip.push((ra, cb, hv[a * nc + b]));
                    }
                }
            }
        }
        Ok(Csr::from_triplets(nfree, trip))
    }
}

/// Stored energy of the potential: half the sum over cells of the integral of
/// rho up to Q, weighted by the cell volume.
pub fn flow_energy(problem: &FlowProblem, phi: &Cochain) -> Result<f64, FlowError> {
    Evaluator::new(problem).energy(phi.values(), &problem.density)
}

/// Discrete delta(rho(Q) omega) at free vertices (zero at Dirichlet
/// vertices): the energy gradient divided by sqrt(g) and the cell volume.
pub fn flow_residual(problem: &FlowProblem, phi: &Cochain) -> Result<Cochain, FlowError> {
    let ev = Evaluator::new(problem);
    let g = ev.gradient(phi.values(), &problem.density)?;
    Ok(residual_from_gradient(problem, &g))
}

/// Energy gradient with respect to every vertex value of phi.
pub fn flow_energy_gradient(problem: &FlowProblem, phi: &Cochain) -> Result<Vec<f64>, FlowError> {
    Evaluator::new(problem).gradient(phi.values(), &problem.density)
}

fn residual_from_gradient(problem: &FlowProblem, g: &[f64]) -> Cochain {
    let cx = &problem.complex;
    let free = problem.free_vertices();
    let vol = cx.cell_volume();
    let vals = (0..g.len())
        .map(|v| if free[v] { g[v] / (cx.sqrt_g_at_vertex(v) * vol) } else { 0.0 })
        .collect();
    Cochain::from_values(cx, 0, vals).expect("vertex count")
}

fn max_residual(problem: &FlowProblem, g: &[f64], free: &[bool]) -> f64 {
    let cx = &problem.complex;
    let vol = cx.cell_volume();
    (0..g.len())
        .filter(|&v| free[v])
        .map(|v| (g[v] / (cx.sqrt_g_at_vertex(v) * vol)).abs())
        .fold(0.0, f64::max)
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
}

/// Potential minimizing the rho = 1 energy with the problem's boundary data
/// and circulation.
pub fn harmonic_extension(problem: &FlowProblem, cg_rtol: f64) -> Result<Cochain, FlowError> {
    let ev = Evaluator::new(problem);
    let free = problem.free_vertices();
    let (index, nfree) = free_index(&free);
    let mut phi = problem.initial_potential().into_values();
    let linear = DensityModel::Constant;
    // Two passes: the second removes the CG round-off of the first.
    for _ in 0..2 {
        let g = ev.gradient(&phi, &linear)?;
        let h = ev.hessian(&phi, &linear, &index, nfree)?;
        let rhs: Vec<f64> = (0..phi.len()).filter(|&v| free[v]).map(|v| -g[v]).collect();
        let mut dx = vec![0.0; nfree];
        pcg(&h, &rhs, &mut dx, cg_rtol, 20 * nfree + 100);
        for v in 0..phi.len() {
            if index[v] != usize::MAX {
                phi[v] += dx[index[v]];
            }
        }
    }
    Ok(Cochain::from_values(&problem.complex, 0, phi)?)
}

fn free_index(free: &[bool]) -> (Vec<usize>, usize) {
    let mut index = vec![usize::MAX; free.len()];
    let mut k = 0;
    for (v, &f) in free.iter().enumerate() {
        if f {
            index[v] = k;
            k += 1;
        }
    }
    (index, k)
}

/// Damped Newton minimization of the flow energy with a sonic safeguard.
pub fn solve_flow(problem: &FlowProblem, opts: &FlowOptions) -> Result<FlowSolution, FlowError> {
    let density = &problem.density;
    let q_cap = density.q_cap(opts.q_cap_epsilon);
    if q_cap.is_finite() {
        let cert = certify_condition2(density, (0.0, q_cap), 0.0, 0.0, 1000)?;
        if !cert.pass {
            return Err(FlowError::Ellipticity { q_cap, at: cert.failure_q.unwrap_or(q_cap) });
        }
    }
    let tol = opts.tol.unwrap_or(if matches!(density, DensityModel::Constant) { 1e-10 } else { 1e-8 });
    let ev = Evaluator::new(problem);
    let free = problem.free_vertices();
    let (index, nfree) = free_index(&free);
    let mut phi = harmonic_extension(problem, opts.cg_rtol)?.into_values();

    let q0 = ev.q_field(&phi);
    let (cell, qmax) = argmax(&q0);
    if qmax >= q_cap {
        return Err(FlowError::Sonic { cell, q: qmax, q_cap });
    }
    let mut energy = ev.energy(&phi, density)?;
    let mut g = ev.gradient(&phi, density)?;
    let mut res = max_residual(problem, &g, &free);
    let mut log = vec![IterRecord { iter: 0, energy, residual: res, max_q: qmax, step: 0.0 }];
    let mut capped_streak = 0;
    let mut iter = 0;
    while res > tol {
        if iter >= opts.max_iters {
            return Err(FlowError::NotConverged { iterations: iter, residual: res });
        }
        iter += 1;
        let h = ev.hessian(&phi, density, &index, nfree)?;
        let rhs: Vec<f64> = (0..phi.len()).filter(|&v| free[v]).map(|v| -g[v]).collect();
        let mut dx = vec![0.0; nfree];
        pcg(&h, &rhs, &mut dx, opts.cg_rtol.max(1e-12 * res.min(1.0)), 20 * nfree + 100);
        let slope: f64 = -rhs.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
        let mut t = 1.0;
        let mut capped = false;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> =
                (0..phi.len()).map(|v| if index[v] == usize::MAX { phi[v] } else { phi[v] + t * dx[index[v]] }).collect();
            let qt = ev.q_field(&trial);
            let (_, qm) = argmax(&qt);
            if !(qm < q_cap) {
                capped = true;
                t *= 0.5;
                continue;
            }
            let et = ev.energy(&trial, density)?;
            let slack = 1e-14 * energy.abs().max(1e-300);
            if et <= energy + 1e-4 * t * slope + slack {
                accepted = Some((trial, et, qm));
                break;
            }
            t *= 0.5;
        }
        capped_streak = if capped { capped_streak + 1 } else { 0 };
        let Some((trial, et, qm)) = accepted else {
            let (cell, q) = argmax(&ev.q_field(&phi));
            if capped {
                return Err(FlowError::Sonic { cell, q, q_cap });
            }
            return Err(FlowError::NotConverged { iterations: iter, residual: res });
        };
        if capped_streak >= 5 {
            let (cell, q) = argmax(&ev.q_field(&trial));
            return Err(FlowError::Sonic { cell, q, q_cap });
        }
        phi = trial;
        energy = et;
        g = ev.gradient(&phi, density)?;
        res = max_residual(problem, &g, &free);
        log.push(IterRecord { iter, energy: et, residual: res, max_q: qm, step: t });
    }
    let phi = Cochain::from_values(&problem.complex, 0, phi)?;
    let omega = problem.omega(&phi)?;
    let q = ops::pointwise_q(&problem.complex, &omega)?;
    let max_q = q.max();
    Ok(FlowSolution {
        mach_ratio: density.q_crit().map(|c| max_q / c),
        energy: ev.energy(phi.values(), density)?,
        phi,
        omega,
        q,
        max_q,
        residual: res,
        iterations: iter,
        log,
    })
}

/// Covariant derivative of a vertex vector field: entry (a, b) at vertex v is
/// d_b v^a + v^c Gamma^a_{cb}, stored row-major per vertex.
pub fn parallel_residual(cx: &Complex, v: &[f64]) -> Vec<f64> {
    let n = cx.dim();
    let nv = cx.num_vertices();
    assert_eq!(v.len(), nv * n, "vector field needs n components per vertex");
    let mut out = vec![0.0; nv * n * n];
    for x in 0..nv {
        for a in 0..n {
            for b in 0..n {
                let mut r = cx.vertex_derivative(x, b, |w| v[w * n + a]);
                for c in 0..n {
                    r += v[x * n + c] * cx.christoffel(x, a, c, b);
                }
                out[x * n * n + a * n + b] = r;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexBuilder;

    #[test]
    fn zero_potential_has_zero_energy() {
        let cx = ComplexBuilder::new(&[4, 4]).spacing(0.25).build().unwrap();
        let p = FlowProblem::dirichlet(cx, DensityModel::Constant, |_| 0.0).unwrap();
        assert_eq!(flow_energy(&p, &p.initial_potential()).unwrap(), 0.0);
    }

    #[test]
    fn linear_potential_energy_and_residual() {
        let cx = ComplexBuilder::new(&[8, 8]).spacing(0.125).build().unwrap();
        let p = FlowProblem::dirichlet(cx.clone(), DensityModel::Constant, |x| x[0]).unwrap();
        let phi = Cochain::from_fn(&cx, 0, |_, x| x[0]);
        assert!((flow_energy(&p, &phi).unwrap() - 0.5).abs() < 1e-14);
        assert!(flow_residual(&p, &phi).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn polytropic_uniform_energy() {
        let cx = ComplexBuilder::new(&[4, 4]).spacing(0.25).build().unwrap();
        let c = 0.5f64.sqrt();
        let p = FlowProblem::dirichlet(cx.clone(), DensityModel::polytropic(2.0).unwrap(), move |x| c * x[0]).unwrap();
        let phi = Cochain::from_fn(&cx, 0, |_, x| c * x[0]);
        assert!((flow_energy(&p, &phi).unwrap() - 0.21875).abs() < 1e-14);
    }

    #[test]
    fn residual_is_codifferential_for_unit_density() {
        let cx = ComplexBuilder::new(&[6, 5]).spacing(0.2).build().unwrap();
        let p = FlowProblem::dirichlet(cx.clone(), DensityModel::Constant, |_| 0.0).unwrap();
        let phi = Cochain::from_fn(&cx, 0, |_, x| (3.0 * x[0]).sin() * x[1] * x[1]);
        let r = flow_residual(&p, &phi).unwrap();
        let lap = ops::codifferential(&cx, &ops::d(&cx, &phi).unwrap()).unwrap();
        for v in 0..cx.num_vertices() {
            if !p.is_dirichlet(v) {
                assert!((r.values()[v] - lap.values()[v]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sonic_start_is_rejected() {
        let cx = ComplexBuilder::new(&[8, 8]).spacing(0.125).build().unwrap();
        let p = FlowProblem::dirichlet(cx, DensityModel::polytropic(1.4).unwrap(), |x| 0.95 * x[0]).unwrap();
        assert!(matches!(solve_flow(&p, &FlowOptions::default()), Err(FlowError::Sonic { .. })));
    }

    #[test]
    fn radial_field_has_identity_covariant_derivative() {
        let cx = ComplexBuilder::new(&[4, 4]).spacing(0.25).build().unwrap();
        let mut v = vec![0.0; cx.num_vertices() * 2];
        let mut x = [0.0; 2];
        for i in 0..cx.num_vertices() {
            cx.vertex_coords(i, &mut x);
            v[2 * i] = x[0];
            v[2 * i + 1] = x[1];
        }
        let r = parallel_residual(&cx, &v);
        for i in 0..cx.num_vertices() {
            let t = &r[4 * i..4 * i + 4];
            assert!((t[0] - 1.0).abs() < 1e-12 && t[1].abs() < 1e-12 && t[2].abs() < 1e-12 && (t[3] - 1.0).abs() < 1e-12);
        }
    }
}
