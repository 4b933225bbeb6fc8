//! Coulomb and exponential gauge fixing.

use super::connection::{curvature, get3, GaugeError, GaugeTransform, LatticeConnection};
use super::group::{Algebra, GroupElement};
use crate::complex::Complex;
use crate::ops;
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct CoulombOptions {
    /// Target sup-norm of delta A.
    pub tol: f64,
    /// Sweeps of overrelaxed maximization of sum Re tr U before the
    /// divergence-driven sweeps.
    pub ascent_sweeps: usize,
    pub max_sweeps: usize,
    pub ascent_omega: f64,
    pub sor_omega: f64,
}

impl Default for CoulombOptions {
    fn default() -> Self {
        CoulombOptions { tol: 1e-10, ascent_sweeps: 50, max_sweeps: 5000, ascent_omega: 1.7, sor_omega: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoulombReport {
    pub converged: bool,
    pub sweeps: usize,
    pub delta_a_sup: f64,
    /// Sum of Re tr U / dim over links, normalized to 1 at identity links.
    pub functional: f64,
    /// ||A||_{1,n/2} / ||F||_{n/2}; None when F vanishes.
    pub ratio_critical: Option<f64>,
    /// ||A||_{1,s} / ||F||_s with s = 3n/4.
    pub ratio_s: Option<f64>,
}

struct Incidence {
    /// (edge, outgoing, 1/h^2) per vertex.
    edges: Vec<Vec<(usize, bool, f64)>>,
}

impl Incidence {
    fn new(conn: &LatticeConnection) -> Self {
        let cx = conn.complex();
        let mut edges = vec![Vec::new(); cx.num_vertices()];
        for e in 0..conn.num_links() {
            let (t, h) = conn.edge_vertices(e);
            let mut pos = vec![0i64; cx.dim()];
            let mask = cx.cell_of(1, e, &mut pos);
            let hh = cx.spacing()[mask.trailing_zeros() as usize];
            edges[t].push((e, true, 1.0 / (hh * hh)));
            edges[h].push((e, false, 1.0 / (hh * hh)));
        }
        Incidence { edges }
    }
}

fn gauge_site(conn: &mut LatticeConnection, inc: &Incidence, total: &mut GaugeTransform, v: usize, g: GroupElement) {
    for &(e, out, _) in &inc.edges[v] {
        let u = conn.link(e);
        let nu = if out { g * u } else { u * g.inverse() };
        conn.set_link(e, nu.normalized());
    }
    total.elems[v] = (g * total.elems[v]).normalized();
}

/// Maximizer of Re tr(g W) over the group, W the sum of outgoing links and
/// inverted incoming links.
fn site_maximizer(conn: &LatticeConnection, inc: &Incidence, v: usize) -> Option<GroupElement> {
    match conn.group().identity() {
        GroupElement::Su2(_) => {
            let mut w = [0.0; 4];
            for &(e, out, _) in &inc.edges[v] {
                let GroupElement::Su2(q) = (if out { conn.link(e) } else { conn.link(e).inverse() }) else {
                    unreachable!()
                };
                for k in 0..4 {
                    w[k] += q[k];
                }
            }
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            (n > 0.0).then(|| GroupElement::Su2([w[0] / n, -w[1] / n, -w[2] / n, -w[3] / n]))
        }
        GroupElement::So3(_) => {
            let mut w = Matrix3::zeros();
            for &(e, out, _) in &inc.edges[v] {
                w += (if out { conn.link(e) } else { conn.link(e).inverse() }).rotation();
            }
            (w.norm() > 0.0).then(|| GroupElement::So3(super::group::polar_rotation(&w.transpose())))
        }
    }
}

fn link_log_scaled(conn: &LatticeConnection, e: usize) -> Result<Algebra, GaugeError> {
    let cx = conn.complex();
    let mut pos = vec![0i64; cx.dim()];
    let mask = cx.cell_of(1, e, &mut pos);
    let h = cx.spacing()[mask.trailing_zeros() as usize];
    conn.link(e).log().map(|x| x / h).map_err(|e2| match e2 {
        super::group::GroupError::LogBranch { angle } => GaugeError::LinkLog { link: e, angle },
        other => GaugeError::Group(other),
    })
}

/// Sup-norm of delta A with A = log(U)/h.
pub fn divergence_sup(conn: &LatticeConnection) -> Result<f64, GaugeError> {
    let a = conn.potential()?;
    let div = ops::codifferential(conn.complex(), &a)?;
    Ok((0..div.num_cells()).map(|v| get3(&div, v).norm()).fold(0.0, f64::max))
}

fn normalized_functional(conn: &LatticeConnection) -> f64 {
    conn.links().iter().map(|u| u.re_tr()).sum::<f64>() / conn.num_links().max(1) as f64
}

/// Drive the connection to delta A = 0 by vertex gauge transformations.
pub fn coulomb_gauge_fix(
    conn: &LatticeConnection,
    opts: &CoulombOptions,
) -> Result<(LatticeConnection, GaugeTransform, CoulombReport), GaugeError> {
    let cx = conn.complex();
    let inc = Incidence::new(conn);
    let mut cur = conn.clone();
    let mut total = GaugeTransform::identity(cx, conn.group());
    let nv = cx.num_vertices();
    let mut sweeps = 0;
    let mut sup = divergence_sup(&cur)?;
    while sup > opts.tol && sweeps < opts.ascent_sweeps.min(opts.max_sweeps) {
        for v in 0..nv {
            if let Some(g) = site_maximizer(&cur, &inc, v) {
                let g = g.powf(opts.ascent_omega).unwrap_or(g);
                gauge_site(&mut cur, &inc, &mut total, v, g);
            }
        }
        sweeps += 1;
        sup = divergence_sup(&cur)?;
    }
    while sup > opts.tol && sweeps < opts.max_sweeps {
        for v in 0..nv {
            let mut div = Vector3::zeros();
            let mut s = 0.0;
            for &(e, out, w) in &inc.edges[v] {
                let a = link_log_scaled(&cur, e)?;
                let h = w.sqrt().recip();
                div += if out { -a / h } else { a / h };
                s += w;
            }
            if s > 0.0 {
                let g = cur.group().exp(&(div * (opts.sor_omega / s)));
                gauge_site(&mut cur, &inc, &mut total, v, g);
            }
        }
        sweeps += 1;
        sup = divergence_sup(&cur)?;
    }
    let (ratio_critical, ratio_s) = sobolev_ratios(&cur)?;
    let report = CoulombReport {
        converged: sup <= opts.tol,
        sweeps,
        delta_a_sup: sup,
        functional: normalized_functional(&cur),
        ratio_critical,
        ratio_s,
    };
    Ok((cur, total, report))
}

/// Discrete W^{1,p} norm of an algebra-valued 1-cochain: edge values plus
/// forward differences between parallel edges.
pub fn w1p_norm(cx: &Complex, a: &crate::Cochain, p: f64) -> f64 {
    let n = cx.dim();
    let vol = cx.cell_volume();
    let mut s = 0.0;
    let mut pos = vec![0i64; n];
    for e in 0..a.num_cells() {
        let mask = cx.cell_of(1, e, &mut pos);
        let ae = get3(a, e);
        s += ae.norm().powf(p) * vol;
        for b in 0..n {
            pos[b] += 1;
            if let Some(f) = cx.cell_index(1, mask, &pos) {
                s += ((get3(a, f) - ae) / cx.spacing()[b]).norm().powf(p) * vol;
            }
            pos[b] -= 1;
        }
    }
    s.powf(1.0 / p)
}

/// L^p norm of an algebra-valued 2-cochain.
pub fn lp_norm(cx: &Complex, f: &crate::Cochain, p: f64) -> f64 {
    let vol = cx.cell_volume();
    let s: f64 = (0..f.num_cells()).map(|i| get3(f, i).norm().powf(p) * vol).sum();
    s.powf(1.0 / p)
}

/// (||A||_{1,n/2}/||F||_{n/2}, ||A||_{1,s}/||F||_s) with s = 3n/4.
pub fn sobolev_ratios(conn: &LatticeConnection) -> Result<(Option<f64>, Option<f64>), GaugeError> {
    let cx = conn.complex();
    let a = conn.potential()?;
    let f = curvature(conn)?;
    let n = cx.dim() as f64;
    let ratio = |p: f64| {
        let fnorm = lp_norm(cx, &f, p);
        (fnorm > 0.0).then(|| w1p_norm(cx, &a, p) / fnorm)
    };
    Ok((ratio(n / 2.0), ratio(0.75 * n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialReport {
    pub origin: usize,
    /// max over x of |A(x)| / (|x|/2 sup_{|y| <= |x|} |F(y)|).
    pub ratio: f64,
    pub max_a: f64,
}

/// Vertex value of A: per axis, the mean of the incident links.
pub fn vertex_potential(conn: &LatticeConnection, a: &crate::Cochain, v: usize) -> Algebra {
    let cx = conn.complex();
    let n = cx.dim();
    let mut pos = vec![0i64; n];
    cx.cell_of(0, v, &mut pos);
    let mut total = Vector3::zeros();
    for ax in 0..n {
        let mut acc = Vector3::zeros();
        let mut cnt = 0.0;
        if let Some(e) = cx.cell_index(1, 1 << ax, &pos) {
            acc += get3(a, e);
            cnt += 1.0;
        }
        pos[ax] -= 1;
        if let Some(e) = cx.cell_index(1, 1 << ax, &pos) {
            acc += get3(a, e);
            cnt += 1.0;
        }
        pos[ax] += 1;
        if cnt > 0.0 {
            let m = acc / cnt;
            total += m.component_mul(&m);
        }
    }
    total.map(f64::sqrt)
}

/// Radial gauge from `origin`: vertices are processed by lattice distance,
/// and each new vertex averages, in the algebra, the transports from its
/// predecessors toward the origin, weighted by displacement along each axis.
pub fn exponential_gauge_fix(
    conn: &LatticeConnection,
    origin: usize,
) -> Result<(LatticeConnection, GaugeTransform, ExponentialReport), GaugeError> {
    let cx = conn.complex();
    if cx.is_boundary_vertex(origin) {
        return Err(GaugeError::OriginOnBoundary(origin));
    }
    let n = cx.dim();
    let nv = cx.num_vertices();
    let mut o = vec![0i64; n];
    cx.cell_of(0, origin, &mut o);
    let mut order: Vec<(i64, usize)> = (0..nv)
        .map(|v| {
            let mut p = vec![0i64; n];
            cx.cell_of(0, v, &mut p);
            (p.iter().zip(&o).map(|(a, b)| (a - b).abs()).sum(), v)
        })
        .collect();
    order.sort_unstable();
    let group = conn.group();
    let mut g = GaugeTransform::identity(cx, group);
    let mut pos = vec![0i64; n];
    for &(l1, v) in order.iter().skip(1) {
        cx.cell_of(0, v, &mut pos);
        let mut cands: Vec<(f64, GroupElement)> = Vec::with_capacity(n);
        for k in 0..n {
            let d = pos[k] - o[k];
            if d == 0 {
                continue;
            }
            let mut p = pos.clone();
            p[k] -= d.signum();
            let pv = cx.cell_index(0, 0, &p).expect("predecessor vertex");
            let transport = if d > 0 {
                conn.link(cx.cell_index(1, 1 << k, &p).unwrap())
            } else {
                conn.link(cx.cell_index(1, 1 << k, &pos).unwrap()).inverse()
            };
            cands.push((d.abs() as f64 / l1 as f64, g.elems[pv] * transport));
        }
        let c1 = cands[0].1;
        let c1inv = c1.inverse();
        let mut x = Vector3::zeros();
        for (w, c) in &cands[1..] {
            x += (c1inv * *c).log().map_err(|e| match e {
                super::group::GroupError::LogBranch { angle } => GaugeError::LinkLog { link: v, angle },
                other => GaugeError::Group(other),
            })? * *w;
        }
        g.elems[v] = (c1 * group.exp(&x)).normalized();
    }
    let fixed = super::connection::apply_gauge(conn, &g)?;
    let report = exponential_ratio(&fixed, origin)?;
    Ok((fixed, g, report))
}

/// Bound ratio of the radial gauge estimate |A(x)| <= |x|/2 sup |F|.
pub fn exponential_ratio(conn: &LatticeConnection, origin: usize) -> Result<ExponentialReport, GaugeError> {
    let cx = conn.complex();
    let n = cx.dim();
    let a = conn.potential()?;
    let f = curvature(conn)?;
    let mut xo = vec![0.0; n];
    cx.vertex_coords(origin, &mut xo);
    let dist = |x: &[f64]| x.iter().zip(&xo).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut fr: Vec<(f64, f64)> = (0..f.num_cells()).map(|p| (dist(&cx.cell_center(2, p)), get3(&f, p).norm())).collect();
    fr.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut run = 0.0f64;
    for e in fr.iter_mut() {
        run = run.max(e.1);
        e.1 = run;
    }
    let mut ratio = 0.0f64;
    let mut max_a = 0.0f64;
    let mut x = vec![0.0; n];
    for v in 0..cx.num_vertices() {
        if v == origin {
            continue;
        }
        cx.vertex_coords(v, &mut x);
        let r = dist(&x);
        let av = vertex_potential(conn, &a, v).norm();
        max_a = max_a.max(av);
        let k = fr.partition_point(|e| e.0 <= r + 1e-12 * r);
        let sup_f = if k == 0 { 0.0 } else { fr[k - 1].1 };
        let denom = 0.5 * r * sup_f;
        if denom > 0.0 {
            ratio = ratio.max(av / denom);
        } else if av > 1e-12 {
            ratio = f64::INFINITY;
        }
    }
    Ok(ExponentialReport { origin, ratio, max_a })
}
