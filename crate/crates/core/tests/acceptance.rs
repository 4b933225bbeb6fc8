//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line.

mod common;

use common::{report, Band};
use nalgebra::Vector3;
use nlhodge::campanato::max_admissible_radius;
use nlhodge::cli::{flow_problem, run_config, smooth_potential, Command, FixModeArg};
use nlhodge::cochain::{to_cell_field, CellField};
use nlhodge::complex::ComplexBuilder;
use nlhodge::config::parse_config_str;
use nlhodge::density::{certify_condition2, DensityModel};
use nlhodge::flow::{flow_energy, flow_residual, solve_flow, FlowOptions, FlowProblem};
use nlhodge::gauge::connection::step_links;
use nlhodge::gauge::*;
use nlhodge::verify::{
    campanato_decay_fit, elliptic_inequality_check, gauge_invariance_campanato, sibner_decomposition, EllipticInput,
    SamplePoint,
};
use nlhodge::{ops, Cochain, Complex, Layout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn finish(label: &str, pass: bool, detail: String, start: Instant, budget: Duration) {
    let el = start.elapsed();
    let ok = pass && el <= budget;
    report(label, ok, &format!("{detail}; {:.2}s (budget {}s)", el.as_secs_f64(), budget.as_secs()));
    assert!(pass, "{label}: {detail}");
    assert!(el <= budget, "{label}: took {el:?}");
}

fn dyadic_cochain(cx: &Complex, p: usize, rng: &mut ChaCha8Rng) -> Cochain {
    let vals = (0..cx.num_cells(p)).map(|_| rng.gen_range(-64i32..=64) as f64 / 64.0).collect();
    Cochain::from_values(cx, p, vals).unwrap()
}

fn interior_cochain(cx: &Complex, p: usize, rng: &mut ChaCha8Rng) -> Cochain {
    let vals = (0..cx.num_cells(p))
        .map(|i| if cx.is_interior_cell(p, i, 2) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    Cochain::from_values(cx, p, vals).unwrap()
}

#[test]
fn criterion_01_operator_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut dd_max: f64 = 0.0;
    let mut star_max: f64 = 0.0;
    let mut adj_max: f64 = 0.0;
    for (dims, h) in [(vec![32usize, 32], 1.0 / 32.0), (vec![8, 8, 8], 1.0 / 8.0)] {
        let cx = ComplexBuilder::new(&dims).spacing(h).build().unwrap();
        let n = cx.dim();
        for p in 0..=n {
            let c = dyadic_cochain(&cx, p, &mut rng);
            if p + 2 <= n {
                dd_max = dd_max.max(ops::d(&cx, &ops::d(&cx, &c).unwrap()).unwrap().max_abs());
            }
            let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
            let ss = ops::star(&cx, &ops::star(&cx, &c));
            assert_eq!(ss.layout(), Layout::Primal);
            for (a, b) in ss.values().iter().zip(c.values()) {
                star_max = star_max.max((a - sign * b).abs());
            }
            if p >= 1 {
                let alpha = interior_cochain(&cx, p - 1, &mut rng);
                let beta = interior_cochain(&cx, p, &mut rng);
                let da = ops::d(&cx, &alpha).unwrap();
                let lhs = ops::inner(&cx, &da, &beta).unwrap();
                let rhs = ops::inner(&cx, &alpha, &ops::codifferential(&cx, &beta).unwrap()).unwrap();
                let scale = ops::norm(&cx, &da) * ops::norm(&cx, &beta);
                adj_max = adj_max.max((lhs - rhs).abs() / scale);
            }
        }
    }
    let pass = dd_max == 0.0 && star_max == 0.0 && adj_max <= 1e-10;
    finish(
        "criterion 1 (operator identities)",
        pass,
        format!("max|dd|={dd_max:e}, max|**-s|={star_max:e}, adjointness={adj_max:.2e}"),
        start,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_linear_reduction() {
    let start = Instant::now();
    let m = 64usize;
    let h = 1.0 / m as f64;
    let cx = ComplexBuilder::new(&[m, m]).spacing(h).build().unwrap();
    let g = |x: &[f64]| (3.0 * x[0]).sin() * x[1].exp() + x[0] * x[0] - 0.3 * x[1];
    let problem = FlowProblem::dirichlet(cx.clone(), DensityModel::Constant, g).unwrap();
    let sol = solve_flow(&problem, &FlowOptions::default()).unwrap();

    // Five-point Laplacian on interior vertices with Dirichlet data folded
    // into the right-hand side.
    let k = m - 1;
    let idx = |i: usize, j: usize| (j - 1) * k + (i - 1);
    let mut a = Band::zeros(k * k, k);
    let mut rhs = vec![0.0; k * k];
    for j in 1..m {
        for i in 1..m {
            let r = idx(i, j);
            a.add(r, r, 4.0);
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if ni == 0 || nj == 0 || ni == m || nj == m {
                    rhs[r] += g(&[ni as f64 * h, nj as f64 * h]);
                } else if idx(ni, nj) < r {
                    a.add(r, idx(ni, nj), -1.0);
                }
            }
        }
    }
    let u = a.solve(&rhs);
    let mut worst: f64 = 0.0;
    for j in 1..m {
        for i in 1..m {
            let v = cx.cell_index(0, 0, &[i as i64, j as i64]).unwrap();
            worst = worst.max((sol.phi.values()[v] - u[idx(i, j)]).abs());
        }
    }
    finish(
        "criterion 2 (rho = 1 reduces to the linear solve)",
        worst <= 1e-12,
        format!("max|phi - direct| = {worst:.2e} on 64^2"),
        start,
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_03_sonic_transition() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for gamma in [1.4, 2.0, 3.0] {
        let model = DensityModel::polytropic(gamma).unwrap();
        let q_crit = 2.0 / (gamma + 1.0);
        let hi = 0.999 * 2.0 / (gamma - 1.0);
        let samples = 10_000;
        let step = hi / (samples - 1) as f64;
        let cert = certify_condition2(&model, (0.0, hi), 0.0, 0.0, samples).unwrap();
        let fq = cert.failure_q.unwrap_or(f64::NAN);
        let ok = !cert.pass && fq >= q_crit && fq - q_crit <= step;
        pass &= ok;
        detail.push(format!("gamma={gamma}: fails at {fq:.6} vs {q_crit:.6}"));
    }
    finish("criterion 3 (sonic transition)", pass, detail.join(", "), start, Duration::from_secs(1));
}

#[test]
fn criterion_04_gauge_invariance() {
    let start = Instant::now();
    let cx = ComplexBuilder::new(&[8, 8, 8]).spacing(0.125).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let model = DensityModel::Constant;
    let mut worst_e: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for i in 0..50 {
        let group = if i % 2 == 0 { Group::SU2 } else { Group::SO3 };
        let conn = LatticeConnection::random(&cx, group, 0.5, &mut rng);
        let g = GaugeTransform::random(&cx, group, 2.0, &mut rng);
        let moved = apply_gauge(&conn, &g).unwrap();
        let (e0, e1) = (gauge_energy(&conn, &model).unwrap(), gauge_energy(&moved, &model).unwrap());
        worst_e = worst_e.max((e1 - e0).abs() / e0.abs());
        let (q0, q1) = (gauge_q(&conn).unwrap(), gauge_q(&moved).unwrap());
        let qmax = q0.max();
        for (a, b) in q0.values.iter().zip(&q1.values) {
            worst_q = worst_q.max((a - b).abs() / qmax);
        }
    }
    finish(
        "criterion 4 (gauge invariance)",
        worst_e <= 1e-12 && worst_q <= 1e-12,
        format!("energy rel {worst_e:.2e}, Q rel {worst_q:.2e} over 50 pairs on 8^3"),
        start,
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_05_bianchi() {
    let start = Instant::now();
    let cx = ComplexBuilder::new(&[6, 6, 6]).spacing(1.0 / 6.0).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut exact: f64 = 0.0;
    for i in 0..50 {
        let group = if i % 2 == 0 { Group::SU2 } else { Group::SO3 };
        let conn = LatticeConnection::random(&cx, group, 0.6, &mut rng);
        exact = exact.max(bianchi_residual(&conn).unwrap().max_exact_defect);
    }
    let mut logs = Vec::new();
    for m in [8usize, 16, 32] {
        let h = 1.0 / m as f64;
        let cx = ComplexBuilder::new(&[m, m, m]).spacing(h).build().unwrap();
        let conn = LatticeConnection::from_potential(&cx, Group::SU2, |a, x| {
            Vector3::new((2.0 * x[1]).sin(), x[2] * x[0], (x[0] + x[1]).cos()) * (0.7 * (1.0 + a as f64))
        });
        logs.push(bianchi_residual(&conn).unwrap().max_log_residual);
    }
    let orders: Vec<f64> = logs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    finish(
        "criterion 5 (lattice Bianchi identity)",
        exact <= 1e-12 && order >= 0.9,
        format!("exact defect {exact:.2e}; log residuals {logs:.3?}, order {order:.3}"),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_06_variational_consistency() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst_gauge: f64 = 0.0;
    let cx = ComplexBuilder::new(&[4, 4, 4]).spacing(0.25).build().unwrap();
    for (group, model, amp) in [
        (Group::SU2, DensityModel::Constant, 0.8),
        (Group::SO3, DensityModel::polytropic(2.0).unwrap(), 0.02),
    ] {
        let conn = LatticeConnection::random(&cx, group, amp, &mut rng);
        let grad = energy_gradient(&conn, &model).unwrap();
        for _ in 0..20 {
            let vals = (0..conn.num_links() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dir = Cochain::from_values_with(&cx, 1, Layout::Primal, 3, vals).unwrap();
            let t = 1e-5;
            let ep = gauge_energy(&step_links(&conn, &dir, t), &model).unwrap();
            let em = gauge_energy(&step_links(&conn, &dir, -t), &model).unwrap();
            let fd = (ep - em) / (2.0 * t);
            let an: f64 = grad.values().iter().zip(dir.values()).map(|(a, b)| a * b).sum();
            worst_gauge = worst_gauge.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }

    let mut worst_flow: f64 = 0.0;
    let text = "[run]\nname=fd\n[grid]\ndims=16,16\n[density]\nkind=polytropic\ngamma=1.4\n\
                [flow]\nslope=0.4,0.2\nperturbation=0.05\n";
    let problem = flow_problem(&parse_config_str(text, None).unwrap()).unwrap();
    let fcx = problem.complex.clone();
    let free = problem.free_vertices();
    let mut phi = problem.initial_potential();
    for (v, val) in phi.values_mut().iter_mut().enumerate() {
        if free[v] {
            let x = fcx.cell_center(0, v);
            *val = 0.4 * x[0] + 0.2 * x[1] + 0.01 * rng.gen_range(-1.0..1.0);
        }
    }
    let res = flow_residual(&problem, &phi).unwrap();
    let vol = fcx.cell_volume();
    for _ in 0..20 {
        let dir: Vec<f64> = free.iter().map(|&f| if f { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
        let t = 1e-6;
        let shifted = |s: f64| {
            let vals = phi.values().iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            Cochain::from_values(&fcx, 0, vals).unwrap()
        };
        let fd = (flow_energy(&problem, &shifted(t)).unwrap() - flow_energy(&problem, &shifted(-t)).unwrap()) / (2.0 * t);
        let an: f64 = res.values().iter().zip(&dir).map(|(r, d)| r * vol * d).sum();
        worst_flow = worst_flow.max((fd - an).abs() / an.abs().max(1e-3));
    }
    finish(
        "criterion 6 (variational consistency)",
        worst_gauge <= 1e-5 && worst_flow <= 1e-5,
        format!("gauge gradient {worst_gauge:.2e}, flow residual {worst_flow:.2e} (40 and 20 directions)"),
        start,
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_07_minimization() {
    let start = Instant::now();
    let cx = ComplexBuilder::new(&[8, 8, 8]).spacing(0.125).periodic(&[true; 3]).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let conn = LatticeConnection::random(&cx, Group::SU2, 0.05, &mut rng);
    let model = DensityModel::Constant;
    let (out, rep) = minimize(&conn, &model, &MinimizeOptions::default()).unwrap();
    let monotone = rep.energy_history.windows(2).all(|w| w[1] <= w[0]);
    let weak = weak_residual(&out, &model, 20, 7).unwrap();
    finish(
        "criterion 7 (SU(2) minimization on the 8^3 torus)",
        rep.status == MinimizeStatus::Converged && rep.grad_sup <= 1e-8 && monotone && weak <= 1e-6,
        format!(
            "{:?} after {} iterations, grad {:.2e}, monotone {monotone}, weak residual {weak:.2e}",
            rep.status, rep.iterations, rep.grad_sup
        ),
        start,
        Duration::from_secs(120),
    );
}

fn random_form(rng: &mut ChaCha8Rng, m: usize, q_target: f64, metric: &nlhodge::complex::PointMetric) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let masks = nlhodge::complex::orientations(metric.n, 1);
    let mut q = 0.0;
    for i in 0..m {
        for j in 0..m {
            q += w[i] * w[j] * metric.form_inner(masks[i], masks[j]);
        }
    }
    let s = (q_target / q.max(1e-300)).sqrt();
    w.iter().map(|a| a * s).collect()
}

#[test]
fn criterion_08_sibner() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let sphere = ComplexBuilder::new(&[8, 8])
        .spacings(&[0.1, 0.5])
        .origin(&[1.0, 0.3])
        .metric(nlhodge::MetricSpec::RoundSphere)
        .build()
        .unwrap();
    let mut worst: f64 = 0.0;
    let (mut pd_seen, mut pd_bad, mut ind_seen, mut ind_bad) = (0, 0, 0, 0);
    for i in 0..1000 {
        let gamma = [1.4, 2.0, 3.0][i % 3];
        let model = DensityModel::polytropic(gamma).unwrap();
        let q_crit = 2.0 / (gamma + 1.0);
        let q_max = 2.0 / (gamma - 1.0);
        let (xi, eta) = if i % 2 == 0 {
            let n = 2 + (i / 2) % 2;
            let p = |rng: &mut ChaCha8Rng| SamplePoint::flat((0..n).map(|_| rng.gen_range(0.0..1.0)).collect());
            (p(&mut rng), p(&mut rng))
        } else {
            let p = |rng: &mut ChaCha8Rng| {
                let pos = [rng.gen_range(0..8i64), rng.gen_range(0..8i64)];
                SamplePoint { x: sphere.cell_center(2, sphere.cell_index(2, 3, &pos).unwrap()), metric: sphere.metric_at_cell(3, &pos) }
            };
            (p(&mut rng), p(&mut rng))
        };
        let m = xi.metric.n;
        let supersonic = i % 4 >= 2;
        let draw = |rng: &mut ChaCha8Rng| {
            let q = if supersonic { rng.gen_range(1.02 * q_crit..0.55 * q_max) } else { rng.gen_range(0.0..0.98 * q_crit) };
            random_form(rng, m, q, &xi.metric)
        };
        let mu = draw(&mut rng);
        let tau = if supersonic {
            // Nearby forms keep the whole segment supersonic.
            let d = random_form(&mut rng, m, 1.0, &xi.metric);
            let s = 0.05 * mu.iter().map(|a| a * a).sum::<f64>().sqrt();
            mu.iter().zip(&d).map(|(a, b)| a + s * b).collect()
        } else {
            draw(&mut rng)
        };
        let s = sibner_decomposition(&model, 1, &xi, &eta, &mu, &tau).unwrap();
        worst = worst.max(s.identity_residual);
        if s.segment_q_max <= 0.99 * q_crit {
            pd_seen += 1;
            pd_bad += usize::from(s.alpha_min_eig <= 0.0);
        }
        if s.segment_q_min >= 1.01 * q_crit && s.segment_q_max < q_max {
            ind_seen += 1;
            ind_bad += usize::from(!(s.alpha_min_eig < 0.0 && s.alpha_max_eig > 0.0));
        }
    }
    let model = DensityModel::polytropic(2.0).unwrap();
    let p = SamplePoint::flat(vec![0.0; 3]);
    let w = [0.5f64.sqrt(), 0.0, 0.0];
    let s = sibner_decomposition(&model, 1, &p, &p, &w, &w).unwrap();
    let eig_ok = (s.alpha_max_eig - 0.75).abs() < 1e-12 && (s.alpha_min_eig - 0.25).abs() < 1e-12;
    finish(
        "criterion 8 (mean-value decomposition)",
        worst <= 1e-8 && pd_seen > 0 && pd_bad == 0 && ind_seen > 0 && ind_bad == 0 && eig_ok,
        format!(
            "residual {worst:.2e}; PD {}/{pd_seen}, indefinite {}/{ind_seen}; gamma=2 eigenvalues {:.15}, {:.15}",
            pd_seen - pd_bad,
            ind_seen - ind_bad,
            s.alpha_max_eig,
            s.alpha_min_eig
        ),
        start,
        Duration::from_secs(5),
    );
}

/// rho = 1 minimizer on 16^3 with boundary links fixed by a smooth,
/// non-flat potential.
fn smooth_minimizer() -> &'static (LatticeConnection, MinimizeReport, Duration) {
    static CELL: OnceLock<(LatticeConnection, MinimizeReport, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let cx = ComplexBuilder::new(&[16, 16, 16]).spacing(1.0 / 16.0).build().unwrap();
        let start = LatticeConnection::from_potential(&cx, Group::SU2, |a, x| smooth_potential(a, x, 1.0));
        let opts = MinimizeOptions { tol: 1e-6, max_iters: 20_000, ..Default::default() };
        let (conn, rep) = minimize(&start, &DensityModel::Constant, &opts).unwrap();
        (conn, rep, t.elapsed())
    })
}

#[test]
fn criterion_09_elliptic_inequality() {
    let start = Instant::now();
    let text = "[run]\nname=inequality\n[grid]\ndims=32,32\nperiodic=true,false\n[density]\nkind=polytropic\ngamma=1.4\n\
                [flow]\nslope=0,0.3\nlambda=0.4,0\nperturbation=0.05\n";
    let problem = flow_problem(&parse_config_str(text, None).unwrap()).unwrap();
    let sol = solve_flow(&problem, &FlowOptions::default()).unwrap();
    let flow_in = EllipticInput::from_flow(&problem.complex, &sol.omega, &sol.phi);
    let rf = elliptic_inequality_check(&flow_in, &problem.density, 0.1, 1.0, 1.0).unwrap();

    let (conn, rep, _) = smooth_minimizer();
    let gauge_in = EllipticInput::from_connection(conn).unwrap();
    let rg = elliptic_inequality_check(&gauge_in, &DensityModel::Constant, 0.1, 1.0, 1.0).unwrap();
    let ok = |r: &nlhodge::verify::EllipticReport| {
        r.pass && r.indefinite_cells.is_empty() && r.min_eigenvalue > 0.0 && r.c.is_some_and(|c| c <= 1e6)
    };
    finish(
        "criterion 9 (differential inequality for Q)",
        ok(&rf) && ok(&rg) && rep.status == MinimizeStatus::Converged,
        format!(
            "flow: min eig {:.3}, C {:?}; gauge: min eig {:.3}, C {:?} over {} interior cells",
            rf.min_eigenvalue, rf.c, rg.min_eigenvalue, rg.c, rg.interior_cells
        ),
        start,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_10_campanato() {
    let start = Instant::now();
    let (conn, _, _) = smooth_minimizer();
    let cx = conn.complex();
    let center = [0.5, 0.5, 0.5];
    let h = 1.0 / 16.0;
    let rmax = max_admissible_radius(cx, &center);
    let radii: Vec<f64> = (2..=8).map(|k| k as f64 * h).filter(|&r| r <= rmax).collect();

    let constant = campanato_decay_fit(cx, &CellField::from_fn(cx, |_| 0.7), &center, &radii, 2).unwrap();
    let const_ok = constant.constant_field && constant.series.iter().all(|p| p.1 == 0.0);

    let linear = CellField::from_fn(cx, |x| 2.0 * x[0] - x[1] + 0.5 * x[2]);
    let lin = campanato_decay_fit(cx, &linear, &center, &radii, 2).unwrap();
    let lin_slope = lin.slope.unwrap_or(f64::NAN);

    let f = to_cell_field(cx, &curvature(conn).unwrap());
    let fit = campanato_decay_fit(cx, &f, &center, &radii, 2).unwrap();
    let min_slope = fit.slope.unwrap_or(f64::NAN);

    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let g0 = Group::SU2.random(&mut rng, 2.0);
    let rc = gauge_invariance_campanato(conn, &GaugeTransform::constant(cx, g0), &center, &radii, 2).unwrap();
    let const_gauge = rc.before.iter().zip(&rc.after).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);

    let lip = GaugeTransform::from_fn(cx, Group::SU2, |x| smooth_potential(1, x, 0.1));
    let rl = gauge_invariance_campanato(conn, &lip, &center, &radii, 2).unwrap();
    let shift = rl.exponent_shift.unwrap_or(f64::INFINITY);

    finish(
        "criterion 10 (Campanato decay)",
        const_ok && (lin_slope - 5.0).abs() <= 0.1 && min_slope >= 3.5 && const_gauge <= 1e-12 && shift <= 0.1,
        format!(
            "constant {const_ok}, linear slope {lin_slope:.3}, minimizer slope {min_slope:.3}, \
             constant gauge {const_gauge:.1e}, Lipschitz shift {shift:.3}"
        ),
        start,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_11_exponential_gauge() {
    let start = Instant::now();
    let cx = ComplexBuilder::new(&[8, 8, 8]).spacing(0.125).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut flat: f64 = 0.0;
    for group in [Group::SU2, Group::SO3] {
        let pure = apply_gauge(&LatticeConnection::identity(&cx, group), &GaugeTransform::random(&cx, group, 1.5, &mut rng)).unwrap();
        let origin = cx.cell_index(0, 0, &[4, 4, 4]).unwrap();
        let (fixed, _, _) = exponential_gauge_fix(&pure, origin).unwrap();
        flat = flat.max(fixed.links().iter().map(|u| u.distance_from_identity()).fold(0.0, f64::max));
    }

    let m = 32;
    let cx = ComplexBuilder::new(&[m, m, m]).spacing(1.0 / m as f64).build().unwrap();
    // Constant abelian field F_01 = 1 in a Landau gauge.
    let conn = LatticeConnection::from_potential(&cx, Group::SU2, |a, x| {
        if a == 1 {
            Vector3::new(0.0, 0.0, x[0])
        } else {
            Vector3::zeros()
        }
    });
    let origin = cx.cell_index(0, 0, &[16, 16, 16]).unwrap();
    let (_, _, rep) = exponential_gauge_fix(&conn, origin).unwrap();
    finish(
        "criterion 11 (exponential gauge)",
        flat <= 1e-12 && rep.ratio <= 1.1,
        format!("pure gauge residual {flat:.1e}; constant-field ratio {:.4} at h = 1/32", rep.ratio),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_12_determinism() {
    let start = Instant::now();
    let scenarios: Vec<(&str, Command)> = vec![
        (
            "[run]\nname=laplace\nseed=1\n[grid]\ndims=32,32\n[flow]\nslope=1,0.5\n",
            Command::SolveFlow,
        ),
        (
            "[run]\nname=poly\nseed=3\n[grid]\ndims=24,24\nperiodic=true,false\n[density]\nkind=polytropic\ngamma=1.4\n\
             [flow]\nslope=0,0.3\nlambda=0.4,0\nperturbation=0.05\n\
             [verify]\nchecks=subsonic,condition2,sibner,elliptic,campanato,commutation,gaffney\nsamples=200\n",
            Command::Verify { checks: None, input: None },
        ),
        (
            "[run]\nname=gauge\nseed=11\n[grid]\ndims=4,4,4\nperiodic=true\n[gauge]\ninit=random\namplitude=0.2\n\
             boundary=free\ntol=1e-7\n[verify]\nfield=gauge\nchecks=bianchi,gauge-invariance,weak-residual,sibner\nsamples=100\n",
            Command::Verify { checks: None, input: None },
        ),
        (
            "[run]\nname=coulomb\nseed=2\n[grid]\ndims=5,5,5\n[gauge]\namplitude=0.3\n",
            Command::GaugeFix { mode: Some(FixModeArg::Coulomb), input: None },
        ),
        (
            "[run]\nname=exp\nseed=2\n[grid]\ndims=6,6,6\n[gauge]\ninit=smooth\namplitude=0.5\n",
            Command::GaugeFix { mode: Some(FixModeArg::Exponential), input: None },
        ),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut names = Vec::new();
    for (k, (text, cmd)) in scenarios.iter().enumerate() {
        let cfg = parse_config_str(text, None).unwrap();
        let digest = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(text.as_bytes()));
        let a = dir.path().join(format!("{k}a"));
        let b = dir.path().join(format!("{k}b"));
        run_config(&cfg, cmd, &digest, &a).unwrap();
        run_config(&cfg, cmd, &digest, &b).unwrap();
        let ma = std::fs::read(a.join("manifest.json")).unwrap();
        let mb = std::fs::read(b.join("manifest.json")).unwrap();
        if ma == mb {
            identical += 1;
        }
        names.push(cfg.name.clone());
    }
    finish(
        "criterion 12 (determinism)",
        identical == scenarios.len(),
        format!("{identical}/{} scenarios byte-identical ({})", scenarios.len(), names.join(", ")),
        start,
        Duration::from_secs(120),
    );
}
