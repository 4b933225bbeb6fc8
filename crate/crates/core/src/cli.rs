//! Command-line orchestration: dispatch, artifacts, reports and manifests.

use crate::cochain::{to_cell_field, CellField, Cochain, DecError};
use crate::complex::{Complex, ComplexError};
use crate::config::{parse_config, ConfigError, FieldSource, FixMode, GaugeInit, Mode, RunConfig};
use crate::density::{certify_condition2, DensityError, DensityModel};
use crate::flow::{solve_flow, FlowError, FlowOptions, FlowProblem, FlowSolution};
use crate::gauge::{
    apply_gauge, bianchi_residual, coulomb_gauge_fix, curvature, exponential_gauge_fix, gauge_q, minimize,
    weak_residual, Algebra, CoulombOptions, GaugeError, GaugeTransform, LatticeConnection, MinimizeOptions,
};
use crate::io::{self, IoError};
use crate::ops;
use crate::verify::{
    campanato_decay_fit, commutation_check, digest_f64s, elliptic_inequality_check, gaffney_ratio,
    gauge_invariance_campanato, sibner_decomposition, CheckEntry, EllipticInput, SamplePoint, VerificationReport,
    VerifyError,
};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] IoError),
    #[error("grid: {0}")]
    Complex(#[from] ComplexError),
    #[error("density: {0}")]
    Density(#[from] DensityError),
    #[error("flow: {0}")]
    Flow(#[from] FlowError),
    #[error("gauge: {0}")]
    Gauge(#[from] GaugeError),
    #[error("verify: {0}")]
    Verify(#[from] VerifyError),
    #[error("cochain: {0}")]
    Dec(#[from] DecError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "nlhodge", version, about = "Nonlinear Hodge solvers and regularity checks on cubical lattices")]
pub struct Cli {
    /// Run configuration (INI).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides run.output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to NLH_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixModeArg {
    Coulomb,
    Exponential,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the compressible flow problem.
    SolveFlow,
    /// Minimize the nonquadratic gauge energy.
    SolveGauge,
    /// Gauge-fix a connection.
    GaugeFix {
        #[arg(long, value_enum)]
        mode: Option<FixModeArg>,
        /// Connection file; defaults to the configured initial connection.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run regularity checks on a computed or supplied field.
    Verify {
        /// Comma-separated check names; overrides verify.checks.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// Flow 1-cochain (.csv or .bin) or connection (.bin) to check
        /// instead of solving.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Re-render heatmaps and series from an existing run directory.
    Report,
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::SolveFlow => Mode::SolveFlow,
            Command::SolveGauge => Mode::SolveGauge,
            Command::GaugeFix { .. } => Mode::GaugeFix,
            Command::Verify { .. } => Mode::Verify,
            Command::Report => Mode::Report,
        }
    }
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// False when a requested check failed.
    pub pass: bool,
    pub manifest: Value,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Files written by a run, in creation order.
struct Artifacts {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|source| IoError::Io { path: dir.display().to_string(), source })?;
        Ok(Artifacts { dir, digests: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        io::write_bytes(&self.dir.join(name), bytes)?;
        self.digests.insert(name.into(), sha256_hex(bytes));
        Ok(())
    }

    fn write_cochain(&mut self, cx: &Complex, stem: &str, c: &Cochain) -> Result<(), CliError> {
        self.write(&format!("{stem}.csv"), io::cochain_to_csv(cx, c).as_bytes())?;
        self.write(&format!("{stem}.bin"), &io::cochain_to_bytes(cx, c))
    }

    fn write_q(&mut self, cx: &Complex, q: &CellField) -> Result<(), CliError> {
        let c = Cochain::from_values(cx, cx.dim(), q.values.clone())?;
        self.write("q.bin", &io::cochain_to_bytes(cx, &c))?;
        self.write("q.ppm", &io::heatmap_ppm(cx, q, 0, ppm_scale(cx)))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn ppm_scale(cx: &Complex) -> usize {
    (256 / cx.dims()[0].max(1)).clamp(1, 16)
}

fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("NLH_THREADS").ok().and_then(|v| v.trim().parse().ok())).filter(|&t| t > 0)
}

/// Parse the config named on the command line and run the subcommand.
pub fn run(cli: &Cli) -> Result<RunOutcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = std::fs::read(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    let mut cfg = parse_config(path)?;
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    let mode = cli.command.mode();
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(CliError::Usage(format!("config selects {} but the command is {}", m.name(), mode.name())));
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cli.threads) {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run_config(&cfg, &cli.command, &sha256_hex(&text), &out))
}

/// Run a parsed config. `config_digest` identifies the configuration text
/// in the manifest.
pub fn run_config(cfg: &RunConfig, command: &Command, config_digest: &str, out: &Path) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let mut art = Artifacts::new(out.to_path_buf())?;
    let mut report = BTreeMap::<String, Value>::new();
    let pass = match command {
        Command::SolveFlow => {
            solve_flow_cmd(cfg, &mut art, &mut report)?;
            true
        }
        Command::SolveGauge => {
            solve_gauge_cmd(cfg, &mut art, &mut report)?;
            true
        }
        Command::GaugeFix { mode, input } => {
            let mode = match mode {
                Some(FixModeArg::Coulomb) => FixMode::Coulomb,
                Some(FixModeArg::Exponential) => FixMode::Exponential,
                None => cfg.fix.mode,
            };
            gauge_fix_cmd(cfg, mode, input.as_deref(), &mut art, &mut report)?
        }
        Command::Verify { checks, input } => {
            let checks = checks.clone().unwrap_or_else(|| cfg.verify.checks.clone());
            verify_cmd(cfg, &checks, input.as_deref(), &mut art, &mut report)?
        }
        Command::Report => {
            report_cmd(cfg, &mut art)?;
            true
        }
    };
    if !matches!(command, Command::Report) {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        art.write("report.json", text.as_bytes())?;
    }
    let manifest = json!({
        "name": cfg.name,
        "mode": command.mode().name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_digest": config_digest,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "outputs": art.digests,
        "pass": pass,
    });
    if matches!(command, Command::Report) {
        return Ok(RunOutcome { out_dir: art.dir, pass, manifest });
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    io::write_bytes(&art.dir.join("manifest.json"), text.as_bytes())?;
    let timing = json!({ "wall_clock_seconds": start.elapsed().as_secs_f64(), "threads": rayon::current_num_threads() });
    io::write_bytes(&art.dir.join("timing.json"), timing.to_string().as_bytes())?;
    Ok(RunOutcome { out_dir: art.dir, pass, manifest })
}

/// The flow problem described by a config: Dirichlet data
/// slope . x + perturbation prod cos(2 pi x_i / L_i) on non-periodic faces,
/// with L_i the period on periodic axes and twice the extent otherwise, and a
/// constant harmonic part lambda.
pub fn flow_problem(cfg: &RunConfig) -> Result<FlowProblem, CliError> {
    let cx = cfg.grid.build()?;
    let density = cfg.density.build()?;
    let n = cx.dim();
    let slope = cfg.flow.slope.clone();
    let pert = cfg.flow.perturbation;
    let origin = cx.origin().to_vec();
    let period: Vec<f64> = (0..n).map(|a| if cx.periodic()[a] { cx.extent(a) } else { 2.0 * cx.extent(a) }).collect();
    let mut x = vec![0.0; n];
    let values = (0..cx.num_vertices())
        .map(|v| {
            cx.vertex_coords(v, &mut x);
            let bump: f64 = (0..n).map(|a| (2.0 * std::f64::consts::PI * (x[a] - origin[a]) / period[a]).cos()).product();
            slope.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + pert * bump
        })
        .collect();
    let lam = cfg.flow.lambda.clone();
    let lambda = Cochain::from_fn(&cx, 1, |mask, _| lam[mask.trailing_zeros() as usize]);
    let faces = vec![[crate::flow::FaceCondition::Dirichlet; 2]; n];
    Ok(FlowProblem::new(cx, density, faces, values, Some(lambda))?)
}

fn flow_options(cfg: &RunConfig) -> FlowOptions {
    FlowOptions {
        tol: cfg.flow.tol,
        max_iters: cfg.flow.max_iters,
        q_cap_epsilon: cfg.flow.q_cap_epsilon,
        cg_rtol: cfg.flow.cg_rtol,
    }
}

fn condition2_json(cfg: &RunConfig, model: &DensityModel, hi: f64) -> Result<Value, CliError> {
    let hi = if hi.is_finite() { hi } else { model.q_cap(cfg.flow.q_cap_epsilon).min(1e6) };
    let cert = certify_condition2(model, (0.0, hi), cfg.verify.q, cfg.verify.k, cfg.verify.samples)?;
    Ok(json!({
        "q_lo": cert.q_lo,
        "q_hi": cert.q_hi,
        "k": cert.k,
        "q": cert.q,
        "samples": cert.samples,
        "big_k": finite_or_null(cert.big_k),
        "margin_min": finite_or_null(cert.margin_min),
        "margin_max": finite_or_null(cert.margin_max),
        "pass": cert.pass,
        "failure_q": cert.failure_q,
    }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn flow_json(sol: &FlowSolution) -> Value {
    json!({
        "energy": sol.energy,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "max_q": sol.max_q,
        "mach_ratio": sol.mach_ratio,
    })
}

fn solve_flow_cmd(cfg: &RunConfig, art: &mut Artifacts, report: &mut BTreeMap<String, Value>) -> Result<(), CliError> {
    let problem = flow_problem(cfg)?;
    let sol = solve_flow(&problem, &flow_options(cfg))?;
    let cx = &problem.complex;
    art.write_cochain(cx, "phi", &sol.phi)?;
    art.write_cochain(cx, "omega", &sol.omega)?;
    art.write_q(cx, &sol.q)?;
    let rows: Vec<_> = sol.log.iter().map(|r| (r.iter, r.energy, r.residual, r.max_q)).collect();
    art.write("convergence.csv", io::convergence_csv(&rows).as_bytes())?;
    report.insert("flow".into(), flow_json(&sol));
    report.insert("condition2".into(), condition2_json(cfg, &problem.density, sol.max_q)?);
    Ok(())
}

/// A smooth, non-flat potential used for `gauge.init = smooth`.
pub fn smooth_potential(axis: usize, x: &[f64], amplitude: f64) -> Algebra {
    use std::f64::consts::PI;
    let n = x.len();
    let b = x[(axis + 1) % n];
    let c = x[(axis + 2) % n];
    Algebra::new((2.0 * PI * b).sin(), 0.5 * (2.0 * PI * c).cos(), 0.3 * (PI * (x[axis] + b)).sin()) * amplitude
}

/// The configured starting connection.
pub fn initial_connection(cfg: &RunConfig) -> Result<LatticeConnection, CliError> {
    let cx = cfg.grid.build()?;
    let g = cfg.gauge.group;
    Ok(match cfg.gauge.init {
        GaugeInit::Identity => LatticeConnection::identity(&cx, g),
        GaugeInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            LatticeConnection::random(&cx, g, cfg.gauge.amplitude, &mut rng)
        }
        GaugeInit::Smooth => {
            let amp = cfg.gauge.amplitude;
            LatticeConnection::from_potential(&cx, g, |axis, x| smooth_potential(axis, x, amp))
        }
    })
}

fn gauge_density(cfg: &RunConfig) -> Result<DensityModel, CliError> {
    if cfg.grid.metric != crate::config::MetricKind::Identity {
        return Err(CliError::Usage("gauge fields use the flat metric".into()));
    }
    Ok(cfg.density.build()?)
}

struct GaugeSolution {
    conn: LatticeConnection,
    summary: Value,
    history: Vec<(f64, f64)>,
}

fn minimize_gauge(cfg: &RunConfig) -> Result<GaugeSolution, CliError> {
    let model = gauge_density(cfg)?;
    let start = initial_connection(cfg)?;
    let opts = MinimizeOptions {
        tol: cfg.gauge.tol,
        max_iters: cfg.gauge.max_iters,
        initial_step: cfg.gauge.initial_step,
        free_boundary: cfg.gauge.free_boundary,
    };
    let (conn, rep) = minimize(&start, &model, &opts)?;
    let q = gauge_q(&conn)?;
    let weak = weak_residual(&conn, &model, 8, cfg.seed)?;
    let summary = json!({
        "group": conn.group().name(),
        "status": format!("{:?}", rep.status),
        "iterations": rep.iterations,
        "initial_energy": rep.initial_energy,
        "final_energy": rep.final_energy,
        "grad_sup": rep.grad_sup,
        "weak_residual": weak,
        "max_q": q.max(),
        "mach_ratio": model.q_crit().map(|c| q.max() / c),
    });
    let history = rep.energy_history.iter().cloned().zip(rep.grad_history.iter().cloned()).collect();
    Ok(GaugeSolution { conn, summary, history })
}

fn solve_gauge_cmd(cfg: &RunConfig, art: &mut Artifacts, report: &mut BTreeMap<String, Value>) -> Result<(), CliError> {
    let sol = minimize_gauge(cfg)?;
    let cx = sol.conn.complex().clone();
    art.write("connection.bin", &io::connection_to_bytes(&sol.conn))?;
    art.write_cochain(&cx, "curvature", &curvature(&sol.conn)?)?;
    art.write_q(&cx, &gauge_q(&sol.conn)?)?;
    let mut csv = String::from("iter,energy,grad_sup\n");
    for (i, (e, g)) in sol.history.iter().enumerate() {
        csv.push_str(&format!("{i},{e:?},{g:?}\n"));
    }
    art.write("convergence.csv", csv.as_bytes())?;
    report.insert("gauge".into(), json!({ "minimize": sol.summary }));
    Ok(())
}

fn load_connection(path: &Path) -> Result<LatticeConnection, CliError> {
    Ok(io::connection_from_bytes(&io::read_bytes(path)?)?)
}

/// Vertex index of the configured exponential-gauge origin.
fn fix_origin(cfg: &RunConfig, cx: &Complex) -> Result<usize, CliError> {
    let pos: Vec<i64> = match &cfg.fix.origin {
        Some(o) => o.clone(),
        None => cx.dims().iter().map(|&d| (d / 2) as i64).collect(),
    };
    cx.cell_index(0, 0, &pos).ok_or_else(|| CliError::Usage(format!("origin {pos:?} is not a vertex")))
}

fn gauge_fix_cmd(
    cfg: &RunConfig,
    mode: FixMode,
    input: Option<&Path>,
    art: &mut Artifacts,
    report: &mut BTreeMap<String, Value>,
) -> Result<bool, CliError> {
    let conn = match input {
        Some(p) => load_connection(p)?,
        None => initial_connection(cfg)?,
    };
    let (fixed, summary, pass) = match mode {
        FixMode::Coulomb => {
            let opts = CoulombOptions { tol: cfg.fix.tol, max_sweeps: cfg.fix.max_sweeps, ..Default::default() };
            let (fixed, _, rep) = coulomb_gauge_fix(&conn, &opts)?;
            let pass = rep.converged;
            (fixed, json!({ "mode": "coulomb", "report": rep }), pass)
        }
        FixMode::Exponential => {
            let origin = fix_origin(cfg, conn.complex())?;
            let (fixed, _, rep) = exponential_gauge_fix(&conn, origin)?;
            (fixed, json!({ "mode": "exponential", "report": rep }), true)
        }
    };
    art.write("fixed.bin", &io::connection_to_bytes(&fixed))?;
    art.write_cochain(fixed.complex(), "potential", &fixed.potential()?)?;
    report.insert("gauge".into(), json!({ "fix": summary }));
    Ok(pass)
}

/// The field a verify run inspects.
enum Field {
    Flow { cx: Complex, model: DensityModel, phi: Cochain, omega: Cochain, q: CellField },
    Gauge { conn: LatticeConnection, model: DensityModel },
}

fn load_flow_field(cfg: &RunConfig, path: &Path) -> Result<Field, CliError> {
    let cx = cfg.grid.build()?;
    let bytes = io::read_bytes(path)?;
    let omega = if path.extension().is_some_and(|e| e == "csv") {
        let text = String::from_utf8(bytes).map_err(|_| IoError::Format { line: 0, msg: "not UTF-8".into() })?;
        io::cochain_from_csv(&cx, &text)?
    } else {
        io::cochain_from_bytes(&cx, &bytes)?
    };
    if omega.degree() != 1 {
        return Err(CliError::Usage("flow input must be a 1-cochain".into()));
    }
    let q = ops::pointwise_q(&cx, &omega)?;
    let phi = Cochain::zeros(&cx, 0);
    Ok(Field::Flow { model: cfg.density.build()?, cx, phi, omega, q })
}

fn build_field(cfg: &RunConfig, input: Option<&Path>, report: &mut BTreeMap<String, Value>) -> Result<Field, CliError> {
    match (cfg.verify.field, input) {
        (FieldSource::Flow, Some(p)) => load_flow_field(cfg, p),
        (FieldSource::Flow, None) => {
            let problem = flow_problem(cfg)?;
            let sol = solve_flow(&problem, &flow_options(cfg))?;
            report.insert("flow".into(), flow_json(&sol));
            Ok(Field::Flow { cx: problem.complex, model: problem.density, phi: sol.phi, omega: sol.omega, q: sol.q })
        }
        (FieldSource::Gauge, Some(p)) => Ok(Field::Gauge { conn: load_connection(p)?, model: gauge_density(cfg)? }),
        (FieldSource::Gauge, None) => {
            let sol = minimize_gauge(cfg)?;
            report.insert("gauge".into(), json!({ "minimize": sol.summary }));
            Ok(Field::Gauge { conn: sol.conn, model: gauge_density(cfg)? })
        }
    }
}

impl Field {
    fn complex(&self) -> &Complex {
        match self {
            Field::Flow { cx, .. } => cx,
            Field::Gauge { conn, .. } => conn.complex(),
        }
    }

    fn model(&self) -> &DensityModel {
        match self {
            Field::Flow { model, .. } => model,
            Field::Gauge { model, .. } => model,
        }
    }

    fn digest(&self) -> String {
        match self {
            Field::Flow { omega, .. } => digest_f64s(omega.values()),
            Field::Gauge { conn, .. } => {
                let v: Vec<f64> = conn.links().iter().flat_map(|u| u.matrix_data()).collect();
                digest_f64s(&v)
            }
        }
    }

    fn q(&self) -> Result<CellField, CliError> {
        match self {
            Field::Flow { q, .. } => Ok(q.clone()),
            Field::Gauge { conn, .. } => Ok(gauge_q(conn)?),
        }
    }

    /// Top-cell field whose decay is measured: omega or F.
    fn decay_field(&self) -> Result<CellField, CliError> {
        match self {
            Field::Flow { cx, omega, .. } => Ok(to_cell_field(cx, omega)),
            Field::Gauge { conn, .. } => Ok(to_cell_field(conn.complex(), &curvature(conn)?)),
        }
    }

    fn conn(&self, check: &str) -> Result<&LatticeConnection, CliError> {
        match self {
            Field::Gauge { conn, .. } => Ok(conn),
            Field::Flow { .. } => Err(CliError::Usage(format!("check {check} needs verify.field = gauge"))),
        }
    }
}

fn default_radii(cx: &Complex, center: &[f64]) -> Vec<f64> {
    let rmax = crate::campanato::max_admissible_radius(cx, center);
    let h = cx.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut r = Vec::new();
    let mut k = 2.0;
    while k * h <= rmax * (1.0 + 1e-12) {
        r.push(k * h);
        k += 1.0;
    }
    r
}

fn center_of(cx: &Complex) -> Vec<f64> {
    (0..cx.dim()).map(|a| cx.origin()[a] + 0.5 * cx.extent(a)).collect()
}

/// Sonic location of a flow field exceeding its critical speed.
fn sonic_location(cx: &Complex, q: &CellField, q_crit: f64) -> Option<Value> {
    let (cell, &qm) = q.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    (qm >= q_crit).then(|| json!({ "cell": cell, "center": cx.cell_center(cx.dim(), cell), "q": qm, "q_crit": q_crit }))
}

fn run_check(name: &str, cfg: &RunConfig, field: &Field, extra: &mut BTreeMap<String, Value>) -> Result<CheckEntry, CliError> {
    let digest = field.digest();
    let cx = field.complex();
    let model = field.model();
    let v = &cfg.verify;
    Ok(match name {
        "subsonic" => {
            let q = field.q()?;
            let crit = model.q_crit().unwrap_or(model.q_max());
            if let Some(loc) = sonic_location(cx, &q, crit) {
                extra.insert("sonic_failure".into(), loc);
            }
            let mut e = CheckEntry::upper(name, "max Q below the sonic value", digest, q.max(), crit);
            e.pass = q.max() < crit;
            e
        }
        "condition2" => {
            let qmax = field.q()?.max();
            let cert = certify_condition2(model, (0.0, qmax), v.q, v.k, v.samples)?;
            let mut e = CheckEntry::lower(name, "two-sided ellipticity bound on [0, max Q]", digest, cert.margin_min, 0.0);
            e.pass = cert.pass;
            e
        }
        "sibner" => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5151);
            let qcap = model.q_cap(cfg.flow.q_cap_epsilon).min(4.0);
            let n = cx.dim();
            let p = match field {
                Field::Flow { .. } => 1,
                Field::Gauge { .. } => 2,
            };
            let m = crate::complex::orientations(n, p).len();
            let mut worst: f64 = 0.0;
            let mut series = Vec::new();
            for i in 0..v.samples {
                let mut draw = || {
                    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let s: f64 = w.iter().map(|a| a * a).sum::<f64>().max(1e-300);
                    let t: f64 = rng.gen_range(0.0..1.0);
                    w.iter().map(|a| a * (t * qcap / s).sqrt()).collect::<Vec<f64>>()
                };
                let mu = draw();
                let tau = draw();
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s = sibner_decomposition(model, p, &SamplePoint::flat(x), &SamplePoint::flat(y), &mu, &tau)?;
                worst = worst.max(s.identity_residual);
                if i < 64 {
                    series.push((s.alpha_min_eig, s.alpha_max_eig));
                }
            }
            CheckEntry::upper(name, "mean-value decomposition identity", digest, worst, 1e-8).with_series(series)
        }
        "elliptic" => {
            let input = match field {
                Field::Flow { cx, phi, omega, .. } => EllipticInput::from_flow(cx, omega, phi),
                Field::Gauge { conn, .. } => EllipticInput::from_connection(conn)?,
            };
            let r = elliptic_inequality_check(&input, model, v.k, v.q, v.c0)?;
            extra.insert("report".into(), serde_json::to_value(&r).expect("serializes"));
            let mut e = CheckEntry::upper(name, "differential inequality for Q", digest, r.c.unwrap_or(f64::INFINITY), r.c_max);
            e.pass = r.pass;
            e
        }
        "campanato" => {
            let center = center_of(cx);
            let radii = v.radii.clone().unwrap_or_else(|| default_radii(cx, &center));
            let fit = campanato_decay_fit(cx, &field.decay_field()?, &center, &radii, v.skip)?;
            let measured = if fit.constant_field { f64::INFINITY } else { fit.exponent.unwrap_or(0.0) };
            CheckEntry::lower(name, "Campanato decay exponent", digest, measured, 0.0).with_series(fit.series)
        }
        "gauge-campanato" => {
            let conn = field.conn(name)?;
            let center = center_of(cx);
            let radii = v.radii.clone().unwrap_or_else(|| default_radii(cx, &center));
            let g = GaugeTransform::from_fn(cx, conn.group(), |x| smooth_potential(0, x, 0.1));
            let r = gauge_invariance_campanato(conn, &g, &center, &radii, v.skip)?;
            let series = r.radii.iter().cloned().zip(r.after.iter().cloned()).collect();
            let shift = if r.fit_before.constant_field && r.fit_after.constant_field {
                0.0
            } else {
                r.exponent_shift.unwrap_or(f64::INFINITY)
            };
            CheckEntry::upper(name, "decay exponent under a Lipschitz gauge", digest, shift, 0.1).with_series(series)
        }
        "gauge-invariance" => {
            let conn = field.conn(name)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a09e);
            let g = GaugeTransform::random(cx, conn.group(), 1.0, &mut rng);
            let q0 = gauge_q(conn)?;
            let q1 = gauge_q(&apply_gauge(conn, &g)?)?;
            let d = q0.values.iter().zip(&q1.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            CheckEntry::upper(name, "Q is gauge invariant", digest, d, 1e-12)
        }
        "bianchi" => {
            let r = bianchi_residual(field.conn(name)?)?;
            CheckEntry::upper(name, "cube holonomy identity", digest, r.max_exact_defect, 1e-12)
        }
        "weak-residual" => {
            let w = weak_residual(field.conn(name)?, model, 8, cfg.seed)?;
            CheckEntry::upper(name, "weak Euler-Lagrange residual", digest, w, 1e-6)
        }
        "commutation" => {
            let (c, scale) = match field {
                Field::Flow { phi, .. } => (phi.clone(), phi.max_abs()),
                Field::Gauge { conn, .. } => {
                    let a = conn.potential()?;
                    let s = a.max_abs();
                    (a, s)
                }
            };
            let h = cx.spacing()[0];
            let r = commutation_check(cx, &c, 0, h)?;
            let m = r.max_diff_d.max(r.max_diff_delta.unwrap_or(0.0));
            let inv_h2 = 1.0 / (h * h);
            CheckEntry::upper(name, "difference quotients commute with d and delta", digest, m, 1e-10 * scale.max(1.0) * inv_h2)
        }
        "gaffney" => {
            let a = match field {
                Field::Flow { omega, .. } => omega.clone(),
                Field::Gauge { conn, .. } => conn.potential()?,
            };
            let a = if a.ncomp() == 1 {
                a
            } else {
                let vals = (0..a.num_cells()).map(|e| a.get(e, 0)).collect();
                Cochain::from_values(cx, 1, vals)?
            };
            let r = gaffney_ratio(cx, &a)?;
            extra.insert("report".into(), serde_json::to_value(&r).expect("serializes"));
            CheckEntry::upper(name, "gradient bounded by d, delta and L2", digest, r.full_ratio, 10.0)
        }
        other => return Err(CliError::Usage(format!("unknown check {other:?}"))),
    })
}

fn verify_cmd(
    cfg: &RunConfig,
    checks: &[String],
    input: Option<&Path>,
    art: &mut Artifacts,
    report: &mut BTreeMap<String, Value>,
) -> Result<bool, CliError> {
    for c in checks {
        if !crate::config::CHECKS.contains(&c.as_str()) {
            return Err(CliError::Usage(format!("unknown check {c:?}")));
        }
    }
    let field = build_field(cfg, input, report)?;
    let results: Vec<(String, Result<(CheckEntry, BTreeMap<String, Value>), CliError>)> = checks
        .par_iter()
        .map(|c| {
            let mut extra = BTreeMap::new();
            let r = run_check(c, cfg, &field, &mut extra).map(|e| (e, extra));
            (c.clone(), r)
        })
        .collect();
    let mut vr = VerificationReport::default();
    let mut details = BTreeMap::new();
    for (name, r) in results {
        let (entry, extra) = r?;
        if name == "campanato" {
            if let Some(s) = &entry.series {
                art.write("campanato.csv", io::series_csv("r,seminorm", s).as_bytes())?;
            }
        }
        if !extra.is_empty() {
            details.insert(name, Value::Object(extra.into_iter().collect()));
        }
        vr.push(entry);
    }
    art.write_q(field.complex(), &field.q()?)?;
    let pass = vr.all_pass();
    report.insert("checks".into(), serde_json::to_value(&vr.checks).expect("serializes"));
    if !details.is_empty() {
        report.insert("details".into(), serde_json::to_value(details).expect("serializes"));
    }
    Ok(pass)
}

fn report_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let cx = cfg.grid.build()?;
    let qpath = art.dir.join("q.bin");
    if qpath.exists() {
        let c = io::cochain_from_bytes(&cx, &io::read_bytes(&qpath)?)?;
        let q = CellField { ncomp: 1, values: c.into_values() };
        art.write("q.ppm", &io::heatmap_ppm(&cx, &q, 0, ppm_scale(&cx)))?;
    }
    let rpath = art.dir.join("report.json");
    if rpath.exists() {
        let text = io::read_bytes(&rpath)?;
        let v: Value = serde_json::from_slice(&text).map_err(|e| IoError::Format { line: e.line(), msg: e.to_string() })?;
        if let Some(checks) = v.get("checks").and_then(Value::as_array) {
            for c in checks {
                let (Some(name), Some(series)) = (c.get("check").and_then(Value::as_str), c.get("series")) else {
                    continue;
                };
                let rows: Vec<(f64, f64)> = serde_json::from_value(series.clone()).unwrap_or_default();
                art.write(&format!("{name}.csv"), io::series_csv(series_header(name), &rows).as_bytes())?;
            }
        }
    }
    Ok(())
}

fn series_header(check: &str) -> &'static str {
    match check {
        "campanato" | "gauge-campanato" => "r,seminorm",
        "sibner" => "alpha_min_eig,alpha_max_eig",
        _ => "x,y",
    }
}
