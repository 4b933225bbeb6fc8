//! Strict INI-style run configuration.
//!
//! ```text
//! [run]
//! name = laplace
//! seed = 7
//!
//! [grid]
//! dims = 32, 32
//!
//! [density]
//! kind = polytropic
//! gamma = 1.4
//! ```

use crate::complex::{Complex, ComplexBuilder, MetricSpec};
use crate::density::DensityModel;
use crate::gauge::Group;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate key {key} on lines {first} and {second}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("line {line}: {key}: {msg}")]
    Type { line: usize, key: String, msg: String },
    #[error("missing required key {0}")]
    Missing(String),
    #[error("line {line}: {key}: {msg}")]
    Invalid { line: usize, key: String, msg: String },
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["name", "mode", "seed", "output"]),
    ("grid", &["dims", "spacing", "origin", "periodic", "metric"]),
    ("density", &["kind", "gamma", "table_path"]),
    ("flow", &["slope", "perturbation", "lambda", "tol", "max_iters", "q_cap_epsilon", "cg_rtol"]),
    ("gauge", &["group", "init", "amplitude", "boundary", "tol", "max_iters", "initial_step"]),
    ("gauge_fix", &["mode", "tol", "max_sweeps", "origin"]),
    ("verify", &["checks", "field", "k", "q", "c0", "samples", "radii", "skip"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SolveFlow,
    SolveGauge,
    GaugeFix,
    Verify,
    Report,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveFlow => "solve-flow",
            Mode::SolveGauge => "solve-gauge",
            Mode::GaugeFix => "gauge-fix",
            Mode::Verify => "verify",
            Mode::Report => "report",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "solve-flow" => Mode::SolveFlow,
            "solve-gauge" => Mode::SolveGauge,
            "gauge-fix" => Mode::GaugeFix,
            "verify" => Mode::Verify,
            "report" => Mode::Report,
            _ => return Err(format!("unknown mode {s:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Identity,
    RoundSphere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
    pub metric: MetricKind,
}

impl GridSpec {
    pub fn build(&self) -> Result<Complex, crate::complex::ComplexError> {
        let b = ComplexBuilder::new(&self.dims).spacings(&self.spacing).origin(&self.origin).periodic(&self.periodic);
        match self.metric {
            MetricKind::Identity => b.build(),
            MetricKind::RoundSphere => b.metric(MetricSpec::RoundSphere).build(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Constant,
    Polytropic(f64),
    MinimalSurface,
    Tabulated(PathBuf),
}

impl DensitySpec {
    pub fn build(&self) -> Result<DensityModel, crate::density::DensityError> {
        match self {
            DensitySpec::Constant => Ok(DensityModel::Constant),
            DensitySpec::Polytropic(g) => DensityModel::polytropic(*g),
            DensitySpec::MinimalSurface => Ok(DensityModel::MinimalSurface),
            DensitySpec::Tabulated(p) => DensityModel::from_table_file(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// Dirichlet data phi = slope . x on the whole boundary.
    pub slope: Vec<f64>,
    /// Amplitude of prod cos(pi x_i) added to the boundary data.
    pub perturbation: f64,
    /// Constant closed 1-form added to d phi.
    pub lambda: Vec<f64>,
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub q_cap_epsilon: f64,
    pub cg_rtol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeInit {
    Identity,
    Random,
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSpec {
    pub group: Group,
    pub init: GaugeInit,
    pub amplitude: f64,
    pub free_boundary: bool,
    pub tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixMode {
    Coulomb,
    Exponential,
}

impl FromStr for FixMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coulomb" => Ok(FixMode::Coulomb),
            "exponential" => Ok(FixMode::Exponential),
            _ => Err(format!("expected coulomb or exponential, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixSpec {
    pub mode: FixMode,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Vertex position of the exponential gauge origin; defaults to the
    /// middle of the grid.
    pub origin: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSource {
    Flow,
    Gauge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySpec {
    pub checks: Vec<String>,
    pub field: FieldSource,
    pub k: f64,
    pub q: f64,
    pub c0: f64,
    pub samples: usize,
    pub radii: Option<Vec<f64>>,
    pub skip: usize,
}

pub const CHECKS: &[&str] = &[
    "bianchi",
    "campanato",
    "commutation",
    "condition2",
    "elliptic",
    "gaffney",
    "gauge-campanato",
    "gauge-invariance",
    "sibner",
    "subsonic",
    "weak-residual",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub mode: Option<Mode>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub grid: GridSpec,
    pub density: DensitySpec,
    pub flow: FlowSpec,
    pub gauge: GaugeSpec,
    pub fix: FixSpec,
    pub verify: VerifySpec,
    echo: BTreeMap<String, String>,
}

struct Raw {
    entries: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or(ConfigError::Syntax { line, msg: "unterminated section header".into() })?
                    .trim();
                section = Some(
                    SCHEMA
                        .iter()
                        .find(|(n, _)| *n == name)
                        .map(|(n, _)| *n)
                        .ok_or(ConfigError::UnknownSection { line, name: name.into() })?,
                );
                continue;
            }
            let (k, v) = s.split_once('=').ok_or(ConfigError::Syntax { line, msg: "expected key = value".into() })?;
            let sec = section.ok_or(ConfigError::Syntax { line, msg: "key outside any section".into() })?;
            let key = k.trim();
            let full = format!("{sec}.{key}");
            let allowed = SCHEMA.iter().find(|(n, _)| *n == sec).unwrap().1;
            if !allowed.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: full });
            }
            if let Some(&(_, first)) = entries.get(&full) {
                return Err(ConfigError::Duplicate { key: full, first, second: line });
            }
            entries.insert(full, (v.trim().to_string(), line));
        }
        Ok(Raw { entries })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::Type { line: *line, key: key.into(), msg: e.to_string() }),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|p| p.trim().parse::<T>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|e| ConfigError::Type { line: *line, key: key.into(), msg: e.to_string() }),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { line: self.line(key), key: key.into(), msg: msg.into() }
    }
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Parse and validate a config file. Relative table paths resolve against
/// the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), msg: e.to_string() })?;
    parse_config_str(&text, path.parent())
}

pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let raw = Raw::parse(text)?;
    let name: String = raw.get("run.name")?.ok_or(ConfigError::Missing("run.name".into()))?;
    let mode = match raw.entries.get("run.mode") {
        None => None,
        Some((v, line)) => Some(
            v.parse::<Mode>().map_err(|msg| ConfigError::Type { line: *line, key: "run.mode".into(), msg })?,
        ),
    };
    let seed = raw.get("run.seed")?.unwrap_or(0u64);
    let output: Option<PathBuf> = raw.get::<String>("run.output")?.map(PathBuf::from);

    let dims: Vec<usize> = raw.list("grid.dims")?.ok_or(ConfigError::Missing("grid.dims".into()))?;
    let n = dims.len();
    if n == 0 || dims.iter().any(|&d| d == 0) {
        return Err(raw.invalid("grid.dims", "dimensions must be positive"));
    }
    let per_axis = |key: &str, v: Option<Vec<f64>>, default: Vec<f64>| -> Result<Vec<f64>, ConfigError> {
        match v {
            None => Ok(default),
            Some(v) if v.len() == 1 => Ok(vec![v[0]; n]),
            Some(v) if v.len() == n => Ok(v),
            Some(_) => Err(raw.invalid(key, format!("expected 1 or {n} values"))),
        }
    };
    let spacing = per_axis("grid.spacing", raw.list("grid.spacing")?, dims.iter().map(|&d| 1.0 / d as f64).collect())?;
    let origin = per_axis("grid.origin", raw.list("grid.origin")?, vec![0.0; n])?;
    let periodic = match raw.list::<bool>("grid.periodic")? {
        None => vec![false; n],
        Some(v) if v.len() == 1 => vec![v[0]; n],
        Some(v) if v.len() == n => v,
        Some(_) => return Err(raw.invalid("grid.periodic", format!("expected 1 or {n} values"))),
    };
    let metric = match raw.get::<String>("grid.metric")?.as_deref() {
        None | Some("identity") => MetricKind::Identity,
        Some("round-sphere") if n == 2 => MetricKind::RoundSphere,
        Some("round-sphere") => return Err(raw.invalid("grid.metric", "round-sphere needs a 2D grid")),
        Some(other) => return Err(raw.invalid("grid.metric", format!("unknown metric {other:?}"))),
    };

    let gamma: Option<f64> = raw.get("density.gamma")?;
    let table: Option<String> = raw.get("density.table_path")?;
    let density = match raw.get::<String>("density.kind")?.as_deref() {
        None | Some("constant") => DensitySpec::Constant,
        Some("polytropic") => {
            let g = gamma.ok_or(ConfigError::Missing("density.gamma".into()))?;
            if !(g > 1.0) {
                return Err(raw.invalid("density.gamma", format!("gamma must exceed 1, got {g}")));
            }
            DensitySpec::Polytropic(g)
        }
        Some("minimal-surface") => DensitySpec::MinimalSurface,
        Some("tabulated") => {
            let t = table.clone().ok_or(ConfigError::Missing("density.table_path".into()))?;
            let p = PathBuf::from(&t);
            DensitySpec::Tabulated(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            })
        }
        Some(other) => return Err(raw.invalid("density.kind", format!("unknown density {other:?}"))),
    };
    if gamma.is_some() && !matches!(density, DensitySpec::Polytropic(_)) {
        return Err(raw.invalid("density.gamma", "only used by polytropic densities"));
    }

    let flow = FlowSpec {
        slope: per_axis("flow.slope", raw.list("flow.slope")?, vec![0.0; n])?,
        perturbation: raw.get("flow.perturbation")?.unwrap_or(0.0),
        lambda: per_axis("flow.lambda", raw.list("flow.lambda")?, vec![0.0; n])?,
        tol: raw.get("flow.tol")?,
        max_iters: raw.get("flow.max_iters")?.unwrap_or(100),
        q_cap_epsilon: raw.get("flow.q_cap_epsilon")?.unwrap_or(0.05),
        cg_rtol: raw.get("flow.cg_rtol")?.unwrap_or(1e-14),
    };
    if !(flow.q_cap_epsilon > 0.0 && flow.q_cap_epsilon < 1.0) {
        return Err(raw.invalid("flow.q_cap_epsilon", "must lie in (0, 1)"));
    }

    let group = match raw.entries.get("gauge.group") {
        None => Group::SU2,
        Some((v, line)) => Group::parse(v)
            .map_err(|e| ConfigError::Type { line: *line, key: "gauge.group".into(), msg: e.to_string() })?,
    };
    let init = match raw.get::<String>("gauge.init")?.as_deref() {
        None | Some("random") => GaugeInit::Random,
        Some("identity") => GaugeInit::Identity,
        Some("smooth") => GaugeInit::Smooth,
        Some(other) => return Err(raw.invalid("gauge.init", format!("unknown init {other:?}"))),
    };
    let free_boundary = match raw.get::<String>("gauge.boundary")?.as_deref() {
        None | Some("fixed") => false,
        Some("free") => true,
        Some(other) => return Err(raw.invalid("gauge.boundary", format!("expected fixed or free, got {other:?}"))),
    };
    let gauge = GaugeSpec {
        group,
        init,
        amplitude: raw.get("gauge.amplitude")?.unwrap_or(0.05),
        free_boundary,
        tol: raw.get("gauge.tol")?.unwrap_or(1e-8),
        max_iters: raw.get("gauge.max_iters")?.unwrap_or(20_000),
        initial_step: raw.get("gauge.initial_step")?.unwrap_or(1e-3),
    };

    let fix_mode = match raw.entries.get("gauge_fix.mode") {
        None => FixMode::Coulomb,
        Some((v, line)) => {
            v.parse().map_err(|msg| ConfigError::Type { line: *line, key: "gauge_fix.mode".into(), msg })?
        }
    };
    let fix_origin: Option<Vec<i64>> = raw.list("gauge_fix.origin")?;
    if let Some(o) = &fix_origin {
        if o.len() != n {
            return Err(raw.invalid("gauge_fix.origin", format!("expected {n} indices")));
        }
    }
    let fix = FixSpec {
        mode: fix_mode,
        tol: raw.get("gauge_fix.tol")?.unwrap_or(1e-10),
        max_sweeps: raw.get("gauge_fix.max_sweeps")?.unwrap_or(5000),
        origin: fix_origin,
    };

    let checks: Vec<String> = raw.list("verify.checks")?.unwrap_or_default();
    for c in &checks {
        if !CHECKS.contains(&c.as_str()) {
            return Err(raw.invalid("verify.checks", format!("unknown check {c:?}")));
        }
    }
    let field = match raw.get::<String>("verify.field")?.as_deref() {
        None | Some("flow") => FieldSource::Flow,
        Some("gauge") => FieldSource::Gauge,
        Some(other) => return Err(raw.invalid("verify.field", format!("expected flow or gauge, got {other:?}"))),
    };
    let verify = VerifySpec {
        checks,
        field,
        k: raw.get("verify.k")?.unwrap_or(0.1),
        q: raw.get("verify.q")?.unwrap_or(1.0),
        c0: raw.get("verify.c0")?.unwrap_or(1.0),
        samples: raw.get("verify.samples")?.unwrap_or(1000),
        radii: raw.list("verify.radii")?,
        skip: raw.get("verify.skip")?.unwrap_or(2),
    };
    if verify.k <= 0.0 {
        return Err(raw.invalid("verify.k", "k must be positive"));
    }

    let mut echo = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        echo.insert(k.to_string(), v);
    };
    put("run.name", name.clone());
    put("run.mode", mode.map_or("-".into(), |m| m.name().into()));
    put("run.seed", seed.to_string());
    put("grid.dims", join(&dims));
    put("grid.spacing", join(&spacing));
    put("grid.origin", join(&origin));
    put("grid.periodic", join(&periodic));
    put("grid.metric", format!("{metric:?}"));
    put(
        "density.kind",
        match &density {
            DensitySpec::Constant => "constant".into(),
            DensitySpec::Polytropic(g) => format!("polytropic gamma={g:?}"),
            DensitySpec::MinimalSurface => "minimal-surface".into(),
            DensitySpec::Tabulated(_) => format!("tabulated {}", table.clone().unwrap_or_default()),
        },
    );
    put("flow.slope", join(&flow.slope));
    put("flow.perturbation", format!("{:?}", flow.perturbation));
    put("flow.lambda", join(&flow.lambda));
    put("flow.tol", flow.tol.map_or("default".into(), |t| format!("{t:?}")));
    put("flow.max_iters", flow.max_iters.to_string());
    put("flow.q_cap_epsilon", format!("{:?}", flow.q_cap_epsilon));
    put("flow.cg_rtol", format!("{:?}", flow.cg_rtol));
    put("gauge.group", gauge.group.name().into());
    put("gauge.init", format!("{:?}", gauge.init));
    put("gauge.amplitude", format!("{:?}", gauge.amplitude));
    put("gauge.boundary", if gauge.free_boundary { "free" } else { "fixed" }.into());
    put("gauge.tol", format!("{:?}", gauge.tol));
    put("gauge.max_iters", gauge.max_iters.to_string());
    put("gauge.initial_step", format!("{:?}", gauge.initial_step));
    put("gauge_fix.mode", format!("{:?}", fix.mode));
    put("gauge_fix.tol", format!("{:?}", fix.tol));
    put("gauge_fix.max_sweeps", fix.max_sweeps.to_string());
    put("gauge_fix.origin", fix.origin.as_ref().map_or("center".into(), |o| join(o)));
    put("verify.checks", verify.checks.join(","));
    put("verify.field", format!("{:?}", verify.field));
    put("verify.k", format!("{:?}", verify.k));
    put("verify.q", format!("{:?}", verify.q));
    put("verify.c0", format!("{:?}", verify.c0));
    put("verify.samples", verify.samples.to_string());
    put("verify.radii", verify.radii.as_ref().map_or("auto".into(), |r| join(r)));
    put("verify.skip", verify.skip.to_string());

    Ok(RunConfig {
        name,
        mode,
        seed,
        output,
        grid: GridSpec { dims, spacing, origin, periodic, metric },
        density,
        flow,
        gauge,
        fix,
        verify,
        echo,
    })
}

impl RunConfig {
    /// Every effective setting, defaults included, keyed by `section.key`.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.echo.insert("run.seed".into(), seed.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_flow_config_fills_defaults() {
        let c = parse_config_str("[run]\nname = t\n[grid]\ndims = 4, 8\n", None).unwrap();
        assert_eq!(c.grid.spacing, vec![0.25, 0.125]);
        assert_eq!(c.density, DensitySpec::Constant);
        assert_eq!(c.flow.max_iters, 100);
        assert_eq!(c.echo()["flow.q_cap_epsilon"], "0.05");
    }

    #[test]
    fn gamma_at_most_one_rejected() {
        let e = parse_config_str("[run]\nname=t\n[grid]\ndims=4\n[density]\nkind=polytropic\ngamma = 0.9\n", None);
        assert!(matches!(e, Err(ConfigError::Invalid { line: 7, .. })), "{e:?}");
    }

    #[test]
    fn duplicate_reports_both_lines() {
        let e = parse_config_str("[run]\nname=t\n\nname=u\n", None);
        assert_eq!(e, Err(ConfigError::Duplicate { key: "run.name".into(), first: 2, second: 4 }));
    }

    #[test]
    fn unknown_key_and_type_errors_carry_lines() {
        let e = parse_config_str("[run]\nname=t\nbogus=1\n", None);
        assert_eq!(e, Err(ConfigError::UnknownKey { line: 3, key: "run.bogus".into() }));
        let e = parse_config_str("[run]\nname=t\nseed=abc\n[grid]\ndims=3\n", None);
        assert!(matches!(e, Err(ConfigError::Type { line: 3, .. })));
        let e = parse_config_str("[run]\nname=t\n", None);
        assert_eq!(e, Err(ConfigError::Missing("grid.dims".into())));
    }
}
