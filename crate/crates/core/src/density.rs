//! Mass density models rho(Q), their antiderivatives, and certification of
//! the two-sided ellipticity bound on rho + 2 Q rho'.

use serde::Serialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("Q = {q} outside the density domain [0, {q_max})")]
    Domain { q: f64, q_max: f64 },
    #[error("invalid density parameter: {0}")]
    Parameter(String),
    #[error("density table: {0}")]
    Table(String),
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, DensityError> {
        let k = x.len();
        if k < 2 || y.len() != k {
            return Err(DensityError::Table("need at least two (Q, rho) nodes".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DensityError::Table("Q nodes must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..k - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut m = vec![0.0; k];
        if k == 2 {
            m[0] = del[0];
            m[1] = del[0];
        } else {
            for i in 1..k - 1 {
                if del[i - 1] * del[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    m[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            m[0] = edge_slope(h[0], h[1], del[0], del[1]);
            m[k - 1] = edge_slope(h[k - 2], h[k - 3], del[k - 2], del[k - 3]);
        }
        Ok(Pchip { x, y, m })
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[i]
            + (s3 - 2.0 * s2 + s) * h * self.m[i]
            + (-2.0 * s3 + 3.0 * s2) * self.y[i + 1]
            + (s3 - s2) * h * self.m[i + 1]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * self.y[i]
            + (3.0 * s2 - 4.0 * s + 1.0) * h * self.m[i]
            + (-6.0 * s2 + 6.0 * s) * self.y[i + 1]
            + (3.0 * s2 - 2.0 * s) * h * self.m[i + 1])
            / h
    }

    /// Integral from x[0] to t, exact for the cubic pieces.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let last = self.segment(t);
        for i in 0..last {
            let h = self.x[i + 1] - self.x[i];
            acc += h * (self.y[i] + self.y[i + 1]) / 2.0 + h * h * (self.m[i] - self.m[i + 1]) / 12.0;
        }
        let i = last;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        acc + h
            * ((0.5 * s4 - s3 + s) * self.y[i]
                + (0.25 * s4 - 2.0 / 3.0 * s3 + 0.5 * s2) * h * self.m[i]
                + (-0.5 * s4 + s3) * self.y[i + 1]
                + (0.25 * s4 - s3 / 3.0) * h * self.m[i + 1])
    }
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Constant,
    /// rho = (1 - (gamma-1) Q / 2)^(1/(gamma-1)), gamma > 1.
    Polytropic { gamma: f64 },
    /// rho = (1 + Q)^(-1/2).
    MinimalSurface,
    /// Monotone cubic interpolation of tabulated (Q, rho) nodes starting at Q = 0.
    Tabulated(Pchip),
}

impl DensityModel {
    pub fn polytropic(gamma: f64) -> Result<Self, DensityError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(DensityError::Parameter(format!("polytropic gamma must exceed 1, got {gamma}")));
        }
        Ok(DensityModel::Polytropic { gamma })
    }

    pub fn tabulated(q: Vec<f64>, rho: Vec<f64>) -> Result<Self, DensityError> {
        if q.first() != Some(&0.0) {
            return Err(DensityError::Table("first node must be at Q = 0".into()));
        }
        if rho.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(DensityError::Table("rho values must be positive and finite".into()));
        }
        Ok(DensityModel::Tabulated(Pchip::new(q, rho)?))
    }

    /// Read a two-column (Q, rho) table; '#' starts a comment, columns are
    /// separated by commas or whitespace.
    pub fn from_table_file(path: &Path) -> Result<Self, DensityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DensityError::Table(format!("{}: {e}", path.display())))?;
        let mut q = Vec::new();
        let mut rho = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| DensityError::Table(format!("line {}: cannot parse '{s}'", lineno + 1)))
            };
            if cols.len() != 2 {
                return Err(DensityError::Table(format!("line {}: expected 2 columns", lineno + 1)));
            }
            q.push(parse(cols[0])?);
            rho.push(parse(cols[1])?);
        }
        Self::tabulated(q, rho)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityModel::Constant => "constant",
            DensityModel::Polytropic { .. } => "polytropic",
            DensityModel::MinimalSurface => "minimal-surface",
            DensityModel::Tabulated(_) => "tabulated",
        }
    }

    /// Upper end of the domain of Q.
    pub fn q_max(&self) -> f64 {
        match self {
            DensityModel::Polytropic { gamma } => 2.0 / (gamma - 1.0),
            DensityModel::Tabulated(t) => t.x_max(),
            _ => f64::INFINITY,
        }
    }

    /// Sonic value of Q where rho + 2 Q rho' vanishes, when known in closed form.
    pub fn q_crit(&self) -> Option<f64> {
        match self {
            DensityModel::Polytropic { gamma } => Some(2.0 / (gamma + 1.0)),
            _ => None,
        }
    }

    /// Largest Q admitted by solvers: (1 - eps) times the sonic value, or
    /// (1 - eps) times the domain limit when no sonic value exists.
    pub fn q_cap(&self, eps: f64) -> f64 {
        match self.q_crit() {
            Some(c) => (1.0 - eps) * c,
            None => (1.0 - eps) * self.q_max(),
        }
    }

    fn check(&self, q: f64) -> Result<(), DensityError> {
        let q_max = self.q_max();
        let ok = match self {
            DensityModel::Tabulated(_) => q >= 0.0 && q <= q_max,
            _ => q >= 0.0 && q < q_max,
        };
        if ok {
            Ok(())
        } else {
            Err(DensityError::Domain { q, q_max })
        }
    }

    pub fn rho(&self, q: f64) -> Result<f64, DensityError> {
        self.check(q)?;
        Ok(match self {
            DensityModel::Constant => 1.0,
            DensityModel::Polytropic { gamma } => (1.0 - (gamma - 1.0) * q / 2.0).powf(1.0 / (gamma - 1.0)),
            DensityModel::MinimalSurface => 1.0 / (1.0 + q).sqrt(),
            DensityModel::Tabulated(t) => t.eval(q),
        })
    }

    pub fn drho(&self, q: f64) -> Result<f64, DensityError> {
        self.check(q)?;
        Ok(match self {
            DensityModel::Constant => 0.0,
            DensityModel::Polytropic { gamma } => {
                -0.5 * (1.0 - (gamma - 1.0) * q / 2.0).powf(1.0 / (gamma - 1.0) - 1.0)
            }
            DensityModel::MinimalSurface => -0.5 * (1.0 + q).powf(-1.5),
            DensityModel::Tabulated(t) => t.deriv(q),
        })
    }

    /// rho(Q) + 2 Q rho'(Q).
    pub fn ellipticity_margin(&self, q: f64) -> Result<f64, DensityError> {
        self.check(q)?;
        Ok(match self {
            DensityModel::Polytropic { gamma } => {
                let base = 1.0 - (gamma - 1.0) * q / 2.0;
                base.powf((2.0 - gamma) / (gamma - 1.0)) * (1.0 - (gamma + 1.0) * q / 2.0)
            }
            DensityModel::MinimalSurface => (1.0 + q).powf(-1.5),
            _ => self.rho(q)? + 2.0 * q * self.drho(q)?,
        })
    }

    /// Stored energy integrand: the integral of rho from 0 to Q.
    pub fn stored_energy(&self, q: f64) -> Result<f64, DensityError> {
        self.check(q)?;
        Ok(match self {
            DensityModel::Constant => q,
            DensityModel::Polytropic { gamma } => {
                (2.0 / gamma) * (1.0 - (1.0 - (gamma - 1.0) * q / 2.0).powf(gamma / (gamma - 1.0)))
            }
            DensityModel::MinimalSurface => 2.0 * ((1.0 + q).sqrt() - 1.0),
            DensityModel::Tabulated(t) => t.integral(q),
        })
    }

    /// (rho, rho') in one call.
    pub fn rho_drho(&self, q: f64) -> Result<(f64, f64), DensityError> {
        Ok((self.rho(q)?, self.drho(q)?))
    }
}

/// Outcome of sampling K^{-1}(Q+k)^q <= rho + 2 Q rho' <= K (Q+k)^q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityCertificate {
    pub q_lo: f64,
    pub q_hi: f64,
    pub k: f64,
    pub q: f64,
    pub samples: usize,
    /// Smallest K satisfying both bounds at all samples (infinite on failure).
    pub big_k: f64,
    pub margin_min: f64,
    pub margin_max: f64,
    pub pass: bool,
    /// First sampled Q where the bound cannot hold.
    pub failure_q: Option<f64>,
}

/// Certify the two-sided bound on an interval by dense sampling.
pub fn certify_condition2(
    model: &DensityModel,
    interval: (f64, f64),
    q: f64,
    k: f64,
    samples: usize,
) -> Result<EllipticityCertificate, DensityError> {
    let (lo, hi) = interval;
    if !(q >= 0.0 && k >= 0.0) {
        return Err(DensityError::Parameter(format!("q and k must be nonnegative, got q={q}, k={k}")));
    }
    if !(lo >= 0.0 && hi >= lo) {
        return Err(DensityError::Parameter(format!("invalid interval [{lo}, {hi}]")));
    }
    let samples = samples.max(1000);
    let mut cert = EllipticityCertificate {
        q_lo: lo,
        q_hi: hi,
        k,
        q,
        samples,
        big_k: f64::INFINITY,
        margin_min: f64::INFINITY,
        margin_max: f64::NEG_INFINITY,
        pass: false,
        failure_q: None,
    };
    let mut r_min = f64::INFINITY;
    let mut r_max: f64 = 0.0;
    for i in 0..samples {
        let t = if i + 1 == samples { hi } else { lo + (hi - lo) * i as f64 / (samples - 1) as f64 };
        let m = model.ellipticity_margin(t)?;
        cert.margin_min = cert.margin_min.min(m);
        cert.margin_max = cert.margin_max.max(m);
        let weight = (t + k).powf(q);
        if m <= 0.0 || weight <= 0.0 || !m.is_finite() {
            cert.failure_q = Some(t);
            return Ok(cert);
        }
        let r = m / weight;
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }
    cert.big_k = r_max.max(1.0 / r_min);
    cert.pass = cert.big_k.is_finite();
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polytropic_values() {
        let m = DensityModel::polytropic(2.0).unwrap();
        assert_eq!(m.rho(0.5).unwrap(), 0.75);
        assert_eq!(m.ellipticity_margin(0.5).unwrap(), 0.25);
        assert_eq!(m.stored_energy(1.0).unwrap(), 0.75);
        assert_eq!(DensityModel::polytropic(1.4).unwrap().rho(0.0).unwrap(), 1.0);
    }

    #[test]
    fn polytropic_domain_error_names_limit() {
        let m = DensityModel::polytropic(3.0).unwrap();
        assert_eq!(m.rho(1.0).unwrap_err(), DensityError::Domain { q: 1.0, q_max: 1.0 });
        assert!(DensityModel::polytropic(0.9).is_err());
        assert!(DensityModel::polytropic(1.0).is_err());
    }

    #[test]
    fn constant_model() {
        let m = DensityModel::Constant;
        assert_eq!(m.rho(7.3).unwrap(), 1.0);
        assert_eq!(m.drho(7.3).unwrap(), 0.0);
        assert_eq!(m.stored_energy(3.0).unwrap(), 3.0);
        assert_eq!(m.ellipticity_margin(42.0).unwrap(), 1.0);
    }

    #[test]
    fn certificate_passes_below_and_fails_past_sonic() {
        let m = DensityModel::polytropic(1.4).unwrap();
        let qc = m.q_crit().unwrap();
        let ok = certify_condition2(&m, (0.0, 0.9 * qc), 0.0, 0.0, 1000).unwrap();
        assert!(ok.pass);
        let expect = (1.0 / m.ellipticity_margin(0.9 * qc).unwrap()).max(1.0);
        assert!((ok.big_k - expect).abs() < 1e-12);
        let bad = certify_condition2(&m, (0.0, 1.1 * qc), 0.0, 0.0, 1000).unwrap();
        assert!(!bad.pass);
        let fq = bad.failure_q.unwrap();
        assert!(fq >= qc - 1e-12 && fq - qc <= 1.1 * qc / 999.0);
    }

    #[test]
    fn minimal_surface_certificate() {
        let m = DensityModel::MinimalSurface;
        let c = certify_condition2(&m, (0.0, 10.0), 0.0, 0.0, 1000).unwrap();
        assert!(c.pass);
        assert!((c.margin_min - 11f64.powf(-1.5)).abs() < 1e-15);
        assert_eq!(c.margin_max, 1.0);
    }

    #[test]
    fn pchip_reproduces_linear_data_and_integral() {
        let m = DensityModel::tabulated(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 0.75, 0.5, 0.0001]).unwrap();
        assert!((m.rho(0.25).unwrap() - 0.875).abs() < 1e-15);
        assert!((m.drho(0.3).unwrap() + 0.5).abs() < 1e-12);
        assert!((m.stored_energy(0.5).unwrap() - 0.4375).abs() < 1e-14);
        assert!(m.rho(2.5).is_err());
    }

    #[test]
    fn table_must_start_at_zero() {
        assert!(DensityModel::tabulated(vec![0.1, 1.0], vec![1.0, 0.5]).is_err());
    }
}
