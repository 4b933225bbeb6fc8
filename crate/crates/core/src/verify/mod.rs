//! Numerical checks of analytic statements on computed fields.

pub mod decay;
pub mod difference;
pub mod elliptic;
pub mod sibner;

use crate::cochain::DecError;
use crate::density::DensityError;
use crate::gauge::GaugeError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use decay::{campanato_decay_fit, gauge_invariance_campanato, DecayFit, GaugeCampanatoReport};
pub use difference::{commutation_check, difference_quotient, gaffney_ratio, CommutationReport, GaffneyReport};
pub use elliptic::{elliptic_inequality_check, EllipticInput, EllipticReport};
pub use sibner::{sibner_decomposition, MeanValueSample, SamplePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("need at least {need} usable radii, got {got}")]
    TooFewRadii { got: usize, need: usize },
    #[error("step {step} is not a positive multiple of the spacing {h}")]
    Step { step: f64, h: f64 },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Dec(#[from] DecError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}

/// One named check. `margin` is positive when the check passes with room
/// to spare.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub check: String,
    pub anchor: String,
    pub inputs_digest: String,
    pub measured: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<(f64, f64)>>,
}

fn finite(x: f64) -> f64 {
    if x.is_nan() {
        -f64::MAX
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}

impl CheckEntry {
    /// Passes when `measured <= threshold`.
    pub fn upper(check: &str, anchor: &str, digest: String, measured: f64, threshold: f64) -> Self {
        let pass = measured <= threshold;
        CheckEntry {
            check: check.into(),
            anchor: anchor.into(),
            inputs_digest: digest,
            measured: finite(measured),
            threshold: finite(threshold),
            margin: finite(threshold - measured),
            pass,
            series: None,
        }
    }

    /// Passes when `measured >= threshold`.
    pub fn lower(check: &str, anchor: &str, digest: String, measured: f64, threshold: f64) -> Self {
        let pass = measured >= threshold;
        CheckEntry {
            check: check.into(),
            anchor: anchor.into(),
            inputs_digest: digest,
            measured: finite(measured),
            threshold: finite(threshold),
            margin: finite(measured - threshold),
            pass,
            series: None,
        }
    }

    pub fn with_series(mut self, series: Vec<(f64, f64)>) -> Self {
        self.series = Some(series.into_iter().map(|(a, b)| (finite(a), finite(b))).collect());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, entry: CheckEntry) {
        self.checks.push(entry);
        self.checks.sort_by(|a, b| a.check.cmp(&b.check));
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// SHA-256 of the little-endian bytes of a float slice, hex encoded.
pub fn digest_f64s(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(32);
        let s: f64 = q.iter().map(|(t, w)| w * t.powi(40)).sum();
        assert!((s - 1.0 / 41.0).abs() < 1e-15);
        let total: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn report_is_sorted_and_finite() {
        let mut r = VerificationReport::default();
        r.push(CheckEntry::upper("b", "x", String::new(), f64::NAN, 1.0));
        r.push(CheckEntry::lower("a", "x", String::new(), 2.0, 1.0));
        assert_eq!(r.checks[0].check, "a");
        assert!(!r.all_pass());
        assert!(r.checks[1].margin.is_finite());
    }
}
