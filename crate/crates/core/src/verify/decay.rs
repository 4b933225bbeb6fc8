//! Power-law fits of Campanato seminorms and their behavior under gauge
//! transformations.

use super::VerifyError;
use crate::campanato::{ball_l2_squared, campanato_seminorm};
use crate::cochain::{to_cell_field, CellField};
use crate::complex::Complex;
use crate::gauge::{apply_gauge, curvature, GaugeTransform, LatticeConnection};
use serde::Serialize;

/// Seminorms below this fraction of the ball's squared L2 norm count as
/// round-off.
const ZERO_REL: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of log seminorm against log radius; None for a constant field.
    pub slope: Option<f64>,
    /// (slope - n) / 2.
    pub exponent: Option<f64>,
    /// exp(intercept).
    pub constant: Option<f64>,
    /// Root-mean-square residual of the log fit.
    pub fit_residual: f64,
    /// True when every seminorm vanishes to round-off.
    pub constant_field: bool,
    /// All (radius, seminorm) pairs, including the excluded ones.
    pub series: Vec<(f64, f64)>,
    pub used: usize,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / m).sqrt();
    (slope, icpt, rms)
}

/// Fit seminorm(r) ~ C r^slope, dropping the `skip` smallest radii.
pub fn campanato_decay_fit(
    cx: &Complex,
    field: &CellField,
    center: &[f64],
    radii: &[f64],
    skip: usize,
) -> Result<DecayFit, VerifyError> {
    let mut r: Vec<f64> = radii.to_vec();
    r.sort_by(f64::total_cmp);
    r.dedup();
    let mut series = Vec::with_capacity(r.len());
    let mut all_zero = true;
    for &radius in &r {
        let s = campanato_seminorm(cx, field, center, radius)?;
        let l2 = ball_l2_squared(cx, field, center, radius)?;
        if s > ZERO_REL * l2 {
            all_zero = false;
        }
        series.push((radius, s));
    }
    let usable: Vec<(f64, f64)> = series.iter().skip(skip).cloned().collect();
    if usable.len() < 4 {
        return Err(VerifyError::TooFewRadii { got: usable.len(), need: 4 });
    }
    if all_zero {
        return Ok(DecayFit {
            slope: None,
            exponent: None,
            constant: None,
            fit_residual: 0.0,
            constant_field: true,
            series,
            used: usable.len(),
        });
    }
    let x: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, icpt, rms) = linear_fit(&x, &y);
    Ok(DecayFit {
        slope: Some(slope),
        exponent: Some((slope - cx.dim() as f64) / 2.0),
        constant: Some(icpt.exp()),
        fit_residual: rms,
        constant_field: false,
        series,
        used: usable.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeCampanatoReport {
    pub radii: Vec<f64>,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    /// sup over the ball of |g(x) g(center)^{-1} - I|.
    pub modulus: Vec<f64>,
    /// Smallest C with after <= (1 + mod)^2 before + C mod^2 |F|^2 on every
    /// ball; zero when the first term already suffices.
    pub measured_constant: f64,
    /// Largest relative seminorm change (meaningful for constant gauges).
    pub max_relative_change: f64,
    pub fit_before: DecayFit,
    pub fit_after: DecayFit,
    /// |exponent after - exponent before|, when both fits are non-constant.
    pub exponent_shift: Option<f64>,
}

/// Campanato seminorms of the cell-averaged curvature before and after a
/// gauge transformation, on balls around `center`.
pub fn gauge_invariance_campanato(
    conn: &LatticeConnection,
    gauge: &GaugeTransform,
    center: &[f64],
    radii: &[f64],
    skip: usize,
) -> Result<GaugeCampanatoReport, VerifyError> {
    let cx = conn.complex();
    let n = cx.dim();
    let f0 = to_cell_field(cx, &curvature(conn)?);
    let moved = apply_gauge(conn, gauge)?;
    let f1 = to_cell_field(cx, &curvature(&moved)?);

    let mut sigma = 0;
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; n];
    let dist = |x: &[f64]| x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    for v in 0..cx.num_vertices() {
        cx.vertex_coords(v, &mut x);
        let d = dist(&x);
        if d < best {
            best = d;
            sigma = v;
        }
    }
    let g_sigma_inv = gauge.elems[sigma].inverse();

    let mut r: Vec<f64> = radii.to_vec();
    r.sort_by(f64::total_cmp);
    r.dedup();
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut modulus = Vec::new();
    let mut measured: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &radius in &r {
        let s0 = campanato_seminorm(cx, &f0, center, radius)?;
        let s1 = campanato_seminorm(cx, &f1, center, radius)?;
        let l2 = ball_l2_squared(cx, &f0, center, radius)?;
        let mut m: f64 = 0.0;
        for v in 0..cx.num_vertices() {
            cx.vertex_coords(v, &mut x);
            if dist(&x) <= radius * (1.0 + 1e-9) {
                m = m.max((gauge.elems[v] * g_sigma_inv).distance_from_identity());
            }
        }
        let excess = s1 - (1.0 + m).powi(2) * s0;
        if excess > 0.0 {
            let denom = m * m * l2;
            measured = if denom > 0.0 { measured.max(excess / denom) } else { f64::INFINITY };
        }
        if s0 > 0.0 {
            max_rel = max_rel.max((s1 - s0).abs() / s0);
        } else if s1 > 0.0 {
            max_rel = f64::INFINITY;
        }
        before.push(s0);
        after.push(s1);
        modulus.push(m);
    }
    let fit_before = campanato_decay_fit(cx, &f0, center, &r, skip)?;
    let fit_after = campanato_decay_fit(cx, &f1, center, &r, skip)?;
    let exponent_shift = match (fit_before.exponent, fit_after.exponent) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    Ok(GaugeCampanatoReport {
        radii: r,
        before,
        after,
        modulus,
        measured_constant: measured,
        max_relative_change: max_rel,
        fit_before,
        fit_after,
        exponent_shift,
    })
}
