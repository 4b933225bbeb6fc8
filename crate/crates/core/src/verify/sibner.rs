//! Mean-value decomposition of the constitutive map
//! G^J(x, w) = sqrt(g) g^{IJ} rho(Q(w)) w_I.

use super::{gauss_legendre, VerifyError};
use crate::complex::{orientations, PointMetric};
use crate::density::DensityModel;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// A point with its metric.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub metric: PointMetric,
}

impl SamplePoint {
    pub fn flat(x: Vec<f64>) -> Self {
        let n = x.len();
        SamplePoint { x, metric: PointMetric::flat(n) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanValueSample {
    pub degree: usize,
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Row-major, rows indexed by J and columns by I.
    pub alpha: Vec<f64>,
    /// Row-major, one row per form component, one column per coordinate.
    pub beta: Vec<f64>,
    pub alpha_min_eig: f64,
    pub alpha_max_eig: f64,
    /// Relative residual of G(xi, mu) - G(eta, tau) = alpha (mu - tau) + beta (xi - eta).
    pub identity_residual: f64,
    /// |beta| / (|mu| + |tau|).
    pub beta_constant: f64,
    pub segment_q_min: f64,
    pub segment_q_max: f64,
}

struct FormMetric {
    sqrt_g: f64,
    gij: DMatrix<f64>,
}

fn form_metric(pm: &PointMetric, p: usize) -> FormMetric {
    let masks = orientations(pm.n, p);
    let m = masks.len();
    let gij = DMatrix::from_fn(m, m, |i, j| pm.form_inner(masks[i], masks[j]));
    FormMetric { sqrt_g: pm.sqrt_g, gij }
}

fn constitutive(fm: &FormMetric, model: &DensityModel, w: &DVector<f64>) -> Result<DVector<f64>, VerifyError> {
    let gw = &fm.gij * w;
    let q = w.dot(&gw);
    Ok(gw * (fm.sqrt_g * model.rho(q)?))
}

fn jacobian(fm: &FormMetric, model: &DensityModel, w: &DVector<f64>) -> Result<DMatrix<f64>, VerifyError> {
    let gw = &fm.gij * w;
    let q = w.dot(&gw);
    let (rho, drho) = model.rho_drho(q)?;
    Ok((&fm.gij * rho + &gw * gw.transpose() * (2.0 * drho)) * fm.sqrt_g)
}

/// Decompose G(xi, mu) - G(eta, tau) into alpha (mu - tau) + beta (xi - eta).
///
/// alpha integrates the Jacobian of G at xi along the segment from tau to
/// mu with 32-point Gauss-Legendre; beta is the minimum-norm matrix
/// carrying xi - eta to G(xi, tau) - G(eta, tau).
pub fn sibner_decomposition(
    model: &DensityModel,
    degree: usize,
    xi: &SamplePoint,
    eta: &SamplePoint,
    mu: &[f64],
    tau: &[f64],
) -> Result<MeanValueSample, VerifyError> {
    let n = xi.metric.n;
    if eta.metric.n != n || xi.x.len() != n || eta.x.len() != n || degree > n {
        return Err(VerifyError::Shape("points must share the dimension".into()));
    }
    let m = orientations(n, degree).len();
    if mu.len() != m || tau.len() != m {
        return Err(VerifyError::Shape(format!("forms need {m} components")));
    }
    let fx = form_metric(&xi.metric, degree);
    let fe = form_metric(&eta.metric, degree);
    let mu_v = DVector::from_column_slice(mu);
    let tau_v = DVector::from_column_slice(tau);
    let diff = &mu_v - &tau_v;

    // Integrate the deviation from the Jacobian at tau, so alpha is exact
    // whenever the Jacobian is constant along the segment.
    let j0 = jacobian(&fx, model, &tau_v)?;
    let mut dev = DMatrix::zeros(m, m);
    for (t, w) in gauss_legendre(32) {
        let wt = &tau_v + &diff * t;
        dev += (jacobian(&fx, model, &wt)? - &j0) * w;
    }
    let alpha = j0 + dev;

    let g_xi_mu = constitutive(&fx, model, &mu_v)?;
    let g_xi_tau = constitutive(&fx, model, &tau_v)?;
    let g_eta_tau = constitutive(&fe, model, &tau_v)?;
    let dx = DVector::from_iterator(n, xi.x.iter().zip(&eta.x).map(|(a, b)| a - b));
    let rem = &g_xi_tau - &g_eta_tau;
    let dx2 = dx.norm_squared();
    let beta = if dx2 > 0.0 { &rem * dx.transpose() / dx2 } else { DMatrix::zeros(m, n) };

    let lhs = &g_xi_mu - &g_eta_tau;
    let rhs = &alpha * &diff + &beta * &dx;
    let scale = lhs.norm().max(g_xi_mu.norm()).max(g_eta_tau.norm()).max(f64::MIN_POSITIVE);
    let identity_residual = (lhs - rhs).norm() / scale;

    let sym = (&alpha + alpha.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let alpha_min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha_max_eig = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Q along the segment is a convex quadratic a t^2 + b t + c.
    let gd = &fx.gij * &diff;
    let a = diff.dot(&gd);
    let b = 2.0 * tau_v.dot(&gd);
    let c = tau_v.dot(&(&fx.gij * &tau_v));
    let qt = |t: f64| a * t * t + b * t + c;
    let mut segment_q_min = qt(0.0).min(qt(1.0));
    if a > 0.0 {
        let tv = -b / (2.0 * a);
        if (0.0..=1.0).contains(&tv) {
            segment_q_min = segment_q_min.min(qt(tv));
        }
    }
    let segment_q_max = qt(0.0).max(qt(1.0));

    let denom = mu_v.norm() + tau_v.norm();
    let beta_constant = if denom > 0.0 { beta.norm() / denom } else { 0.0 };

    Ok(MeanValueSample {
        degree,
        mu: mu.to_vec(),
        tau: tau.to_vec(),
        xi: xi.x.clone(),
        eta: eta.x.clone(),
        alpha: alpha.transpose().as_slice().to_vec(),
        beta: beta.transpose().as_slice().to_vec(),
        alpha_min_eig,
        alpha_max_eig,
        identity_residual,
        beta_constant,
        segment_q_min,
        segment_q_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density_gives_identity() {
        let p = SamplePoint::flat(vec![0.1, 0.2]);
        let s = sibner_decomposition(&DensityModel::Constant, 1, &p, &p, &[0.3, -1.0], &[2.0, 0.5]).unwrap();
        assert_eq!(s.alpha, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(s.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn polytropic_eigenvalues_at_half() {
        let model = DensityModel::polytropic(2.0).unwrap();
        let p = SamplePoint::flat(vec![0.0, 0.0, 0.0]);
        let w = [0.5f64.sqrt(), 0.0, 0.0];
        let s = sibner_decomposition(&model, 1, &p, &p, &w, &w).unwrap();
        assert!((s.alpha_max_eig - 0.75).abs() < 1e-14);
        assert!((s.alpha_min_eig - 0.25).abs() < 1e-14);
    }
}
