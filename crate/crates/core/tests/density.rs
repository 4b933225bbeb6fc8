use nlhodge::density::{certify_condition2, DensityError, DensityModel};
use proptest::prelude::*;

fn fd(f: impl Fn(f64) -> f64, q: f64, h: f64) -> f64 {
    (f(q + h) - f(q - h)) / (2.0 * h)
}

proptest! {
    #[test]
    fn polytropic_derivatives_match_differences(gamma in 1.05f64..4.0, t in 0.01f64..0.9) {
        let m = DensityModel::polytropic(gamma).unwrap();
        let q = t * m.q_max();
        let h = 1e-6 * m.q_max();
        let drho = fd(|x| m.rho(x).unwrap(), q, h);
        prop_assert!((drho - m.drho(q).unwrap()).abs() <= 1e-6 * drho.abs().max(1.0));
        let rho = fd(|x| m.stored_energy(x).unwrap(), q, h);
        prop_assert!((rho - m.rho(q).unwrap()).abs() <= 1e-6 * rho.abs().max(1.0));
        let margin = m.rho(q).unwrap() + 2.0 * q * m.drho(q).unwrap();
        prop_assert!((margin - m.ellipticity_margin(q).unwrap()).abs() <= 1e-12 * margin.abs().max(1.0));
    }

    #[test]
    fn margin_changes_sign_at_the_sonic_value(gamma in 1.05f64..4.0, t in 0.0f64..0.99) {
        let m = DensityModel::polytropic(gamma).unwrap();
        let c = m.q_crit().unwrap();
        prop_assert!((c - 2.0 / (gamma + 1.0)).abs() < 1e-15);
        prop_assert!(m.ellipticity_margin(t * c).unwrap() > 0.0);
        let above = c + t * (m.q_max() - c) * 0.99 + 1e-9;
        prop_assert!(m.ellipticity_margin(above).unwrap() < 0.0);
    }

    #[test]
    fn minimal_surface_is_elliptic_everywhere(q in 0.0f64..1e4) {
        let m = DensityModel::MinimalSurface;
        prop_assert!(m.ellipticity_margin(q).unwrap() > 0.0);
        prop_assert!((m.ellipticity_margin(q).unwrap() - (1.0 + q).powf(-1.5)).abs() < 1e-15);
    }
}

#[test]
fn subsonic_interval_certifies() {
    let m = DensityModel::polytropic(1.4).unwrap();
    let cert = certify_condition2(&m, (0.0, 0.9 * m.q_crit().unwrap()), 0.0, 0.0, 2000).unwrap();
    assert!(cert.pass && cert.failure_q.is_none());
    assert!(cert.big_k >= 1.0 && cert.big_k.is_finite());
}

#[test]
fn minimal_surface_needs_negative_q_weight() {
    let m = DensityModel::MinimalSurface;
    let with = certify_condition2(&m, (0.0, 100.0), -1.5, 1.0, 1000);
    assert!(matches!(with, Err(DensityError::Parameter(_))));
    let flat = certify_condition2(&m, (0.0, 100.0), 0.0, 0.0, 1000).unwrap();
    assert!(flat.pass);
    assert!((flat.big_k - 101f64.powf(1.5)).abs() < 1e-6 * flat.big_k);
}

#[test]
fn table_matches_polytropic_closely() {
    let exact = DensityModel::polytropic(2.0).unwrap();
    let qs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.02).collect();
    let rho: Vec<f64> = qs.iter().map(|&q| exact.rho(q).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.csv");
    let text: String = std::iter::once("# Q, rho\n".to_string())
        .chain(qs.iter().zip(&rho).map(|(q, r)| format!("{q:?}, {r:?}\n")))
        .collect();
    std::fs::write(&path, text).unwrap();
    let tab = DensityModel::from_table_file(&path).unwrap();
    assert_eq!(tab.q_max(), 0.8);
    for i in 0..80 {
        let q = i as f64 * 0.01;
        assert!((tab.rho(q).unwrap() - exact.rho(q).unwrap()).abs() < 1e-6);
        assert!((tab.stored_energy(q).unwrap() - exact.stored_energy(q).unwrap()).abs() < 1e-6);
    }
    assert!(matches!(tab.rho(0.81), Err(DensityError::Domain { .. })));
}

#[test]
fn malformed_tables_are_rejected() {
    assert!(DensityModel::tabulated(vec![0.1, 1.0], vec![1.0, 0.5]).is_err());
    assert!(DensityModel::tabulated(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "0 1\n0.5 x\n").unwrap();
    match DensityModel::from_table_file(&path) {
        Err(DensityError::Table(msg)) => assert!(msg.contains("line 2"), "{msg}"),
        other => panic!("{other:?}"),
    }
}
