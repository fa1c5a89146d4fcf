mod common;

use common::*;
use rand::Rng;
use ugc_core::archive::{load_model, save_model, ModelArchive};
use ugc_core::data::{average_runs, FamilyKind};
use ugc_core::gpr::{basis_expand, FittedGp};
use ugc_core::joints::{
    builtin_model, fit_family_model, fit_poly_baseline, gp_loo_rmse, poly_loo_rmse, select_hyper,
    training_set, GprConfig, HyperChoice, CURVE_BETA, SQUARE_SYM_BETA,
};

#[test]
fn square_prior_mean_matches_closed_form() {
    let m = builtin_model(FamilyKind::SquareWaveSymmetric).unwrap();
    for theta in [30.0, 60.0, 90.0, 120.0, 150.0] {
        let closed = 1.6940 + 0.0225 * theta - 0.0002 * theta * theta;
        let p = m.predict_force(theta, None).unwrap();
        assert!((p.force_n - closed).abs() < 1e-9);
    }
}

#[test]
fn curve_force_grows_with_thickness() {
    let m = builtin_model(FamilyKind::Curve).unwrap();
    for theta in (60..=140).step_by(10).map(f64::from) {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=24 {
            let t = 0.4 + 0.05 * k as f64;
            let f = m.predict_force(theta, Some(t)).unwrap().force_n;
            assert!(f >= prev, "θ={theta} T={t}");
            prev = f;
        }
    }
}

#[test]
fn published_coefficients_are_carried_verbatim() {
    let sq = builtin_model(FamilyKind::SquareWaveSymmetric).unwrap();
    assert_eq!(sq.force_model().beta(), &SQUARE_SYM_BETA);
    assert!((sq.force_model().noise_variance() - 0.2916 * 0.2916).abs() < 1e-15);
    let cv = builtin_model(FamilyKind::Curve).unwrap();
    assert_eq!(cv.force_model().beta(), &CURVE_BETA);
    assert!((cv.force_model().noise_variance() - 1.9272 * 1.9272).abs() < 1e-15);
}

#[test]
fn square_fixture_return_angle_profile() {
    let ds = average_runs(&square_dataset(1), 5.0).unwrap();
    let m = fit_family_model(&ds, FamilyKind::SquareWaveSymmetric, &GprConfig::default()).unwrap();
    assert_eq!(m.predict_return_angle(0.0, None).unwrap(), 180.0);
    let flat = m.predict_return_angle(60.0, None).unwrap();
    assert!((flat - 180.0).abs() < 1.5, "θ_r(60) = {flat}");
    let decayed = m.predict_return_angle(150.0, None).unwrap();
    assert!(decayed < 180.0);
    assert!(
        (decayed - square_return(150.0)).abs() < 2.0,
        "θ_r(150) = {decayed}"
    );
}

#[test]
fn fitted_predictions_track_averaged_measurements() {
    let ds = average_runs(&square_dataset(2), 5.0).unwrap();
    let m = fit_family_model(&ds, FamilyKind::SquareWaveSymmetric, &GprConfig::default()).unwrap();
    for s in &ds.samples {
        let p = m.predict_force(s.deformation_angle_deg, None).unwrap();
        let two_sigma = 2.0 * p.predictive_std();
        assert!(
            (p.force_n - s.force_n).abs() <= two_sigma,
            "θ={} predicted {} measured {} (2σ = {two_sigma})",
            s.deformation_angle_deg,
            p.force_n,
            s.force_n
        );
    }
}

#[test]
fn monotone_fixtures_give_monotone_models() {
    let sq = fit_family_model(
        &square_dataset(3),
        FamilyKind::SquareWaveSymmetric,
        &GprConfig::default(),
    )
    .unwrap();
    assert!(
        sq.predict_force(30.0, None).unwrap().force_n
            < sq.predict_force(120.0, None).unwrap().force_n
    );

    let cv = fit_family_model(
        &average_runs(&curve_dataset(4), 5.0).unwrap(),
        FamilyKind::Curve,
        &GprConfig::default(),
    )
    .unwrap();
    for t in [0.4, 0.8, 1.2, 1.6] {
        let lo = cv.predict_force(30.0, Some(t)).unwrap().force_n;
        let hi = cv.predict_force(120.0, Some(t)).unwrap().force_n;
        assert!(lo < hi, "T={t}: {lo} !< {hi}");
    }
}

#[test]
fn return_angle_stays_in_range() {
    let ds = square_dataset(5);
    let m = fit_family_model(
        &ds,
        FamilyKind::SquareWaveSymmetric,
        &GprConfig {
            hyper: HyperChoice::Defaults,
        },
    )
    .unwrap();
    let mut r = rng(5);
    for _ in 0..200 {
        let theta = r.random_range(0.0..400.0);
        let a = m.predict_return_angle(theta, None).unwrap();
        assert!((0.0..=180.0).contains(&a));
    }
}

#[test]
fn curve_window_applies_to_fitted_models() {
    let cv = fit_family_model(
        &average_runs(&curve_dataset(6), 5.0).unwrap(),
        FamilyKind::Curve,
        &GprConfig::default(),
    )
    .unwrap();
    assert!(cv.predict_force(29.0, Some(0.8)).is_err());
    assert!(cv.predict_return_angle(151.0, Some(0.8)).is_err());
    assert!(cv.predict_force(30.0, Some(0.8)).is_ok());
}

#[test]
fn gpr_beats_degree_seven_polynomial_on_runge_fixture() {
    let (theta, y) = oscillation_fixture(7);
    let poly = poly_loo_rmse(&theta, &y, 7).unwrap();
    let x = nalgebra::DMatrix::from_column_slice(theta.len(), 1, &theta);
    let yv = nalgebra::DVector::from_column_slice(&y);
    let (h, noise) = select_hyper(&x, &yv, &HyperChoice::Tune).unwrap();
    let gp = gp_loo_rmse(&x, &yv, &h, noise).unwrap();
    assert!(gp < poly, "gp {gp} poly {poly}");
}

#[test]
fn poly_baseline_on_fixture() {
    let ds = average_runs(&square_dataset(8), 5.0).unwrap();
    let p = fit_poly_baseline(&ds, FamilyKind::SquareWaveSymmetric, None, 3).unwrap();
    assert_eq!(p.coefficients.len(), 4);
    assert!((p.eval(90.0) - square_force(90.0)).abs() < 0.1);
    let curve = average_runs(&curve_dataset(8), 5.0).unwrap();
    let p = fit_poly_baseline(&curve, FamilyKind::Curve, Some(0.8), 2).unwrap();
    assert!((p.eval(90.0) - curve_force(90.0, 0.8)).abs() < 0.2);
}

#[test]
fn archive_round_trip_is_bit_exact() {
    let ds = average_runs(&curve_dataset(9), 5.0).unwrap();
    let m = fit_family_model(&ds, FamilyKind::Curve, &GprConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.json");
    save_model(&path, &m, "curve-fixture").unwrap();
    let back = load_model(&path).unwrap();
    let mut r = rng(9);
    for _ in 0..25 {
        let theta = r.random_range(30.0..150.0);
        let t = r.random_range(0.4..1.6);
        let a = m.predict_force(theta, Some(t)).unwrap();
        let b = back.predict_force(theta, Some(t)).unwrap();
        assert_eq!(a.force_n.to_bits(), b.force_n.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
        assert_eq!(
            m.predict_return_angle(theta, Some(t)).unwrap().to_bits(),
            back.predict_return_angle(theta, Some(t)).unwrap().to_bits()
        );
    }
    // Saving the loaded model reproduces the file byte for byte.
    let again = ModelArchive::from_model(&back, "curve-fixture").to_json();
    assert_eq!(again, std::fs::read_to_string(&path).unwrap());
}

#[test]
fn training_inputs_put_angle_before_thickness() {
    let ds = curve_dataset(10);
    let (x, _, _) = training_set(&ds, FamilyKind::Curve);
    assert_eq!(x.ncols(), 2);
    assert!(x.column(0).iter().all(|t| (30.0..=150.0).contains(t)));
    assert!(x.column(1).iter().all(|t| (0.4..=1.6).contains(t)));
    let h = basis_expand(&[x[(0, 0)], x[(0, 1)]]).unwrap();
    assert_eq!(h[1], x[(0, 0)]);
}

#[test]
fn published_models_report_the_residual_spread() {
    let m = builtin_model(FamilyKind::SquareWaveSymmetric).unwrap();
    let gp: &FittedGp = m.force_model();
    assert_eq!(gp.n_train(), 0);
    let p = m.predict_force(75.0, None).unwrap();
    assert_eq!(p.variance, 0.0);
    assert!((p.predictive_std() - 0.2916).abs() < 1e-12);
}
