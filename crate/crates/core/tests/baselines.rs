mod common;

use common::{case_truth, checks, load_case, noisy_set, random_state, rng};
use nalgebra::DVector;
use psse::metrics::Truth;
use psse::solver::baselines::{gauss_newton_wls, irls_lav, jacobian, BaselineConfig, RealParameterization};
use psse::{MeasurementKind, MeasurementSet, PsseError, VoltageState};

const SENDING_END: [MeasurementKind; 3] = [MeasurementKind::Vsq, MeasurementKind::Pf, MeasurementKind::Qf];

#[test]
fn jacobian_matches_finite_differences() {
    for name in ["case14.m", "case118.m"] {
        let (case, model) = load_case(name);
        let set = noisy_set(&model, &case_truth(&case), &MeasurementKind::ORDERED, 0.0, 0);
        let param = RealParameterization::new(model.n(), model.reference);
        let mut r = rng(31);
        for _ in 0..3 {
            let v = random_state(&mut r, model.n());
            let err = checks::jacobian_fd_error(&set, &param, &v);
            assert!(err <= 1e-6, "{name}: {err}");
        }
    }
}

#[test]
fn real_parameterization_agrees_with_complex_evaluation() {
    let (case, model) = load_case("case14.m");
    let set = noisy_set(&model, &case_truth(&case), &MeasurementKind::ORDERED, 0.0, 0);
    let param = RealParameterization::new(model.n(), model.reference);
    let mut r = rng(4);
    let mut v = random_state(&mut r, model.n());
    // Pin the reference phase to zero so the map is a bijection.
    let phase = v[model.reference].conj() / v[model.reference].norm();
    for x in &mut v {
        *x *= phase;
    }
    let x = param.from_state(&v);
    assert_eq!(x.len(), 2 * model.n() - 1);
    let back = param.to_state(&x);
    let (values, _) = jacobian(&set, &param, &back);
    for (rec, h) in set.records().iter().zip(values) {
        assert!((rec.matrix.evaluate(&v) - h).abs() <= 1e-12 * (1.0 + h.abs()));
    }
}

#[test]
fn gauss_newton_reaches_noiseless_truth_quickly() {
    let (case, model) = load_case("case14.m");
    let truth = case_truth(&case);
    let set = noisy_set(&model, &truth, &SENDING_END, 0.0, 0);
    let t = Truth::new(truth.clone(), model.reference);
    let sol = gauss_newton_wls(
        &set,
        &vec![1.0; set.m()],
        model.reference,
        &VoltageState::flat(model.n()),
        &BaselineConfig::default(),
        Some(&t),
    )
    .unwrap();
    let reached = sol.trace.first_reaching(1e-8).expect("never reached 1e-8");
    assert!(reached <= 6, "reached 1e-8 at iteration {reached}");

    // Weighted stationarity at the returned point.
    let param = RealParameterization::new(model.n(), model.reference);
    let (h, j) = jacobian(&set, &param, &sol.state);
    let r = DVector::from_iterator(set.m(), set.records().iter().zip(&h).map(|(rec, h)| rec.z - h));
    let g = j.transpose() * r;
    assert!(g.norm() <= 1e-8, "‖Jᵀ W r‖ = {}", g.norm());
}

#[test]
fn irls_reaches_noiseless_truth_within_fifty() {
    let (case, model) = load_case("case14.m");
    let truth = case_truth(&case);
    let set = noisy_set(&model, &truth, &SENDING_END, 0.0, 0);
    let t = Truth::new(truth, model.reference);
    let cfg = BaselineConfig {
        max_iters: 100,
        ..BaselineConfig::default()
    };
    let sol = irls_lav(&set, model.reference, &VoltageState::flat(model.n()), &cfg, 1e-8, Some(&t)).unwrap();
    let reached = sol.trace.first_reaching(1e-8).expect("never reached 1e-8");
    assert!(reached <= 50, "reached 1e-8 at iteration {reached}");
}

#[test]
fn equal_residuals_make_irls_step_unweighted() {
    let (case, model) = load_case("case14.m");
    let truth = case_truth(&case);
    let base = noisy_set(&model, &truth, &MeasurementKind::ORDERED, 0.0, 0);
    let v0 = VoltageState::flat(model.n());
    // Shift every value by ±0.05 around its flat-start prediction.
    let records = base
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            r.z = r.matrix.evaluate(&v0) + if i % 2 == 0 { 0.05 } else { -0.05 };
            r
        })
        .collect();
    let set = MeasurementSet::new(model.n(), records);
    let one = BaselineConfig {
        max_iters: 1,
        ..BaselineConfig::default()
    };
    let irls = irls_lav(&set, model.reference, &v0, &one, 1e-8, None).unwrap();
    let gn = gauss_newton_wls(&set, &vec![1.0; set.m()], model.reference, &v0, &one, None).unwrap();
    for (a, b) in irls.state.iter().zip(gn.state.iter()) {
        assert!((a - b).norm() <= 1e-12);
    }
}

#[test]
fn vsq_only_data_is_unobservable() {
    let (case, model) = load_case("case14.m");
    let set = noisy_set(&model, &case_truth(&case), &[MeasurementKind::Vsq], 0.0, 0);
    let err = gauss_newton_wls(
        &set,
        &vec![1.0; set.m()],
        model.reference,
        &VoltageState::flat(model.n()),
        &BaselineConfig::default(),
        None,
    );
    assert!(matches!(err, Err(PsseError::Unobservable)));
}
