mod common;

use common::*;
use entryexit::equilibrium::{entry_gap, myopic_entry_price, solve_entry_price};
use entryexit::model::Entrants;
use entryexit::rng::StreamKey;
use entryexit::value::ValueProblem;
use entryexit::Error;
use rand::Rng;

#[test]
fn bellman_contracts_in_kappa_norm() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let p = 0.8;
    let w = prob.build_weight(p).unwrap();
    let rho = cfg.beta() / cfg.delta();
    let key = StreamKey::new(3, "contraction");
    for i in 0..40 {
        let mut rng = key.stream(i);
        let u: Vec<f64> = w.kappa.iter().map(|k| k * rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = w.kappa.iter().map(|k| k * rng.random_range(-5.0..5.0)).collect();
        let tu = prob.bellman_apply(&u, p).unwrap();
        let tv = prob.bellman_apply(&v, p).unwrap();
        let ratio = w.distance(&tu, &tv) / w.distance(&u, &v);
        assert!(ratio <= rho + 1e-9, "pair {i}: ratio {ratio} > {rho}");
    }
}

#[test]
fn bellman_is_monotone() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let w = prob.build_weight(1.0).unwrap();
    let mut rng = StreamKey::new(5, "monotone").stream(0);
    let u: Vec<f64> = w.kappa.iter().map(|k| k * rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = u.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
    let tu = prob.bellman_apply(&u, 1.0).unwrap();
    let tv = prob.bellman_apply(&v, 1.0).unwrap();
    assert!(tu.iter().zip(&tv).all(|(a, b)| a <= b));
}

#[test]
fn weight_dominates_and_grows_at_most_by_one_over_delta() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let w = prob.build_weight(0.8).unwrap();
    assert!(w.kappa.iter().all(|k| *k >= 1.0));
    assert!(w.max_growth <= 1.0);
    let v = prob.solve_value(0.8).unwrap();
    assert!(w.norm(&v.values).is_finite());
}

#[test]
fn value_function_shape() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let v = prob.solve_value(0.8).unwrap();
    assert!(v.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(v.values[0] < 0.0);
    let zero = prob.solve_value(0.0).unwrap();
    assert!(zero.values.iter().all(|x| *x < 0.0));
}

#[test]
fn exit_threshold_falls_with_price() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..8 {
        let p = 0.5 + 0.2 * i as f64;
        let v = prob.solve_value(p).unwrap();
        let t = prob.exit_threshold(&v);
        assert!(t > 0.0 && t <= last, "p = {p}: {t} after {last}");
        last = t;
    }
}

#[test]
fn continuation_rejects_negative_productivity() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let v = prob.solve_value(1.0).unwrap();
    assert!(prob.continuation(&v, -1.0).is_err());
}

#[test]
fn myopic_entry_price_closed_form() {
    // β = 0: v* = π and e(p) = p e E[φ] − c_f − c_e
    let base = with_params(&desk_fast(), 0.0, 0.97, 5.0);
    let prob = ValueProblem::new(&base).unwrap();
    let p = solve_entry_price(&prob).unwrap().p_star;
    assert!((p - 6.0).abs() / 6.0 < 1e-10, "{p}");

    let doubled = with_params(&base, 0.0, 0.97, 10.0);
    let p2 = solve_entry_price(&ValueProblem::new(&doubled).unwrap()).unwrap().p_star;
    assert!((p2 - 11.0).abs() / 11.0 < 1e-10, "{p2}");

    let lognormal = base.with_entrants(Entrants::Lognormal { mu: -0.125, sigma: 0.5 });
    let p3 = solve_entry_price(&ValueProblem::new(&lognormal).unwrap()).unwrap().p_star;
    assert!((p3 - 6.0).abs() / 6.0 < 1e-10, "{p3}");
}

#[test]
fn entry_gap_increases_along_a_price_sweep() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let gaps: Vec<f64> = (0..12).map(|i| entry_gap(&prob, 0.4 + 0.1 * i as f64).unwrap().0).collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn desk_entry_price_residual() {
    let cfg = desk_fast();
    let prob = ValueProblem::new(&cfg).unwrap();
    let sol = solve_entry_price(&prob).unwrap();
    assert!(sol.gap.abs() <= 1e-6 * cfg.c_e());
    let (lo, hi) = sol.expansion;
    assert!(lo < sol.p_star && sol.p_star < hi);
    assert!(myopic_entry_price(&cfg) > sol.p_star);
    // one sign change on a scan of the expansion bracket
    let signs: Vec<bool> = (0..=30)
        .map(|i| entry_gap(&prob, lo + (hi - lo) * i as f64 / 30.0).unwrap().0 >= 0.0)
        .collect();
    assert_eq!(signs.windows(2).filter(|w| w[0] != w[1]).count(), 1);
}

#[test]
fn value_iteration_budget_reports_residuals() {
    let mut cfg = desk_fast();
    cfg.numerics.value_max_iter = 3;
    let prob = ValueProblem::new(&cfg).unwrap();
    match prob.solve_value(1.0) {
        Err(Error::Divergence { residuals, .. }) => assert_eq!(residuals.len(), 3),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn unsatisfiable_entry_is_reported() {
    // entrants stuck at 0 under pure Gibrat never earn anything
    let mut cfg = stub();
    cfg.entrants = Entrants::Tabulated {
        values: vec![0.0, 1.0, 2.0],
        probs: vec![1.0, 0.0, 0.0],
    };
    let err = solve_entry_price(&ValueProblem::new(&cfg).unwrap()).unwrap_err();
    assert!(err.to_string().contains("entry condition unsatisfiable in budget"), "{err}");
}
