mod common;

use common::*;
use entryexit::csv::num;
use entryexit::equilibrium::{total_variation, Bins, EndogenousKernel};
use entryexit::model::{Entrants, GrowthDist, IncumbentLaw, Shock};
use entryexit::rng::{par_fold, StreamKey};
use entryexit::tails::{
    hill_estimate, moment_a, rank_size, solve_tail_index, solve_tail_index_bisection, TailLaw,
};
use entryexit::value::{integrate_interpolant, interpolate, Grid, ValueProblem};
use entryexit::{parse_model, ModelConfig};
use proptest::prelude::*;
use rand::Rng;

fn entrants() -> impl Strategy<Value = Entrants> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|mean| Entrants::Exponential { mean }),
        (-1.0f64..1.0, 0.1f64..1.5).prop_map(|(mu, sigma)| Entrants::Lognormal { mu, sigma }),
        (1.2f64..6.0, 0.2f64..3.0).prop_map(|(alpha, scale)| Entrants::Pareto { alpha, scale }),
    ]
}

fn two_point() -> impl Strategy<Value = TailLaw> {
    (0.05f64..0.95, 1.05f64..3.0, 0.05f64..0.95)
        .prop_filter_map("mean log must be negative", |(lo, hi, p)| {
            let law = TailLaw::new(GrowthDist::TwoPoint {
                values: vec![lo, hi],
                probs: vec![p, 1.0 - p],
            });
            (law.a.mean_log() < -1e-3).then_some(law)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_index_solves_moment_equation(law in two_point()) {
        let a = solve_tail_index(&law).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((moment_a(&law, a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lognormal_closed_form_agrees_with_bisection(alpha in 0.1f64..20.0, sigma in 0.05f64..1.0) {
        let law = TailLaw::new(GrowthDist::Lognormal { mu: -alpha * sigma * sigma / 2.0, sigma });
        let closed = solve_tail_index(&law).unwrap();
        let bisect = solve_tail_index_bisection(&law).unwrap();
        prop_assert!((closed - bisect).abs() < 1e-9, "{} vs {}", closed, bisect);
        prop_assert!((moment_a(&law, closed) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hill_standard_error_and_scale_invariance(seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut rng = StreamKey::new(seed, "hill-prop").stream(0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>().powf(-0.7)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let (a, b) = (hill_estimate(&xs, 100).unwrap(), hill_estimate(&ys, 100).unwrap());
        prop_assert_eq!(a.se, a.alpha / 10.0);
        prop_assert!((a.alpha - b.alpha).abs() < 1e-9 * a.alpha);
    }

    #[test]
    fn rank_size_is_sorted(xs in prop::collection::vec(1e-3f64..1e6, 1..200)) {
        let r = rank_size(&xs);
        prop_assert_eq!(r.len(), xs.len());
        prop_assert!(r.windows(2).all(|w| w[0].0 >= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(r[0].1, 0.0);
    }

    #[test]
    fn grids_are_well_formed(n in 16usize..800, phi_max in 1.0f64..1e6, toe in 0.01f64..5.0, frac in 0.05f64..0.9) {
        let g = Grid::new(n, phi_max, toe, frac).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g.nodes[0], 0.0);
        prop_assert_eq!(g.nodes[n - 1], phi_max);
        prop_assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn interpolant_preserves_monotonicity(steps in prop::collection::vec(0.0f64..3.0, 32), start in -5.0f64..5.0, xs in prop::collection::vec(0.0f64..150.0, 20)) {
        let g = Grid::new(32, 100.0, 1.0, 0.25).unwrap();
        let mut v = vec![start];
        for s in &steps[1..] {
            v.push(v.last().unwrap() + s);
        }
        let mut xs = xs;
        xs.sort_by(|a, b| a.total_cmp(b));
        let f: Vec<f64> = xs.iter().map(|&x| interpolate(&g, &v, x)).collect();
        prop_assert!(f.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn negative_constants_integrate_exactly(c in -10.0f64..-1e-3, g in entrants()) {
        let grid = Grid::new(64, 500.0, 1.0, 0.25).unwrap();
        let v = vec![c; 64];
        prop_assert!((integrate_interpolant(&grid, &v, &g) - c).abs() < 1e-12);
    }

    #[test]
    fn entrant_distribution_functions_are_consistent(g in entrants(), a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g.prob_below(lo) <= g.prob_below(hi));
        prop_assert!((0.0..=1.0).contains(&g.prob_below(hi)));
        prop_assert!(g.partial_mean(hi) <= hi * g.prob_below(hi) + 1e-12);
        prop_assert!(g.partial_mean(lo) <= g.partial_mean(hi) + 1e-15);
        prop_assert!(g.partial_mean(hi) <= g.mean() + 1e-12);
    }

    #[test]
    fn incumbent_law_is_monotone(phi1 in 0.0f64..50.0, d in 0.0f64..50.0, a in 0.2f64..3.0, y in 0.0f64..2.0, u in 0.0f64..1.0, x in 0.0f64..100.0) {
        let w = Shock { a, y, u };
        for law in [desk().incumbents, stub().incumbents] {
            prop_assert!(law.apply(phi1, &w) <= law.apply(phi1 + d, &w));
            let (p1, p2) = (law.prob_below(phi1, x), law.prob_below(phi1, x + d));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p1));
            prop_assert!(p1 <= p2 + 1e-9);
        }
    }

    #[test]
    fn binned_kernel_preserves_mass(w in prop::collection::vec(0.0f64..1.0, 3), threshold in 0.5f64..2.5) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let cfg = stub();
        let bins = Bins { edges: vec![0.0, 1.0, 2.0], reps: vec![0.0, 1.0, 2.0] };
        let k = EndogenousKernel::new(&cfg, &bins, 1.0, threshold).unwrap();
        let next = k.push_forward(&w);
        prop_assert!((next.iter().sum::<f64>() - w.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(next.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn total_variation_is_a_bounded_metric(a in prop::collection::vec(0.0f64..1.0, 5), b in prop::collection::vec(0.0f64..1.0, 5)) {
        prop_assume!(a.iter().sum::<f64>() > 1e-6 && b.iter().sum::<f64>() > 1e-6);
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (a, b) = (norm(&a), norm(&b));
        let d = total_variation(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert_eq!(d, total_variation(&b, &a));
        prop_assert_eq!(total_variation(&a, &a), 0.0);
    }

    #[test]
    fn numbers_round_trip_through_csv(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn configs_round_trip_through_toml(beta in 0.0f64..0.9, gap in 0.01f64..0.09, c_e in 0.1f64..50.0, g in entrants()) {
        let mut cfg = with_params(&desk(), beta, beta + gap, c_e);
        cfg.entrants = g;
        let back: ModelConfig = parse_model(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bellman_update_is_monotone_on_the_stub(u in prop::collection::vec(-20.0f64..20.0, 3), bump in prop::collection::vec(0.0f64..5.0, 3), p in 0.1f64..5.0) {
        let prob = ValueProblem::new(&stub()).unwrap();
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let (tu, tv) = (prob.bellman_apply(&u, p).unwrap(), prob.bellman_apply(&v, p).unwrap());
        prop_assert!(tu.iter().zip(&tv).all(|(a, b)| a <= b));
    }

    #[test]
    fn chunked_sums_do_not_depend_on_threads(seed in 0u64..1_000_000, n in 1u64..20_000) {
        let key = StreamKey::new(seed, "sum");
        let run = |t: usize| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| {
            par_fold(n, || 0.0f64, |acc, i| *acc += key.stream(i).random::<f64>(), |a, b| *a += b)
        });
        prop_assert_eq!(run(1).to_bits(), run(3).to_bits());
    }

    #[test]
    fn exit_threshold_is_a_sign_change(p in 0.5f64..1.5) {
        let cfg = desk_fast();
        let prob = ValueProblem::new(&cfg).unwrap();
        let v = prob.solve_value(p).unwrap();
        let t = prob.exit_threshold(&v);
        prop_assert!(prob.continuation(&v, t).unwrap() >= 0.0);
        prop_assert!(prob.continuation(&v, t * (1.0 - 1e-6)).unwrap() < 0.0);
    }
}

#[test]
fn discrete_law_needs_matching_entrants() {
    let mut cfg = stub();
    cfg.entrants = Entrants::Exponential { mean: 1.0 };
    assert!(cfg.validate().is_err());
    if let IncumbentLaw::Discrete { matrix, .. } = &mut cfg.incumbents {
        assert_eq!(matrix.len(), 3);
    }
}
