mod common;

use common::*;
use entryexit::equilibrium::{assemble_equilibrium, kac_check, Bins};
use entryexit::model::{AdditiveDist, GrowthDist, IncumbentLaw};
use entryexit::rng::StreamKey;
use entryexit::simulate::{cross_section_sample, occupation_measure, simulate_firm, step_equilibrium};
use entryexit::stats::{ks_passes, ks_two_sample_passes};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn below_threshold_steps_are_entrant_draws() {
    let cfg = desk();
    let key = StreamKey::new(0, "step");
    let mut xs: Vec<f64> = (0..100_000)
        .map(|i| step_equilibrium(0.1, 0.5, &cfg, &mut key.stream(i)))
        .collect();
    assert!(ks_passes(&mut xs, |x| 1.0 - (-x).exp()));
}

#[test]
fn identity_law_keeps_productivity() {
    let mut cfg = desk();
    cfg.incumbents = IncumbentLaw::AffineGibrat {
        a: GrowthDist::Lognormal { mu: 0.0, sigma: 0.0 },
        y: AdditiveDist::Zero,
    };
    let mut rng = StreamKey::new(0, "id").stream(0);
    for phi in [0.5, 1.0, 7.25] {
        assert_eq!(step_equilibrium(phi, 0.5, &cfg, &mut rng), phi);
    }
}

#[test]
fn common_shocks_preserve_order() {
    let cfg = desk();
    let key = StreamKey::new(1, "coupling");
    for i in 0..1000 {
        let rng = key.stream(i);
        let a = step_equilibrium(1.0, 0.5, &cfg, &mut rng.clone());
        let b = step_equilibrium(3.0, 0.5, &cfg, &mut rng.clone());
        assert!(a <= b);
    }
}

#[test]
fn firm_paths_are_reproducible() {
    let cfg = desk();
    let key = StreamKey::new(42, "firm");
    let a = simulate_firm(0.8, 0.74, &cfg, &mut key.stream(17));
    let b = simulate_firm(0.8, 0.74, &cfg, &mut key.stream(17));
    assert_eq!(a, b);
    assert!(a.path[..a.path.len() - 1].iter().all(|&x| x >= 0.74));
}

#[test]
fn occupation_and_cross_section_ignore_thread_count() {
    let cfg = desk_fast();
    let bins = Bins {
        edges: vec![0.0, 0.74, 2.0, 10.0],
        reps: vec![0.37, 1.37, 6.0, 10.0],
    };
    let run = |t| {
        in_pool(t, || {
            let occ = occupation_measure(0.8, 0.74, 10_000, &bins, &cfg, 3).unwrap();
            let cs = cross_section_sample(0.8, 0.74, 5_000, 50, 10, &cfg, 3);
            (occ.mean_visits, occ.se, occ.taus, cs.draws)
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
}

#[test]
fn stub_cross_section_matches_eigenvector() {
    let cfg = stub();
    let n = 40_000;
    let s = cross_section_sample(1.6, 1.0, n, 100, 20, &cfg, 5);
    for (state, m) in stub_mu().iter().enumerate() {
        let freq = s.draws.iter().filter(|&&x| x == state as f64).count() as f64 / n as f64;
        let se = (m * (1.0 - m) / n as f64).sqrt();
        assert!((freq - m).abs() < 4.0 * se, "state {state}: {freq} vs {m}");
    }
}

#[test]
fn iid_chain_samples_entrant_law() {
    // every row equal to γ: the chain is iid γ
    let cfg = stub_with_rows([0.5, 0.5, 0.0]);
    let s = cross_section_sample(1.0, 1.0, 20_000, 10, 1, &cfg, 6);
    let ones = s.draws.iter().filter(|&&x| x == 1.0).count() as f64 / 20_000.0;
    assert!((ones - 0.5).abs() < 4.0 * (0.25f64 / 20_000.0).sqrt());
    assert!(s.draws.iter().all(|&x| x == 0.0 || x == 1.0));
}

#[test]
fn desk_burn_in_is_long_enough() {
    let cfg = desk_fast();
    let eq = assemble_equilibrium(&cfg).unwrap();
    let mut a = cross_section_sample(eq.p_star, eq.phi_bar, 20_000, 1000, 100, &cfg, 7).draws;
    let mut b = cross_section_sample(eq.p_star, eq.phi_bar, 20_000, 2000, 100, &cfg, 8).draws;
    assert!(ks_two_sample_passes(&mut a, &mut b));
}

#[test]
fn desk_kac_identity_and_lifespan_tail() {
    let cfg = desk_fast();
    let eq = assemble_equilibrium(&cfg).unwrap();
    let (kac, occ) = kac_check(&eq, &cfg, 100_000, 11).unwrap();
    assert_eq!(kac.censored, 0);
    assert!(kac.kac_z < 4.0, "{kac:?}");
    assert!(kac.lifespan_tail_slope < 0.0);
    assert!(kac.tv_distance < 0.05);
    let csv = occ.to_csv(&["seed = 11".to_string()]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed = 11"));
    assert_eq!(lines.next(), Some("bin_left,bin_right,mean_visits,se"));
    assert!(csv.trim_end().ends_with(&format!(",{:?},{:?}", occ.mean_visits.last().unwrap(), occ.se.last().unwrap())));
}
