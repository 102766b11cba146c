#![allow(dead_code)]

use entryexit::{parse_model, ModelConfig};

pub fn desk() -> ModelConfig {
    parse_model(include_str!("../../../../fixtures/desk.toml")).unwrap()
}

/// Desk model on coarser grids, for tests that solve it many times.
pub fn desk_fast() -> ModelConfig {
    let mut cfg = desk();
    cfg.numerics.grid_nodes = 200;
    cfg.numerics.hist_bins = 200;
    cfg.numerics.quad_nodes = 32;
    cfg.numerics.lifetime_paths = 4000;
    cfg
}

pub fn stub() -> ModelConfig {
    parse_model(include_str!("../../../../fixtures/stub3.toml")).unwrap()
}

/// Stationary law of the stub chain: μ0 = 0.72 μ1, μ2 = 0.6 μ1.
pub fn stub_mu() -> [f64; 3] {
    let m1 = 1.0 / 2.32;
    [0.72 * m1, m1, 0.6 * m1]
}

/// The stub with every incumbent row replaced by `row`.
pub fn stub_with_rows(row: [f64; 3]) -> ModelConfig {
    let mut cfg = stub();
    if let entryexit::model::IncumbentLaw::Discrete { matrix, .. } = &mut cfg.incumbents {
        for r in matrix.iter_mut() {
            r.copy_from_slice(&row);
        }
    }
    cfg
}

pub fn with_params(cfg: &ModelConfig, beta: f64, delta: f64, c_e: f64) -> ModelConfig {
    let mut c = cfg.clone();
    c.params.beta = beta;
    c.params.delta = delta;
    c.params.c_e = c_e;
    c
}
