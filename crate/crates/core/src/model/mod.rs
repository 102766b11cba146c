//! Model primitives, the configuration document and assumption checks.

mod assumptions;
mod config;
mod demand;
mod entrants;
mod incumbents;
mod technology;

pub use assumptions::{
    entry_price_upper_bound, expected_entrant_profit, horizon, price_for_slope, price_ladder,
    validate_assumptions, AssumptionCheck, AssumptionReport, Verdict,
};
pub use config::{parse_model, ModelConfig, Numerics, Params, MIN_GRID_NODES};
pub use demand::Demand;
pub use entrants::Entrants;
pub use incumbents::{AdditiveDist, GrowthDist, IncumbentLaw, Kernel, Shock};
pub use technology::Technology;

