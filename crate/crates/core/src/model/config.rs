use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Demand, Entrants, IncumbentLaw, Technology};
use crate::error::{Error, Result};

/// Preference and entry parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Discount factor.
    pub beta: f64,
    /// Discount used for the weighting function; must lie in (beta, 1).
    pub delta: f64,
    /// Entry cost.
    pub c_e: f64,
}

/// Numerical settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Value-function grid size.
    pub grid_nodes: usize,
    /// Upper end of the value grid; derived from the drift bound when absent.
    pub phi_max: Option<f64>,
    /// Fraction of grid nodes spent on the linear toe.
    pub toe_fraction: f64,
    /// End of the linear toe; the entrant mean when absent.
    pub toe_end: Option<f64>,
    /// φ_max = drift_margin × (productivity where the drift bound takes over).
    pub drift_margin: f64,
    /// Gauss nodes per shock component.
    pub quad_nodes: usize,
    /// Target sup-norm error (κ-weighted) of the value function.
    pub value_tol: f64,
    pub value_max_iter: usize,
    /// Relative size of the last κ series term before truncation.
    pub kappa_tol: f64,
    pub kappa_max_terms: usize,
    /// Entry condition tolerance, relative to c_e.
    pub entry_tol: f64,
    /// Maximum halvings/doublings while bracketing the entry price.
    pub entry_max_expansions: usize,
    /// Histogram size for the stationary distribution.
    pub hist_bins: usize,
    /// Upper end of the histogram; phi_max when absent.
    pub hist_max: Option<f64>,
    pub stationary_tol: f64,
    pub stationary_max_iter: usize,
    /// Lifespan cap for simulated firms.
    pub t_max: u64,
    /// Paths used for the lifetime-output estimate attached to an equilibrium.
    pub lifetime_paths: u64,
    /// Relative 95% half-width below which lifetime output counts as stable.
    /// Lifetime output is often heavy tailed (infinite variance), so this is
    /// loose: it flags samples dominated by a handful of paths.
    pub lifetime_rel_halfwidth: f64,
    /// Monte Carlo paths for the assumption checks.
    pub mc_paths: u64,
    pub burn_in: u64,
    pub stride: u64,
    pub draws_per_chain: u64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            grid_nodes: 500,
            phi_max: None,
            toe_fraction: 0.2,
            toe_end: None,
            drift_margin: 1e4,
            quad_nodes: 64,
            value_tol: 1e-8,
            value_max_iter: 20_000,
            kappa_tol: 1e-12,
            kappa_max_terms: 200_000,
            entry_tol: 1e-6,
            entry_max_expansions: 60,
            hist_bins: 500,
            hist_max: None,
            stationary_tol: 1e-12,
            stationary_max_iter: 1_000_000,
            t_max: 100_000,
            lifetime_paths: 100_000,
            lifetime_rel_halfwidth: 1.0,
            mc_paths: 4000,
            burn_in: 1000,
            stride: 100,
            draws_per_chain: 10,
            seed: 0,
        }
    }
}

/// Smallest admissible value grid.
pub const MIN_GRID_NODES: usize = 16;

/// The full set of model primitives plus numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub demand: Demand,
    pub technology: Technology,
    pub incumbents: IncumbentLaw,
    pub entrants: Entrants,
    pub params: Params,
    #[serde(default)]
    pub numerics: Numerics,
}

/// Parse and validate a TOML model document.
pub fn parse_model(text: &str) -> Result<ModelConfig> {
    let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Syntax(e.to_string().trim_end().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ModelConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ModelConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Invalid(format!("file not found: {}", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        parse_model(&text)
    }

    /// Serialize back to TOML (numerics included with all defaults filled in).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn c_e(&self) -> f64 {
        self.params.c_e
    }

    pub fn profit(&self, phi: f64, p: f64) -> f64 {
        self.technology.profit(phi, p)
    }

    pub fn output(&self, phi: f64, p: f64) -> f64 {
        self.technology.output(phi, p)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.incumbents, IncumbentLaw::Discrete { .. })
    }

    /// A copy with demand multiplied by `factor`.
    pub fn with_demand_scaled(&self, factor: f64) -> ModelConfig {
        let mut c = self.clone();
        c.demand = self.demand.scaled(factor);
        c
    }

    pub fn with_entrants(&self, entrants: Entrants) -> ModelConfig {
        let mut c = self.clone();
        c.entrants = entrants;
        c
    }

    /// Run every structural check. Conditions that are not about the domain of
    /// a single parameter are left to [`super::validate_assumptions`].
    pub fn validate(&self) -> Result<()> {
        self.demand.check()?;
        self.technology.check()?;
        self.incumbents.check()?;
        self.entrants.check()?;
        let Params { beta, delta, c_e } = self.params;
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Invalid(format!("beta must lie in [0, 1), got {beta}")));
        }
        if !(delta.is_finite() && beta < delta && delta < 1.0) {
            return Err(Error::Assumption {
                assumption: "7",
                message: if beta >= delta {
                    format!("beta = {beta} >= delta = {delta}")
                } else {
                    format!("delta = {delta} outside (beta, 1)")
                },
            });
        }
        if !(c_e.is_finite() && c_e > 0.0) {
            return Err(Error::Invalid(format!("entry cost c_e must be > 0, got {c_e}")));
        }
        if let IncumbentLaw::Discrete { states, .. } = &self.incumbents {
            if let Entrants::Tabulated { values, .. } = &self.entrants {
                if values.iter().any(|v| !states.contains(v)) {
                    return Err(Error::Invalid(
                        "with a discrete incumbent law, tabulated entrant values must be states".into(),
                    ));
                }
            } else {
                return Err(Error::Invalid(
                    "a discrete incumbent law needs tabulated entrants on its states".into(),
                ));
            }
        }
        self.numerics.check(self.is_discrete())
    }
}

impl Numerics {
    fn check(&self, discrete: bool) -> Result<()> {
        if !discrete && self.grid_nodes < MIN_GRID_NODES {
            return Err(Error::Grid(format!(
                "grid too coarse: {} nodes (minimum {MIN_GRID_NODES})",
                self.grid_nodes
            )));
        }
        if let Some(m) = self.phi_max {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Grid(format!("phi_max must be positive, got {m}")));
            }
        }
        if let Some(m) = self.hist_max {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Grid(format!("hist_max must be positive, got {m}")));
            }
        }
        if let Some(t) = self.toe_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Grid(format!("toe_end must be positive, got {t}")));
            }
        }
        if !(self.toe_fraction > 0.0 && self.toe_fraction < 1.0) {
            return Err(Error::Grid(format!("toe_fraction must lie in (0, 1), got {}", self.toe_fraction)));
        }
        if !discrete && self.hist_bins < 4 {
            return Err(Error::Grid(format!("hist_bins must be at least 4, got {}", self.hist_bins)));
        }
        let positive = [
            ("drift_margin", self.drift_margin),
            ("value_tol", self.value_tol),
            ("kappa_tol", self.kappa_tol),
            ("entry_tol", self.entry_tol),
            ("stationary_tol", self.stationary_tol),
            ("lifetime_rel_halfwidth", self.lifetime_rel_halfwidth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if self.quad_nodes == 0 || self.stride == 0 || self.draws_per_chain == 0 || self.t_max == 0 {
            return Err(Error::Invalid(
                "numerics.quad_nodes, stride, draws_per_chain and t_max must be positive".into(),
            ));
        }
        Ok(())
    }
}
