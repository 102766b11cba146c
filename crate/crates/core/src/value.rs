//! Incumbent value function at a fixed price: κ-weighted contraction
//! iteration on a truncated productivity grid, plus the exit threshold.

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::{num, Table};
use crate::error::{Error, Result};
use crate::model::{Entrants, IncumbentLaw, Kernel, ModelConfig};
use crate::tails::drift_check;

/// Ascending productivity nodes, node 0 = 0, linear toe then log spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub phi_max: f64,
    /// Set when the drift bound does not certify mean reversion above φ_max.
    pub warning: Option<String>,
}

impl Grid {
    /// `n` nodes: `toe_fraction` of them evenly spaced on [0, toe_end], the
    /// rest geometrically spaced up to `phi_max`.
    pub fn new(n: usize, phi_max: f64, toe_end: f64, toe_fraction: f64) -> Result<Grid> {
        if n < crate::model::MIN_GRID_NODES {
            return Err(Error::Grid(format!(
                "grid too coarse: {n} nodes (minimum {})",
                crate::model::MIN_GRID_NODES
            )));
        }
        if !(phi_max.is_finite() && phi_max > 0.0) {
            return Err(Error::Grid(format!("phi_max must be positive and finite, got {phi_max}")));
        }
        let toe_end = toe_end.min(phi_max / 10.0);
        let n_toe = ((n as f64 * toe_fraction).round() as usize).clamp(2, n - 2);
        let n_log = n - n_toe;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n_toe {
            nodes.push(toe_end * i as f64 / n_toe as f64);
        }
        let ratio = (phi_max / toe_end).ln() / (n_log - 1) as f64;
        for i in 0..n_log {
            nodes.push(toe_end * (ratio * i as f64).exp());
        }
        nodes[n - 1] = phi_max;
        Grid::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Grid> {
        if nodes.first() != Some(&0.0) {
            return Err(Error::Grid("first grid node must be exactly 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Grid("grid nodes must be finite and strictly increasing".into()));
        }
        let phi_max = *nodes.last().unwrap();
        Ok(Grid {
            nodes,
            phi_max,
            warning: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Segment index and weight on its right node for x in [0, φ_max].
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if n == 1 {
            return (0, 0.0);
        }
        let i = self.nodes.partition_point(|&s| s <= x).saturating_sub(1).min(n - 2);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }
}

/// Extension of grid values above φ_max: proportional to φ when the top
/// value is nonnegative, constant otherwise. Both keep the operator monotone
/// and the κ-contraction intact.
pub fn extrapolate(top: f64, x: f64, phi_max: f64) -> f64 {
    if top >= 0.0 {
        top * x / phi_max
    } else {
        top
    }
}

/// Piecewise-linear interpolation of grid values with the extrapolation rule.
pub fn interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    if x >= grid.phi_max {
        return extrapolate(*values.last().unwrap(), x, grid.phi_max);
    }
    let (i, t) = grid.locate(x.max(0.0));
    if values.len() == 1 {
        return values[0];
    }
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// Build the value grid from the numerics block. A discrete incumbent law
/// uses its own states.
pub fn build_grid(cfg: &ModelConfig) -> Result<Grid> {
    if let IncumbentLaw::Discrete { states, .. } = &cfg.incumbents {
        return Grid::from_nodes(states.clone());
    }
    let num = &cfg.numerics;
    let toe_end = num.toe_end.unwrap_or_else(|| cfg.entrants.mean());
    let drift = drift_check(cfg, 1.0);
    let drift_phi = if drift.pass {
        Some(cfg.technology.phi_for_output(drift.l / (1.0 - drift.lambda), 1.0))
    } else {
        None
    };
    let reference = drift_phi.unwrap_or(0.0).max(cfg.entrants.mean());
    let phi_max = num.phi_max.unwrap_or(num.drift_margin * reference);
    let mut grid = Grid::new(num.grid_nodes, phi_max, toe_end, num.toe_fraction)?;
    grid.warning = match drift_phi {
        None => Some(format!(
            "drift bound not certified ({}); truncation at phi_max = {phi_max} is unchecked",
            drift.evidence
        )),
        Some(d) if d > phi_max => Some(format!(
            "phi_max = {phi_max} lies below the drift point {d}; truncation may bias values"
        )),
        _ => None,
    };
    Ok(grid)
}

/// Quadrature version of Γ on the grid, with interpolation weights. Mass
/// landing above φ_max is kept separately for the extrapolation rule.
#[derive(Debug, Clone)]
pub struct Transition {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// P(φ' > φ_max | φ_i)
    above_mass: Vec<f64>,
    /// E[φ'/φ_max; φ' > φ_max | φ_i]
    above_scaled: Vec<f64>,
    phi_max: f64,
}

impl Transition {
    pub fn new(grid: &Grid, kernel: &Kernel) -> Transition {
        let n = grid.len();
        let rows: Vec<(Vec<(u32, f64)>, f64, f64)> = grid
            .nodes
            .par_iter()
            .map(|&phi| {
                let mut pts = Vec::new();
                kernel.points(phi, &mut pts);
                let mut dense = vec![0.0; n];
                let (mut am, mut asc) = (0.0, 0.0);
                for (w, x) in pts {
                    if x >= grid.phi_max {
                        am += w;
                        asc += w * x / grid.phi_max;
                    } else {
                        let (i, t) = grid.locate(x.max(0.0));
                        dense[i] += w * (1.0 - t);
                        if t > 0.0 {
                            dense[i + 1] += w * t;
                        }
                    }
                }
                let row = dense
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| *w != 0.0)
                    .map(|(j, w)| (j as u32, w))
                    .collect();
                (row, am, asc)
            })
            .collect();
        let mut t = Transition {
            offsets: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            above_mass: Vec::with_capacity(n),
            above_scaled: Vec::with_capacity(n),
            phi_max: grid.phi_max,
        };
        for (row, am, asc) in rows {
            for (j, w) in row {
                t.cols.push(j);
                t.vals.push(w);
            }
            t.offsets.push(t.cols.len());
            t.above_mass.push(am);
            t.above_scaled.push(asc);
        }
        t
    }

    /// (Γv)(φ_i) for node i.
    #[inline]
    pub fn apply_row(&self, i: usize, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.offsets[i]..self.offsets[i + 1] {
            acc += self.vals[k] * v[self.cols[k] as usize];
        }
        let top = *v.last().unwrap();
        if self.above_mass[i] > 0.0 {
            acc += if top >= 0.0 {
                top * self.above_scaled[i]
            } else {
                top * self.above_mass[i]
            };
        }
        acc
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.offsets.len() - 1).map(|i| self.apply_row(i, v)).collect()
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }
}

/// κ = Σ_t δ^t Γ^t π̂ with π̂ = π + b, on the grid at a fixed price.
#[derive(Debug, Clone, Serialize)]
pub struct WeightFunction {
    pub p: f64,
    pub kappa: Vec<f64>,
    pub b: f64,
    pub delta: f64,
    /// Number of series terms summed.
    pub terms: usize,
    /// max_i δ (Γκ)(φ_i) / κ(φ_i); at most 1 up to truncation.
    pub max_growth: f64,
}

impl WeightFunction {
    /// κ-weighted sup norm of `f`.
    pub fn norm(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.kappa).map(|(x, k)| x.abs() / k).fold(0.0, f64::max)
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.kappa)
            .map(|((a, b), k)| (a - b).abs() / k)
            .fold(0.0, f64::max)
    }
}

/// Value function on the grid at price p.
#[derive(Debug, Clone, Serialize)]
pub struct ValueFunction {
    pub p: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// κ-norm of the last step.
    pub last_step: f64,
    /// A-posteriori bound on the κ-norm distance to the fixed point.
    pub error_bound: f64,
}

/// Everything needed to solve the incumbent problem at any price: the grid,
/// quadrature kernel and discretized transition. Built once per model.
#[derive(Debug, Clone)]
pub struct ValueProblem {
    pub cfg: ModelConfig,
    pub grid: Grid,
    pub kernel: Kernel,
    pub transition: Transition,
}

impl ValueProblem {
    pub fn new(cfg: &ModelConfig) -> Result<ValueProblem> {
        let grid = build_grid(cfg)?;
        Self::with_grid(cfg, grid)
    }

    pub fn with_grid(cfg: &ModelConfig, grid: Grid) -> Result<ValueProblem> {
        let kernel = Kernel::new(&cfg.incumbents, cfg.numerics.quad_nodes);
        let transition = Transition::new(&grid, &kernel);
        Ok(ValueProblem {
            cfg: cfg.clone(),
            grid,
            kernel,
            transition,
        })
    }

    pub fn profits(&self, p: f64) -> Vec<f64> {
        self.grid.nodes.iter().map(|&x| self.cfg.profit(x, p)).collect()
    }

    /// κ for price p by the truncated series.
    pub fn build_weight(&self, p: f64) -> Result<WeightFunction> {
        let delta = self.cfg.delta();
        let pi = self.profits(p);
        let min_pi = pi.iter().copied().fold(f64::INFINITY, f64::min);
        let b = (1.0 - min_pi).max(0.0);
        let pi_hat: Vec<f64> = pi.iter().map(|x| x + b).collect();
        let first_max = pi_hat.iter().copied().fold(0.0, f64::max);
        let mut sum = pi_hat.clone();
        let mut term = pi_hat;
        let mut d = 1.0;
        let mut terms = 1;
        loop {
            term = self.transition.apply(&term);
            d *= delta;
            terms += 1;
            let mut rel: f64 = 0.0;
            let mut big: f64 = 0.0;
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += d * t;
                rel = rel.max(d * t / *s);
                big = big.max(d * t);
            }
            if !big.is_finite() || big > 1e12 * first_max {
                return Err(Error::Assumption {
                    assumption: "7",
                    message: format!("weight series Σδ^tΓ^tπ̂ diverging at p = {p} after {terms} terms; this"),
                });
            }
            if rel < self.cfg.numerics.kappa_tol {
                break;
            }
            if terms >= self.cfg.numerics.kappa_max_terms {
                return Err(Error::Assumption {
                    assumption: "7",
                    message: format!(
                        "weight series at p = {p} not settled after {terms} terms (last relative term {rel:e}); this"
                    ),
                });
            }
        }
        let g = self.transition.apply(&sum);
        let max_growth = g
            .iter()
            .zip(&sum)
            .map(|(gk, k)| delta * gk / k)
            .fold(0.0, f64::max);
        if max_growth > 1.0 + 1e-6 {
            return Err(Error::Grid(format!(
                "weight check failed: max δΓκ/κ = {max_growth} exceeds 1 at p = {p}"
            )));
        }
        Ok(WeightFunction {
            p,
            kappa: sum,
            b,
            delta,
            terms,
            max_growth,
        })
    }

    /// (Tv)(φ_i) = π(φ_i, p) + β max{0, (Γv)(φ_i)}.
    pub fn bellman_apply(&self, v: &[f64], p: f64) -> Result<Vec<f64>> {
        let beta = self.cfg.beta();
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.cfg.profit(self.grid.nodes[i], p) + beta * self.transition.apply_row(i, v).max(0.0))
            .collect();
        if let Some(i) = out.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "Bellman update".into(),
                location: format!("node {i} (phi = {})", self.grid.nodes[i]),
            });
        }
        Ok(out)
    }

    /// Fixed point of T at price p, to κ-norm accuracy `value_tol`.
    pub fn solve_value(&self, p: f64) -> Result<ValueFunction> {
        let weight = self.build_weight(p)?;
        self.solve_value_with(p, &weight)
    }

    pub fn solve_value_with(&self, p: f64, weight: &WeightFunction) -> Result<ValueFunction> {
        let rho = self.cfg.beta() / self.cfg.delta();
        let tol = self.cfg.numerics.value_tol;
        let mut v = self.profits(p);
        let mut history = Vec::new();
        for it in 1..=self.cfg.numerics.value_max_iter {
            let next = self.bellman_apply(&v, p)?;
            let step = weight.distance(&next, &v);
            history.push(step);
            v = next;
            if rho * step < tol * (1.0 - rho) {
                return Ok(ValueFunction {
                    p,
                    values: v,
                    iterations: it,
                    last_step: step,
                    error_bound: rho / (1.0 - rho) * step,
                });
            }
        }
        Err(Error::Divergence {
            iterations: self.cfg.numerics.value_max_iter,
            last_residual: *history.last().unwrap_or(&f64::NAN),
            residuals: history,
        })
    }

    pub fn interpolate(&self, v: &ValueFunction, x: f64) -> f64 {
        interpolate(&self.grid, &v.values, x)
    }

    /// ∫ v(φ') Γ(φ, dφ').
    pub fn continuation(&self, v: &ValueFunction, phi: f64) -> Result<f64> {
        if !(phi >= 0.0) {
            return Err(Error::Invalid(format!("continuation needs phi >= 0, got {phi}")));
        }
        self.kernel.expectation(phi, |x| interpolate(&self.grid, &v.values, x))
    }

    /// Smallest φ with nonnegative continuation value; +∞ if none on the grid.
    pub fn exit_threshold(&self, v: &ValueFunction) -> f64 {
        let cont = self.transition.apply(&v.values);
        if cont[0] >= 0.0 {
            return 0.0;
        }
        let Some(i) = cont.iter().position(|c| *c >= 0.0) else {
            return f64::INFINITY;
        };
        let (mut lo, mut hi) = (self.grid.nodes[i - 1], self.grid.nodes[i]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.continuation(v, mid) {
                Ok(c) if c >= 0.0 => hi = mid,
                _ => lo = mid,
            }
        }
        hi
    }

    /// ∫ v dγ by exact integration of the interpolant against γ.
    pub fn integrate_entrants(&self, values: &[f64], entrants: &Entrants) -> f64 {
        integrate_interpolant(&self.grid, values, entrants)
    }
}

/// ∫ f dγ where f is the grid interpolant of `values` (with extrapolation),
/// using γ's distribution function and partial means on every segment.
pub fn integrate_interpolant(grid: &Grid, values: &[f64], g: &Entrants) -> f64 {
    let x = &grid.nodes;
    let mut acc = 0.0;
    let mut p_prev = 0.0;
    let mut m_prev = 0.0;
    for i in 0..x.len() - 1 {
        let p_next = g.prob_below(x[i + 1]);
        let m_next = g.partial_mean(x[i + 1]);
        let dp = p_next - p_prev;
        let dm = m_next - m_prev;
        let slope = (values[i + 1] - values[i]) / (x[i + 1] - x[i]);
        acc += values[i] * dp + slope * (dm - x[i] * dp);
        p_prev = p_next;
        m_prev = m_next;
    }
    let top = *values.last().unwrap();
    let phi_max = grid.phi_max;
    if top >= 0.0 {
        acc += top / phi_max * (g.mean() - g.partial_mean(phi_max));
    } else {
        acc += top * (1.0 - g.prob_below(phi_max));
    }
    acc
}

pub fn value_csv(grid: &Grid, v: &ValueFunction) -> String {
    let mut t = Table::new(&[format!("p = {}", num(v.p))], &["phi", "value"]);
    for (x, y) in grid.nodes.iter().zip(&v.values) {
        t.row(&[num(*x), num(*y)]);
    }
    t.finish()
}

pub fn weight_csv(grid: &Grid, w: &WeightFunction) -> String {
    let mut t = Table::new(&[format!("p = {}", num(w.p)), format!("b = {}", num(w.b))], &["phi", "kappa"]);
    for (x, k) in grid.nodes.iter().zip(&w.kappa) {
        t.row(&[num(*x), num(*k)]);
    }
    t.finish()
}
