//! Entry price, stationary distribution and the assembled stationary
//! equilibrium (price, firm measure, entrant mass).

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::{num, Table};
use crate::error::{Error, Result};
use crate::model::{expected_entrant_profit, price_for_slope, IncumbentLaw, ModelConfig, Technology};
use crate::simulate::{lifetime_output, occupation_measure, LifetimeOutput};
use crate::value::{Grid, ValueFunction, ValueProblem};

/// e(p) = ∫ v*(φ, p) γ(dφ) − c_e, with the value function it came from.
pub fn entry_gap(problem: &ValueProblem, p: f64) -> Result<(f64, ValueFunction)> {
    let v = problem.solve_value(p)?;
    let e = problem.integrate_entrants(&v.values, &problem.cfg.entrants) - problem.cfg.c_e();
    Ok((e, v))
}

/// Root of the entry condition when β = 0 (v* = π): ∫π(φ, p)γ(dφ) = c_e.
pub fn myopic_entry_price(cfg: &ModelConfig) -> f64 {
    let t = &cfg.technology;
    let m = cfg.entrants.moment(t.eta());
    match t {
        Technology::Linear { e, c_f } => (c_f + cfg.c_e()) / (e * m),
        Technology::CobbDouglas { .. } => price_for_slope(t, (t.fixed_cost() + cfg.c_e()) / m),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryPrice {
    pub p_star: f64,
    /// e(p*)
    pub gap: f64,
    /// Sign bracket found by halving/doubling from the starting price.
    pub expansion: (f64, f64),
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub evaluations: usize,
    #[serde(skip)]
    pub value: ValueFunction,
}

/// p* with |e(p*)| <= entry_tol · c_e: bracket from the β = 0 price, then bisect.
pub fn solve_entry_price(problem: &ValueProblem) -> Result<EntryPrice> {
    let cfg = &problem.cfg;
    let tol = cfg.numerics.entry_tol * cfg.c_e();
    let budget = cfg.numerics.entry_max_expansions;
    let mut evals = 0;
    let mut eval = |p: f64| -> Result<(f64, ValueFunction)> {
        evals += 1;
        entry_gap(problem, p)
    };
    let p0 = myopic_entry_price(cfg);
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(Error::EntryBracket(format!("no usable starting price (β = 0 root is {p0})")));
    }
    let done = |p: f64, gap: f64, expansion, bracket, evaluations, value| EntryPrice {
        p_star: p,
        gap,
        expansion,
        bracket,
        evaluations,
        value,
    };
    let (e0, v0) = eval(p0)?;
    if e0.abs() <= tol {
        return Ok(done(p0, e0, (p0, p0), (p0, p0), evals, v0));
    }
    // e is increasing in p: walk away from p0 until the sign flips
    let (mut lo, mut hi) = (p0, p0);
    let mut flipped = false;
    for _ in 0..budget {
        let p = if e0 < 0.0 { hi * 2.0 } else { lo * 0.5 };
        let (e, v) = eval(p)?;
        if e.abs() <= tol {
            let bracket = if e0 < 0.0 { (lo, p) } else { (p, hi) };
            return Ok(done(p, e, bracket, bracket, evals, v));
        }
        if e0 < 0.0 {
            lo = hi;
            hi = p;
        } else {
            hi = lo;
            lo = p;
        }
        if (e < 0.0) != (e0 < 0.0) {
            flipped = true;
            break;
        }
    }
    if !flipped {
        let side = if e0 < 0.0 { format!("e(p) < 0 up to p = {hi}") } else { format!("e(p) > 0 down to p = {lo}") };
        return Err(Error::EntryBracket(format!("{side} after {budget} expansions")));
    }
    let expansion = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (e, v) = eval(mid)?;
        if e.abs() <= tol {
            return Ok(done(mid, e, expansion, (lo, hi), evals, v));
        }
        if e < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::EntryBracket(format!(
        "bisection collapsed on [{lo}, {hi}] without |e(p)| <= {tol:e}; tighten value_tol"
    )))
}

/// Histogram bins: [edges[i], edges[i+1]) with the last bin [edges[n-1], ∞).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bins {
    pub edges: Vec<f64>,
    /// Point each bin's transitions are computed from.
    pub reps: Vec<f64>,
}

impl Bins {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn index(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x).saturating_sub(1)
    }

    pub fn right(&self, i: usize) -> f64 {
        self.edges.get(i + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// Bins with right edge at or below φ̄, i.e. the atom [0, φ̄).
    pub fn atom_count(&self, phi_bar: f64) -> usize {
        self.edges.partition_point(|&e| e < phi_bar)
    }
}

/// Histogram bins for the stationary distribution with φ̄ as an edge.
pub fn build_bins(cfg: &ModelConfig, value_grid: &Grid, phi_bar: f64) -> Result<Bins> {
    if let IncumbentLaw::Discrete { states, .. } = &cfg.incumbents {
        let mut edges = states.clone();
        if phi_bar.is_finite() && !edges.contains(&phi_bar) {
            edges.push(phi_bar);
            edges.sort_by(|a, b| a.total_cmp(b));
        }
        // each state represents its own bin; an inserted edge inherits the row below
        let reps = edges
            .iter()
            .map(|&e| states[IncumbentLaw::discrete_row(states, e)])
            .collect();
        return Ok(Bins { edges, reps });
    }
    let n = &cfg.numerics;
    let top = n.hist_max.unwrap_or(value_grid.phi_max);
    let toe_end = n.toe_end.unwrap_or_else(|| cfg.entrants.mean());
    let mut edges = Grid::new(n.hist_bins.max(crate::model::MIN_GRID_NODES), top, toe_end, n.toe_fraction)?.nodes;
    if phi_bar.is_finite() && phi_bar > 0.0 && phi_bar < top {
        let i = edges.partition_point(|&e| e < phi_bar);
        let width = edges[i] - edges[i - 1];
        // drop an edge that would leave a sliver next to φ̄
        if (edges[i] - phi_bar) < 0.05 * width && i + 1 < edges.len() {
            edges[i] = phi_bar;
        } else if (phi_bar - edges[i - 1]) < 0.05 * width && i - 1 > 0 {
            edges[i - 1] = phi_bar;
        } else {
            edges.insert(i, phi_bar);
        }
    }
    let reps = (0..edges.len())
        .map(|i| match edges.get(i + 1) {
            Some(r) => 0.5 * (edges[i] + r),
            None => edges[i],
        })
        .collect();
    Ok(Bins { edges, reps })
}

/// Π_p on bins: incumbents move by Γ from the bin representative, bins below
/// φ̄ are replaced by an entrant draw.
#[derive(Debug, Clone)]
pub struct EndogenousKernel {
    pub p: f64,
    pub phi_bar: f64,
    /// Bin masses of γ.
    pub gamma: Vec<f64>,
    /// Incumbent rows for bins at or above φ̄ (row k is bin atom + k).
    pub rows: Vec<Vec<f64>>,
    pub atom_bins: usize,
}

impl EndogenousKernel {
    pub fn new(cfg: &ModelConfig, bins: &Bins, p: f64, phi_bar: f64) -> Result<EndogenousKernel> {
        if !(phi_bar.is_finite() && phi_bar > 0.0) {
            return Err(Error::NoExitThreshold(p));
        }
        let n = bins.len();
        let cells = |cdf: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(n);
            let mut prev = 0.0;
            for i in 0..n {
                let next = if i + 1 < n { cdf(bins.edges[i + 1]) } else { 1.0 };
                out.push((next - prev).max(0.0));
                prev = next;
            }
            out
        };
        let g = &cfg.entrants;
        let gamma = cells(&|x| g.prob_below(x));
        let atom_bins = bins.atom_count(phi_bar);
        if gamma[..atom_bins].iter().sum::<f64>() <= 0.0 {
            return Err(Error::Invalid(format!("γ puts no mass on [0, {phi_bar}); no atom")));
        }
        let law = &cfg.incumbents;
        let rows: Vec<Vec<f64>> = bins.reps[atom_bins..]
            .par_iter()
            .map(|&r| cells(&|x| law.prob_below(r, x)))
            .collect();
        Ok(EndogenousKernel {
            p,
            phi_bar,
            gamma,
            rows,
            atom_bins,
        })
    }

    /// μΠ for a bin measure μ.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let atom: f64 = mu[..self.atom_bins].iter().sum();
        let mut out: Vec<f64> = self.gamma.iter().map(|g| atom * g).collect();
        for (row, m) in self.rows.iter().zip(&mu[self.atom_bins..]) {
            if *m == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row) {
                *o += m * r;
            }
        }
        out
    }
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryMeasure {
    pub bins: Bins,
    pub mass: Vec<f64>,
    pub total: f64,
    pub is_probability: bool,
    pub atom_mass: f64,
    pub atom_bins: usize,
    /// TV distance between μ and μΠ (after normalizing).
    pub invariance_residual: f64,
    pub iterations: usize,
}

impl StationaryMeasure {
    pub fn normalized(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m / self.total).collect()
    }

    pub fn scaled(&self, s: f64) -> StationaryMeasure {
        let mut out = self.clone();
        out.mass.iter_mut().for_each(|m| *m *= s);
        out.total *= s;
        out.atom_mass = out.mass[..out.atom_bins].iter().sum();
        out.is_probability = false;
        out
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut t = Table::new(comments, &["bin_left", "bin_right", "mass"]);
        for (i, m) in self.mass.iter().enumerate() {
            t.row(&[num(self.bins.edges[i]), num(self.bins.right(i)), num(*m)]);
        }
        t.finish()
    }
}

/// Power iteration of the binned Π_p from γ until the TV step is below
/// `stationary_tol`.
pub fn stationary_distribution_grid(
    kernel: &EndogenousKernel,
    bins: &Bins,
    cfg: &ModelConfig,
) -> Result<StationaryMeasure> {
    let tol = cfg.numerics.stationary_tol;
    let mut mu = kernel.gamma.clone();
    let mut last = f64::INFINITY;
    for it in 1..=cfg.numerics.stationary_max_iter {
        let mut next = kernel.push_forward(&mu);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        last = total_variation(&next, &mu);
        mu = next;
        if last < tol {
            let check = kernel.push_forward(&mu);
            let residual = total_variation(&check, &mu);
            let atom_mass = mu[..kernel.atom_bins].iter().sum();
            return Ok(StationaryMeasure {
                bins: bins.clone(),
                mass: mu,
                total: 1.0,
                is_probability: true,
                atom_mass,
                atom_bins: kernel.atom_bins,
                invariance_residual: residual,
                iterations: it,
            });
        }
    }
    Err(Error::StationaryNonConvergence {
        iterations: cfg.numerics.stationary_max_iter,
        last_step: last,
    })
}

/// Average output of firms in each bin: q at the representative, with a
/// Pareto tail correction on the open top bin when the tail index is known.
pub fn bin_outputs(cfg: &ModelConfig, bins: &Bins, p: f64, tail_index: Option<f64>) -> Vec<f64> {
    let mut q: Vec<f64> = bins.reps.iter().map(|&r| cfg.output(r, p)).collect();
    if !cfg.is_discrete() {
        let last = bins.len() - 1;
        let eta = cfg.technology.eta();
        if let Some(a) = tail_index.map(|a| a / eta).filter(|a| *a > 1.0) {
            q[last] = cfg.output(bins.edges[last], p) * a / (a - 1.0);
        }
    }
    q
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub entry: f64,
    pub invariance: f64,
    pub market: f64,
}

/// The assembled stationary equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSolution {
    pub p_star: f64,
    pub phi_bar: f64,
    #[serde(rename = "M_star")]
    pub m_star: f64,
    pub s: f64,
    pub total_mass: f64,
    pub residuals: Residuals,
    pub lifetime_output: LifetimeOutput,
    /// ∫q dμ* / M*, the lifetime output implied by the stationary measure.
    pub lifetime_output_from_measure: f64,
    pub demand: f64,
    pub entry_bracket: (f64, f64),
    pub value_iterations: usize,
    pub stationary_iterations: usize,
    pub phi_max: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub mu: StationaryMeasure,
    #[serde(skip)]
    pub value: ValueFunction,
}

impl EquilibriumSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// p* and φ̄(p*) only.
pub fn solve_price_and_threshold(problem: &ValueProblem) -> Result<(EntryPrice, f64)> {
    let price = solve_entry_price(problem)?;
    let phi_bar = problem.exit_threshold(&price.value);
    if !phi_bar.is_finite() {
        return Err(Error::NoExitThreshold(price.p_star));
    }
    if phi_bar <= 0.0 {
        return Err(Error::Invalid(format!(
            "exit threshold is 0 at p* = {}: no firm ever exits",
            price.p_star
        )));
    }
    Ok((price, phi_bar))
}

/// Steps: entry price, stationary distribution, rescaling to clear the goods market.
pub fn assemble_equilibrium(cfg: &ModelConfig) -> Result<EquilibriumSolution> {
    let problem = ValueProblem::new(cfg)?;
    assemble_with(&problem)
}

pub fn assemble_with(problem: &ValueProblem) -> Result<EquilibriumSolution> {
    let cfg = &problem.cfg;
    let mut warnings = Vec::new();
    if let Some(w) = &problem.grid.warning {
        warnings.push(w.clone());
    }
    let (price, phi_bar) = solve_price_and_threshold(problem)?;
    let p = price.p_star;
    let bins = build_bins(cfg, &problem.grid, phi_bar)?;
    let kernel = EndogenousKernel::new(cfg, &bins, p, phi_bar)?;
    let mu = stationary_distribution_grid(&kernel, &bins, cfg)?;
    let alpha = crate::tails::TailLaw::from_config(cfg)
        .ok()
        .and_then(|l| crate::tails::solve_tail_index(&l).ok());
    let q = bin_outputs(cfg, &bins, p, alpha);
    let q_mu: f64 = mu.mass.iter().zip(&q).map(|(m, q)| m * q).sum();
    let demand = cfg.demand.quantity(p);
    let s = demand / q_mu;
    let mu_star = mu.scaled(s);
    let q_star: f64 = mu_star.mass.iter().zip(&q).map(|(m, q)| m * q).sum();
    let market = (q_star - demand).abs() / demand;
    let m_star = mu_star.atom_mass;
    if !(m_star > 0.0) {
        return Err(Error::Invalid(format!("entrant mass M* = {m_star} is not positive")));
    }
    let life = lifetime_output(p, phi_bar, cfg.numerics.lifetime_paths, cfg, cfg.numerics.seed);
    if !life.finite {
        warnings.push(format!("lifetime output: {}", life.verdict));
    }
    Ok(EquilibriumSolution {
        p_star: p,
        phi_bar,
        m_star,
        s,
        total_mass: mu_star.total,
        residuals: Residuals {
            entry: price.gap,
            invariance: mu.invariance_residual,
            market,
        },
        lifetime_output: life,
        lifetime_output_from_measure: q_star / m_star,
        demand,
        entry_bracket: price.bracket,
        value_iterations: price.value.iterations,
        stationary_iterations: mu.iterations,
        phi_max: problem.grid.phi_max,
        warnings,
        mu: mu_star,
        value: price.value,
    })
}

/// Occupation-measure decomposition and Kac identity at the equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct KacReport {
    pub n_paths: u64,
    pub censored: u64,
    pub mean_tau: f64,
    pub se_tau: f64,
    pub max_tau: u64,
    /// Stationary probability of the atom [0, φ̄).
    pub atom_mass: f64,
    /// E τ · μ(atom); 1 in theory.
    pub kac_product: f64,
    pub kac_se: f64,
    /// |kac_product − 1| / kac_se
    pub kac_z: f64,
    /// TV distance between μ*/‖μ*‖ and the normalized occupation measure.
    pub tv_distance: f64,
    /// Log-linear slope of P(τ > m) beyond the 99th percentile of τ.
    pub lifespan_tail_slope: f64,
}

pub fn kac_check(
    eq: &EquilibriumSolution,
    cfg: &ModelConfig,
    n_paths: u64,
    seed: u64,
) -> Result<(KacReport, crate::simulate::OccupationAccumulator)> {
    let occ = occupation_measure(eq.p_star, eq.phi_bar, n_paths, &eq.mu.bins, cfg, seed)?;
    let mu = eq.mu.normalized();
    let visits: f64 = occ.mean_visits.iter().sum();
    let occ_norm: Vec<f64> = occ.mean_visits.iter().map(|v| v / visits).collect();
    let atom = mu[..eq.mu.atom_bins].iter().sum::<f64>();
    let product = occ.mean_tau * atom;
    let se = occ.se_tau * atom;
    Ok((
        KacReport {
            n_paths,
            censored: occ.censored,
            mean_tau: occ.mean_tau,
            se_tau: occ.se_tau,
            max_tau: occ.max_tau,
            atom_mass: atom,
            kac_product: product,
            kac_se: se,
            kac_z: (product - 1.0).abs() / se,
            tv_distance: total_variation(&mu, &occ_norm),
            lifespan_tail_slope: occ.lifespan_tail_slope(),
        },
        occ,
    ))
}

/// β = 0 closed form entry gap, used to sanity-check the solver.
pub fn myopic_entry_gap(cfg: &ModelConfig, p: f64) -> f64 {
    expected_entrant_profit(cfg, p) - cfg.c_e()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn stub() -> ModelConfig {
        parse_model(include_str!("../../../fixtures/stub3.toml")).unwrap()
    }

    #[test]
    fn stub_stationary_matches_eigenvector() {
        let cfg = stub();
        let eq = assemble_equilibrium(&cfg).unwrap();
        assert_eq!(eq.phi_bar, 1.0);
        let mu = eq.mu.normalized();
        // μ0 = .72 μ1, μ2 = .6 μ1
        let m1 = 1.0 / 2.32;
        for (got, want) in mu.iter().zip([0.72 * m1, m1, 0.6 * m1]) {
            assert!((got - want).abs() < 1e-10, "{mu:?}");
        }
    }

    #[test]
    fn rows_equal_to_gamma_leave_gamma_invariant() {
        // every row of Π is γ when φ̄ exceeds every representative
        let cfg = stub();
        let bins = Bins {
            edges: vec![0.0, 1.0, 2.0],
            reps: vec![0.0, 1.0, 2.0],
        };
        let k = EndogenousKernel::new(&cfg, &bins, 1.0, 3.0).unwrap();
        let mu = stationary_distribution_grid(&k, &bins, &cfg).unwrap();
        assert_eq!(mu.mass, vec![0.5, 0.5, 0.0]);
    }
}
