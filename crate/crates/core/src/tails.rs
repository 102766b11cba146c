//! Tail index of the stationary firm distribution: theory (E A^α = 1), the
//! sufficient conditions behind it, the output drift bound, and empirical
//! Hill / rank-size diagnostics on simulated cross-sections.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::{num, Table};
use crate::equilibrium::solve_price_and_threshold;
use crate::error::{Error, Result};
use crate::model::{AdditiveDist, AssumptionCheck, Entrants, GrowthDist, IncumbentLaw, Kernel, ModelConfig, Technology, Verdict};
use crate::rng::{par_fold, StreamKey};
use crate::simulate::{cross_section_sample, PanelSample};
use crate::stats::ols_slope;
use crate::value::ValueProblem;

/// Smallest admissible number of order statistics for the Hill estimator.
pub const HILL_MIN_K: usize = 10;

/// Fractions of the sample used in the k-sweep.
pub const SWEEP_FRACTIONS: [f64; 4] = [0.005, 0.01, 0.02, 0.05];

/// Distribution of the growth factor A.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailLaw {
    pub a: GrowthDist,
}

impl TailLaw {
    pub fn new(a: GrowthDist) -> TailLaw {
        TailLaw { a }
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<TailLaw> {
        cfg.incumbents
            .growth()
            .cloned()
            .map(TailLaw::new)
            .ok_or_else(|| Error::Invalid("incumbent law has no multiplicative growth factor".into()))
    }
}

/// E[A^α].
pub fn moment_a(law: &TailLaw, alpha: f64) -> f64 {
    law.a.moment(alpha)
}

fn check_tail_preconditions(law: &TailLaw) -> Result<()> {
    let ml = law.a.mean_log();
    if !(ml < 0.0) {
        return Err(Error::NoTailIndex(format!("mean log growth nonnegative (E ln A = {ml})")));
    }
    if !(law.a.prob_above_one() > 0.0) {
        return Err(Error::NoTailIndex("no mass above 1".into()));
    }
    Ok(())
}

/// The positive root of E[A^α] = 1.
pub fn solve_tail_index(law: &TailLaw) -> Result<f64> {
    check_tail_preconditions(law)?;
    match &law.a {
        GrowthDist::Lognormal { mu, sigma } => Ok(-2.0 * mu / (sigma * sigma)),
        GrowthDist::TwoPoint { .. } => solve_tail_index_bisection(law),
    }
}

/// Bracketed bisection on the convex map α ↦ E[A^α] − 1.
pub fn solve_tail_index_bisection(law: &TailLaw) -> Result<f64> {
    check_tail_preconditions(law)?;
    let f = |a: f64| moment_a(law, a) - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoTailIndex("E A^alpha stays below 1".into()));
        }
    }
    // the root is the only sign change on (0, ∞); lo may still be 0
    if lo == 0.0 {
        lo = hi;
        while f(lo) >= 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::NoTailIndex("root indistinguishable from 0".into()));
            }
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn verdict(ok: bool, evidence: String) -> AssumptionCheck {
    AssumptionCheck {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        evidence,
    }
}

/// Verdicts for the sufficient conditions P1–P3 and the entrant moment
/// conditions, keyed "P1", "P2", "P3", "gamma_alpha_moment", "gamma_mean".
pub fn check_deviation_conditions(cfg: &ModelConfig, alpha: f64) -> BTreeMap<String, AssumptionCheck> {
    let mut out = BTreeMap::new();
    let law = &cfg.incumbents;
    let p1 = match law {
        IncumbentLaw::PureGibrat { .. } => verdict(true, "Y = 0".into()),
        IncumbentLaw::AffineGibrat { y, .. } => verdict(
            y.all_moments_finite(),
            match y {
                AdditiveDist::Zero => "Y = 0".into(),
                AdditiveDist::Exponential { .. } => "exponential Y has finite moments of all orders".into(),
                AdditiveDist::Lognormal { .. } => "lognormal Y has finite moments of all orders".into(),
            },
        ),
        IncumbentLaw::Discrete { .. } => AssumptionCheck {
            verdict: Verdict::Unverifiable,
            evidence: "discrete chain has no Gibrat decomposition".into(),
        },
    };
    out.insert("P1".to_string(), p1);

    let p2 = match law.growth() {
        None => AssumptionCheck {
            verdict: Verdict::Unverifiable,
            evidence: "discrete chain has no growth factor".into(),
        },
        Some(a) => {
            let mut problems = Vec::new();
            if !(alpha > 0.0 && alpha < 2.0) {
                problems.push(format!(
                    "alpha = {alpha} outside (0,2) required by P2; the Pareto tail result itself still applies for alpha > 0"
                ));
            }
            if !a.is_continuous() {
                problems.push(
                    "distribution function of A is not continuous; nonarithmetic hypothesis unverified".into(),
                );
            }
            let m = a.moment(alpha + 1.0);
            if !m.is_finite() {
                problems.push(format!("E A^(alpha+1) = {m} is not finite"));
            }
            if problems.is_empty() {
                verdict(true, format!("alpha = {alpha} in (0,2), A continuous, E A^(alpha+1) = {m}"))
            } else {
                verdict(false, problems.join("; "))
            }
        }
    };
    out.insert("P2".to_string(), p2);

    let p3 = match law {
        IncumbentLaw::PureGibrat { .. } => verdict(true, "G(phi, W) = A phi exactly".into()),
        IncumbentLaw::AffineGibrat { .. } => verdict(true, "|G(phi, W) - A phi| = Y holds with equality".into()),
        IncumbentLaw::Discrete { .. } => AssumptionCheck {
            verdict: Verdict::Unverifiable,
            evidence: "discrete chain has no Gibrat decomposition".into(),
        },
    };
    out.insert("P3".to_string(), p3);

    let g_alpha = cfg.entrants.moment(alpha);
    out.insert(
        "gamma_alpha_moment".to_string(),
        verdict(g_alpha.is_finite(), format!("integral of z^alpha under gamma = {g_alpha}")),
    );
    let g_mean = cfg.entrants.mean();
    out.insert(
        "gamma_mean".to_string(),
        verdict(g_mean.is_finite(), format!("entrant mean = {g_mean}")),
    );
    out
}

/// Output drift bound E q(φ') <= λ q(φ) + L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub lambda: f64,
    pub l: f64,
    pub pass: bool,
    pub method: String,
    pub evidence: String,
}

fn drift_scan_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    let n = 400;
    for i in 0..=n {
        g.push(10f64.powf(-6.0 + 14.0 * i as f64 / n as f64));
    }
    g
}

/// sup over a φ grid of ∫q dΓ(φ) − λq(φ), and whether the last grid points
/// are still rising (then the supremum is not attained on the grid).
fn drift_sup(cfg: &ModelConfig, kernel: &Kernel, p: f64, lambda: f64, grid: &[f64]) -> (f64, bool) {
    let gaps: Vec<f64> = grid
        .iter()
        .map(|&phi| {
            let eq = kernel
                .expectation(phi, |x| cfg.output(x, p))
                .unwrap_or(f64::INFINITY);
            eq - lambda * cfg.output(phi, p)
        })
        .collect();
    let sup = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = gaps.len();
    let rising = gaps[n - 1] >= gaps[n - 2];
    (sup, rising)
}

pub fn drift_check(cfg: &ModelConfig, p: f64) -> DriftReport {
    let tech = &cfg.technology;
    let eta = tech.eta();
    match (&cfg.incumbents, tech) {
        (IncumbentLaw::PureGibrat { a }, _) => {
            let lambda = a.moment(eta);
            let pass = lambda < 1.0;
            DriftReport {
                lambda,
                l: 0.0,
                pass,
                method: "closed form".into(),
                evidence: format!("E A^{eta} = {lambda} {} 1", if pass { "<" } else { ">=" }),
            }
        }
        (IncumbentLaw::AffineGibrat { a, y }, Technology::Linear { e, .. }) => {
            let lambda = a.mean();
            let pass = lambda < 1.0;
            DriftReport {
                lambda,
                l: e * y.mean(),
                pass,
                method: "closed form".into(),
                evidence: format!("E A = {lambda} {} 1", if pass { "<" } else { ">=" }),
            }
        }
        (IncumbentLaw::AffineGibrat { a, .. }, Technology::CobbDouglas { .. }) => {
            let floor = a.moment(eta);
            if !(floor < 1.0) {
                return DriftReport {
                    lambda: floor,
                    l: f64::INFINITY,
                    pass: false,
                    method: "numerical scan".into(),
                    evidence: format!("E A^{eta} = {floor} >= 1, so no lambda < 1 can work at large phi"),
                };
            }
            let kernel = Kernel::new(&cfg.incumbents, cfg.numerics.quad_nodes);
            let grid = drift_scan_grid();
            let mut best: Option<(f64, f64)> = None;
            let steps = 50;
            for i in 1..steps {
                let lambda = floor + (1.0 - floor) * i as f64 / steps as f64;
                let (l, rising) = drift_sup(cfg, &kernel, p, lambda, &grid);
                if rising || !l.is_finite() {
                    continue;
                }
                let l = l.max(0.0);
                let score = l / (1.0 - lambda);
                if best.is_none_or(|(bl, bll)| score < bll / (1.0 - bl)) {
                    best = Some((lambda, l));
                }
            }
            match best {
                Some((lambda, l)) => DriftReport {
                    lambda,
                    l,
                    pass: true,
                    method: "numerical scan".into(),
                    evidence: format!(
                        "best pair over {} lambdas in (E A^eta, 1) = ({floor}, 1): lambda = {lambda}, L = {l}",
                        steps - 1
                    ),
                },
                None => DriftReport {
                    lambda: floor,
                    l: f64::INFINITY,
                    pass: false,
                    method: "numerical scan".into(),
                    evidence: "gap still rising at the top of the scan grid for every lambda".into(),
                },
            }
        }
        (IncumbentLaw::Discrete { states, .. }, _) => {
            // bounded state space: any lambda works with a finite L
            let lambda = 0.5;
            let kernel = Kernel::new(&cfg.incumbents, cfg.numerics.quad_nodes);
            let (l, _) = drift_sup(cfg, &kernel, p, lambda, states);
            DriftReport {
                lambda,
                l: l.max(0.0),
                pass: true,
                method: "finite state space".into(),
                evidence: format!("max over {} states", states.len()),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub k: usize,
    pub alpha: f64,
    pub se: f64,
}

/// Positive samples sorted in descending order.
pub fn sorted_desc(samples: &[f64]) -> Vec<f64> {
    let mut xs: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0).collect();
    xs.par_sort_unstable_by(|a, b| b.total_cmp(a));
    xs
}

/// Hill estimate from positive samples already sorted in descending order.
pub fn hill_from_sorted(desc: &[f64], k: usize) -> Result<HillEstimate> {
    let n = desc.len();
    if k < HILL_MIN_K {
        return Err(Error::Hill(format!("k = {k} below minimum {HILL_MIN_K}")));
    }
    if 2 * k >= n {
        return Err(Error::Hill(format!("k = {k} not below half of the {n} positive samples")));
    }
    let base = desc[k].ln();
    let denom: f64 = desc[..k].iter().map(|x| x.ln() - base).sum();
    if !(denom > 0.0) {
        return Err(Error::Hill("zero denominator (tied order statistics)".into()));
    }
    let alpha = k as f64 / denom;
    Ok(HillEstimate {
        k,
        alpha,
        se: alpha / (k as f64).sqrt(),
    })
}

pub fn hill_estimate(samples: &[f64], k: usize) -> Result<HillEstimate> {
    hill_from_sorted(&sorted_desc(samples), k)
}

/// Hill estimates at each fraction of the sample; infeasible k are skipped.
pub fn k_sweep(desc: &[f64], fractions: &[f64]) -> Vec<HillEstimate> {
    fractions
        .iter()
        .filter_map(|f| hill_from_sorted(desc, (f * desc.len() as f64).round() as usize).ok())
        .collect()
}

pub fn k_sweep_csv(sweep: &[HillEstimate], comments: &[String]) -> String {
    let mut t = Table::new(comments, &["k", "alpha_hat", "se"]);
    for h in sweep {
        t.row(&[h.k.to_string(), num(h.alpha), num(h.se)]);
    }
    t.finish()
}

/// (ln size, ln rank) pairs, largest size first.
pub fn rank_size(samples: &[f64]) -> Vec<(f64, f64)> {
    rank_size_sorted(&sorted_desc(samples))
}

pub fn rank_size_sorted(desc: &[f64]) -> Vec<(f64, f64)> {
    desc.iter()
        .enumerate()
        .map(|(i, x)| (x.ln(), ((i + 1) as f64).ln()))
        .collect()
}

/// Least-squares slope of ln rank on ln size.
pub fn rank_size_slope(pairs: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    ols_slope(&xs, &ys)
}

/// Rank-size CSV. Every rank up to `dense` is written, beyond that ranks on a
/// geometric ladder with ratio 1.01.
pub fn rank_size_csv(pairs: &[(f64, f64)], dense: usize, comments: &[String]) -> String {
    let mut t = Table::new(comments, &["ln_size", "ln_rank"]);
    let mut next = dense as f64;
    for (i, (s, r)) in pairs.iter().enumerate() {
        let rank = i + 1;
        if rank <= dense || rank as f64 >= next || rank == pairs.len() {
            t.row(&[num(*s), num(*r)]);
            if rank > dense {
                next = (next * 1.01).max(rank as f64 + 1.0);
            }
        }
    }
    t.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMeta {
    pub n: usize,
    pub p_star: f64,
    pub phi_bar: f64,
    pub burn_in: u64,
    pub stride: u64,
    pub draws_per_chain: u64,
    pub seed: u64,
}

/// Sample mean of the first and second half of the cross-section.
#[derive(Debug, Clone, Serialize)]
pub struct FirstMomentCheck {
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub relative_change: f64,
    pub stable: bool,
}

pub fn first_moment_check(draws: &[f64]) -> FirstMomentCheck {
    let h = draws.len() / 2;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (a, b) = (mean(&draws[..h]), mean(&draws[h..]));
    let rel = (b - a).abs() / a.abs();
    FirstMomentCheck {
        first_half_mean: a,
        second_half_mean: b,
        relative_change: rel,
        stable: rel < 0.05,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailConstant {
    pub quantile: f64,
    pub x: f64,
    /// x^α · P(X > x), empirical
    pub scaled_survival: f64,
}

pub fn tail_constants(desc: &[f64], alpha: f64) -> Vec<TailConstant> {
    let n = desc.len();
    [0.99, 0.999, 0.9999]
        .iter()
        .filter_map(|&q| {
            let above = ((1.0 - q) * n as f64).round() as usize;
            if above == 0 || above >= n {
                return None;
            }
            let x = desc[above];
            Some(TailConstant {
                quantile: q,
                x,
                scaled_survival: x.powf(alpha) * above as f64 / n as f64,
            })
        })
        .collect()
}

/// Monte Carlo estimate of E|G(X,W)^α − (AX)^α| over the cross-section.
pub fn deviation_moment(cfg: &ModelConfig, draws: &[f64], alpha: f64, seed: u64) -> Option<f64> {
    cfg.incumbents.growth()?;
    let key = StreamKey::new(seed, "deviation");
    let n = draws.len() as u64;
    if n == 0 {
        return None;
    }
    let total = par_fold(
        n,
        || 0.0,
        |acc, i| {
            let mut rng = key.stream(i);
            let x = draws[i as usize];
            let w = cfg.incumbents.draw_shock(&mut rng);
            let g = cfg.incumbents.apply(x, &w);
            *acc += (g.powf(alpha) - (w.a * x).powf(alpha)).abs();
        },
        |a, b| *a += b,
    );
    Some(total / n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub alpha_theory: f64,
    pub conditions: BTreeMap<String, AssumptionCheck>,
    pub drift: DriftReport,
    pub hill: Option<HillEstimate>,
    pub k_sweep: Vec<HillEstimate>,
    pub rank_size_slope: f64,
    pub sample: SampleMeta,
    pub first_moment: FirstMomentCheck,
    pub tail_constants: Vec<TailConstant>,
    pub deviation_moment: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub rank_size: Vec<(f64, f64)>,
    #[serde(skip)]
    pub panel: PanelSample,
}

impl TailReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tail report serializes")
    }
}

/// Full tail pipeline: α from the growth law, equilibrium (p*, φ̄), an
/// `n`-draw cross-section, Hill at k = 1% with the k-sweep.
pub fn tail_analysis(cfg: &ModelConfig, n: u64, seed: u64) -> Result<TailReport> {
    let law = TailLaw::from_config(cfg)?;
    let alpha = solve_tail_index(&law)?;
    let mut warnings = Vec::new();
    if !law.a.is_continuous() {
        warnings.push("A is not continuously distributed; nonarithmetic hypothesis unverified".into());
    }
    let problem = ValueProblem::new(cfg)?;
    let (price, phi_bar) = solve_price_and_threshold(&problem)?;
    let p = price.p_star;
    let drift = drift_check(cfg, p);
    if !drift.pass {
        warnings.push(format!("drift check failed: {}", drift.evidence));
    }
    let num_ = &cfg.numerics;
    let panel = cross_section_sample(p, phi_bar, n, num_.burn_in, num_.stride, cfg, seed);
    let desc = sorted_desc(&panel.draws);
    let k = (0.01 * desc.len() as f64).round() as usize;
    let hill = match hill_from_sorted(&desc, k) {
        Ok(h) => Some(h),
        Err(e) => {
            warnings.push(format!("k below minimum; Hill skipped ({e})"));
            None
        }
    };
    let sweep = k_sweep(&desc, &SWEEP_FRACTIONS);
    let pairs = rank_size_sorted(&desc);
    let slope = if pairs.len() >= 2 {
        // fit over the top 1% to stay in the tail
        let top = (pairs.len() / 100).max(2).min(pairs.len());
        rank_size_slope(&pairs[..top])
    } else {
        f64::NAN
    };
    let fm = first_moment_check(&panel.draws);
    Ok(TailReport {
        alpha_theory: alpha,
        conditions: check_deviation_conditions(cfg, alpha),
        drift,
        hill,
        k_sweep: sweep,
        rank_size_slope: slope,
        sample: SampleMeta {
            n: panel.draws.len(),
            p_star: p,
            phi_bar,
            burn_in: panel.burn_in,
            stride: panel.stride,
            draws_per_chain: panel.draws_per_chain,
            seed,
        },
        first_moment: fm,
        tail_constants: tail_constants(&desc, alpha),
        deviation_moment: deviation_moment(cfg, &panel.draws, alpha, seed),
        warnings,
        rank_size: pairs,
        panel,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceRow {
    pub name: String,
    pub entrants: String,
    pub p_star: Option<f64>,
    pub phi_bar: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub se: Option<f64>,
    pub k: Option<usize>,
    /// "ok", or the reason the row was skipped.
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceTable {
    pub alpha_theory: f64,
    pub rows: Vec<InvarianceRow>,
    /// Largest |α̂_i − α̂_j| / sqrt(SE_i² + SE_j²) over successful row pairs.
    pub max_pair_z: f64,
    pub verdict: String,
}

impl InvarianceTable {
    pub fn successes(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "ok").count()
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let mut t = Table::new(
            comments,
            &["name", "entrants", "p_star", "phi_bar", "alpha_hat", "se", "k", "status"],
        );
        for r in &self.rows {
            t.row(&[
                r.name.clone(),
                r.entrants.clone(),
                opt(r.p_star),
                opt(r.phi_bar),
                opt(r.alpha_hat),
                opt(r.se),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.status.replace(',', ";"),
            ]);
        }
        t.finish()
    }
}

fn invariance_row(cfg: &ModelConfig, name: &str, entrants: &Entrants, alpha: f64, n: u64, seed: u64) -> InvarianceRow {
    let mut row = InvarianceRow {
        name: name.to_string(),
        entrants: entrants.label(),
        p_star: None,
        phi_bar: None,
        alpha_hat: None,
        se: None,
        k: None,
        status: String::new(),
    };
    let m = entrants.moment(alpha);
    if !m.is_finite() {
        row.status = format!("precondition: integral of z^alpha under gamma is infinite at alpha = {alpha}");
        return row;
    }
    let cfg = cfg.with_entrants(entrants.clone());
    let solved = cfg
        .validate()
        .and_then(|_| ValueProblem::new(&cfg))
        .and_then(|prob| solve_price_and_threshold(&prob));
    let (price, phi_bar) = match solved {
        Ok(x) => x,
        Err(e) => {
            row.status = format!("equilibrium failed: {e}");
            return row;
        }
    };
    row.p_star = Some(price.p_star);
    row.phi_bar = Some(phi_bar);
    let num_ = &cfg.numerics;
    let panel = cross_section_sample(price.p_star, phi_bar, n, num_.burn_in, num_.stride, &cfg, seed);
    let desc = sorted_desc(&panel.draws);
    match hill_from_sorted(&desc, (0.01 * desc.len() as f64).round() as usize) {
        Ok(h) => {
            row.alpha_hat = Some(h.alpha);
            row.se = Some(h.se);
            row.k = Some(h.k);
            row.status = "ok".into();
        }
        Err(e) => row.status = format!("hill failed: {e}"),
    }
    row
}

/// Re-solves the equilibrium under each entrant law and compares Hill
/// estimates. Every row uses the same seed.
pub fn gamma_invariance_experiment(
    cfg: &ModelConfig,
    alternatives: &[(String, Entrants)],
    n: u64,
    seed: u64,
) -> Result<InvarianceTable> {
    let alpha = solve_tail_index(&TailLaw::from_config(cfg)?)?;
    let rows: Vec<InvarianceRow> = alternatives
        .par_iter()
        .map(|(name, g)| invariance_row(cfg, name, g, alpha, n, seed))
        .collect();
    let ok: Vec<&InvarianceRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let mut max_z: f64 = 0.0;
    for i in 0..ok.len() {
        for j in i + 1..ok.len() {
            let (a, b) = (ok[i], ok[j]);
            let se = (a.se.unwrap().powi(2) + b.se.unwrap().powi(2)).sqrt();
            max_z = max_z.max((a.alpha_hat.unwrap() - b.alpha_hat.unwrap()).abs() / se);
        }
    }
    let n_ok = ok.len();
    let verdict = if n_ok < 2 {
        "insufficient rows".to_string()
    } else if max_z <= 3.0 {
        "invariant".to_string()
    } else {
        "not invariant".to_string()
    };
    Ok(InvarianceTable {
        alpha_theory: alpha,
        rows,
        max_pair_z: if n_ok < 2 { f64::NAN } else { max_z },
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn lognormal(mu: f64, sigma: f64) -> TailLaw {
        TailLaw::new(GrowthDist::Lognormal { mu, sigma })
    }

    fn two_point() -> TailLaw {
        TailLaw::new(GrowthDist::TwoPoint {
            values: vec![0.4, 1.5],
            probs: vec![0.5, 0.5],
        })
    }

    #[test]
    fn moments() {
        assert!((moment_a(&lognormal(-0.025, 0.2), 1.25) - 1.0).abs() < 1e-15);
        assert_eq!(moment_a(&two_point(), 0.0), 1.0);
        assert!((moment_a(&two_point(), 1.0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn tail_index_roots() {
        assert!((solve_tail_index(&lognormal(-0.025, 0.2)).unwrap() - 1.25).abs() < 1e-12);
        let a = solve_tail_index(&two_point()).unwrap();
        assert!((a - 1.3051).abs() < 1e-4, "{a}");
        assert!((moment_a(&two_point(), a) - 1.0).abs() < 1e-9);
        assert!(moment_a(&two_point(), 1.3) < 1.0 && moment_a(&two_point(), 1.32) > 1.0);
        let b = solve_tail_index_bisection(&lognormal(-0.025, 0.2)).unwrap();
        assert!((b - 1.25).abs() < 1e-9);
    }

    #[test]
    fn tail_index_errors() {
        let e = solve_tail_index(&lognormal(0.0, 0.0)).unwrap_err().to_string();
        assert!(e.contains("mean log growth nonnegative"), "{e}");
        let e = solve_tail_index(&lognormal(0.01, 0.1)).unwrap_err().to_string();
        assert!(e.contains("no positive tail index"), "{e}");
        let law = TailLaw::new(GrowthDist::TwoPoint {
            values: vec![0.5, 1.0],
            probs: vec![0.5, 0.5],
        });
        let e = solve_tail_index(&law).unwrap_err().to_string();
        assert!(e.contains("no mass above 1"), "{e}");
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = StreamKey::new(11, "hill").stream(0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>().powf(-0.5)).collect();
        let h = hill_estimate(&xs, 1000).unwrap();
        assert!((h.alpha - 2.0).abs() <= 3.0 * 2.0 / 1000f64.sqrt(), "{h:?}");
        assert_eq!(h.se, h.alpha / 1000f64.sqrt());
        let pairs = rank_size(&xs);
        assert!((rank_size_slope(&pairs) + 2.0).abs() < 0.1);
    }

    #[test]
    fn hill_guards() {
        assert!(hill_estimate(&[3.0; 100], 20).is_err());
        assert!(hill_estimate(&(1..=100).map(f64::from).collect::<Vec<_>>(), 9).is_err());
        assert!(hill_estimate(&(1..=100).map(f64::from).collect::<Vec<_>>(), 50).is_err());
    }

    #[test]
    fn rank_size_pairs() {
        let e = std::f64::consts::E;
        let r = rank_size(&[1.0, e * e, e]);
        let want = [(2.0, 0.0), (1.0, 2f64.ln()), (0.0, 3f64.ln())];
        for (g, w) in r.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-15 && (g.1 - w.1).abs() < 1e-15);
        }
        assert_eq!(rank_size(&[5.0]), vec![(5f64.ln(), 0.0)]);
    }

    #[test]
    fn rank_size_thinning_keeps_ends() {
        let pairs: Vec<(f64, f64)> = (0..5000).map(|i| (-(i as f64), ((i + 1) as f64).ln())).collect();
        let csv = rank_size_csv(&pairs, 100, &[]);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert!(rows.len() > 100 && rows.len() < 600);
        assert_eq!(rows[0], "-0.0,0.0");
        assert!(rows.last().unwrap().starts_with("-4999.0,"));
    }
}
