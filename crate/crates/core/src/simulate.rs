//! Continuous-state simulation of equilibrium firm dynamics: single
//! lifecycles, occupation measures and long-run cross-sections.
//!
//! Timing: an entrant's draw Z ~ γ is its first productivity φ_1, and the
//! lifespan τ is the first t >= 1 with φ_t < φ̄. Sums over a life run over
//! t = 1..τ, so one lifecycle is exactly one excursion of the equilibrium
//! chain between visits to the atom [0, φ̄).

use rand::Rng;
use serde::Serialize;

use crate::csv::{num, Table};
use crate::equilibrium::Bins;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::rng::{par_fold, par_map, StreamKey};
use crate::stats::{ols_slope, Moments};

/// One transition of the equilibrium chain: incumbent update at or above φ̄,
/// a fresh entrant draw below it.
pub fn step_equilibrium<R: Rng + ?Sized>(phi: f64, phi_bar: f64, cfg: &ModelConfig, rng: &mut R) -> f64 {
    if phi < phi_bar {
        cfg.entrants.sample(rng)
    } else {
        cfg.incumbents.sample(phi, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmPath {
    /// φ_1 ~ γ
    pub entry: f64,
    /// φ_1, ..., φ_τ (or up to T_max when censored)
    pub path: Vec<f64>,
    pub tau: u64,
    pub lifetime_output: f64,
    pub censored: bool,
}

/// Runs one life and calls `visit` on φ_1..φ_τ. Returns (τ, lifetime output, censored).
pub fn run_firm<R: Rng + ?Sized>(
    p: f64,
    phi_bar: f64,
    cfg: &ModelConfig,
    rng: &mut R,
    mut visit: impl FnMut(f64),
) -> (u64, f64, bool) {
    let t_max = cfg.numerics.t_max;
    let mut phi = cfg.entrants.sample(rng);
    let mut output = 0.0;
    for t in 1..=t_max {
        visit(phi);
        output += cfg.output(phi, p);
        if phi < phi_bar {
            return (t, output, false);
        }
        if t < t_max {
            phi = cfg.incumbents.sample(phi, rng);
        }
    }
    (t_max, output, true)
}

pub fn simulate_firm<R: Rng + ?Sized>(p: f64, phi_bar: f64, cfg: &ModelConfig, rng: &mut R) -> FirmPath {
    let mut path = Vec::new();
    let (tau, lifetime_output, censored) = run_firm(p, phi_bar, cfg, rng, |x| path.push(x));
    FirmPath {
        entry: path[0],
        path,
        tau,
        lifetime_output,
        censored,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LifetimeOutput {
    pub mean: f64,
    pub se: f64,
    pub censored: u64,
    pub n_paths: u64,
    pub finite: bool,
    pub verdict: String,
}

/// Monte Carlo estimate of expected lifetime output Σ_{t=1}^{τ} q(φ_t, p).
pub fn lifetime_output(p: f64, phi_bar: f64, n_paths: u64, cfg: &ModelConfig, seed: u64) -> LifetimeOutput {
    let key = StreamKey::new(seed, "lifetime");
    let (m, censored) = par_fold(
        n_paths,
        || (Moments::default(), 0u64),
        |acc, i| {
            let mut rng = key.stream(i);
            let (_, out, cens) = run_firm(p, phi_bar, cfg, &mut rng, |_| {});
            acc.0.push(out);
            acc.1 += cens as u64;
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1 += b.1;
        },
    );
    let (mean, se) = (m.mean(), m.se());
    let stable = if mean == 0.0 {
        se == 0.0 || se.is_nan()
    } else {
        1.96 * se / mean.abs() < cfg.numerics.lifetime_rel_halfwidth
    };
    let finite = censored == 0 && stable;
    let verdict = if finite {
        "finite".to_string()
    } else {
        "possibly infinite: finiteness of expected lifetime output in doubt".to_string()
    };
    LifetimeOutput {
        mean,
        se,
        censored,
        n_paths,
        finite,
        verdict,
    }
}

/// Expected visits per lifecycle to each histogram bin.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationAccumulator {
    pub edges: Vec<f64>,
    pub n_paths: u64,
    /// Paths that hit T_max; excluded from the averages.
    pub censored: u64,
    pub mean_visits: Vec<f64>,
    pub se: Vec<f64>,
    pub mean_tau: f64,
    pub se_tau: f64,
    pub max_tau: u64,
    /// Lifespans of the uncensored paths in path order.
    #[serde(skip)]
    pub taus: Vec<u64>,
}

struct OccPartial {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    taus: Vec<u64>,
    censored: u64,
}

pub fn occupation_measure(
    p: f64,
    phi_bar: f64,
    n_paths: u64,
    bins: &Bins,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<OccupationAccumulator> {
    let nb = bins.len();
    let key = StreamKey::new(seed, "occupation");
    let acc = par_fold(
        n_paths,
        || OccPartial {
            sum: vec![0.0; nb],
            sum_sq: vec![0.0; nb],
            taus: Vec::new(),
            censored: 0,
        },
        |acc, i| {
            let mut rng = key.stream(i);
            let mut hits = Vec::new();
            let (tau, _, cens) = run_firm(p, phi_bar, cfg, &mut rng, |x| hits.push(bins.index(x)));
            if cens {
                acc.censored += 1;
                return;
            }
            acc.taus.push(tau);
            hits.sort_unstable();
            let mut j = 0;
            while j < hits.len() {
                let b = hits[j];
                let mut c = 0.0;
                while j < hits.len() && hits[j] == b {
                    c += 1.0;
                    j += 1;
                }
                acc.sum[b] += c;
                acc.sum_sq[b] += c * c;
            }
        },
        |a, b| {
            for k in 0..nb {
                a.sum[k] += b.sum[k];
                a.sum_sq[k] += b.sum_sq[k];
            }
            a.taus.extend(b.taus);
            a.censored += b.censored;
        },
    );
    let n = acc.taus.len();
    if n == 0 {
        return Err(Error::AllCensored(n_paths as usize));
    }
    let nf = n as f64;
    let se_of = |s: f64, ss: f64| {
        if n < 2 {
            return f64::NAN;
        }
        let m = s / nf;
        (((ss - nf * m * m) / (nf - 1.0)).max(0.0) / nf).sqrt()
    };
    let mean_visits: Vec<f64> = acc.sum.iter().map(|s| s / nf).collect();
    let se: Vec<f64> = acc.sum.iter().zip(&acc.sum_sq).map(|(s, ss)| se_of(*s, *ss)).collect();
    let mut tau_m = Moments::default();
    acc.taus.iter().for_each(|&t| tau_m.push(t as f64));
    Ok(OccupationAccumulator {
        edges: bins.edges.clone(),
        n_paths,
        censored: acc.censored,
        mean_visits,
        se,
        mean_tau: tau_m.mean(),
        se_tau: tau_m.se(),
        max_tau: acc.taus.iter().copied().max().unwrap_or(0),
        taus: acc.taus,
    })
}

impl OccupationAccumulator {
    pub fn right(&self, i: usize) -> f64 {
        self.edges.get(i + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// Slope of ln P(τ > m) against m beyond the empirical 99th percentile of
    /// τ. NaN when fewer than three distinct survival points are available.
    pub fn lifespan_tail_slope(&self) -> f64 {
        let mut t = self.taus.clone();
        t.sort_unstable();
        let n = t.len();
        if n < 100 {
            return f64::NAN;
        }
        let start = t[(0.99 * n as f64) as usize];
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut i = t.partition_point(|&x| x <= start);
        let mut m = start;
        while i < n {
            xs.push(m as f64);
            ys.push(((n - i) as f64 / n as f64).ln());
            m = t[i];
            i = t.partition_point(|&x| x <= m);
        }
        if xs.len() < 3 {
            return f64::NAN;
        }
        ols_slope(&xs, &ys)
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut t = Table::new(comments, &["bin_left", "bin_right", "mean_visits", "se"]);
        for (i, (m, s)) in self.mean_visits.iter().zip(&self.se).enumerate() {
            t.row(&[num(self.edges[i]), num(self.right(i)), num(*m), num(*s)]);
        }
        t.finish()
    }
}

/// Draws from the stationary distribution by running independent chains of
/// the equilibrium recursion.
#[derive(Debug, Clone, Serialize)]
pub struct PanelSample {
    pub draws: Vec<f64>,
    pub p: f64,
    pub phi_bar: f64,
    pub burn_in: u64,
    pub stride: u64,
    pub draws_per_chain: u64,
    pub chains: u64,
    pub seed: u64,
}

/// `n` draws: each chain starts in the atom, discards `burn_in` steps and then
/// records every `stride`-th state, `draws_per_chain` times.
pub fn cross_section_sample(
    p: f64,
    phi_bar: f64,
    n: u64,
    burn_in: u64,
    stride: u64,
    cfg: &ModelConfig,
    seed: u64,
) -> PanelSample {
    let per = cfg.numerics.draws_per_chain.max(1);
    let stride = stride.max(1);
    let chains = n.div_ceil(per);
    let key = StreamKey::new(seed, "cross-section");
    let parts = par_map(chains, |c| {
        let mut rng = key.stream(c);
        let take = per.min(n - c * per);
        let mut phi = 0.0;
        for _ in 0..burn_in {
            phi = step_equilibrium(phi, phi_bar, cfg, &mut rng);
        }
        let mut out = Vec::with_capacity(take as usize);
        for _ in 0..take {
            for _ in 0..stride {
                phi = step_equilibrium(phi, phi_bar, cfg, &mut rng);
            }
            out.push(phi);
        }
        out
    });
    PanelSample {
        draws: parts.into_iter().flatten().collect(),
        p,
        phi_bar,
        burn_in,
        stride,
        draws_per_chain: per,
        chains,
        seed,
    }
}

impl PanelSample {
    pub fn to_csv(&self) -> String {
        let meta = vec![
            format!("seed = {}", self.seed),
            format!("burn_in = {}", self.burn_in),
            format!("stride = {}", self.stride),
            format!("draws_per_chain = {}", self.draws_per_chain),
            format!("chains = {}", self.chains),
            format!("p = {}", num(self.p)),
            format!("phi_bar = {}", num(self.phi_bar)),
        ];
        let mut t = Table::new(&meta, &["phi"]);
        for x in &self.draws {
            t.row(&[num(*x)]);
        }
        t.finish()
    }
}
