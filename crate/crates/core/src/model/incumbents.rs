use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::entrants::normal_cdf;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite_normal, gauss_laguerre_exp, integrate_adaptive};

/// Distribution of the multiplicative growth factor A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthDist {
    /// ln A ~ N(mu, sigma²); sigma = 0 gives the point mass at exp(mu).
    Lognormal { mu: f64, sigma: f64 },
    TwoPoint { values: Vec<f64>, probs: Vec<f64> },
}

/// Distribution of the additive term Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdditiveDist {
    Exponential { mean: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Zero,
}

/// Incumbent productivity law Γ, given through the update map φ' = G(φ, W).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncumbentLaw {
    /// φ' = A φ
    PureGibrat { a: GrowthDist },
    /// φ' = A φ + Y with A independent of Y
    AffineGibrat { a: GrowthDist, y: AdditiveDist },
    /// Finite state chain; a productivity uses the row of the largest state <= φ.
    Discrete { states: Vec<f64>, matrix: Vec<Vec<f64>> },
}

/// One draw of the shock W. `u` drives the discrete chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shock {
    pub a: f64,
    pub y: f64,
    pub u: f64,
}

impl GrowthDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GrowthDist::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            GrowthDist::TwoPoint { values, probs } => {
                let u: f64 = rng.random();
                if u < probs[0] {
                    values[0]
                } else {
                    values[1]
                }
            }
        }
    }

    /// E[A^k].
    pub fn moment(&self, k: f64) -> f64 {
        match self {
            GrowthDist::Lognormal { mu, sigma } => (mu * k + 0.5 * sigma * sigma * k * k).exp(),
            GrowthDist::TwoPoint { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| if *p == 0.0 { 0.0 } else { p * v.powf(k) })
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    /// E[ln A] (−∞ if A has an atom at 0).
    pub fn mean_log(&self) -> f64 {
        match self {
            GrowthDist::Lognormal { mu, .. } => *mu,
            GrowthDist::TwoPoint { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| if *p == 0.0 { 0.0 } else { p * v.ln() })
                .sum(),
        }
    }

    /// P(A > 1).
    pub fn prob_above_one(&self) -> f64 {
        match self {
            GrowthDist::Lognormal { mu, sigma } => {
                if *sigma == 0.0 {
                    if *mu > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal_cdf(mu / sigma)
                }
            }
            GrowthDist::TwoPoint { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v > 1.0)
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Whether A has a continuous distribution function.
    pub fn is_continuous(&self) -> bool {
        matches!(self, GrowthDist::Lognormal { sigma, .. } if *sigma > 0.0)
    }

    fn nodes(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            GrowthDist::Lognormal { mu, sigma } => {
                if *sigma == 0.0 {
                    return vec![(1.0, mu.exp())];
                }
                let r = gauss_hermite_normal(n);
                r.weights
                    .iter()
                    .zip(&r.nodes)
                    .map(|(w, z)| (*w, (mu + sigma * z).exp()))
                    .collect()
            }
            GrowthDist::TwoPoint { values, probs } => probs
                .iter()
                .zip(values)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, v)| (*p, *v))
                .collect(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            GrowthDist::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::Invalid(format!(
                        "lognormal A needs finite mu and sigma >= 0, got {mu}, {sigma}"
                    )));
                }
            }
            GrowthDist::TwoPoint { values, probs } => {
                if values.len() != 2 || probs.len() != 2 {
                    return Err(Error::Invalid("two_point A needs exactly two values and probs".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Invalid("two_point A values must be finite and >= 0".into()));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs[0] + probs[1] - 1.0).abs() > 1e-12 {
                    return Err(Error::Invalid("two_point A probs must be >= 0 and sum to 1".into()));
                }
            }
        }
        Ok(())
    }
}

impl AdditiveDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AdditiveDist::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            AdditiveDist::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            AdditiveDist::Zero => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            AdditiveDist::Exponential { mean } => *mean,
            AdditiveDist::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            AdditiveDist::Zero => 0.0,
        }
    }

    /// P(Y < t).
    pub fn prob_below(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            AdditiveDist::Exponential { mean } => -(-t / mean).exp_m1(),
            AdditiveDist::Lognormal { mu, sigma } => {
                if *sigma == 0.0 {
                    if t > mu.exp() {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal_cdf((t.ln() - mu) / sigma)
                }
            }
            AdditiveDist::Zero => 1.0,
        }
    }

    /// Whether every moment of Y is finite.
    pub fn all_moments_finite(&self) -> bool {
        true
    }

    fn nodes(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            AdditiveDist::Exponential { mean } => {
                let r = gauss_laguerre_exp(n);
                r.weights.iter().zip(&r.nodes).map(|(w, x)| (*w, mean * x)).collect()
            }
            AdditiveDist::Lognormal { mu, sigma } => {
                if *sigma == 0.0 {
                    return vec![(1.0, mu.exp())];
                }
                let r = gauss_hermite_normal(n);
                r.weights
                    .iter()
                    .zip(&r.nodes)
                    .map(|(w, z)| (*w, (mu + sigma * z).exp()))
                    .collect()
            }
            AdditiveDist::Zero => vec![(1.0, 0.0)],
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            AdditiveDist::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::Invalid(format!("exponential Y needs mean > 0, got {mean}")));
                }
            }
            AdditiveDist::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::Invalid(format!(
                        "lognormal Y needs finite mu and sigma >= 0, got {mu}, {sigma}"
                    )));
                }
            }
            AdditiveDist::Zero => {}
        }
        Ok(())
    }
}

impl IncumbentLaw {
    pub fn growth(&self) -> Option<&GrowthDist> {
        match self {
            IncumbentLaw::PureGibrat { a } | IncumbentLaw::AffineGibrat { a, .. } => Some(a),
            IncumbentLaw::Discrete { .. } => None,
        }
    }

    pub fn additive(&self) -> Option<&AdditiveDist> {
        match self {
            IncumbentLaw::AffineGibrat { y, .. } => Some(y),
            _ => None,
        }
    }

    /// Index of the row used at productivity φ.
    pub fn discrete_row(states: &[f64], phi: f64) -> usize {
        states.partition_point(|&s| s <= phi).saturating_sub(1)
    }

    pub fn draw_shock<R: Rng + ?Sized>(&self, rng: &mut R) -> Shock {
        match self {
            IncumbentLaw::PureGibrat { a } => Shock {
                a: a.sample(rng),
                y: 0.0,
                u: 0.0,
            },
            IncumbentLaw::AffineGibrat { a, y } => {
                let a = a.sample(rng);
                Shock {
                    a,
                    y: y.sample(rng),
                    u: 0.0,
                }
            }
            IncumbentLaw::Discrete { .. } => Shock {
                a: 1.0,
                y: 0.0,
                u: rng.random(),
            },
        }
    }

    /// G(φ, W). Monotone in φ for a fixed shock.
    pub fn apply(&self, phi: f64, w: &Shock) -> f64 {
        match self {
            IncumbentLaw::PureGibrat { .. } => w.a * phi,
            IncumbentLaw::AffineGibrat { .. } => w.a * phi + w.y,
            IncumbentLaw::Discrete { states, matrix } => {
                let row = &matrix[Self::discrete_row(states, phi)];
                let mut acc = 0.0;
                for (j, p) in row.iter().enumerate() {
                    acc += p;
                    if w.u < acc {
                        return states[j];
                    }
                }
                // rounding in the row sum: fall back to the last state with mass
                let j = row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1);
                states[j]
            }
        }
    }

    /// One draw from Γ(φ, ·).
    pub fn sample<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> f64 {
        let w = self.draw_shock(rng);
        self.apply(phi, &w)
    }

    /// P(G(φ, W) < x).
    pub fn prob_below(&self, phi: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            IncumbentLaw::Discrete { states, matrix } => {
                let row = &matrix[Self::discrete_row(states, phi)];
                states
                    .iter()
                    .zip(row)
                    .filter(|(s, _)| **s < x)
                    .map(|(_, p)| p)
                    .sum()
            }
            IncumbentLaw::PureGibrat { a } => affine_prob_below(a, &AdditiveDist::Zero, phi, x),
            IncumbentLaw::AffineGibrat { a, y } => affine_prob_below(a, y, phi, x),
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self {
            IncumbentLaw::PureGibrat { a } => a.check(),
            IncumbentLaw::AffineGibrat { a, y } => {
                a.check()?;
                y.check()
            }
            IncumbentLaw::Discrete { states, matrix } => {
                if states.is_empty() {
                    return Err(Error::Invalid("discrete law needs at least one state".into()));
                }
                if states[0] != 0.0 {
                    return Err(Error::Invalid("discrete law states must start at 0".into()));
                }
                if states.iter().any(|s| !s.is_finite()) || states.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Invalid("discrete law states must be finite and strictly increasing".into()));
                }
                if matrix.len() != states.len() || matrix.iter().any(|r| r.len() != states.len()) {
                    return Err(Error::Invalid(format!(
                        "discrete law matrix must be {n}x{n}",
                        n = states.len()
                    )));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.iter().any(|p| !(*p >= 0.0)) {
                        return Err(Error::Invalid(format!("discrete law row {i} has a negative entry")));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return Err(Error::Invalid(format!("discrete law row {i} sums to {s}, not 1")));
                    }
                }
                Ok(())
            }
        }
    }
}

fn affine_prob_below(a: &GrowthDist, y: &AdditiveDist, phi: f64, x: f64) -> f64 {
    if phi <= 0.0 {
        return y.prob_below(x);
    }
    match a {
        GrowthDist::TwoPoint { values, probs } => values
            .iter()
            .zip(probs)
            .map(|(v, p)| p * y.prob_below(x - v * phi))
            .sum(),
        GrowthDist::Lognormal { mu, sigma } => {
            if *sigma == 0.0 {
                return y.prob_below(x - mu.exp() * phi);
            }
            // A φ < x  <=>  z < z_hi
            let z_hi = ((x / phi).ln() - mu) / sigma;
            if let AdditiveDist::Zero = y {
                return normal_cdf(z_hi);
            }
            let lo = -12.0;
            let hi = z_hi.min(12.0);
            if hi <= lo {
                return 0.0;
            }
            let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            integrate_adaptive(
                |z| density(z) * y.prob_below(x - phi * (mu + sigma * z).exp()),
                lo,
                hi,
                1e-13,
            )
            .clamp(0.0, 1.0)
        }
    }
}

/// Deterministic quadrature representation of Γ(φ, ·): a list of weighted
/// shocks for the Gibrat families, exact rows for the discrete chain.
#[derive(Debug, Clone)]
pub struct Kernel {
    law: IncumbentLaw,
    shocks: Vec<(f64, f64, f64)>, // (weight, a, y)
}

impl Kernel {
    pub fn new(law: &IncumbentLaw, nodes: usize) -> Kernel {
        let shocks = match law {
            IncumbentLaw::PureGibrat { a } => a.nodes(nodes).into_iter().map(|(w, a)| (w, a, 0.0)).collect(),
            IncumbentLaw::AffineGibrat { a, y } => {
                let an = a.nodes(nodes);
                let yn = y.nodes(nodes);
                let mut out = Vec::with_capacity(an.len() * yn.len());
                for &(wa, av) in &an {
                    for &(wy, yv) in &yn {
                        out.push((wa * wy, av, yv));
                    }
                }
                out
            }
            IncumbentLaw::Discrete { .. } => Vec::new(),
        };
        Kernel {
            law: law.clone(),
            shocks,
        }
    }

    pub fn law(&self) -> &IncumbentLaw {
        &self.law
    }

    /// Support points and weights of the quadrature version of Γ(φ, ·).
    pub fn points(&self, phi: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        match &self.law {
            IncumbentLaw::Discrete { states, matrix } => {
                let row = &matrix[IncumbentLaw::discrete_row(states, phi)];
                out.extend(
                    row.iter()
                        .zip(states)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, s)| (*p, *s)),
                );
            }
            _ => out.extend(self.shocks.iter().map(|&(w, a, y)| (w, a * phi + y))),
        }
    }

    /// ∫ f(φ') Γ(φ, dφ').
    pub fn expectation(&self, phi: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut pts = Vec::new();
        self.points(phi, &mut pts);
        let mut acc = 0.0;
        for (w, x) in pts {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFinite {
                    context: "kernel expectation integrand".into(),
                    location: format!("node phi' = {x:e} (from phi = {phi:e})"),
                });
            }
            acc += w * fx;
        }
        Ok(acc)
    }
}
