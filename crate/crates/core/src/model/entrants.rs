use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Distribution γ of productivity draws for new entrants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Entrants {
    Exponential { mean: f64 },
    /// ln Z ~ N(mu, sigma²)
    Lognormal { mu: f64, sigma: f64 },
    /// Finitely many atoms.
    Tabulated { values: Vec<f64>, probs: Vec<f64> },
    /// Lomax: P(Z > z) = (1 + z/scale)^(-alpha), supported on [0, ∞).
    Pareto { alpha: f64, scale: f64 },
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

impl Entrants {
    /// P(Z < x).
    pub fn prob_below(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Entrants::Exponential { mean } => -(-x / mean).exp_m1(),
            Entrants::Lognormal { mu, sigma } => normal_cdf((x.ln() - mu) / sigma),
            Entrants::Tabulated { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v < x)
                .map(|(_, p)| p)
                .sum(),
            Entrants::Pareto { alpha, scale } => -((-alpha) * (x / scale).ln_1p()).exp_m1(),
        }
    }

    /// E[Z; Z < x].
    pub fn partial_mean(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Entrants::Exponential { mean } => {
                if x.is_infinite() {
                    return *mean;
                }
                mean - (x + mean) * (-x / mean).exp()
            }
            Entrants::Lognormal { mu, sigma } => {
                (mu + 0.5 * sigma * sigma).exp() * normal_cdf((x.ln() - mu - sigma * sigma) / sigma)
            }
            Entrants::Tabulated { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v < x)
                .map(|(v, p)| v * p)
                .sum(),
            Entrants::Pareto { alpha, scale } => {
                if x.is_infinite() {
                    return self.mean();
                }
                // E[Z; Z >= x] = scale [alpha u^(1-alpha)/(alpha-1) - u^(-alpha)], u = 1 + x/scale
                let u = 1.0 + x / scale;
                let upper = scale * (alpha * u.powf(1.0 - alpha) / (alpha - 1.0) - u.powf(-alpha));
                self.mean() - upper
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    /// E[Z^k] for k >= 0; +∞ when the moment does not exist.
    pub fn moment(&self, k: f64) -> f64 {
        if k == 0.0 {
            return 1.0;
        }
        match self {
            Entrants::Exponential { mean } => (k * mean.ln() + ln_gamma(k + 1.0)).exp(),
            Entrants::Lognormal { mu, sigma } => (k * mu + 0.5 * k * k * sigma * sigma).exp(),
            Entrants::Tabulated { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| p * v.powf(k)).sum()
            }
            Entrants::Pareto { alpha, scale } => {
                if k >= *alpha {
                    f64::INFINITY
                } else {
                    (k * scale.ln() + ln_gamma(k + 1.0) + ln_gamma(alpha - k) - ln_gamma(*alpha))
                        .exp()
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Entrants::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            Entrants::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Entrants::Tabulated { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
            Entrants::Pareto { alpha, scale } => {
                let u: f64 = rng.random();
                scale * ((-(1.0 - u).ln() / alpha).exp_m1())
            }
        }
    }

    /// Short human-readable label, e.g. `lognormal:mu=-0.125:sigma=0.5`.
    pub fn label(&self) -> String {
        match self {
            Entrants::Exponential { mean } => format!("exponential:mean={mean}"),
            Entrants::Lognormal { mu, sigma } => format!("lognormal:mu={mu}:sigma={sigma}"),
            Entrants::Tabulated { values, .. } => format!("tabulated:{}pts", values.len()),
            Entrants::Pareto { alpha, scale } => format!("pareto:alpha={alpha}:scale={scale}"),
        }
    }

    /// Parse the compact `family:key=value:...` form used on the command line.
    pub fn from_label(text: &str) -> Result<Entrants> {
        let mut parts = text.trim().split(':');
        let family = parts.next().unwrap_or_default();
        let mut kv = std::collections::BTreeMap::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("bad entrant parameter '{part}' in '{text}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Invalid(format!("bad number '{v}' in '{text}'")))?;
            kv.insert(k.to_string(), v);
        }
        let mut take = |k: &str| {
            kv.remove(k)
                .ok_or_else(|| Error::Invalid(format!("'{text}' is missing '{k}'")))
        };
        let out = match family {
            "exponential" => Entrants::Exponential { mean: take("mean")? },
            "lognormal" => Entrants::Lognormal {
                mu: take("mu")?,
                sigma: take("sigma")?,
            },
            "pareto" => Entrants::Pareto {
                alpha: take("alpha")?,
                scale: take("scale")?,
            },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown entrant family '{other}' (expected exponential, lognormal or pareto)"
                )))
            }
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Invalid(format!("unknown key '{k}' in '{text}'")));
        }
        out.check()?;
        Ok(out)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        match self {
            Entrants::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return bad(format!("exponential entrants need mean > 0, got {mean}"));
                }
            }
            Entrants::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("lognormal entrants need finite mu and sigma > 0, got {mu}, {sigma}"));
                }
            }
            Entrants::Tabulated { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("tabulated entrants need equal-length non-empty values and probs".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("tabulated entrant values must be finite and >= 0".into());
                }
                if values.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated entrant values must be strictly increasing".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad("tabulated entrant probs must be >= 0 and sum to 1".into());
                }
            }
            Entrants::Pareto { alpha, scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return bad(format!("pareto entrants need scale > 0, got {scale}"));
                }
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return Err(Error::Assumption {
                        assumption: "4",
                        message: format!("pareto entrants with alpha = {alpha} <= 1 have an infinite mean, which"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;

    fn families() -> Vec<Entrants> {
        vec![
            Entrants::Exponential { mean: 1.3 },
            Entrants::Lognormal { mu: -0.125, sigma: 0.5 },
            Entrants::Pareto { alpha: 2.5, scale: 1.5 },
        ]
    }

    fn density(g: &Entrants, x: f64) -> f64 {
        let h = 1e-6 * (1.0 + x);
        (g.prob_below(x + h) - g.prob_below(x - h)) / (2.0 * h)
    }

    #[test]
    fn partial_mean_matches_numerical_integral() {
        for g in families() {
            for &x in &[0.3, 1.0, 4.0] {
                let num = integrate_adaptive(|z| z * density(&g, z), 1e-9, x, 1e-12);
                assert!((g.partial_mean(x) - num).abs() < 1e-6, "{g:?} at {x}");
            }
            assert!((g.partial_mean(f64::INFINITY) - g.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_moments() {
        let e = Entrants::Exponential { mean: 2.0 };
        assert!((e.moment(2.0) - 8.0).abs() < 1e-12);
        let l = Entrants::Lognormal { mu: -0.125, sigma: 0.5 };
        assert!((l.mean() - 1.0).abs() < 1e-15);
        let p = Entrants::Pareto { alpha: 3.0, scale: 2.0 };
        assert!((p.mean() - 1.0).abs() < 1e-12);
        assert!((p.moment(2.0) - 4.0).abs() < 1e-12); // 2 scale² / ((a-1)(a-2))
        assert!(p.moment(3.0).is_infinite());
    }

    #[test]
    fn tabulated_stub() {
        let g = Entrants::Tabulated {
            values: vec![0.0, 1.0, 2.0],
            probs: vec![0.5, 0.5, 0.0],
        };
        assert_eq!(g.prob_below(1.0), 0.5);
        assert_eq!(g.prob_below(1.0 + 1e-12), 1.0);
        assert_eq!(g.mean(), 0.5);
    }

    #[test]
    fn labels_round_trip() {
        for g in families() {
            assert_eq!(Entrants::from_label(&g.label()).unwrap(), g);
        }
        assert!(Entrants::from_label("weibull:k=1").is_err());
        assert!(Entrants::from_label("exponential:mean=1:extra=2").is_err());
    }
}
