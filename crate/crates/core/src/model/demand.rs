use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market demand D(p) in goods units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Demand {
    /// D(p) = scale * p^(-elasticity)
    Isoelastic { scale: f64, elasticity: f64 },
    /// Log-log interpolation through (price, quantity) points, extended with
    /// the end slopes.
    Tabulated {
        prices: Vec<f64>,
        quantities: Vec<f64>,
    },
}

impl Demand {
    pub fn quantity(&self, p: f64) -> f64 {
        match self {
            Demand::Isoelastic { scale, elasticity } => scale * p.powf(-elasticity),
            Demand::Tabulated { prices, quantities } => {
                let n = prices.len();
                let lp = p.ln();
                let i = match prices.iter().position(|&x| x > p) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => n - 2,
                }
                .min(n - 2);
                let (x0, x1) = (prices[i].ln(), prices[i + 1].ln());
                let (y0, y1) = (quantities[i].ln(), quantities[i + 1].ln());
                (y0 + (y1 - y0) * (lp - x0) / (x1 - x0)).exp()
            }
        }
    }

    /// Multiply demand by `factor` at every price.
    pub fn scaled(&self, factor: f64) -> Demand {
        match self {
            Demand::Isoelastic { scale, elasticity } => Demand::Isoelastic {
                scale: scale * factor,
                elasticity: *elasticity,
            },
            Demand::Tabulated { prices, quantities } => Demand::Tabulated {
                prices: prices.clone(),
                quantities: quantities.iter().map(|q| q * factor).collect(),
            },
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self {
            Demand::Isoelastic { scale, elasticity } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::Invalid(format!("demand scale must be > 0, got {scale}")));
                }
                if !(elasticity.is_finite() && *elasticity > 0.0) {
                    return Err(Error::Invalid(format!(
                        "demand elasticity must be > 0, got {elasticity}"
                    )));
                }
            }
            Demand::Tabulated { prices, quantities } => {
                if prices.len() < 2 || prices.len() != quantities.len() {
                    return Err(Error::Invalid(
                        "tabulated demand needs at least two (price, quantity) pairs of equal length"
                            .into(),
                    ));
                }
                if prices.iter().chain(quantities).any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::Invalid(
                        "tabulated demand prices and quantities must be positive".into(),
                    ));
                }
                if prices.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Invalid(
                        "tabulated demand prices must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isoelastic_values() {
        let d = Demand::Isoelastic { scale: 100.0, elasticity: 1.0 };
        assert_eq!(d.quantity(2.0), 50.0);
        assert_eq!(d.scaled(2.0).quantity(2.0), 100.0);
    }

    #[test]
    fn tabulated_interpolates_in_logs() {
        let d = Demand::Tabulated {
            prices: vec![1.0, 4.0],
            quantities: vec![16.0, 1.0],
        };
        assert!((d.quantity(2.0) - 4.0).abs() < 1e-12);
        // end slope -2 extends both ways
        assert!((d.quantity(8.0) - 0.25).abs() < 1e-12);
        assert!((d.quantity(0.5) - 64.0).abs() < 1e-12);
    }
}
