use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Production technology, giving output q(φ, p) and profit π(φ, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Technology {
    /// q = e φ, π = p e φ - c_f
    Linear { e: f64, c_f: f64 },
    /// Labor n at wage w, output φ n^θ, fixed cost c; profits are maximized over n.
    CobbDouglas { theta: f64, w: f64, c: f64 },
}

impl Technology {
    /// η = 1/(1-θ) for Cobb–Douglas; 1 for linear.
    pub fn eta(&self) -> f64 {
        match self {
            Technology::Linear { .. } => 1.0,
            Technology::CobbDouglas { theta, .. } => 1.0 / (1.0 - theta),
        }
    }

    /// m(p) = (pθ/w)^(θη), so that q = φ^η m(p).
    pub fn m(&self, p: f64) -> f64 {
        match self {
            Technology::Linear { e, .. } => *e,
            Technology::CobbDouglas { theta, w, .. } => (p * theta / w).powf(theta * self.eta()),
        }
    }

    pub fn output(&self, phi: f64, p: f64) -> f64 {
        match self {
            Technology::Linear { e, .. } => e * phi,
            Technology::CobbDouglas { .. } => {
                if phi <= 0.0 || p <= 0.0 {
                    0.0
                } else {
                    phi.powf(self.eta()) * self.m(p)
                }
            }
        }
    }

    pub fn profit(&self, phi: f64, p: f64) -> f64 {
        match self {
            Technology::Linear { e, c_f } => p * e * phi - c_f,
            Technology::CobbDouglas { theta, w, c } => {
                if phi <= 0.0 || p <= 0.0 {
                    return -c;
                }
                let eta = self.eta();
                (1.0 - theta) * (p * phi).powf(eta) * (theta / w).powf(theta * eta) - c
            }
        }
    }

    /// Fixed cost, i.e. -π(0, p).
    pub fn fixed_cost(&self) -> f64 {
        match self {
            Technology::Linear { c_f, .. } => *c_f,
            Technology::CobbDouglas { c, .. } => *c,
        }
    }

    /// Variable part of profit per unit of φ^η: π(φ, p) = slope(p) φ^η - fixed cost.
    pub fn profit_slope(&self, p: f64) -> f64 {
        self.profit(1.0, p) + self.fixed_cost()
    }

    /// Productivity at which output reaches `q` (inverse of q in φ).
    pub fn phi_for_output(&self, q: f64, p: f64) -> f64 {
        let m = self.m(p);
        if m <= 0.0 {
            return f64::INFINITY;
        }
        (q / m).max(0.0).powf(1.0 / self.eta())
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self {
            Technology::Linear { e, c_f } => {
                if !(e.is_finite() && *e > 0.0) {
                    return Err(Error::Invalid(format!("linear technology needs e > 0, got {e}")));
                }
                if !(c_f.is_finite() && *c_f > 0.0) {
                    return Err(Error::Assumption {
                        assumption: "2",
                        message: format!("fixed cost c_f = {c_f} <= 0"),
                    });
                }
            }
            Technology::CobbDouglas { theta, w, c } => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::Invalid(format!(
                        "cobb_douglas needs theta in (0,1), got {theta}"
                    )));
                }
                if !(w.is_finite() && *w > 0.0) {
                    return Err(Error::Invalid(format!("cobb_douglas needs w > 0, got {w}")));
                }
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::Assumption {
                        assumption: "2",
                        message: format!("fixed cost c = {c} <= 0"),
                    });
                }
            }
        }
        Ok(())
    }
}
