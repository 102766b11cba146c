//! Gaussian rules built from three-term recurrences (Golub–Welsch with a
//! Newton polish) and an adaptive Gauss–Kronrod integrator.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a quadrature rule. Weights sum to the measure's total
/// mass (1 for the probability rules below).
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

// Orthonormal recurrence: sqrt(b_{k+1}) p_{k+1} = (x - a_k) p_k - sqrt(b_k) p_{k-1}.
struct Recurrence {
    diag: Vec<f64>,
    off: Vec<f64>, // off[k] = sqrt(b_{k+1}), k = 0..n-1
    mass: f64,
}

impl Recurrence {
    fn eval(&self, x: f64, n: usize) -> (f64, f64, f64) {
        // returns (p_n, p_n', sum_{k<n} p_k^2)
        let mut p_prev = 0.0;
        let mut d_prev = 0.0;
        let mut p = 1.0 / self.mass.sqrt();
        let mut d = 0.0;
        let mut sum_sq = 0.0;
        for k in 0..n {
            sum_sq += p * p;
            let b_prev = if k == 0 { 0.0 } else { self.off[k - 1] };
            let p_next = ((x - self.diag[k]) * p - b_prev * p_prev) / self.off[k];
            let d_next = ((x - self.diag[k]) * d + p - b_prev * d_prev) / self.off[k];
            p_prev = p;
            d_prev = d;
            p = p_next;
            d = d_next;
        }
        (p, d, sum_sq)
    }

    fn rule(&self, n: usize) -> Rule {
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            jacobi[(i, i)] = self.diag[i];
            if i + 1 < n {
                jacobi[(i, i + 1)] = self.off[i];
                jacobi[(i + 1, i)] = self.off[i];
            }
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, d, _) = self.eval(*x, n);
                if d != 0.0 && d.is_finite() {
                    let step = p / d;
                    if step.is_finite() {
                        *x -= step;
                    }
                }
            }
            let (_, _, sum_sq) = self.eval(*x, n);
            weights.push(1.0 / sum_sq);
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w *= self.mass / total;
        }
        Rule { nodes, weights }
    }
}

/// Gauss–Hermite rule for the standard normal distribution.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n >= 1);
    let rec = Recurrence {
        diag: vec![0.0; n],
        off: (1..=n).map(|k| (k as f64).sqrt()).collect(),
        mass: 1.0,
    };
    rec.rule(n)
}

/// Gauss–Laguerre rule for the unit-mean exponential distribution.
pub fn gauss_laguerre_exp(n: usize) -> Rule {
    assert!(n >= 1);
    let rec = Recurrence {
        diag: (0..n).map(|k| 2.0 * k as f64 + 1.0).collect(),
        off: (1..=n).map(|k| k as f64).collect(),
        mass: 1.0,
    };
    rec.rule(n)
}

/// Gauss–Legendre rule on [-1, 1] (weights sum to 2).
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let rec = Recurrence {
        diag: vec![0.0; n],
        off: (1..=n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect(),
        mass: 2.0,
    };
    rec.rule(n)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

const MAX_INTERVALS: usize = 500;
const INITIAL_PANELS: usize = 8;

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`:
/// the interval with the largest error estimate is bisected until the total
/// estimate is below `abs_tol` or the interval budget is spent.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // start from a few panels so a narrow feature is not missed entirely
    let mut parts = Vec::with_capacity(MAX_INTERVALS);
    for k in 0..INITIAL_PANELS {
        let lo = a + (b - a) * k as f64 / INITIAL_PANELS as f64;
        let hi = if k + 1 == INITIAL_PANELS {
            b
        } else {
            a + (b - a) * (k + 1) as f64 / INITIAL_PANELS as f64
        };
        let (v, e) = gk15(&mut f, lo, hi);
        parts.push((lo, hi, v, e));
    }
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol || parts.len() >= MAX_INTERVALS {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts[i];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (l, el) = gk15(&mut f, lo, mid);
        let (r, er) = gk15(&mut f, mid, hi);
        parts[i] = (lo, mid, l, el);
        parts.push((mid, hi, r, er));
    }
    parts.iter().map(|p| p.2).sum()
}
