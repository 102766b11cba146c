//! Small statistical helpers shared by the simulation and tail code.

/// Asymptotic Kolmogorov–Smirnov critical value at the 1% level.
pub const KS_CRIT_1PCT: f64 = 1.628;

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Running sums for a mean with standard error, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn se(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return f64::NAN;
        }
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// One-sample KS statistic of `xs` against the continuous distribution
/// function `cdf`. Sorts `xs` in place.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// True when the one-sample KS test does not reject at 1%.
pub fn ks_passes(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> bool {
    let n = xs.len() as f64;
    ks_statistic(xs, cdf) * n.sqrt() < KS_CRIT_1PCT
}

/// Two-sample KS statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// True when the two-sample KS test does not reject at 1%.
pub fn ks_two_sample_passes(a: &mut [f64], b: &mut [f64]) -> bool {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    ks_two_sample(a, b) < KS_CRIT_1PCT * ((na + nb) / (na * nb)).sqrt()
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_on_uniform_grid() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&mut xs, |x| x) <= 0.0005 + 1e-12);
        assert!(ks_passes(&mut xs, |x| x));
        assert!(!ks_passes(&mut xs, |x| x * x));
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let mut a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mut b = a.clone();
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.0);
        let mut c: Vec<f64> = (0..100).map(|i| i as f64 + 50.0).collect();
        assert!((ks_two_sample(&mut a, &mut c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moments_match_direct() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        let (mean, se) = mean_se(&xs);
        assert!((m.mean() - mean).abs() < 1e-15);
        assert!((m.se() - se).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -3.0, -5.0];
        assert!((ols_slope(&xs, &ys) + 2.0).abs() < 1e-14);
    }
}
