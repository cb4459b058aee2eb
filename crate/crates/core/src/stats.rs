use serde::Serialize;

/// Neumaier-compensated sum. Order-sensitive in the last bits, so callers sum
/// in path-index order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Two-pass estimate. `se` is the sample standard deviation over `sqrt(n)`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        if n == 1 {
            return Self { mean, se: f64::NAN, n };
        }
        let ss = compensated_sum(samples.iter().map(|v| (v - mean) * (v - mean)));
        let var = ss / (n as f64 - 1.0);
        Self { mean, se: (var / n as f64).sqrt(), n }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }
}

/// A derived quantity with a propagated standard error. `se = 0` marks a
/// value computed without sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }
}

impl From<MeanSe> for Estimate {
    fn from(m: MeanSe) -> Self {
        Self { value: m.mean, se: m.se }
    }
}

/// Ordinary least squares `y = a + b x`. Returns `(a, b, rms residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rss = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)));
    (a, b, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn constant_samples_have_zero_se() {
        let s = MeanSe::from_samples(&[3.0; 10]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.se, 0.0);
    }

    #[test]
    fn fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b, r) = linear_fit(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14 && r < 1e-14);
    }
}
