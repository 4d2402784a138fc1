//! Compensated summation and small numeric helpers.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

/// Sample mean and unbiased sample variance (two-pass, compensated).
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1) as f64).max(0.0))
}

/// Mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(values);
    (m, (v / values.len() as f64).sqrt())
}

/// Sample variance together with the standard error of that variance estimate,
/// `sqrt((m4 - s^4) / N)` with `m4` the fourth central moment.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let (m, v) = mean_var(values);
    let m4 = sum(values.iter().map(|x| (x - m).powi(4))) / n;
    let se = ((m4 - v * v).max(0.0) / n).sqrt();
    (v, se)
}

/// Sample covariance of paired values with the standard error of the estimate.
pub fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return (0.0, f64::NAN);
    }
    let ma = sum(a.iter().copied()) / n as f64;
    let mb = sum(b.iter().copied()) / n as f64;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = sum(prods.iter().copied()) / (n - 1) as f64;
    let (_, vp) = mean_var(&prods);
    (cov, (vp / n as f64).sqrt())
}

/// Least-squares slope of `ln y` on `ln x`. Non-positive entries are skipped.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Trapezoidal rule on (possibly non-uniform) nodes.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for k in 1..times.len() {
        acc.add(0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn mean_var_basic() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let x = [10.0, 20.0, 40.0, 80.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t = [0.0, 0.3, 1.0, 2.5];
        let v: Vec<f64> = t.iter().map(|s| 2.0 * s + 1.0).collect();
        assert!((trapezoid(&t, &v) - (2.5 * 2.5 + 2.5)).abs() < 1e-12);
    }
}
