//! Kolmogorov–Smirnov tests with asymptotic p-values.

use statrs::distribution::{ContinuousCDF, Normal};

use super::TestVerdict;
use crate::numeric::mean_var;
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 100;
/// Significance level used for the `pass` flag.
pub const KS_LEVEL: f64 = 0.01;

/// Kolmogorov survival function `Q(l) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 l^2}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi form: 1 - sqrt(2 pi)/l sum_{k odd} e^{-k^2 pi^2 / (8 l^2)}
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in (1..40).step_by(2) {
            let term = (c * (k * k) as f64).exp();
            s += term;
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value for statistic `d` at effective sample size `ne`, with
/// the Stephens small-sample correction.
pub fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted_finite(a: &[f64], which: &str) -> Result<Vec<f64>> {
    if a.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: a.len(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample {which} contains non-finite values"
        )));
    }
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample statistic `sup_x |F_a(x) - F_b(x)|`, ties handled by advancing
/// both empirical CDFs past equal values together.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
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

/// Two-sample KS test; requires at least [`MIN_SAMPLES`] in each sample and
/// rejects inputs where both samples are constant.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestVerdict> {
    let sa = sorted_finite(a, "a")?;
    let sb = sorted_finite(b, "b")?;
    if sa[0] == sa[sa.len() - 1] && sb[0] == sb[sb.len() - 1] {
        return Err(Error::Degenerate("both samples are constant".into()));
    }
    let d = ks_statistic(&sa, &sb);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let p = ks_p_value(d, na * nb / (na + nb));
    Ok(TestVerdict {
        name: "ks-two-sample".into(),
        statistic: d,
        p_value: Some(p),
        z_score: None,
        threshold: KS_LEVEL,
        pass: p > KS_LEVEL,
        seed: 0,
        sample_sizes: vec![a.len(), b.len()],
    })
}

/// One-sample KS test against `N(mean, variance)`.
pub fn ks_vs_normal(a: &[f64], mean: f64, variance: f64) -> Result<TestVerdict> {
    if !(variance > 0.0) {
        return Err(Error::Degenerate(format!(
            "reference variance {variance} is not positive"
        )));
    }
    let s = sorted_finite(a, "a")?;
    if mean_var(&s).1 == 0.0 {
        return Err(Error::Degenerate("sample has zero variance".into()));
    }
    let normal =
        Normal::new(mean, variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = s.len() as f64;
    let mut d = 0.0_f64;
    for (k, &x) in s.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    let p = ks_p_value(d, n);
    Ok(TestVerdict {
        name: "ks-vs-normal".into(),
        statistic: d,
        p_value: Some(p),
        z_score: None,
        threshold: KS_LEVEL,
        pass: p > KS_LEVEL,
        seed: 0,
        sample_sizes: vec![a.len()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Channel};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, shift: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0, Channel::Sampling);
        (0..n)
            .map(|_| shift + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn q_function_branches_agree() {
        let alt = |l: f64| {
            2.0 * (1..200)
                .map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * l * l).exp())
                .sum::<f64>()
        };
        for l in [0.6, 0.9, 1.1, 1.18, 1.3, 2.0] {
            assert!((kolmogorov_q(l) - alt(l)).abs() < 1e-12, "l = {l}");
        }
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(0.1) > 0.999_999);
        // 5% critical value
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn identical_samples() {
        let a = normals(500, 0.0, 1);
        let v = ks_two_sample(&a, &a).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!((v.p_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_samples() {
        let v = ks_two_sample(&normals(10_000, 0.0, 1), &normals(10_000, 3.0, 2)).unwrap();
        assert!(v.p_value.unwrap() < 1e-6 && !v.pass);
    }

    #[test]
    fn normal_reference() {
        let v = ks_vs_normal(&normals(10_000, 0.5, 3), 0.5, 1.0).unwrap();
        assert!(v.pass, "{v:?}");
        let v = ks_vs_normal(&normals(10_000, 0.5, 3), 0.0, 1.0).unwrap();
        assert!(!v.pass);
    }

    #[test]
    fn degenerate_and_small_inputs() {
        let c = vec![1.0; 200];
        assert!(matches!(ks_two_sample(&c, &c), Err(Error::Degenerate(_))));
        assert!(matches!(
            ks_vs_normal(&c, 1.0, 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            ks_vs_normal(&normals(200, 0.0, 1), 0.0, 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            ks_two_sample(&c[..10], &c),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn ties_are_handled() {
        let a: Vec<f64> = (0..300).map(|k| (k % 3) as f64).collect();
        let b: Vec<f64> = (0..300).map(|k| (k % 3) as f64).rev().collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric_and_transform_invariant(seed in 0u64..1000, shift in -1.0..1.0f64, n in 100usize..400) {
            let a = normals(n, 0.0, seed);
            let b = normals(n + 17, shift, seed + 1);
            let ab = ks_two_sample(&a, &b).unwrap();
            let ba = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(ab.statistic, ba.statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
            let ta: Vec<f64> = a.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            let tb: Vec<f64> = b.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(ks_two_sample(&ta, &tb).unwrap().statistic, ab.statistic);
        }
    }
}
