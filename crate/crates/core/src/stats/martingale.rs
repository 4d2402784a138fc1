//! Numerical Dynkin test: `f(X_t) - int_0^t Af(X_s) ds` should have
//! mean-zero increments when `A` is the generator of `X`.

use statrs::distribution::{ContinuousCDF, Normal};

use super::TestVerdict;
use crate::generators::TestFunction;
use crate::numeric::{mean_se, trapezoid};
use crate::path::Ensemble;
use crate::{Error, Result};

/// Two-sided family-wise level matching a single 3-sigma test.
pub fn three_sigma_level() -> f64 {
    2.0 * (1.0 - std_normal().cdf(3.0))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Bonferroni critical value for `m` two-sided tests at family level `level`.
pub fn bonferroni_z(level: f64, m: usize) -> f64 {
    std_normal().inverse_cdf(1.0 - level / (2.0 * m.max(1) as f64))
}

/// Per-interval residual estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualInterval {
    pub t0: f64,
    pub t1: f64,
    pub mean: f64,
    pub standard_error: f64,
    /// Richardson estimate of the trapezoid bias.
    pub quadrature_error: f64,
}

/// Interval residuals of `f(X_{t1}) - f(X_{t0}) - int_{t0}^{t1} Af(X_s) ds`.
///
/// The sample grid is cut into consecutive blocks of `block` grid steps
/// (`block` even). The integral over a block is the trapezoid rule on all
/// samples in it; its bias is estimated from the same rule on every other
/// sample, and the run is rejected with `GridTooCoarse` when that estimate
/// exceeds one standard error of the residual mean.
pub fn residual_intervals(
    ensemble: &Ensemble,
    f: &dyn TestFunction,
    generator: &(dyn Fn(&[f64]) -> f64 + Sync),
    block: usize,
) -> Result<Vec<ResidualInterval>> {
    if block < 2 || !block.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "block = {block} must be a positive even number"
        )));
    }
    let grid = &ensemble.grid;
    if grid.len() < block + 1 {
        return Err(Error::GridMismatch(format!(
            "grid of {} points cannot hold a block of {block} steps",
            grid.len()
        )));
    }
    if ensemble.n_paths() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: ensemble.n_paths(),
        });
    }
    // f and Af on every sample
    let fv: Vec<Vec<f64>> = ensemble
        .paths
        .iter()
        .map(|p| p.samples().map(|(_, x)| f.value(&x)).collect())
        .collect();
    let av: Vec<Vec<f64>> = ensemble
        .paths
        .iter()
        .map(|p| p.samples().map(|(_, x)| generator(&x)).collect())
        .collect();

    let mut out = Vec::new();
    let mut start = 0;
    while start + block < grid.len() {
        let end = start + block;
        let times = &grid[start..=end];
        let coarse_t: Vec<f64> = times.iter().step_by(2).copied().collect();
        let mut res = Vec::with_capacity(ensemble.n_paths());
        let mut diff = Vec::with_capacity(ensemble.n_paths());
        for (fp, ap) in fv.iter().zip(&av) {
            let vals = &ap[start..=end];
            let fine = trapezoid(times, vals);
            let coarse_v: Vec<f64> = vals.iter().step_by(2).copied().collect();
            let coarse = trapezoid(&coarse_t, &coarse_v);
            res.push(fp[end] - fp[start] - fine);
            diff.push(fine - coarse);
        }
        let (mean, se) = mean_se(&res);
        let (dmean, _) = mean_se(&diff);
        let interval = out.len();
        let bound = dmean.abs() / 3.0;
        if bound > se {
            return Err(Error::GridTooCoarse {
                interval,
                bound,
                se,
            });
        }
        out.push(ResidualInterval {
            t0: grid[start],
            t1: grid[end],
            mean,
            standard_error: se,
            quadrature_error: bound,
        });
        start = end;
    }
    Ok(out)
}

/// Passes when every interval residual is within the Bonferroni-corrected
/// 3-sigma band. The statistic is the largest `|mean / se|`.
pub fn martingale_residual(
    ensemble: &Ensemble,
    f: &dyn TestFunction,
    generator: &(dyn Fn(&[f64]) -> f64 + Sync),
    block: usize,
) -> Result<TestVerdict> {
    let intervals = residual_intervals(ensemble, f, generator, block)?;
    let m = intervals.len();
    let z_star = bonferroni_z(three_sigma_level(), m);
    let mut max_z = 0.0_f64;
    let mut pass = true;
    for iv in &intervals {
        let z = if iv.standard_error > 0.0 {
            iv.mean.abs() / iv.standard_error
        } else if iv.mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z);
        pass &= z <= z_star;
    }
    let p_single = 2.0 * (1.0 - std_normal().cdf(max_z));
    Ok(TestVerdict {
        name: "martingale-residual".into(),
        statistic: max_z,
        p_value: Some((p_single * m as f64).min(1.0)),
        z_score: Some(max_z),
        threshold: z_star,
        pass,
        seed: ensemble.seed,
        sample_sizes: vec![ensemble.n_paths(), m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Bump, Polynomial};
    use crate::limits::walker_limit_sample;
    use crate::path::uniform_grid;

    fn bump() -> Bump {
        Bump::new(vec![0], vec![0.5], 2.5, 1.0).unwrap()
    }

    #[test]
    fn bonferroni_reduces_to_three_sigma() {
        assert!((bonferroni_z(three_sigma_level(), 1) - 3.0).abs() < 1e-9);
        assert!(bonferroni_z(three_sigma_level(), 10) > 3.0);
    }

    #[test]
    fn constant_function_has_zero_residual() {
        let e = walker_limit_sample(0.5, 1.0, &uniform_grid(1.0, 0.05), 100, 1).unwrap();
        let c = Polynomial::new(vec![(2.0, vec![])]);
        let v = martingale_residual(&e, &c, &|_: &[f64]| 0.0, 4).unwrap();
        assert!(v.pass);
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn drifted_brownian_motion() {
        let (a, s) = (1.0, 1.0);
        let e = walker_limit_sample(a, s, &uniform_grid(1.0, 0.005), 10_000, 2).unwrap();
        let f = bump();
        let gen = |x: &[f64]| a * f.gradient(x)[0] + 0.5 * s * s * f.hessian(x)[0][0];
        let v = martingale_residual(&e, &f, &gen, 40).unwrap();
        assert!(v.pass, "{v:?}");
        let wrong = |x: &[f64]| 2.0 * a * f.gradient(x)[0] + 0.5 * s * s * f.hessian(x)[0][0];
        let v = martingale_residual(&e, &f, &wrong, 40).unwrap();
        assert!(!v.pass, "{v:?}");
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let e = walker_limit_sample(0.0, 0.0, &uniform_grid(2.0, 0.5), 100, 1).unwrap();
        let f = Polynomial::power(0, 2);
        // deterministic path x = 0 so the residual has zero spread; curvature
        // of the generator along time exposes the quadrature bias
        let gen = |_: &[f64]| 1.0;
        let res = residual_intervals(&e, &f, &gen, 2);
        assert!(res.is_ok());
        let e = walker_limit_sample(1.0, 0.0, &uniform_grid(2.0, 0.5), 100, 1).unwrap();
        let cubic = |x: &[f64]| x[0].powi(3);
        assert!(matches!(
            residual_intervals(&e, &f, &cubic, 2),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
