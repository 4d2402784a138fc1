//! Limit processes: the interacting branching diffusion with common noise and
//! the drifted Brownian motion.
//!
//! The diffusion solves, per deme `i`,
//!
//! ```text
//! dX(i) = sum_j a(i,j) (X(j) - X(i)) dt + (alpha + sigma_e^2) X(i) dt
//!         + sqrt(sigma_b^2 X(i)) dW(i) + sqrt(2 sigma_e^2) X(i) dW'
//! ```
//!
//! with independent `W(i)` and one shared `W'`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::MigrationKernel;
use crate::numeric::CompensatedSum;
use crate::path::{check_grid, Ensemble, EnsembleKind, EventCounts, Path};
use crate::rng::{stream, Channel};
use crate::{Error, Result};

/// Coefficients of the limiting SDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSpec {
    pub kernel: MigrationKernel,
    pub alpha: f64,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
}

impl SdeSpec {
    pub fn new(kernel: MigrationKernel, alpha: f64, sigma_b2: f64, sigma_e2: f64) -> Result<Self> {
        let spec = Self {
            kernel,
            alpha,
            sigma_b2,
            sigma_e2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} is not finite",
                self.alpha
            )));
        }
        for (name, v) in [("sigma_b2", self.sigma_b2), ("sigma_e2", self.sigma_e2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn demes(&self) -> usize {
        self.kernel.demes()
    }
}

fn check_state(x: &[f64], demes: usize) -> Result<()> {
    if x.len() != demes {
        return Err(Error::InvalidState(format!(
            "state has {} demes, kernel has {demes}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidState(format!(
            "state entry {v} is negative or not finite"
        )));
    }
    Ok(())
}

/// Drift vector `sum_j a(i,j)(x_j - x_i) + (alpha + sigma_e^2) x_i`.
pub fn drift(spec: &SdeSpec, x: &[f64]) -> Vec<f64> {
    let d = spec.demes();
    let growth = spec.alpha + spec.sigma_e2;
    (0..d)
        .map(|i| {
            let mut s = CompensatedSum::new();
            for (j, xj) in x.iter().enumerate() {
                if j != i {
                    s.add(spec.kernel.a(i, j) * (xj - x[i]));
                }
            }
            s.add(growth * x[i]);
            s.value()
        })
        .collect()
}

/// Instantaneous covariance of the increments: `sigma_b^2 x_i 1{i=j} + 2 sigma_e^2 x_i x_j`.
pub fn cross_covariance_rate(spec: &SdeSpec, x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let common = 2.0 * spec.sigma_e2 * x[i] * x[j];
                    if i == j {
                        spec.sigma_b2 * x[i] + common
                    } else {
                        common
                    }
                })
                .collect()
        })
        .collect()
}

/// One Euler–Maruyama step of length `dt` in place, driven by standard
/// normals `deme_noise` (one per deme) and `common_noise`. Returns the number
/// of coordinates that went negative before clamping.
pub fn em_step(
    spec: &SdeSpec,
    x: &mut [f64],
    dt: f64,
    deme_noise: &[f64],
    common_noise: f64,
) -> u64 {
    let b = drift(spec, x);
    let sqrt_dt = dt.sqrt();
    let common = (2.0 * spec.sigma_e2).sqrt() * sqrt_dt * common_noise;
    let mut clamps = 0;
    for i in 0..x.len() {
        let xi = x[i].max(0.0);
        let next =
            x[i] + b[i] * dt + (spec.sigma_b2 * xi * dt).sqrt() * deme_noise[i] + common * xi;
        if next < 0.0 {
            clamps += 1;
        }
        x[i] = next.max(0.0);
    }
    clamps
}

/// Integrates one path. Steps have length `dt` except where a grid point
/// falls inside a step, which is then split so that every grid time is hit
/// exactly.
pub fn euler_maruyama_path(
    spec: &SdeSpec,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    grid: &[f64],
    seed: u64,
    path_id: u64,
) -> Result<(Path, u64)> {
    spec.validate()?;
    check_state(x0, spec.demes())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} must be positive"
        )));
    }
    if dt > horizon {
        return Err(Error::StepTooLarge { dt, horizon });
    }
    check_grid(grid, horizon)?;

    let d = spec.demes();
    let mut deme_rng = stream(seed, path_id, Channel::DemeNoise);
    let mut common_rng = stream(seed, path_id, Channel::CommonNoise);
    let mut x = x0.to_vec();
    let mut noise = vec![0.0; d];
    let mut clamps = 0;
    let mut raw = Vec::with_capacity(grid.len());
    let mut k = 0u64;
    let mut t = 0.0;
    let mut gi = 0;
    let eps = 1e-9 * dt;
    while gi < grid.len() {
        if grid[gi] <= t + eps {
            raw.push(x.clone());
            gi += 1;
            continue;
        }
        let step_end = ((k + 1) as f64 * dt).min(grid[gi]);
        let h = step_end - t;
        for z in noise.iter_mut() {
            *z = deme_rng.sample(StandardNormal);
        }
        let w: f64 = common_rng.sample(StandardNormal);
        clamps += em_step(spec, &mut x, h, &noise, w);
        t = step_end;
        if ((k + 1) as f64 * dt - t).abs() <= eps {
            k += 1;
        }
    }
    Ok((
        Path {
            path_id,
            seed,
            scale: 1.0,
            horizon,
            times: grid.to_vec(),
            raw,
            env_trace: Vec::new(),
            extinction_time: None,
            events: EventCounts::default(),
        },
        clamps,
    ))
}

/// Euler–Maruyama ensemble with clamping at zero; the number of clamped
/// coordinates over all paths is reported in `clamp_events`.
#[allow(clippy::too_many_arguments)]
pub fn euler_maruyama(
    spec: &SdeSpec,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    grid: &[f64],
) -> Result<Ensemble> {
    let runs = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| euler_maruyama_path(spec, x0, horizon, dt, grid, seed, p))
        .collect::<Result<Vec<_>>>()?;
    let clamp_events = runs.iter().map(|r| r.1).sum();
    Ok(Ensemble {
        kind: EnsembleKind::Sde,
        seed,
        n: 0,
        grid: grid.to_vec(),
        demes: spec.demes(),
        paths: runs.into_iter().map(|r| r.0).collect(),
        clamp_events,
    })
}

/// Exact samples of `a t + sigma W_t` at `times`.
pub fn walker_limit_sample(
    a: f64,
    sigma: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    if !(sigma.is_finite() && sigma >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite a and sigma >= 0, got ({a}, {sigma})"
        )));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    if !times.is_empty() && horizon > 0.0 {
        check_grid(times, horizon)?;
    } else if times.len() > 1 || times.first().is_some_and(|t| *t != 0.0) {
        return Err(Error::InvalidArgument(
            "sample times must be increasing and non-negative".into(),
        ));
    }
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p, Channel::DemeNoise);
            let mut w = 0.0;
            let mut prev = 0.0;
            let raw = times
                .iter()
                .map(|&t| {
                    let z: f64 = rng.sample(StandardNormal);
                    w += (t - prev).sqrt() * z;
                    prev = t;
                    vec![a * t + sigma * w]
                })
                .collect();
            Path {
                path_id: p,
                seed,
                scale: 1.0,
                horizon,
                times: times.to_vec(),
                raw,
                env_trace: Vec::new(),
                extinction_time: None,
                events: EventCounts::default(),
            }
        })
        .collect();
    Ok(Ensemble {
        kind: EnsembleKind::WalkerLimit,
        seed,
        n: 0,
        grid: times.to_vec(),
        demes: 1,
        paths,
        clamp_events: 0,
    })
}
