//! Random-speed walker: a speed redrawn at Poisson times, integrated exactly.
//!
//! The general object is `X_t = c * int_0^t Y_{xi_r} dr` with `xi` a Poisson
//! process of rate `rho` and `Y` i.i.d. from a finite law. The walker of the
//! introduction is the case `rho = n^2`, `c = n`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{self, CompensatedSum};
use crate::path::{check_grid, Ensemble, EnsembleKind, EnvSwitch, EventCounts, Path};
use crate::rng::{stream, Channel};
use crate::{Error, Result};

/// Finite law on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpeedLawRepr", into = "SpeedLawRepr")]
pub struct SpeedLaw {
    values: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeedLawRepr {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<SpeedLawRepr> for SpeedLaw {
    type Error = Error;
    fn try_from(r: SpeedLawRepr) -> Result<Self> {
        SpeedLaw::new(r.values, r.weights)
    }
}

impl From<SpeedLaw> for SpeedLawRepr {
    fn from(l: SpeedLaw) -> Self {
        Self {
            values: l.values,
            weights: l.weights,
        }
    }
}

impl SpeedLaw {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "speed law needs matching non-empty values and weights ({} vs {})",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("speed values must be finite".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "speed weights must be non-negative".into(),
            ));
        }
        let mass = numeric::sum(weights.iter().copied());
        if (mass - 1.0).abs() > crate::env::MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "speed weights sum to {mass}, not 1"
            )));
        }
        Ok(Self { values, weights })
    }

    pub fn delta(v: f64) -> Self {
        Self {
            values: vec![v],
            weights: vec![1.0],
        }
    }

    /// Fair two-point law with the given mean and variance.
    pub fn two_point(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variance {variance} is negative"
            )));
        }
        let s = variance.sqrt();
        Self::new(vec![mean - s, mean + s], vec![0.5, 0.5])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        numeric::sum(self.values.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        numeric::sum(
            self.values
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| w * (v - m) * (v - m)),
        )
    }
}

/// One path of `X_t = multiplier * int_0^t Y_{xi_r} dr` with switches at rate
/// `rate`. The trace holds every switch time and the index of the new value.
#[allow(clippy::too_many_arguments)]
pub fn simulate_switching_integral(
    law: &SpeedLaw,
    rate: f64,
    multiplier: f64,
    horizon: f64,
    grid: &[f64],
    seed: u64,
    path_id: u64,
    keep_trace: bool,
) -> Result<Path> {
    check_grid(grid, horizon)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "switch rate {rate} must be positive"
        )));
    }
    let index = WeightedIndex::new(law.weights.iter().copied())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = stream(seed, path_id, Channel::Environment);

    let mut current = index.sample(&mut rng);
    let mut trace = Vec::new();
    if keep_trace {
        trace.push(EnvSwitch {
            time: 0.0,
            atom: current,
        });
    }
    let mut x = CompensatedSum::new();
    let mut t = 0.0;
    let mut events = EventCounts::default();
    let mut times = Vec::with_capacity(grid.len());
    let mut raw = Vec::with_capacity(grid.len());
    let mut gi = 0;
    loop {
        let next = t + rng.sample::<f64, _>(Exp1) / rate;
        let speed = multiplier * law.values[current];
        let end = next.min(horizon);
        while gi < grid.len() && grid[gi] <= end {
            times.push(grid[gi]);
            raw.push(vec![x.value() + speed * (grid[gi] - t)]);
            gi += 1;
        }
        if next >= horizon {
            break;
        }
        x.add(speed * (next - t));
        t = next;
        current = index.sample(&mut rng);
        events.environment += 1;
        if keep_trace {
            trace.push(EnvSwitch {
                time: t,
                atom: current,
            });
        }
    }
    Ok(Path {
        path_id,
        seed,
        scale: 1.0,
        horizon,
        times,
        raw,
        env_trace: trace,
        extinction_time: None,
        events,
    })
}

/// The walker `X^n_t = n int_0^t Z^n_s ds`, speeds redrawn at rate `n^2`.
pub fn simulate_speed_walker(
    pi_n: &SpeedLaw,
    n: u32,
    horizon: f64,
    grid: &[f64],
    seed: u64,
) -> Result<Path> {
    let nf = n as f64;
    simulate_switching_integral(pi_n, nf * nf, nf, horizon, grid, seed, 0, true)
}

#[allow(clippy::too_many_arguments)]
pub fn switching_integral_ensemble(
    law: &SpeedLaw,
    rate: f64,
    multiplier: f64,
    horizon: f64,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    keep_trace: bool,
) -> Result<Ensemble> {
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            simulate_switching_integral(law, rate, multiplier, horizon, grid, seed, p, keep_trace)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        kind: EnsembleKind::Walker,
        seed,
        n: 0,
        grid: grid.to_vec(),
        demes: 1,
        paths,
        clamp_events: 0,
    })
}

pub fn speed_walker_ensemble(
    pi_n: &SpeedLaw,
    n: u32,
    horizon: f64,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    keep_trace: bool,
) -> Result<Ensemble> {
    let nf = n as f64;
    let mut e =
        switching_integral_ensemble(pi_n, nf * nf, nf, horizon, grid, n_paths, seed, keep_trace)?;
    e.n = n;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::uniform_grid;

    #[test]
    fn constant_speed_is_linear() {
        let grid = uniform_grid(2.0, 0.25);
        let p = simulate_speed_walker(&SpeedLaw::delta(0.3), 10, 2.0, &grid, 1).unwrap();
        for (k, &t) in p.times.iter().enumerate() {
            assert!((p.raw[k][0] - 10.0 * 0.3 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_speed_stays_at_zero() {
        let grid = uniform_grid(1.0, 0.1);
        let p = simulate_speed_walker(&SpeedLaw::delta(0.0), 30, 1.0, &grid, 1).unwrap();
        assert!(p.raw.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn value_equals_telescoping_sum_over_trace() {
        let law = SpeedLaw::new(vec![-1.0, 0.5, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
        let grid = uniform_grid(1.0, 0.125);
        let n = 12u32;
        let p = simulate_speed_walker(&law, n, 1.0, &grid, 99).unwrap();
        assert!(p.env_trace.len() > 50);
        for (k, &t) in p.times.iter().enumerate() {
            // X_t = n sum_k (t ^ T_{k+1} - t ^ T_k) Y_k
            let mut acc = 0.0_f64;
            for (j, s) in p.env_trace.iter().enumerate() {
                let end = p.env_trace.get(j + 1).map_or(f64::INFINITY, |e| e.time);
                acc += (t.min(end) - t.min(s.time)) * law.values()[s.atom];
            }
            assert!((p.raw[k][0] - n as f64 * acc).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn two_point_moments() {
        let l = SpeedLaw::two_point(0.1, 0.5).unwrap();
        assert!((l.mean() - 0.1).abs() < 1e-15);
        assert!((l.variance() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(SpeedLaw::new(vec![1.0], vec![0.5]).is_err());
        assert!(SpeedLaw::new(vec![], vec![]).is_err());
        assert!(SpeedLaw::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
    }
}
