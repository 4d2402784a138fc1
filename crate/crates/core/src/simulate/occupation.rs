//! Occupation measures of the environment and norm diagnostics along paths.

use serde::{Deserialize, Serialize};

use crate::env::{EnvironmentLaw, OffspringLaw};
use crate::lattice::{ell_gamma_norm, MigrationKernel};
use crate::numeric::CompensatedSum;
use crate::path::{Ensemble, Path};
use crate::{Error, Result};

/// Time spent by `transform(Z_s)` in each (time bin, value bin) cell.
///
/// Value bins are half-open `[v_k, v_{k+1})` except the last, which is
/// closed. Time outside all value bins goes to `overflow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    pub time_edges: Vec<f64>,
    pub value_edges: Vec<f64>,
    /// `mass[b][v]`
    pub mass: Vec<Vec<f64>>,
    pub overflow: Vec<f64>,
    /// Exact `int transform(Z_s) ds` over each time bin.
    pub integral: Vec<f64>,
    /// Number of environment pieces whose value fell outside the bins.
    pub out_of_bins: usize,
}

impl OccupationMeasure {
    pub fn time_bins(&self) -> usize {
        self.mass.len()
    }

    /// Total mass of time bin `b` including overflow.
    pub fn bin_total(&self, b: usize) -> f64 {
        self.mass[b].iter().sum::<f64>() + self.overflow[b]
    }

    /// Sojourn-weighted mean of the transformed environment over time bin `b`.
    pub fn mean_value(&self, b: usize) -> f64 {
        self.integral[b] / (self.time_edges[b + 1] - self.time_edges[b])
    }

    /// Errors with `ValueOutOfBins` if any mass landed in the overflow cells.
    pub fn ensure_in_bins(&self) -> Result<()> {
        if self.out_of_bins > 0 {
            return Err(Error::ValueOutOfBins {
                count: self.out_of_bins,
                mass: self.overflow.iter().sum(),
            });
        }
        Ok(())
    }
}

fn value_bin(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len().checked_sub(1)?;
    if last == 0 || v < edges[0] || v > edges[last] {
        return None;
    }
    let idx = edges.partition_point(|e| *e <= v);
    Some(idx.saturating_sub(1).min(last - 1))
}

/// Exact sojourn-time accounting of `transform(Z_s)` along the environment
/// trace of `path`.
pub fn occupation_measure<F: Fn(&OffspringLaw) -> f64>(
    path: &Path,
    env: &EnvironmentLaw,
    transform: F,
    time_edges: &[f64],
    value_edges: &[f64],
) -> Result<OccupationMeasure> {
    if time_edges.windows(2).any(|w| w[1] <= w[0]) || value_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "bin edges must be strictly increasing".into(),
        ));
    }
    let bins = time_edges.len().saturating_sub(1);
    let mut out = OccupationMeasure {
        time_edges: time_edges.to_vec(),
        value_edges: value_edges.to_vec(),
        mass: vec![vec![0.0; value_edges.len().saturating_sub(1)]; bins],
        overflow: vec![0.0; bins],
        integral: vec![0.0; bins],
        out_of_bins: 0,
    };
    if bins == 0 {
        return Ok(out);
    }
    if path.env_trace.first().map(|s| s.time) != Some(0.0) {
        return Err(Error::InvalidArgument(
            "path has no environment trace".into(),
        ));
    }
    if time_edges[0] < 0.0 || time_edges[bins] > path.horizon {
        return Err(Error::InvalidArgument(format!(
            "time bins [{}, {}] exceed the simulated horizon {}",
            time_edges[0], time_edges[bins], path.horizon
        )));
    }
    let values: Vec<f64> = env.atoms().iter().map(|(law, _)| transform(law)).collect();
    let mut integrals = vec![CompensatedSum::new(); bins];
    let mut b = 0;
    for (k, piece) in path.env_trace.iter().enumerate() {
        let start = piece.time;
        let end = path.env_trace.get(k + 1).map_or(path.horizon, |s| s.time);
        let v = values[piece.atom];
        let cell = value_bin(value_edges, v);
        if cell.is_none() && end > time_edges[0] && start < time_edges[bins] {
            out.out_of_bins += 1;
        }
        while b < bins && time_edges[b + 1] <= start {
            b += 1;
        }
        let mut bb = b;
        while bb < bins && time_edges[bb] < end {
            let overlap = end.min(time_edges[bb + 1]) - start.max(time_edges[bb]);
            if overlap > 0.0 {
                match cell {
                    Some(c) => out.mass[bb][c] += overlap,
                    None => out.overflow[bb] += overlap,
                }
                integrals[bb].add(overlap * v);
            }
            bb += 1;
        }
    }
    out.integral = integrals.iter().map(CompensatedSum::value).collect();
    Ok(out)
}

/// Running supremum of `||X_s||_{l_gamma}` over the sample grid.
pub fn sup_norm_trace(path: &Path, kernel: &MigrationKernel) -> Vec<(f64, f64)> {
    let mut sup = 0.0_f64;
    path.samples()
        .map(|(t, x)| {
            sup = sup.max(ell_gamma_norm(&x, kernel));
            (t, sup)
        })
        .collect()
}

/// Empirical `P(sup_{s <= T} ||X_s|| >= k)` for each threshold `k`, with `T`
/// the last grid time.
pub fn norm_tail_probabilities(
    ensemble: &Ensemble,
    kernel: &MigrationKernel,
    thresholds: &[f64],
) -> Vec<f64> {
    let sups: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|p| sup_norm_trace(p, kernel).last().map_or(0.0, |s| s.1))
        .collect();
    let m = sups.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&k| sups.iter().filter(|&&s| s >= k).count() as f64 / m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{g_n, two_point_environment, OffspringLaw};
    use crate::path::uniform_grid;
    use crate::simulate::{simulate_brwre, ParticleState};

    #[test]
    fn constant_environment_puts_mass_in_one_bin() {
        let law = OffspringLaw::new(vec![(0, 0.4), (2, 0.6)]).unwrap();
        let env = EnvironmentLaw::constant(law, 10);
        let x0 = ParticleState::new(vec![10], 10);
        let p = simulate_brwre(&MigrationKernel::single(), &env, &x0, 1.0, &[1.0], 1).unwrap();
        let m = occupation_measure(&p, &env, g_n, &[0.0, 0.5, 1.0], &[0.0, 0.01, 0.1]).unwrap();
        for b in 0..2 {
            assert!((m.mass[b][1] - 0.5).abs() < 1e-12);
            assert_eq!(m.mass[b][0], 0.0);
        }
        m.ensure_in_bins().unwrap();
    }

    #[test]
    fn marginals_equal_bin_lengths() {
        let env = two_point_environment(0.4, 0.3, 20).unwrap();
        let x0 = ParticleState::new(vec![20], 20);
        let p = simulate_brwre(&MigrationKernel::single(), &env, &x0, 1.0, &[1.0], 2).unwrap();
        let edges = uniform_grid(1.0, 0.1);
        let m = occupation_measure(&p, &env, g_n, &edges, &[0.0, 0.08, 0.2]).unwrap();
        for b in 0..m.time_bins() {
            assert!((m.bin_total(b) - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let env = two_point_environment(0.4, 0.3, 20).unwrap();
        let x0 = ParticleState::new(vec![20], 20);
        let p = simulate_brwre(&MigrationKernel::single(), &env, &x0, 1.0, &[1.0], 2).unwrap();
        let m = occupation_measure(&p, &env, g_n, &[0.0, 1.0], &[0.0, 0.08]).unwrap();
        assert!(m.out_of_bins > 0);
        assert!(m.overflow[0] > 0.0);
        assert!((m.bin_total(0) - 1.0).abs() < 1e-9);
        assert!(matches!(
            m.ensure_in_bins(),
            Err(Error::ValueOutOfBins { .. })
        ));
    }

    #[test]
    fn empty_time_range_gives_empty_measure() {
        let env = two_point_environment(0.4, 0.3, 20).unwrap();
        let x0 = ParticleState::new(vec![20], 20);
        let p = simulate_brwre(&MigrationKernel::single(), &env, &x0, 1.0, &[1.0], 2).unwrap();
        let m = occupation_measure(&p, &env, g_n, &[], &[0.0, 1.0]).unwrap();
        assert_eq!(m.time_bins(), 0);
    }

    #[test]
    fn norm_traces() {
        let env = two_point_environment(0.4, 0.3, 20).unwrap();
        let k = MigrationKernel::single().with_gamma(&[2.5]).unwrap();
        let x0 = ParticleState::new(vec![0], 20);
        let grid = uniform_grid(1.0, 0.1);
        let p = simulate_brwre(&k, &env, &x0, 1.0, &grid, 2).unwrap();
        assert!(sup_norm_trace(&p, &k).iter().all(|s| s.1 == 0.0));
        let x0 = ParticleState::new(vec![20], 20);
        let p = simulate_brwre(&k, &env, &x0, 1.0, &grid, 2).unwrap();
        let tr = sup_norm_trace(&p, &k);
        let mut run = 0.0_f64;
        for (i, (_, s)) in tr.iter().enumerate() {
            run = run.max(2.5 * p.value(i, 0));
            assert_eq!(*s, run);
        }
    }
}
