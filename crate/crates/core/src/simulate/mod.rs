//! Exact event-driven simulation of the scaled BRWRE and of the random-speed
//! walker, plus occupation measures and norm diagnostics of simulated paths.

mod brwre;
mod occupation;
mod walker;

pub use brwre::{
    brwre_ensemble, simulate_brwre, BrwreOptions, BrwreSimulator, DEFAULT_POPULATION_CAP,
};
pub use occupation::{
    norm_tail_probabilities, occupation_measure, sup_norm_trace, OccupationMeasure,
};
pub use walker::{
    simulate_speed_walker, simulate_switching_integral, speed_walker_ensemble,
    switching_integral_ensemble, SpeedLaw,
};

use crate::{Error, Result};

/// Population `n X^n` of a BRWRE: integer counts per deme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleState {
    pub counts: Vec<u64>,
    pub n: u32,
}

impl ParticleState {
    pub fn new(counts: Vec<u64>, n: u32) -> Self {
        Self { counts, n }
    }

    /// Converts a scaled state to counts; every `x_i * n` must be a
    /// non-negative integer (within 1e-9).
    pub fn from_scaled(x: &[f64], n: u32) -> Result<Self> {
        let counts = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = v * n as f64;
                let r = c.round();
                if !(c.is_finite() && r >= 0.0 && (c - r).abs() <= 1e-9 * (1.0 + r)) {
                    return Err(Error::InvalidState(format!(
                        "x[{i}] = {v} is not on the 1/{n} lattice"
                    )));
                }
                Ok(r as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { counts, n })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn scaled(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }
}

/// Receives every maximal time interval `[t0, t1)` on which the population
/// and the environment are constant.
pub trait SegmentObserver {
    fn segment(&mut self, t0: f64, t1: f64, counts: &[u64], atom: usize);
}

/// Observer that ignores every segment.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoObserver;

impl SegmentObserver for NoObserver {
    #[inline]
    fn segment(&mut self, _: f64, _: f64, _: &[u64], _: usize) {}
}

impl<F: FnMut(f64, f64, &[u64], usize)> SegmentObserver for F {
    #[inline]
    fn segment(&mut self, t0: f64, t1: f64, counts: &[u64], atom: usize) {
        self(t0, t1, counts, atom)
    }
}
