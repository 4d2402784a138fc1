//! Sampled trajectories and ensembles.

use serde::{Deserialize, Serialize};

/// The environment changed to atom `atom` at `time`. The first entry of a
/// trace is the initial draw at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSwitch {
    pub time: f64,
    pub atom: usize,
}

/// Number of events of each kind along one simulated path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub migration: u64,
    pub branching: u64,
    pub environment: u64,
}

/// One trajectory observed on a time grid.
///
/// `raw[k][i]` is the raw value at `times[k]` in deme `i`. For particle
/// systems the raw values are integer counts and the scaled state is
/// `raw / scale`; continuous processes use `scale = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub path_id: u64,
    /// Master seed; together with `path_id` it identifies every random stream.
    pub seed: u64,
    pub scale: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub raw: Vec<Vec<f64>>,
    pub env_trace: Vec<EnvSwitch>,
    pub extinction_time: Option<f64>,
    pub events: EventCounts,
}

impl Path {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn demes(&self) -> usize {
        self.raw.first().map_or(0, Vec::len)
    }

    /// Scaled state at sample `k`.
    pub fn state(&self, k: usize) -> Vec<f64> {
        self.raw[k].iter().map(|v| v / self.scale).collect()
    }

    /// Scaled value of one deme at sample `k`.
    #[inline]
    pub fn value(&self, k: usize, deme: usize) -> f64 {
        self.raw[k][deme] / self.scale
    }

    /// Iterator over `(time, scaled state)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
        (0..self.len()).map(move |k| (self.times[k], self.state(k)))
    }

    /// Index of the environment atom in force at time `t` (right-continuous).
    pub fn env_at(&self, t: f64) -> Option<usize> {
        let idx = self.env_trace.partition_point(|s| s.time <= t);
        if idx == 0 {
            None
        } else {
            Some(self.env_trace[idx - 1].atom)
        }
    }
}

/// Which process produced an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Brwre,
    Walker,
    Sde,
    WalkerLimit,
}

/// Paths sharing a grid and a deme set, ordered by path index.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub seed: u64,
    /// Scale parameter `n` of the model (zero for limit processes).
    pub n: u32,
    pub grid: Vec<f64>,
    pub demes: usize,
    pub paths: Vec<Path>,
    /// Number of clamping events of the SDE integrator (zero otherwise).
    pub clamp_events: u64,
}

impl Ensemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Scaled values of `deme` at grid index `k`, one per path.
    pub fn column(&self, k: usize, deme: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.value(k, deme)).collect()
    }

    /// Index of the grid point equal to `t` (within 1e-12).
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        self.grid
            .iter()
            .position(|g| (g - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }
}

/// Validates a sampling grid: finite, strictly increasing, inside `[0, horizon]`.
pub fn check_grid(grid: &[f64], horizon: f64) -> crate::Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(crate::Error::InvalidArgument(format!(
            "horizon {horizon} must be positive"
        )));
    }
    for (k, &g) in grid.iter().enumerate() {
        if !g.is_finite() || g < 0.0 || g > horizon {
            return Err(crate::Error::InvalidArgument(format!(
                "grid point {g} lies outside [0, {horizon}]"
            )));
        }
        if k > 0 && g <= grid[k - 1] {
            return Err(crate::Error::InvalidArgument(
                "grid times must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// `0, step, 2 step, ..., horizon` (the last point snapped to `horizon`).
pub fn uniform_grid(horizon: f64, step: f64) -> Vec<f64> {
    let m = (horizon / step).round() as usize;
    (0..=m)
        .map(|k| if k == m { horizon } else { k as f64 * step })
        .collect()
}
