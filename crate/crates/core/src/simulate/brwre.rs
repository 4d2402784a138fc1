//! Gillespie-type simulation of the scaled BRWRE.
//!
//! Per individual in deme `i`: migration to `j` at rate `a(j, i)`, and
//! replacement by `k` offspring at rate `n` with probability `z_t(k)`. The
//! environment `z_t` is redrawn from its law at total rate `n^2 / beta^2`.
//!
//! The environment clock lives on its own random stream and does not depend
//! on the particles. Between environment switches the particle rates are
//! constant, so a pending particle waiting time that overshoots a switch is
//! discarded and redrawn from the switch time (memorylessness keeps this exact).

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::{NoObserver, ParticleState, SegmentObserver};
use crate::env::EnvironmentLaw;
use crate::lattice::MigrationKernel;
use crate::path::{check_grid, Ensemble, EnsembleKind, EnvSwitch, EventCounts, Path};
use crate::rng::{stream, Channel};
use crate::{Error, Result};

pub const DEFAULT_POPULATION_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrwreOptions {
    /// Total population above which the run aborts with `PopulationOverflow`.
    pub population_cap: u64,
    /// Record the environment trace in the returned path.
    pub keep_env_trace: bool,
}

impl Default for BrwreOptions {
    fn default() -> Self {
        Self {
            population_cap: DEFAULT_POPULATION_CAP,
            keep_env_trace: true,
        }
    }
}

struct OffspringSampler {
    support: Vec<u64>,
    index: WeightedIndex<f64>,
}

/// Precomputed samplers for one (kernel, environment) pair.
pub struct BrwreSimulator<'a> {
    kernel: &'a MigrationKernel,
    env: &'a EnvironmentLaw,
    options: BrwreOptions,
    offspring: Vec<OffspringSampler>,
    env_index: WeightedIndex<f64>,
    /// For each source deme, the destinations and their rates.
    destinations: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
}

impl<'a> BrwreSimulator<'a> {
    pub fn new(
        kernel: &'a MigrationKernel,
        env: &'a EnvironmentLaw,
        options: BrwreOptions,
    ) -> Result<Self> {
        let offspring = env
            .atoms()
            .iter()
            .map(|(law, _)| {
                let support = law.probs().iter().map(|p| p.0 as u64).collect();
                let index = WeightedIndex::new(law.probs().iter().map(|p| p.1))
                    .map_err(|e| Error::InvalidOffspringLaw(e.to_string()))?;
                Ok(OffspringSampler { support, index })
            })
            .collect::<Result<Vec<_>>>()?;
        let env_index = WeightedIndex::new(env.weights())
            .map_err(|e| Error::InvalidEnvironment(e.to_string()))?;
        let d = kernel.demes();
        let destinations = (0..d)
            .map(|from| {
                let dests: Vec<usize> = (0..d).filter(|&to| kernel.a(to, from) > 0.0).collect();
                if dests.is_empty() {
                    return None;
                }
                let w = WeightedIndex::new(dests.iter().map(|&to| kernel.a(to, from))).ok()?;
                Some((dests, w))
            })
            .collect();
        Ok(Self {
            kernel,
            env,
            options,
            offspring,
            env_index,
            destinations,
        })
    }

    /// Simulates one path, feeding every constant segment to `observer`.
    pub fn run<O: SegmentObserver>(
        &self,
        x0: &ParticleState,
        horizon: f64,
        grid: &[f64],
        seed: u64,
        path_id: u64,
        observer: &mut O,
    ) -> Result<Path> {
        check_grid(grid, horizon)?;
        let demes = self.kernel.demes();
        if x0.counts.len() != demes {
            return Err(Error::InvalidState(format!(
                "initial state has {} demes, kernel has {demes}",
                x0.counts.len()
            )));
        }
        if x0.n != self.env.n() {
            return Err(Error::InvalidState(format!(
                "initial state uses scale {} but the environment uses {}",
                x0.n,
                self.env.n()
            )));
        }
        let cap = self.options.population_cap;
        let n = self.env.n() as f64;
        let mu = self.kernel.mu();
        let per_capita = mu + n;

        let mut env_rng = stream(seed, path_id, Channel::Environment);
        let mut rng = stream(seed, path_id, Channel::Particles);

        let switching = self.env.atoms().len() > 1;
        let env_rate = self.env.switch_rate();
        let mut atom = if switching {
            self.env_index.sample(&mut env_rng)
        } else {
            0
        };
        let mut next_switch = if switching {
            env_rng.sample::<f64, _>(Exp1) / env_rate
        } else {
            f64::INFINITY
        };
        let mut env_trace = Vec::new();
        if self.options.keep_env_trace {
            env_trace.push(EnvSwitch { time: 0.0, atom });
        }

        let mut counts = x0.counts.clone();
        let mut total: u64 = counts.iter().sum();
        if total > cap {
            return Err(Error::PopulationOverflow {
                total,
                cap,
                time: 0.0,
            });
        }
        let mut extinction_time = (total == 0).then_some(0.0);
        let mut events = EventCounts::default();
        let mut times = Vec::with_capacity(grid.len());
        let mut raw = Vec::with_capacity(grid.len());
        let mut gi = 0;
        let mut t = 0.0;

        loop {
            let rate = total as f64 * per_capita;
            let t_event = if rate > 0.0 {
                t + rng.sample::<f64, _>(Exp1) / rate
            } else {
                f64::INFINITY
            };
            let t_next = t_event.min(next_switch).min(horizon);
            while gi < grid.len() && grid[gi] < t_next {
                times.push(grid[gi]);
                raw.push(counts.iter().map(|&c| c as f64).collect());
                gi += 1;
            }
            observer.segment(t, t_next, &counts, atom);
            if t_next >= horizon {
                break;
            }
            if next_switch <= t_event {
                t = next_switch;
                atom = self.env_index.sample(&mut env_rng);
                if self.options.keep_env_trace {
                    env_trace.push(EnvSwitch { time: t, atom });
                }
                events.environment += 1;
                next_switch = t + env_rng.sample::<f64, _>(Exp1) / env_rate;
                continue;
            }
            t = t_event;

            let deme = pick_deme(&counts, rng.random_range(0..total));
            if rng.random::<f64>() * per_capita < mu {
                let (dests, w) = self.destinations[deme]
                    .as_ref()
                    .expect("deme with positive outflow has destinations");
                let to = dests[w.sample(&mut rng)];
                counts[deme] -= 1;
                counts[to] += 1;
                events.migration += 1;
            } else {
                let sampler = &self.offspring[atom];
                let k = sampler.support[sampler.index.sample(&mut rng)];
                counts[deme] = counts[deme] - 1 + k;
                total = total - 1 + k;
                events.branching += 1;
                if total == 0 {
                    extinction_time = Some(t);
                } else if total > cap {
                    return Err(Error::PopulationOverflow {
                        total,
                        cap,
                        time: t,
                    });
                }
            }
        }
        while gi < grid.len() {
            times.push(grid[gi]);
            raw.push(counts.iter().map(|&c| c as f64).collect());
            gi += 1;
        }

        Ok(Path {
            path_id,
            seed,
            scale: n,
            horizon,
            times,
            raw,
            env_trace,
            extinction_time,
            events,
        })
    }
}

/// Deme of the `r`-th individual in deme order.
#[inline]
fn pick_deme(counts: &[u64], mut r: u64) -> usize {
    for (i, &c) in counts.iter().enumerate() {
        if r < c {
            return i;
        }
        r -= c;
    }
    unreachable!("draw exceeds the population")
}

/// One BRWRE path (path index 0) with default options.
pub fn simulate_brwre(
    kernel: &MigrationKernel,
    env: &EnvironmentLaw,
    x0: &ParticleState,
    horizon: f64,
    grid: &[f64],
    seed: u64,
) -> Result<Path> {
    BrwreSimulator::new(kernel, env, BrwreOptions::default())?.run(
        x0,
        horizon,
        grid,
        seed,
        0,
        &mut NoObserver,
    )
}

/// `n_paths` independent paths simulated in parallel; path `p` only depends
/// on `(seed, p)`.
#[allow(clippy::too_many_arguments)]
pub fn brwre_ensemble(
    kernel: &MigrationKernel,
    env: &EnvironmentLaw,
    x0: &ParticleState,
    horizon: f64,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    options: BrwreOptions,
) -> Result<Ensemble> {
    let sim = BrwreSimulator::new(kernel, env, options)?;
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| sim.run(x0, horizon, grid, seed, p, &mut NoObserver))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        kind: EnsembleKind::Brwre,
        seed,
        n: env.n(),
        grid: grid.to_vec(),
        demes: kernel.demes(),
        paths,
        clamp_events: 0,
    })
}
