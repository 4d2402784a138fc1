//! Turns a validated config into artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use stochavg::generators::{
    a1, a2, apply_l0, apply_l1, apply_l2, averaging_condition_report, iterated_l1,
    poisson_identity_residual, AveragingConfig,
};
use stochavg::io::{write_paths_csv, write_summary_csv, EnvColumns, Provenance};
use stochavg::path::Ensemble;
use stochavg::rng::derive_seed;
use stochavg::simulate::{
    brwre_ensemble, speed_walker_ensemble, switching_integral_ensemble, BrwreOptions,
    ParticleState, SpeedLaw, DEFAULT_POPULATION_CAP,
};
use stochavg::stats::{ensemble_summary, max_bound, variance_oracle, variance_oracle_naive};
use stochavg::{limits, numeric};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};

/// One output file held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::config("workers", e))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Validates the config, runs the experiment and returns its artifacts.
pub fn execute(config: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let workers = config.resolve_workers()?;
    let plan = Plan::build(config)?;
    with_workers(workers, || plan.execute())?
}

/// Writes artifacts under `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.bytes).map_err(|e| CliError::io(&p, e))?;
            Ok(p)
        })
        .collect()
}

/// Output directory: `[output].dir` resolved against the config file's
/// directory, unless overridden.
pub fn output_dir(
    config: &ExperimentConfig,
    config_path: &Path,
    overridden: Option<&Path>,
) -> PathBuf {
    if let Some(d) = overridden {
        return d.to_path_buf();
    }
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    match &config.output.dir {
        Some(d) => base.join(d),
        None => base,
    }
}

enum Job {
    Walker {
        law: SpeedLaw,
        n: u32,
    },
    Brwre {
        kernel: stochavg::lattice::MigrationKernel,
        env: stochavg::env::EnvironmentLaw,
        x0: ParticleState,
        cap: u64,
    },
    Sde {
        spec: limits::SdeSpec,
        x0: Vec<f64>,
        dt: f64,
    },
    GeneratorCheck,
    AveragingReport,
    Oracle,
}

/// A config whose values have all been checked.
struct Plan<'a> {
    config: &'a ExperimentConfig,
    job: Job,
    grid: Vec<f64>,
    horizon: f64,
    n_paths: usize,
}

impl<'a> Plan<'a> {
    fn build(config: &'a ExperimentConfig) -> CliResult<Self> {
        let horizon = config.horizon()?;
        let grid = config.grid()?;
        let n_paths = config.n_paths()?;
        let job = match config.kind {
            ExperimentKind::Walker => Job::Walker {
                law: config.speed_law()?,
                n: config.n()?,
            },
            ExperimentKind::Brwre => {
                let kernel = config.kernel()?;
                let n = config.n()?;
                let env = config.environment(n)?;
                let x0 = config.x0(kernel.demes())?;
                let x0 = ParticleState::from_scaled(&x0, n)
                    .map_err(|e| CliError::config("model.x0", e))?;
                let cap = config.run.population_cap.unwrap_or(DEFAULT_POPULATION_CAP);
                Job::Brwre {
                    kernel,
                    env,
                    x0,
                    cap,
                }
            }
            ExperimentKind::Sde => {
                let spec = config.sde_spec()?;
                let x0 = config.x0(spec.demes())?;
                Job::Sde {
                    spec,
                    x0,
                    dt: config.dt()?,
                }
            }
            ExperimentKind::GeneratorCheck => {
                let kernel = config.kernel()?;
                let n = config.n()?;
                config.environment(n)?;
                config.sde_spec()?;
                config.function(kernel.demes())?;
                let g = config.generator.as_ref().ok_or_else(|| {
                    CliError::config("generator.states", "required for generator-check")
                })?;
                for (i, s) in g.states.iter().enumerate() {
                    if s.len() != kernel.demes() || s.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                    {
                        return Err(CliError::config(
                            format!("generator.states[{i}]"),
                            format!("must hold {} non-negative values", kernel.demes()),
                        ));
                    }
                }
                Job::GeneratorCheck
            }
            ExperimentKind::AveragingReport => {
                let spec = config.sde_spec()?;
                for n in config.n_list()? {
                    config.environment(n)?;
                }
                config.x0(spec.demes())?;
                config.function(spec.demes())?;
                if n_paths < 2 {
                    return Err(CliError::config(
                        "run.n_paths",
                        "the report needs at least 2 paths",
                    ));
                }
                Job::AveragingReport
            }
            ExperimentKind::Oracle => {
                let o = config
                    .oracle
                    .as_ref()
                    .ok_or_else(|| CliError::config("oracle", "required for the oracle kind"))?;
                if o.rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(CliError::config("oracle.rho", "entries must be positive"));
                }
                if o.t.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(CliError::config("oracle.t", "entries must be positive"));
                }
                if !(o.var_y.is_finite() && o.var_y >= 0.0) {
                    return Err(CliError::config("oracle.var_y", "must be non-negative"));
                }
                if let Some(m) = &o.max_bound {
                    if m.alpha.iter().any(|a| !(*a > 0.0)) {
                        return Err(CliError::config(
                            "oracle.max_bound.alpha",
                            "entries must be positive",
                        ));
                    }
                    if m.rho.iter().any(|r| !(*r >= 0.0)) {
                        return Err(CliError::config(
                            "oracle.max_bound.rho",
                            "entries must be non-negative",
                        ));
                    }
                    if m.p.iter().any(|p| !(*p > 1.0)) {
                        return Err(CliError::config(
                            "oracle.max_bound.p",
                            "entries must exceed 1",
                        ));
                    }
                    if m.replicates == 0 {
                        return Err(CliError::config(
                            "oracle.max_bound.replicates",
                            "must be positive",
                        ));
                    }
                }
                Job::Oracle
            }
        };
        Ok(Self {
            config,
            job,
            grid,
            horizon,
            n_paths,
        })
    }

    fn provenance(&self) -> Provenance {
        let mut p = Provenance::new(self.config.content_hash(), self.config.seed);
        p.extra
            .push(format!("experiment={}", self.config.kind.name()));
        p
    }

    fn execute(&self) -> CliResult<Vec<Artifact>> {
        let c = self.config;
        let seed = c.seed;
        match &self.job {
            Job::Walker { law, n } => {
                let e = speed_walker_ensemble(
                    law,
                    *n,
                    self.horizon,
                    &self.grid,
                    self.n_paths,
                    seed,
                    true,
                )?;
                self.ensemble_artifacts(&e, EnvColumns::Speed(law))
            }
            Job::Brwre {
                kernel,
                env,
                x0,
                cap,
            } => {
                let options = BrwreOptions {
                    population_cap: *cap,
                    keep_env_trace: true,
                };
                let e = brwre_ensemble(
                    kernel,
                    env,
                    x0,
                    self.horizon,
                    &self.grid,
                    self.n_paths,
                    seed,
                    options,
                )?;
                self.ensemble_artifacts(&e, EnvColumns::Offspring(env))
            }
            Job::Sde { spec, x0, dt } => {
                let e = limits::euler_maruyama(
                    spec,
                    x0,
                    self.horizon,
                    *dt,
                    self.n_paths,
                    seed,
                    &self.grid,
                )?;
                self.ensemble_artifacts(&e, EnvColumns::None)
            }
            Job::GeneratorCheck => self.generator_check(),
            Job::AveragingReport => self.averaging_report(),
            Job::Oracle => self.oracle(),
        }
    }

    fn ensemble_artifacts(&self, e: &Ensemble, env: EnvColumns<'_>) -> CliResult<Vec<Artifact>> {
        let mut prov = self.provenance();
        if e.clamp_events > 0 {
            prov.extra.push(format!("clamp_events={}", e.clamp_events));
        }
        let mut paths = Vec::new();
        write_paths_csv(&mut paths, e, &prov, env)?;
        let summary = ensemble_summary(e, &self.grid)?;
        let mut sum = Vec::new();
        write_summary_csv(&mut sum, &summary, &prov)?;
        let prefix = self.config.prefix();
        Ok(vec![
            Artifact {
                name: format!("{prefix}_paths.csv"),
                bytes: paths,
            },
            Artifact {
                name: format!("{prefix}_summary.csv"),
                bytes: sum,
            },
        ])
    }

    fn json_artifact(&self, result: Value) -> CliResult<Vec<Artifact>> {
        let doc = json!({
            "stochavg_version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config.content_hash(),
            "seed": self.config.seed,
            "experiment": self.config.kind.name(),
            "result": result,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("JSON values serialize");
        bytes.push(b'\n');
        Ok(vec![Artifact {
            name: format!("{}.json", self.config.prefix()),
            bytes,
        }])
    }

    fn generator_check(&self) -> CliResult<Vec<Artifact>> {
        #[derive(Serialize)]
        struct AtomRow {
            atom: usize,
            mean: f64,
            l0: f64,
            l1: f64,
            l2_of_h: f64,
            iterated_l1: f64,
            poisson_residual: f64,
        }
        #[derive(Serialize)]
        struct StateRow {
            x: Vec<f64>,
            f: f64,
            a1: f64,
            a2_sigma_e2: f64,
            mean_iterated_l1: f64,
            atoms: Vec<AtomRow>,
        }
        let c = self.config;
        let kernel = c.kernel()?;
        let n = c.n()?;
        let env = c.environment(n)?;
        let spec = c.sde_spec()?;
        let f = c.function(kernel.demes())?;
        let states = &c.generator.as_ref().expect("checked in build").states;
        let rows: Vec<StateRow> = states
            .iter()
            .map(|x| {
                let h = |y: &[f64], z: &stochavg::env::OffspringLaw| apply_l1(f.as_ref(), y, z, n);
                let atoms = env
                    .atoms()
                    .iter()
                    .enumerate()
                    .map(|(k, (z, _))| AtomRow {
                        atom: k,
                        mean: z.mean(),
                        l0: apply_l0(&kernel, f.as_ref(), x, n),
                        l1: apply_l1(f.as_ref(), x, z, n),
                        l2_of_h: apply_l2(&h, x, z, &env),
                        iterated_l1: iterated_l1(f.as_ref(), x, z, n),
                        poisson_residual: poisson_identity_residual(f.as_ref(), x, z, &env, n),
                    })
                    .collect();
                StateRow {
                    x: x.clone(),
                    f: f.value(x),
                    a1: a1(f.as_ref(), x, &spec),
                    a2_sigma_e2: a2(f.as_ref(), x, spec.sigma_e2),
                    mean_iterated_l1: env.expectation(|z| iterated_l1(f.as_ref(), x, z, n)),
                    atoms,
                }
            })
            .collect();
        self.json_artifact(json!({ "n": n, "states": rows }))
    }

    fn averaging_report(&self) -> CliResult<Vec<Artifact>> {
        let c = self.config;
        let spec = c.sde_spec()?;
        let f = c.function(spec.demes())?;
        let mut cfg = AveragingConfig::new(
            c.n_list()?,
            self.horizon,
            self.n_paths,
            c.seed,
            c.x0(spec.demes())?,
        );
        if let Some(cap) = c.run.population_cap {
            cfg.population_cap = cap;
        }
        let family = |n: u32| {
            c.environment(n)
                .map_err(|e| stochavg::Error::InvalidEnvironment(e.to_string()))
        };
        let report = averaging_condition_report(f.as_ref(), &spec, &family, &cfg)?;
        let value: Value = serde_json::from_str(&report.to_json()).expect("report JSON parses");
        self.json_artifact(value)
    }

    fn oracle(&self) -> CliResult<Vec<Artifact>> {
        let c = self.config;
        let o = c.oracle.as_ref().expect("checked in build");
        let mut cells = Vec::new();
        let mut cell_id = 0u64;
        for &rho in &o.rho {
            for &t in &o.t {
                let mut row = json!({
                    "rho": rho,
                    "t": t,
                    "variance": variance_oracle(rho, t, o.var_y),
                    "variance_naive": variance_oracle_naive(rho, t, o.var_y),
                });
                if let Some(paths) = o.monte_carlo_paths {
                    let s = o.var_y.sqrt();
                    let law = SpeedLaw::new(vec![-s, s], vec![0.5, 0.5])
                        .map_err(|e| CliError::config("oracle.var_y", e))?;
                    let e = switching_integral_ensemble(
                        &law,
                        rho,
                        1.0,
                        t,
                        &[t],
                        paths,
                        derive_seed(c.seed, cell_id),
                        false,
                    )?;
                    let (v, se) = numeric::variance_with_se(&e.column(0, 0));
                    row["monte_carlo"] =
                        json!({ "variance": v, "standard_error": se, "paths": paths });
                }
                cell_id += 1;
                cells.push(row);
            }
        }
        let mut bounds = Vec::new();
        if let Some(m) = &o.max_bound {
            for &alpha in &m.alpha {
                for &rho in &m.rho {
                    for &p in &m.p {
                        let moment = statrs::function::gamma::gamma(p + 1.0);
                        let (mean, se) = stochavg::stats::empirical_max_exponential(
                            rho,
                            m.replicates,
                            derive_seed(c.seed, cell_id),
                        );
                        cell_id += 1;
                        bounds.push(json!({
                            "alpha": alpha, "rho": rho, "p": p,
                            "bound": max_bound(alpha, rho, p, moment),
                            "empirical_mean": mean, "standard_error": se,
                        }));
                    }
                }
            }
        }
        self.json_artifact(json!({ "variance": cells, "max_bound": bounds }))
    }
}
