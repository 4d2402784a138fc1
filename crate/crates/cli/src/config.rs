//! Experiment configuration: a TOML document with a fixed key list.
//!
//! ```toml
//! kind = "brwre"
//! seed = 7
//! workers = 4              # optional; STOCHAVG_WORKERS otherwise
//!
//! [model]
//! n = 50
//! alpha = 0.5
//! sigma_e2 = 0.09
//! x0 = [1.0]
//! kernel = { preset = "single" }
//! environment = { family = "two-point" }
//!
//! [run]
//! horizon = 1.0
//! grid_step = 0.1
//! n_paths = 2000
//!
//! [output]
//! dir = "out"
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stochavg::env::{two_point_environment, EnvironmentLaw, OffspringLaw};
use stochavg::generators::{Bump, GaussianDamped, Polynomial, TestFunction};
use stochavg::lattice::{validate_kernel, MigrationKernel};
use stochavg::limits::SdeSpec;
use stochavg::path::{check_grid, uniform_grid};
use stochavg::simulate::SpeedLaw;

use crate::error::{CliError, CliResult};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "STOCHAVG_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Walker,
    Brwre,
    Sde,
    GeneratorCheck,
    AveragingReport,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Walker => "walker",
            Self::Brwre => "brwre",
            Self::Sde => "sde",
            Self::GeneratorCheck => "generator-check",
            Self::AveragingReport => "averaging-report",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u32>>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub sigma_e2: f64,
    /// Defaults to `1 - sigma_e2`, the two-point family's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: None,
            n_list: None,
            alpha: 0.0,
            sigma_e2: 0.0,
            sigma_b2: None,
            beta: 1.0,
            x0: None,
            kernel: None,
            environment: None,
            speed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelPreset {
    Single,
    Cycle,
    Complete,
}

/// Either a preset (`single`, `cycle`, `complete` with `demes` and `rate`) or
/// an explicit matrix `rates[j][i] = a(j, i)`. `gamma` defaults to ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<KernelPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvFamily {
    /// Offspring on `{0, 2}` with mean `1 + alpha/n +- sigma_e`.
    TwoPoint,
}

/// Either a named family driven by `model.alpha` and `model.sigma_e2`, or
/// explicit atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<EnvFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub weight: f64,
    pub support: Vec<u32>,
    pub probs: Vec<f64>,
}

/// Speed law of the walker: explicit `values`/`weights`, or the two-point
/// law with the given `mean` and `variance`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "one")]
    pub horizon: f64,
    /// Spacing of a uniform grid on `[0, horizon]`; ten steps by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    /// Explicit grid; overrides `grid_step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Euler–Maruyama step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_cap: Option<u64>,
    #[serde(default)]
    pub keep_env_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            grid_step: None,
            grid: None,
            dt: None,
            n_paths: default_paths(),
            population_cap: None,
            keep_env_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for artifacts, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// File name prefix; the experiment kind by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionConfig {
    Polynomial {
        terms: Vec<TermConfig>,
    },
    /// `x_deme exp(-x_deme^2)`.
    XExpNegX2 {
        #[serde(default)]
        deme: usize,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coef: f64,
    /// `[deme, power]` pairs.
    #[serde(default)]
    pub powers: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorCheckConfig {
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub rho: Vec<f64>,
    pub t: Vec<f64>,
    #[serde(default = "one")]
    pub var_y: f64,
    /// Paths per cell for a Monte Carlo cross-check with a fair `+-sqrt(var_y)` speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bound: Option<MaxBoundConfig>,
}

/// Grid for the maximum bound with `Exp(1)` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxBoundConfig {
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub replicates: usize,
}

fn one() -> f64 {
    1.0
}

fn default_paths() -> usize {
    100
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// SHA-256 of the canonical text of every key that affects results;
    /// `workers` and `[output]` are left out.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.output = OutputConfig::default();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// Worker count from the config, else from `STOCHAVG_WORKERS`.
    pub fn resolve_workers(&self) -> CliResult<Option<usize>> {
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(CliError::config("workers", "must be at least 1"));
            }
            return Ok(Some(w));
        }
        workers_from_env()
    }

    pub fn prefix(&self) -> String {
        self.output
            .prefix
            .clone()
            .unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn n(&self) -> CliResult<u32> {
        match self.model.n {
            Some(0) => Err(CliError::config("model.n", "must be positive")),
            Some(n) => Ok(n),
            None => Err(CliError::config(
                "model.n",
                "required for this experiment kind",
            )),
        }
    }

    pub fn n_list(&self) -> CliResult<Vec<u32>> {
        let list =
            self.model.n_list.clone().ok_or_else(|| {
                CliError::config("model.n_list", "required for this experiment kind")
            })?;
        if list.is_empty() || list.contains(&0) || list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config(
                "model.n_list",
                "must be a non-empty, strictly increasing list of positive integers",
            ));
        }
        Ok(list)
    }

    pub fn sigma_e2(&self) -> CliResult<f64> {
        let s = self.model.sigma_e2;
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::config(
                "model.sigma_e2",
                format!("{s} must be non-negative"),
            ));
        }
        Ok(s)
    }

    pub fn sigma_b2(&self) -> CliResult<f64> {
        let s = self.model.sigma_b2.unwrap_or(1.0 - self.model.sigma_e2);
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::config(
                "model.sigma_b2",
                format!("{s} must be non-negative"),
            ));
        }
        Ok(s)
    }

    pub fn kernel(&self) -> CliResult<MigrationKernel> {
        let Some(k) = &self.model.kernel else {
            return Ok(MigrationKernel::single());
        };
        let kernel = if let Some(rates) = &k.rates {
            if k.preset.is_some() {
                return Err(CliError::config(
                    "model.kernel.preset",
                    "give either a preset or explicit rates, not both",
                ));
            }
            let gamma = k
                .gamma
                .clone()
                .unwrap_or_else(|| vec![1.0; rates.len().max(1)]);
            validate_kernel(rates, &gamma).map_err(|e| CliError::config("model.kernel.rates", e))?
        } else {
            let preset = k.preset.ok_or_else(|| {
                CliError::config(
                    "model.kernel.preset",
                    "missing (or give model.kernel.rates)",
                )
            })?;
            let demes = k.demes.unwrap_or(1);
            let rate = k.rate.unwrap_or(1.0);
            let base = match preset {
                KernelPreset::Single => {
                    if demes != 1 {
                        return Err(CliError::config(
                            "model.kernel.demes",
                            "the single preset has one deme",
                        ));
                    }
                    Ok(MigrationKernel::single())
                }
                KernelPreset::Cycle => MigrationKernel::cycle(demes, rate),
                KernelPreset::Complete => MigrationKernel::complete(demes, rate),
            }
            .map_err(|e| CliError::config("model.kernel.rate", e))?;
            match &k.gamma {
                Some(g) => base
                    .with_gamma(g)
                    .map_err(|e| CliError::config("model.kernel.gamma", e))?,
                None => base,
            }
        };
        Ok(kernel)
    }

    /// Environment law at scale `n`.
    pub fn environment(&self, n: u32) -> CliResult<EnvironmentLaw> {
        let cfg = self.model.environment.clone().unwrap_or(EnvironmentConfig {
            family: Some(EnvFamily::TwoPoint),
            atoms: None,
        });
        let mut env = match (cfg.family, cfg.atoms) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "model.environment.family",
                    "give either a family or explicit atoms, not both",
                ))
            }
            (Some(EnvFamily::TwoPoint), None) => {
                let sigma_e = self.sigma_e2()?.sqrt();
                two_point_environment(self.model.alpha, sigma_e, n)
                    .map_err(|e| CliError::config("model.environment.family", e))?
            }
            (None, Some(atoms)) => {
                let mut laws = Vec::with_capacity(atoms.len());
                for (i, a) in atoms.iter().enumerate() {
                    if a.support.len() != a.probs.len() {
                        return Err(CliError::config(
                            format!("model.environment.atoms[{i}].probs"),
                            "must have one entry per support point",
                        ));
                    }
                    let law = OffspringLaw::new(
                        a.support
                            .iter()
                            .copied()
                            .zip(a.probs.iter().copied())
                            .collect(),
                    )
                    .map_err(|e| CliError::config(format!("model.environment.atoms[{i}]"), e))?;
                    laws.push((law, a.weight));
                }
                EnvironmentLaw::new(laws, n)
                    .map_err(|e| CliError::config("model.environment.atoms", e))?
            }
            (None, None) => {
                return Err(CliError::config(
                    "model.environment",
                    "needs a family or a list of atoms",
                ))
            }
        };
        env.set_beta(self.model.beta)
            .map_err(|e| CliError::config("model.beta", e))?;
        Ok(env)
    }

    pub fn speed_law(&self) -> CliResult<SpeedLaw> {
        let s = self
            .model
            .speed
            .as_ref()
            .ok_or_else(|| CliError::config("model.speed", "required for the walker"))?;
        match (&s.values, s.mean) {
            (Some(v), None) => {
                if s.variance.is_some() {
                    return Err(CliError::config(
                        "model.speed.variance",
                        "not allowed together with values",
                    ));
                }
                let w = s
                    .weights
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / v.len() as f64; v.len()]);
                SpeedLaw::new(v.clone(), w).map_err(|e| CliError::config("model.speed.weights", e))
            }
            (None, Some(m)) => {
                if s.weights.is_some() {
                    return Err(CliError::config(
                        "model.speed.weights",
                        "not allowed together with mean",
                    ));
                }
                let var = s.variance.ok_or_else(|| {
                    CliError::config("model.speed.variance", "required with mean")
                })?;
                SpeedLaw::two_point(m, var).map_err(|e| CliError::config("model.speed.variance", e))
            }
            _ => Err(CliError::config(
                "model.speed",
                "give either values (and weights) or mean and variance",
            )),
        }
    }

    /// Initial state; its length must match the kernel.
    pub fn x0(&self, demes: usize) -> CliResult<Vec<f64>> {
        let x0 = self
            .model
            .x0
            .clone()
            .ok_or_else(|| CliError::config("model.x0", "required for this experiment kind"))?;
        if x0.len() != demes {
            return Err(CliError::config(
                "model.x0",
                format!("has {} entries but the kernel has {demes} demes", x0.len()),
            ));
        }
        if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::config(
                "model.x0",
                "entries must be finite and non-negative",
            ));
        }
        Ok(x0)
    }

    pub fn sde_spec(&self) -> CliResult<SdeSpec> {
        SdeSpec::new(
            self.kernel()?,
            self.model.alpha,
            self.sigma_b2()?,
            self.sigma_e2()?,
        )
        .map_err(|e| CliError::config("model", e))
    }

    pub fn horizon(&self) -> CliResult<f64> {
        let h = self.run.horizon;
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::config(
                "run.horizon",
                format!("{h} must be positive"),
            ));
        }
        Ok(h)
    }

    pub fn grid(&self) -> CliResult<Vec<f64>> {
        let horizon = self.horizon()?;
        let (grid, key) = match (&self.run.grid, self.run.grid_step) {
            (Some(g), _) => (g.clone(), "run.grid"),
            (None, Some(step)) => {
                if !(step.is_finite() && step > 0.0 && step <= horizon) {
                    return Err(CliError::config(
                        "run.grid_step",
                        format!("{step} must be in (0, horizon]"),
                    ));
                }
                (uniform_grid(horizon, step), "run.grid_step")
            }
            (None, None) => (uniform_grid(horizon, horizon / 10.0), "run.horizon"),
        };
        check_grid(&grid, horizon).map_err(|e| CliError::config(key, e))?;
        Ok(grid)
    }

    pub fn dt(&self) -> CliResult<f64> {
        let dt = self.run.dt.unwrap_or(1e-3);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CliError::config("run.dt", format!("{dt} must be positive")));
        }
        if dt > self.horizon()? {
            return Err(CliError::config("run.dt", "exceeds run.horizon"));
        }
        Ok(dt)
    }

    pub fn n_paths(&self) -> CliResult<usize> {
        if self.run.n_paths == 0 {
            return Err(CliError::config("run.n_paths", "must be at least 1"));
        }
        Ok(self.run.n_paths)
    }

    pub fn function(&self, demes: usize) -> CliResult<Arc<dyn TestFunction>> {
        let f = self
            .function
            .as_ref()
            .ok_or_else(|| CliError::config("function", "required for this experiment kind"))?;
        let check_deme = |key: &str, i: usize| {
            if i >= demes {
                Err(CliError::config(
                    key,
                    format!("deme {i} is out of range for {demes} demes"),
                ))
            } else {
                Ok(())
            }
        };
        Ok(match f {
            FunctionConfig::Polynomial { terms } => {
                for (k, t) in terms.iter().enumerate() {
                    for &(i, _) in &t.powers {
                        check_deme(&format!("function.terms[{k}].powers"), i)?;
                    }
                }
                Arc::new(Polynomial::new(
                    terms.iter().map(|t| (t.coef, t.powers.clone())).collect(),
                ))
            }
            FunctionConfig::XExpNegX2 { deme } => {
                check_deme("function.deme", *deme)?;
                Arc::new(GaussianDamped::x_exp_neg_x2(*deme))
            }
            FunctionConfig::Bump {
                center,
                radius,
                scale,
            } => {
                if center.len() > demes {
                    return Err(CliError::config(
                        "function.center",
                        format!("has more than {demes} entries"),
                    ));
                }
                Arc::new(
                    Bump::new((0..center.len()).collect(), center.clone(), *radius, *scale)
                        .map_err(|e| CliError::config("function.radius", e))?,
                )
            }
        })
    }
}

/// Worker count from `STOCHAVG_WORKERS`, if set.
pub fn workers_from_env() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(Some(w)),
            _ => Err(CliError::config(
                WORKERS_ENV,
                format!("'{v}' is not a positive integer"),
            )),
        },
        Err(_) => Ok(None),
    }
}
