//! Monte Carlo estimates of the hypotheses of the averaging theorem for the
//! BRWRE, with `f_n = f` on the lattice and `h_n = L1 f_n`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    a1, a2, apply_l0, apply_l1, iterated_l1, l0_of_l1, poisson_identity_residual, TestFunction,
};
use crate::env::{g_n, moment_report, EnvironmentLaw};
use crate::limits::SdeSpec;
use crate::numeric::{self, log_log_slope, mean_se};
use crate::simulate::{BrwreOptions, BrwreSimulator, ParticleState, DEFAULT_POPULATION_CAP};
use crate::{Error, Result};

/// Run parameters of [`averaging_condition_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingConfig {
    pub n_list: Vec<u32>,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Initial scaled state, rounded to the `1/n` lattice for each `n`.
    pub x0: Vec<f64>,
    /// Compact set of states over which the deterministic supremum (ii) is
    /// taken, together with every state visited by the simulated paths.
    /// Points are rounded to the `1/n` lattice.
    pub state_grid: Vec<Vec<f64>>,
    /// Moment exponent `p > 2` of the integrability hypothesis.
    pub p: f64,
    pub population_cap: u64,
}

impl AveragingConfig {
    pub fn new(n_list: Vec<u32>, horizon: f64, n_paths: usize, seed: u64, x0: Vec<f64>) -> Self {
        let d = x0.len();
        let state_grid = (0..=40).map(|k| vec![k as f64 * 0.1; d]).collect();
        Self {
            n_list,
            horizon,
            n_paths,
            seed,
            x0,
            state_grid,
            p: 4.0,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }
}

/// One estimated quantity with its Monte Carlo standard error (zero for
/// deterministic quantities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityEstimate {
    pub id: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u32,
    pub quantities: Vec<QuantityEstimate>,
}

impl ReportRow {
    pub fn get(&self, id: &str) -> Option<&QuantityEstimate> {
        self.quantities.iter().find(|q| q.id == id)
    }
}

/// Per-`n` estimates plus trend diagnostics.
///
/// * `i`: `E[sup_s |h_n(X_s, Z_s)| / n]`
/// * `ii`: `sup_x |A1 f(x) - E_pi[(n L1 f + L0 f)(x, .)]|`
/// * `iii`: `E int_0^t |A2 f(X, g_n(Z)) - (L1 h_n + L0 h_n / n)(X, Z)| ds`
/// * `iv`: `int_0^t E|A2 f(X, g_n(Z))|^{p/2} ds`
/// * `v`: largest Poisson-identity residual over the checked states
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub rows: Vec<ReportRow>,
    /// Log-log slope against `n` of quantities i, ii, iii.
    /// `None` when some estimate is zero and the fit is undefined.
    pub slopes: Vec<(String, Option<f64>)>,
    /// Whether each of i, ii, iii is non-increasing along `n_list` up to two
    /// combined standard errors.
    pub monotone: Vec<(String, bool)>,
    /// `t sup_x |A2 f(x, 1)|^{p/2} sup_n E|m - 1|^p`, an upper bound for `iv`.
    pub iv_bound: f64,
    pub iv_bounded: bool,
}

impl AveragingReport {
    pub fn series(&self, id: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.get(id).map(|q| (q.estimate, q.standard_error)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Default)]
struct StateTerms {
    i: f64,
    ii: f64,
    iii: f64,
    iv_unit: f64,
    a2_unit: f64,
}

struct Evaluator<'a> {
    f: &'a dyn TestFunction,
    spec: &'a SdeSpec,
    env: &'a EnvironmentLaw,
    half_p: f64,
}

impl Evaluator<'_> {
    fn n(&self) -> u32 {
        self.env.n()
    }

    fn ii(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let nf = n as f64;
        let avg = self.env.expectation(|z| nf * apply_l1(self.f, x, z, n))
            + apply_l0(&self.spec.kernel, self.f, x, n);
        (a1(self.f, x, self.spec) - avg).abs()
    }

    fn terms(&self, x: &[f64], atom: usize) -> StateTerms {
        let n = self.n();
        let nf = n as f64;
        let z = self.env.atom(atom);
        let g = g_n(z);
        let a2_unit = a2(self.f, x, 1.0);
        let a2v = g * a2_unit;
        let lh = iterated_l1(self.f, x, z, n) + l0_of_l1(&self.spec.kernel, self.f, x, z, n) / nf;
        StateTerms {
            i: apply_l1(self.f, x, z, n).abs() / nf,
            ii: self.ii(x),
            iii: (a2v - lh).abs(),
            iv_unit: a2v.abs().powf(self.half_p),
            a2_unit: a2_unit.abs(),
        }
    }
}

#[derive(Default)]
struct PathTotals {
    sup_i: f64,
    int_iii: f64,
    int_iv: f64,
    sup_ii: f64,
    sup_a2_unit: f64,
}

fn lattice_point(x: &[f64], n: u32) -> Vec<u64> {
    x.iter()
        .map(|v| (v.max(0.0) * n as f64).round() as u64)
        .collect()
}

/// Estimates the averaging hypotheses along `config.n_list` for the BRWRE
/// with kernel `spec.kernel` and environment `env_family(n)`, against the
/// limit operators defined by `spec`.
pub fn averaging_condition_report(
    f: &dyn TestFunction,
    spec: &SdeSpec,
    env_family: &(dyn Fn(u32) -> Result<EnvironmentLaw> + Sync),
    config: &AveragingConfig,
) -> Result<AveragingReport> {
    if config.n_list.is_empty() || config.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "n_list must be non-empty and strictly increasing".into(),
        ));
    }
    if !(config.p > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "moment exponent p = {} must exceed 2",
            config.p
        )));
    }
    if config.n_paths < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: config.n_paths,
        });
    }
    let d = spec.demes();
    if config.x0.len() != d || config.state_grid.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidState(format!("states must have {d} demes")));
    }

    let half_p = config.p / 2.0;
    let mut rows = Vec::new();
    let mut sup_a2_unit = 0.0_f64;
    let mut sup_pth = 0.0_f64;
    for &n in &config.n_list {
        let env = env_family(n)?;
        if env.n() != n {
            return Err(Error::InvalidEnvironment(format!(
                "environment family returned scale {} for n = {n}",
                env.n()
            )));
        }
        sup_pth = sup_pth.max(moment_report(&env, config.p).pth_moment);
        let eval = Evaluator {
            f,
            spec,
            env: &env,
            half_p,
        };
        let nf = n as f64;

        let grid_points: Vec<Vec<u64>> = config
            .state_grid
            .iter()
            .map(|x| lattice_point(x, n))
            .collect();
        let mut grid_ii = 0.0_f64;
        let mut residual = 0.0_f64;
        for c in &grid_points {
            let x: Vec<f64> = c.iter().map(|&v| v as f64 / nf).collect();
            grid_ii = grid_ii.max(eval.ii(&x));
            sup_a2_unit = sup_a2_unit.max(a2(f, &x, 1.0).abs());
            for (z, _) in env.atoms() {
                residual = residual.max(poisson_identity_residual(f, &x, z, &env, n));
            }
        }

        let x0 = ParticleState::new(lattice_point(&config.x0, n), n);
        let options = BrwreOptions {
            population_cap: config.population_cap,
            keep_env_trace: false,
        };
        let sim = BrwreSimulator::new(&spec.kernel, &env, options)?;
        let horizon = config.horizon;
        let totals = (0..config.n_paths as u64)
            .into_par_iter()
            .map_init(HashMap::<(Vec<u64>, usize), StateTerms>::new, |cache, p| {
                let mut acc = PathTotals::default();
                let mut iii = numeric::CompensatedSum::new();
                let mut iv = numeric::CompensatedSum::new();
                let mut observer = |t0: f64, t1: f64, counts: &[u64], atom: usize| {
                    let key = (counts.to_vec(), atom);
                    let terms = *cache.entry(key).or_insert_with(|| {
                        let x: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
                        eval.terms(&x, atom)
                    });
                    acc.sup_i = acc.sup_i.max(terms.i);
                    acc.sup_ii = acc.sup_ii.max(terms.ii);
                    acc.sup_a2_unit = acc.sup_a2_unit.max(terms.a2_unit);
                    iii.add(terms.iii * (t1 - t0));
                    iv.add(terms.iv_unit * (t1 - t0));
                };
                sim.run(&x0, horizon, &[horizon], config.seed, p, &mut observer)?;
                acc.int_iii = iii.value();
                acc.int_iv = iv.value();
                Ok(acc)
            })
            .collect::<Result<Vec<PathTotals>>>()?;

        let col = |g: fn(&PathTotals) -> f64| totals.iter().map(g).collect::<Vec<f64>>();
        let (i_m, i_se) = mean_se(&col(|t| t.sup_i));
        let (iii_m, iii_se) = mean_se(&col(|t| t.int_iii));
        let (iv_m, iv_se) = mean_se(&col(|t| t.int_iv));
        let ii = totals.iter().map(|t| t.sup_ii).fold(grid_ii, f64::max);
        sup_a2_unit = totals
            .iter()
            .map(|t| t.sup_a2_unit)
            .fold(sup_a2_unit, f64::max);

        let q = |id: &str, estimate: f64, standard_error: f64, grid_size: usize| QuantityEstimate {
            id: id.to_string(),
            estimate,
            standard_error,
            grid_size,
        };
        rows.push(ReportRow {
            n,
            quantities: vec![
                q("i", i_m, i_se, config.n_paths),
                q("ii", ii, 0.0, grid_points.len()),
                q("iii", iii_m, iii_se, config.n_paths),
                q("iv", iv_m, iv_se, config.n_paths),
                q("v", residual, 0.0, grid_points.len() * env.atoms().len()),
            ],
        });
    }

    let ns: Vec<f64> = config.n_list.iter().map(|&n| n as f64).collect();
    let mut slopes = Vec::new();
    let mut monotone = Vec::new();
    for id in ["i", "ii", "iii"] {
        let series: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                let q = r.get(id).expect("quantity present");
                (q.estimate, q.standard_error)
            })
            .collect();
        let est: Vec<f64> = series.iter().map(|s| s.0).collect();
        let slope = log_log_slope(&ns, &est);
        slopes.push((id.to_string(), slope.is_finite().then_some(slope)));
        let ok = series
            .windows(2)
            .all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt());
        monotone.push((id.to_string(), ok));
    }
    let iv_bound = config.horizon * sup_a2_unit.powf(half_p) * sup_pth;
    let iv_bounded = rows.iter().all(|r| {
        r.get("iv")
            .is_some_and(|q| q.estimate.is_finite() && q.estimate <= iv_bound * (1.0 + 1e-12))
    });
    Ok(AveragingReport {
        rows,
        slopes,
        monotone,
        iv_bound,
        iv_bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{two_point_environment, OffspringLaw};
    use crate::generators::{GaussianDamped, Polynomial};
    use crate::lattice::MigrationKernel;

    fn spec(alpha: f64, sigma_e2: f64) -> SdeSpec {
        SdeSpec::new(MigrationKernel::single(), alpha, 1.0 - sigma_e2, sigma_e2).unwrap()
    }

    #[test]
    fn critical_single_atom_gives_zero_i_and_iii() {
        let f = GaussianDamped::x_exp_neg_x2(0);
        let fam = |n: u32| Ok(EnvironmentLaw::constant(OffspringLaw::delta(1), n));
        let cfg = AveragingConfig::new(vec![10, 20], 1.0, 20, 3, vec![1.0]);
        let r = averaging_condition_report(&f, &spec(0.0, 0.0), &fam, &cfg).unwrap();
        for row in &r.rows {
            assert_eq!(row.get("i").unwrap().estimate, 0.0);
            assert_eq!(row.get("iii").unwrap().estimate, 0.0);
            assert_eq!(row.get("v").unwrap().estimate, 0.0);
        }
    }

    #[test]
    fn deterministic_environment_has_vanishing_g() {
        let f = GaussianDamped::x_exp_neg_x2(0);
        let fam = |n: u32| two_point_environment(0.5, 0.0, n);
        let cfg = AveragingConfig::new(vec![10, 40], 1.0, 50, 4, vec![1.0]);
        let r = averaging_condition_report(&f, &spec(0.5, 0.0), &fam, &cfg).unwrap();
        let iii: Vec<f64> = r.series("iii").iter().map(|s| s.0).collect();
        assert!(iii[1] < iii[0]);
        let iv: Vec<f64> = r.series("iv").iter().map(|s| s.0).collect();
        // g_n = alpha^2 / n^2
        assert!(iv[1] < iv[0] / 100.0);
    }

    #[test]
    fn poisson_residual_is_zero_on_grid() {
        let f = Polynomial::power(0, 2);
        let fam = |n: u32| two_point_environment(0.4, 0.3, n);
        let cfg = AveragingConfig::new(vec![10], 0.2, 4, 1, vec![1.0]);
        let r = averaging_condition_report(&f, &spec(0.4, 0.09), &fam, &cfg).unwrap();
        assert!(r.rows[0].get("v").unwrap().estimate <= 1e-12);
        assert!(r.iv_bounded);
        let json = r.to_json();
        let back: AveragingReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rejects_bad_configuration() {
        let f = Polynomial::power(0, 2);
        let fam = |n: u32| two_point_environment(0.4, 0.3, n);
        let mut cfg = AveragingConfig::new(vec![20, 10], 1.0, 4, 1, vec![1.0]);
        assert!(averaging_condition_report(&f, &spec(0.4, 0.09), &fam, &cfg).is_err());
        cfg.n_list = vec![10];
        cfg.p = 2.0;
        assert!(averaging_condition_report(&f, &spec(0.4, 0.09), &fam, &cfg).is_err());
    }
}
