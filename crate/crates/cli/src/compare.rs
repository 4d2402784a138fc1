//! Two-ensemble comparison per grid time and deme.

use std::str::FromStr;

use serde::Serialize;

use stochavg::numeric::{mean_se, variance_with_se};
use stochavg::path::Ensemble;
use stochavg::stats::{
    ks_p_value, ks_statistic, ks_two_sample, two_sample_z, TestVerdict, KS_LEVEL,
};
use stochavg::Error;

use crate::error::{CliError, CliResult};

/// Critical `|z|` of the mean and variance tests.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareTest {
    Mean,
    Variance,
    Ks,
}

impl FromStr for CompareTest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "variance" | "var" => Ok(Self::Variance),
            "ks" => Ok(Self::Ks),
            other => Err(format!(
                "unknown test '{other}' (expected mean, variance or ks)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub verdicts: Vec<TestVerdict>,
    pub passed: usize,
    pub total: usize,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.passed == self.total
    }
}

fn z_verdict(name: String, z: f64, sizes: Vec<usize>) -> TestVerdict {
    TestVerdict {
        name,
        statistic: z,
        p_value: None,
        z_score: Some(z),
        threshold: Z_LIMIT,
        pass: z.abs() <= Z_LIMIT,
        seed: 0,
        sample_sizes: sizes,
    }
}

/// Runs `tests` at every grid time and deme. Both ensembles must share the
/// grid and the number of demes.
pub fn compare(a: &Ensemble, b: &Ensemble, tests: &[CompareTest]) -> CliResult<Comparison> {
    if a.demes != b.demes {
        return Err(CliError::Input(format!(
            "deme counts differ: {} vs {}",
            a.demes, b.demes
        )));
    }
    let same_grid = a.grid.len() == b.grid.len()
        && a.grid
            .iter()
            .zip(&b.grid)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    if !same_grid {
        return Err(CliError::Input(
            Error::GridMismatch("the ensembles have different time grids".into()).to_string(),
        ));
    }
    let sizes = vec![a.n_paths(), b.n_paths()];
    let mut verdicts = Vec::new();
    for (k, &t) in a.grid.iter().enumerate() {
        for d in 0..a.demes {
            let ca = a.column(k, d);
            let cb = b.column(k, d);
            for test in tests {
                let name = |what: &str| format!("{what} t={t} deme={d}");
                let v = match test {
                    CompareTest::Mean => {
                        let (ma, sa) = mean_se(&ca);
                        let (mb, sb) = mean_se(&cb);
                        z_verdict(name("mean"), two_sample_z(ma, sa, mb, sb), sizes.clone())
                    }
                    CompareTest::Variance => {
                        let (va, sa) = variance_with_se(&ca);
                        let (vb, sb) = variance_with_se(&cb);
                        z_verdict(
                            name("variance"),
                            two_sample_z(va, sa, vb, sb),
                            sizes.clone(),
                        )
                    }
                    CompareTest::Ks => match ks_two_sample(&ca, &cb) {
                        Ok(v) => v.with_name(name("ks")),
                        Err(Error::Degenerate(_)) => {
                            // both constant: equal or not, no sampling error to weigh
                            let d = ks_statistic(&ca, &cb);
                            let p = if d == 0.0 {
                                1.0
                            } else {
                                ks_p_value(d, 0.5 * ca.len() as f64)
                            };
                            TestVerdict {
                                name: name("ks"),
                                statistic: d,
                                p_value: Some(p),
                                z_score: None,
                                threshold: KS_LEVEL,
                                pass: d == 0.0,
                                seed: 0,
                                sample_sizes: sizes.clone(),
                            }
                        }
                        Err(e) => {
                            return Err(CliError::Input(format!("{} at t={t}: {e}", name("ks"))))
                        }
                    },
                };
                verdicts.push(v);
            }
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    Ok(Comparison {
        total: verdicts.len(),
        passed,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use stochavg::limits::walker_limit_sample;

    #[test]
    fn ensemble_against_itself_passes() {
        let e = walker_limit_sample(1.0, 1.0, &[0.0, 0.5, 1.0], 200, 3).unwrap();
        let c = compare(
            &e,
            &e,
            &[CompareTest::Mean, CompareTest::Variance, CompareTest::Ks],
        )
        .unwrap();
        assert!(c.all_pass());
        assert_eq!(c.total, 9);
    }

    #[test]
    fn shifted_ensemble_fails() {
        let a = walker_limit_sample(0.0, 1.0, &[0.0, 1.0], 2000, 3).unwrap();
        let b = walker_limit_sample(1.0, 1.0, &[0.0, 1.0], 2000, 4).unwrap();
        let c = compare(&a, &b, &[CompareTest::Mean, CompareTest::Ks]).unwrap();
        assert_eq!(c.passed, 2);
        assert!(
            !c.verdicts
                .iter()
                .find(|v| v.name == "mean t=1 deme=0")
                .unwrap()
                .pass
        );
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = walker_limit_sample(0.0, 1.0, &[0.0, 1.0], 10, 3).unwrap();
        let b = walker_limit_sample(0.0, 1.0, &[0.0, 0.5], 10, 3).unwrap();
        assert!(matches!(
            compare(&a, &b, &[CompareTest::Mean]),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn parses_test_names() {
        assert_eq!("ks".parse::<CompareTest>().unwrap(), CompareTest::Ks);
        assert!("median".parse::<CompareTest>().is_err());
    }
}
