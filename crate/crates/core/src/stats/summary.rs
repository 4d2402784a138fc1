//! Per-time, per-deme moment summaries of an ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{covariance_with_se, mean_var};
use crate::path::Ensemble;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub time: f64,
    pub deme: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub standard_error: f64,
    pub n_paths: usize,
}

/// Cross-deme covariance estimates at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub time: f64,
    pub covariance: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
}

impl CovarianceMatrix {
    /// `cov(i, j) / se(i, j)`.
    pub fn z_score(&self, i: usize, j: usize) -> f64 {
        self.covariance[i][j] / self.standard_error[i][j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub cells: Vec<SummaryCell>,
    pub covariances: Vec<CovarianceMatrix>,
}

impl EnsembleSummary {
    pub fn cell(&self, time: f64, deme: usize) -> Option<&SummaryCell> {
        self.cells
            .iter()
            .find(|c| c.deme == deme && (c.time - time).abs() <= 1e-12 * (1.0 + time.abs()))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Moment summary at the requested grid times.
pub fn ensemble_summary(ensemble: &Ensemble, times: &[f64]) -> Result<EnsembleSummary> {
    let idx = times
        .iter()
        .map(|&t| {
            ensemble
                .grid_index(t)
                .ok_or_else(|| Error::GridMismatch(format!("time {t} is not on the ensemble grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = ensemble.n_paths();
    let d = ensemble.demes;
    let per_time: Vec<(Vec<SummaryCell>, CovarianceMatrix)> = idx
        .par_iter()
        .map(|&k| {
            let cols: Vec<Vec<f64>> = (0..d).map(|i| ensemble.column(k, i)).collect();
            let cells = cols
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let (mean, var) = mean_var(c);
                    SummaryCell {
                        time: ensemble.grid[k],
                        deme: i,
                        mean,
                        variance: var.max(0.0),
                        standard_error: (var.max(0.0) / m.max(1) as f64).sqrt(),
                        n_paths: m,
                    }
                })
                .collect();
            let mut cov = vec![vec![0.0; d]; d];
            let mut se = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in i..d {
                    let (c, s) = covariance_with_se(&cols[i], &cols[j]);
                    cov[i][j] = c;
                    cov[j][i] = c;
                    se[i][j] = s;
                    se[j][i] = s;
                }
            }
            (
                cells,
                CovarianceMatrix {
                    time: ensemble.grid[k],
                    covariance: cov,
                    standard_error: se,
                },
            )
        })
        .collect();
    let mut cells = Vec::new();
    let mut covariances = Vec::new();
    for (c, v) in per_time {
        cells.extend(c);
        covariances.push(v);
    }
    Ok(EnsembleSummary { cells, covariances })
}
