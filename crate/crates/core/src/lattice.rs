//! Finite deme sets, migration kernels and the weighted `l_gamma` norm.
//!
//! The deme set is finite. Rates are stored densely with
//! `a(j, i)` the rate at which one individual in deme `i` jumps to deme `j`.

use serde::{Deserialize, Serialize};

use crate::numeric;
use crate::{Error, Result};

/// Absolute tolerance of the balance condition.
pub const BALANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct MigrationKernel {
    demes: usize,
    /// Row-major, `rates[j * demes + i] = a(j, i)`.
    rates: Vec<f64>,
    gamma: Vec<f64>,
    mu: f64,
    c: f64,
}

/// Dense text form: `rates[j][i] = a(j, i)` and one weight per deme.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRepr {
    pub rates: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl TryFrom<KernelRepr> for MigrationKernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        validate_kernel(&r.rates, &r.gamma)
    }
}

impl From<MigrationKernel> for KernelRepr {
    fn from(k: MigrationKernel) -> Self {
        Self {
            rates: k.matrix(),
            gamma: k.gamma,
        }
    }
}

/// Checks a rate matrix and weights and computes `mu` and the minimal `c`.
///
/// `rates` may be empty when `gamma` has a single entry (one deme, no
/// migration).
pub fn validate_kernel(rates: &[Vec<f64>], gamma: &[f64]) -> Result<MigrationKernel> {
    let demes = gamma.len();
    if demes == 0 {
        return Err(Error::InvalidRates("kernel needs at least one deme".into()));
    }
    for (i, &g) in gamma.iter().enumerate() {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::NonpositiveWeight { deme: i, value: g });
        }
    }
    let mut flat = vec![0.0; demes * demes];
    if !(rates.is_empty() && demes == 1) {
        if rates.len() != demes {
            return Err(Error::InvalidRates(format!(
                "rate matrix has {} rows but there are {demes} weights",
                rates.len()
            )));
        }
        for (j, row) in rates.iter().enumerate() {
            if row.len() != demes {
                return Err(Error::InvalidRates(format!(
                    "row {j} has {} entries, expected {demes}",
                    row.len()
                )));
            }
            for (i, &a) in row.iter().enumerate() {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::InvalidRates(format!(
                        "a({j},{i}) = {a} is not a non-negative rate"
                    )));
                }
                if i == j && a != 0.0 {
                    return Err(Error::InvalidRates(format!(
                        "diagonal entry a({j},{j}) = {a} must be zero"
                    )));
                }
                flat[j * demes + i] = a;
            }
        }
    }
    let row_sum = |j: usize| numeric::sum((0..demes).map(|i| flat[j * demes + i]));
    let col_sum = |j: usize| numeric::sum((0..demes).map(|i| flat[i * demes + j]));
    let mu = row_sum(0);
    for j in 0..demes {
        let (r, c) = (row_sum(j), col_sum(j));
        if (r - mu).abs() > BALANCE_TOL || (c - mu).abs() > BALANCE_TOL {
            return Err(Error::UnbalancedKernel {
                deme: j,
                row_sum: r,
                col_sum: c,
                mu,
                tol: BALANCE_TOL,
            });
        }
    }
    let c = (0..demes)
        .map(|j| numeric::sum((0..demes).map(|i| gamma[i] * flat[i * demes + j])) / gamma[j])
        .fold(0.0, f64::max);
    Ok(MigrationKernel {
        demes,
        rates: flat,
        gamma: gamma.to_vec(),
        mu,
        c,
    })
}

impl MigrationKernel {
    /// One deme, no migration.
    pub fn single() -> Self {
        validate_kernel(&[], &[1.0]).expect("single deme kernel is valid")
    }

    /// Nearest-neighbour cycle on `k` demes with `rate` in each direction and
    /// unit weights. For `k = 2` both directions point at the same neighbour,
    /// so the rates add up to `2 * rate`.
    pub fn cycle(k: usize, rate: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidRates("cycle needs at least one deme".into()));
        }
        let mut m = vec![vec![0.0; k]; k];
        if k > 1 {
            for i in 0..k {
                m[(i + 1) % k][i] += rate;
                m[(i + k - 1) % k][i] += rate;
            }
        }
        validate_kernel(&m, &vec![1.0; k])
    }

    /// Complete graph on `k` demes, every off-diagonal rate equal to `rate`.
    pub fn complete(k: usize, rate: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidRates(
                "complete graph needs at least one deme".into(),
            ));
        }
        let m: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..k).map(|i| if i == j { 0.0 } else { rate }).collect())
            .collect();
        validate_kernel(&m, &vec![1.0; k])
    }

    /// Same rates, new weights.
    pub fn with_gamma(&self, gamma: &[f64]) -> Result<Self> {
        validate_kernel(&self.matrix(), gamma)
    }

    pub fn demes(&self) -> usize {
        self.demes
    }

    /// Rate of a jump from deme `from` to deme `to`, i.e. `a(to, from)`.
    #[inline]
    pub fn a(&self, to: usize, from: usize) -> f64 {
        self.rates[to * self.demes + from]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Common row and column sum.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Smallest `c` with `sum_i gamma_i a(i, j) <= c gamma_j` for every `j`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Dense copy, `m[j][i] = a(j, i)`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.demes)
            .map(|j| (0..self.demes).map(|i| self.a(j, i)).collect())
            .collect()
    }
}

/// `sum_i gamma_i |x_i|`.
pub fn ell_gamma_norm(x: &[f64], kernel: &MigrationKernel) -> f64 {
    assert_eq!(
        x.len(),
        kernel.demes(),
        "state and kernel disagree on the deme count"
    );
    numeric::sum(x.iter().zip(kernel.gamma()).map(|(v, g)| g * v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_deme() {
        let k = validate_kernel(&[], &[1.0]).unwrap();
        assert_eq!((k.mu(), k.c()), (0.0, 0.0));
        assert_eq!(MigrationKernel::single(), k);
    }

    #[test]
    fn symmetric_three_cycle() {
        let k = MigrationKernel::cycle(3, 1.0).unwrap();
        assert_eq!(k.mu(), 2.0);
        assert_eq!(k.c(), 2.0);
        assert_eq!(k.a(1, 0), 1.0);
        assert_eq!(k.a(2, 0), 1.0);
    }

    #[test]
    fn unbalanced_two_deme_rejected() {
        // a(1,2) = 2, a(2,1) = 1 in one-based labels
        let m = vec![vec![0.0, 2.0], vec![1.0, 0.0]];
        let err = validate_kernel(&m, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::UnbalancedKernel { .. }), "{err}");
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let err = validate_kernel(&[], &[0.0]).unwrap_err();
        assert_eq!(
            err,
            Error::NonpositiveWeight {
                deme: 0,
                value: 0.0
            }
        );
    }

    #[test]
    fn malformed_matrices_rejected() {
        assert!(validate_kernel(&[vec![0.0, 1.0]], &[1.0, 1.0]).is_err());
        assert!(validate_kernel(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).is_err());
        assert!(validate_kernel(&[vec![0.0, -1.0], vec![-1.0, 0.0]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn complete_graph() {
        let k = MigrationKernel::complete(4, 0.5).unwrap();
        assert!((k.mu() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        let k3 = MigrationKernel::cycle(3, 1.0).unwrap();
        assert_eq!(ell_gamma_norm(&[0.0; 3], &k3), 0.0);
        assert_eq!(ell_gamma_norm(&[1.0, -2.0, 3.0], &k3), 6.0);
        let kw = k3.with_gamma(&[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(ell_gamma_norm(&[4.0, 4.0, 4.0], &kw), 4.0);
    }

    #[test]
    fn c_is_weighted_column_maximum() {
        let k = MigrationKernel::cycle(3, 1.0)
            .unwrap()
            .with_gamma(&[1.0, 2.0, 4.0])
            .unwrap();
        // column j: sum_i gamma_i a(i, j) / gamma_j
        let expected = [(2.0 + 4.0) / 1.0, (1.0 + 4.0) / 2.0, (1.0 + 2.0) / 4.0];
        assert_eq!(k.c(), expected.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn serde_round_trip() {
        let k = MigrationKernel::cycle(4, 0.7).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<MigrationKernel>(&s).unwrap(), k);
    }

    /// Random balanced kernel: a non-negative combination of permutation
    /// matrices without fixed points is doubly balanced.
    fn arb_kernel() -> impl Strategy<Value = MigrationKernel> {
        (2usize..6)
            .prop_flat_map(|k| {
                (
                    Just(k),
                    prop::collection::vec((1usize..k, 0.0f64..3.0), 1..4),
                    prop::collection::vec(0.1f64..5.0, k),
                )
            })
            .prop_map(|(k, shifts, gamma)| {
                let mut m = vec![vec![0.0; k]; k];
                for (s, w) in shifts {
                    for i in 0..k {
                        m[(i + s) % k][i] += w;
                    }
                }
                validate_kernel(&m, &gamma).unwrap()
            })
    }

    proptest! {
        #[test]
        fn norm_is_a_norm(
            x in prop::collection::vec(-10.0f64..10.0, 4),
            y in prop::collection::vec(-10.0f64..10.0, 4),
            s in -5.0f64..5.0,
            gamma in prop::collection::vec(0.1f64..3.0, 4),
        ) {
            let k = MigrationKernel::complete(4, 1.0).unwrap().with_gamma(&gamma).unwrap();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let sx: Vec<f64> = x.iter().map(|a| s * a).collect();
            prop_assert!(ell_gamma_norm(&xy, &k) <= ell_gamma_norm(&x, &k) + ell_gamma_norm(&y, &k) + 1e-12);
            prop_assert!((ell_gamma_norm(&sx, &k) - s.abs() * ell_gamma_norm(&x, &k)).abs() < 1e-9);
        }

        #[test]
        fn c_is_minimal(k in arb_kernel()) {
            let d = k.demes();
            let lhs = |j: usize| (0..d).map(|i| k.gamma()[i] * k.a(i, j)).sum::<f64>();
            for j in 0..d {
                prop_assert!(lhs(j) <= k.c() * k.gamma()[j] + 1e-9);
            }
            if k.c() > 0.0 {
                let smaller = k.c() * (1.0 - 1e-6);
                prop_assert!((0..d).any(|j| lhs(j) > smaller * k.gamma()[j]));
            }
        }

        #[test]
        fn operator_bound(k in arb_kernel(), x in prop::collection::vec(0.0f64..10.0, 6)) {
            let d = k.demes();
            let x = &x[..d];
            let lhs: f64 = (0..d)
                .map(|j| k.gamma()[j] * (0..d).map(|i| k.a(j, i) * x[i]).sum::<f64>())
                .sum();
            let rhs: f64 = k.c() * (0..d).map(|j| k.gamma()[j] * x[j]).sum::<f64>();
            // sum_j gamma_j sum_i a(j,i) x_i = sum_i x_i sum_j gamma_j a(j,i) <= c sum_i gamma_i x_i
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs));
        }
    }
}
