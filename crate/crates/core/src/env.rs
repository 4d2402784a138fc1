//! Offspring laws, environment laws and their exact moment functionals.
//!
//! Offspring laws have finite support, environment laws are finite mixtures of
//! offspring laws. Every expectation below is therefore a finite sum, evaluated
//! with compensated summation.

use serde::{Deserialize, Serialize};

use crate::numeric::{self, CompensatedSum};
use crate::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;

/// Probability mass function on finitely many non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OffspringLawRepr", into = "OffspringLawRepr")]
pub struct OffspringLaw {
    probs: Vec<(u32, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffspringLawRepr {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl TryFrom<OffspringLawRepr> for OffspringLaw {
    type Error = Error;

    fn try_from(r: OffspringLawRepr) -> Result<Self> {
        if r.support.len() != r.probs.len() {
            return Err(Error::InvalidOffspringLaw(format!(
                "support has {} entries but probs has {}",
                r.support.len(),
                r.probs.len()
            )));
        }
        OffspringLaw::new(r.support.into_iter().zip(r.probs).collect())
    }
}

impl From<OffspringLaw> for OffspringLawRepr {
    fn from(l: OffspringLaw) -> Self {
        Self {
            support: l.probs.iter().map(|p| p.0).collect(),
            probs: l.probs.iter().map(|p| p.1).collect(),
        }
    }
}

impl OffspringLaw {
    /// Builds a law from `(k, p)` pairs. The pairs are sorted by `k`; duplicate
    /// support points, negative or non-finite probabilities and a total mass
    /// away from one are rejected.
    pub fn new(mut probs: Vec<(u32, f64)>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidOffspringLaw("empty support".into()));
        }
        probs.sort_by_key(|p| p.0);
        for w in probs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidOffspringLaw(format!(
                    "support point {} appears twice",
                    w[0].0
                )));
            }
        }
        for &(k, p) in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidOffspringLaw(format!(
                    "probability {p} at k = {k} is not in [0, 1]"
                )));
            }
        }
        let mass = numeric::sum(probs.iter().map(|p| p.1));
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidOffspringLaw(format!(
                "probabilities sum to {mass}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass at `k`.
    pub fn delta(k: u32) -> Self {
        Self {
            probs: vec![(k, 1.0)],
        }
    }

    pub fn probs(&self) -> &[(u32, f64)] {
        &self.probs
    }

    /// Probability of exactly `k` offspring.
    pub fn prob(&self, k: u32) -> f64 {
        self.probs
            .binary_search_by_key(&k, |p| p.0)
            .map(|i| self.probs[i].1)
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        offspring_mean(self)
    }

    pub fn variance(&self) -> f64 {
        offspring_variance(self)
    }
}

/// `m(z) = sum k z(k)`.
pub fn offspring_mean(law: &OffspringLaw) -> f64 {
    numeric::sum(law.probs.iter().map(|&(k, p)| k as f64 * p))
}

/// `v(z) = sum k^2 z(k) - m(z)^2`, clamped at zero.
pub fn offspring_variance(law: &OffspringLaw) -> f64 {
    let m = offspring_mean(law);
    let second = numeric::sum(law.probs.iter().map(|&(k, p)| (k as f64) * (k as f64) * p));
    (second - m * m).max(0.0)
}

/// Squared mean gap `(m(z) - 1)^2`, the transform whose occupation measure
/// carries the environmental variance in the limit.
pub fn g_n(law: &OffspringLaw) -> f64 {
    let d = offspring_mean(law) - 1.0;
    d * d
}

/// One branch of the two-point construction on `{0, 2}`.
///
/// `Plus` is the upper sign of the displayed pairing,
/// `z(0) = 1/2 - alpha/(2n) + sigma_e/2`, so that `m - 1 = alpha/n - sigma_e`;
/// `Minus` gives `m - 1 = alpha/n + sigma_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Offspring law of one branch of the two-point family.
pub fn two_point_law(alpha: f64, sigma_e: f64, n: u32, sign: Sign) -> Result<OffspringLaw> {
    if n == 0 {
        return Err(Error::InvalidEnvironment("scale n must be positive".into()));
    }
    if !(0.0..1.0).contains(&sigma_e) {
        return Err(Error::InvalidEnvironment(format!(
            "sigma_e = {sigma_e} must lie in [0, 1)"
        )));
    }
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let drift = alpha / (2.0 * n as f64);
    let z0 = 0.5 - drift + s * sigma_e / 2.0;
    let z2 = 0.5 + drift - s * sigma_e / 2.0;
    for (k, p) in [(0, z0), (2, z2)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidEnvironment(format!(
                "two-point family with alpha = {alpha}, sigma_e = {sigma_e}, n = {n} gives \
                 z({k}) = {p} outside [0, 1]; need n >= |alpha| / (1 - sigma_e)"
            )));
        }
    }
    OffspringLaw::new(vec![(0, z0), (2, z2)])
}

/// Law of the environment draw `Z_0^n`: a finite mixture of offspring laws,
/// together with the scale `n` and the clock divisor `beta` (the environment
/// is redrawn at total rate `n^2 / beta^2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentRepr", into = "EnvironmentRepr")]
pub struct EnvironmentLaw {
    atoms: Vec<(OffspringLaw, f64)>,
    n: u32,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr {
    weight: f64,
    support: Vec<u32>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentRepr {
    n: u32,
    #[serde(default = "default_beta")]
    beta: f64,
    atoms: Vec<AtomRepr>,
}

fn default_beta() -> f64 {
    1.0
}

impl TryFrom<EnvironmentRepr> for EnvironmentLaw {
    type Error = Error;

    fn try_from(r: EnvironmentRepr) -> Result<Self> {
        let atoms = r
            .atoms
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let law = OffspringLaw::try_from(OffspringLawRepr {
                    support: a.support,
                    probs: a.probs,
                })
                .map_err(|e| Error::InvalidEnvironment(format!("atom {i}: {e}")))?;
                Ok((law, a.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        EnvironmentLaw::with_beta(atoms, r.n, r.beta)
    }
}

impl From<EnvironmentLaw> for EnvironmentRepr {
    fn from(e: EnvironmentLaw) -> Self {
        Self {
            n: e.n,
            beta: e.beta,
            atoms: e
                .atoms
                .into_iter()
                .map(|(law, weight)| {
                    let r = OffspringLawRepr::from(law);
                    AtomRepr {
                        weight,
                        support: r.support,
                        probs: r.probs,
                    }
                })
                .collect(),
        }
    }
}

impl EnvironmentLaw {
    pub fn new(atoms: Vec<(OffspringLaw, f64)>, n: u32) -> Result<Self> {
        Self::with_beta(atoms, n, 1.0)
    }

    pub fn with_beta(atoms: Vec<(OffspringLaw, f64)>, n: u32, beta: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidEnvironment("no atoms".into()));
        }
        if n == 0 {
            return Err(Error::InvalidEnvironment("scale n must be positive".into()));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "beta = {beta} must be positive"
            )));
        }
        for (i, (_, w)) in atoms.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidEnvironment(format!(
                    "weight {w} of atom {i} is negative"
                )));
            }
        }
        let mass = numeric::sum(atoms.iter().map(|a| a.1));
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidEnvironment(format!(
                "atom weights sum to {mass}, not 1"
            )));
        }
        Ok(Self { atoms, n, beta })
    }

    /// Environment that always uses `law`.
    pub fn constant(law: OffspringLaw, n: u32) -> Self {
        Self {
            atoms: vec![(law, 1.0)],
            n,
            beta: 1.0,
        }
    }

    pub fn atoms(&self) -> &[(OffspringLaw, f64)] {
        &self.atoms
    }

    pub fn atom(&self, index: usize) -> &OffspringLaw {
        &self.atoms[index].0
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "beta = {beta} must be positive"
            )));
        }
        self.beta = beta;
        Ok(())
    }

    /// Total rate `n^2 / beta^2` of the environment clock.
    pub fn switch_rate(&self) -> f64 {
        let n = self.n as f64;
        n * n / (self.beta * self.beta)
    }

    /// Exact `E[phi(Z_0^n)]` over the mixture.
    pub fn expectation<F: Fn(&OffspringLaw) -> f64>(&self, phi: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for (law, w) in &self.atoms {
            if *w > 0.0 {
                acc.add(w * phi(law));
            }
        }
        acc.value()
    }
}

/// The two-atom environment of the two-point family; atoms are ordered
/// `[Sign::Plus, Sign::Minus]`, each with weight one half.
pub fn two_point_environment(alpha: f64, sigma_e: f64, n: u32) -> Result<EnvironmentLaw> {
    let plus = two_point_law(alpha, sigma_e, n, Sign::Plus)?;
    let minus = two_point_law(alpha, sigma_e, n, Sign::Minus)?;
    EnvironmentLaw::new(vec![(plus, 0.5), (minus, 0.5)], n)
}

/// Exact moment functionals of an environment law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `n * E[m(Z) - 1]`
    pub drift_n: f64,
    /// `Var(m(Z))`
    pub var_m: f64,
    /// `E[v(Z)]`
    pub mean_v: f64,
    /// `E[(m(Z) - 1)^p]`; for non-integer `p` the absolute value is used.
    pub pth_moment: f64,
    pub p: f64,
}

pub fn moment_report(env: &EnvironmentLaw, p: f64) -> MomentReport {
    let gap_mean = env.expectation(|z| offspring_mean(z) - 1.0);
    let mean_m = env.expectation(offspring_mean);
    let var_m = env
        .expectation(|z| {
            let d = offspring_mean(z) - mean_m;
            d * d
        })
        .max(0.0);
    let mean_v = env.expectation(offspring_variance);
    let integer_p = p.fract() == 0.0 && p.abs() < i32::MAX as f64;
    let pth_moment = env.expectation(|z| {
        let d = offspring_mean(z) - 1.0;
        if integer_p {
            d.powi(p as i32)
        } else {
            d.abs().powf(p)
        }
    });
    MomentReport {
        drift_n: env.n() as f64 * gap_mean,
        var_m,
        mean_v,
        pth_moment,
        p,
    }
}
