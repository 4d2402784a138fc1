//! Smooth test functions with exact first and second derivatives.
//!
//! Gradients and Hessians are returned in full deme coordinates; entries for
//! inactive demes are zero.

use std::fmt::Debug;
use std::sync::Arc;

use crate::{Error, Result};

/// A twice continuously differentiable function of finitely many deme
/// coordinates.
pub trait TestFunction: Send + Sync + Debug {
    /// Demes the function depends on.
    fn active(&self) -> &[usize];
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>>;
    /// Upper bound on `sup |f|` (infinite for unbounded functions).
    fn bound(&self) -> f64;
}

fn zeros(d: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; d]; d]
}

/// `coef * prod_i x_i^{k_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<(usize, u32)>,
}

impl Monomial {
    fn eval_skip(&self, x: &[f64], skip: &[usize]) -> f64 {
        if skip.iter().any(|s| !self.powers.iter().any(|p| p.0 == *s)) {
            return 0.0;
        }
        let mut v = self.coef;
        for &(i, k) in &self.powers {
            let drop = skip.iter().filter(|&&s| s == i).count() as u32;
            if drop > k {
                return 0.0;
            }
            // falling factorial from differentiating `drop` times
            for r in 0..drop {
                v *= (k - r) as f64;
            }
            v *= x[i].powi((k - drop) as i32);
        }
        v
    }

    fn degree(&self) -> u32 {
        self.powers.iter().map(|p| p.1).sum()
    }
}

/// Finite sum of monomials. Unbounded; meant for algebraic checks of the
/// operators rather than for Monte Carlo functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    terms: Vec<Monomial>,
    active: Vec<usize>,
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, Vec<(usize, u32)>)>) -> Self {
        let terms: Vec<Monomial> = terms
            .into_iter()
            .map(|(coef, mut powers)| {
                powers.sort_unstable();
                let mut merged: Vec<(usize, u32)> = Vec::new();
                for (i, k) in powers {
                    match merged.last_mut() {
                        Some(last) if last.0 == i => last.1 += k,
                        _ => merged.push((i, k)),
                    }
                }
                Monomial {
                    coef,
                    powers: merged,
                }
            })
            .collect();
        let mut active: Vec<usize> = terms
            .iter()
            .flat_map(|m| m.powers.iter().map(|p| p.0))
            .collect();
        active.sort_unstable();
        active.dedup();
        Self { terms, active }
    }

    /// `x_deme^k`.
    pub fn power(deme: usize, k: u32) -> Self {
        Self::new(vec![(1.0, vec![(deme, k)])])
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }
}

impl TestFunction for Polynomial {
    fn active(&self) -> &[usize] {
        &self.active
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval_skip(x, &[])).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for &i in &self.active {
            g[i] = self.terms.iter().map(|m| m.eval_skip(x, &[i])).sum();
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h = zeros(x.len());
        for &i in &self.active {
            for &j in &self.active {
                h[i][j] = self.terms.iter().map(|m| m.eval_skip(x, &[i, j])).sum();
            }
        }
        h
    }

    fn bound(&self) -> f64 {
        if self.terms.iter().all(|m| m.powers.is_empty()) {
            self.terms.iter().map(|m| m.coef.abs()).sum()
        } else {
            f64::INFINITY
        }
    }
}

/// Compactly supported bump `scale * exp(-1 / (1 - r^2))` with
/// `r = |x - center| / radius` over the active demes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    active: Vec<usize>,
    center: Vec<f64>,
    radius: f64,
    scale: f64,
}

impl Bump {
    pub fn new(active: Vec<usize>, center: Vec<f64>, radius: f64, scale: f64) -> Result<Self> {
        if active.is_empty() || active.len() != center.len() {
            return Err(Error::InvalidArgument(
                "bump needs one center coordinate per active deme".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bump radius {radius} must be positive"
            )));
        }
        Ok(Self {
            active,
            center,
            radius,
            scale,
        })
    }

    fn offsets(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let y: Vec<f64> = self
            .active
            .iter()
            .zip(&self.center)
            .map(|(&i, c)| (x[i] - c) / self.radius)
            .collect();
        let r2 = y.iter().map(|v| v * v).sum();
        (y, r2)
    }
}

impl TestFunction for Bump {
    fn active(&self) -> &[usize] {
        &self.active
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (_, r2) = self.offsets(x);
        if r2 >= 1.0 {
            0.0
        } else {
            self.scale * (-1.0 / (1.0 - r2)).exp()
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let (y, r2) = self.offsets(x);
        if r2 < 1.0 {
            let q = 1.0 - r2;
            let v = self.scale * (-1.0 / q).exp();
            for (a, &i) in self.active.iter().enumerate() {
                g[i] = -2.0 * v * y[a] / (q * q * self.radius);
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h = zeros(x.len());
        let (y, r2) = self.offsets(x);
        if r2 < 1.0 {
            let q = 1.0 - r2;
            let v = self.scale * (-1.0 / q).exp();
            let s = self.radius * self.radius;
            // d/dy_b of (-2 v y_a / q^2)
            let cross = 4.0 * v * (1.0 - 2.0 * q) / q.powi(4);
            for (a, &i) in self.active.iter().enumerate() {
                for (b, &j) in self.active.iter().enumerate() {
                    let diag = if a == b { -2.0 * v / (q * q) } else { 0.0 };
                    h[i][j] = (diag + cross * y[a] * y[b]) / s;
                }
            }
        }
        h
    }

    fn bound(&self) -> f64 {
        self.scale.abs() * (-1.0f64).exp()
    }
}

/// `p(x) * exp(-sum_{i active} x_i^2 / w^2)`; the active set is the union of
/// the polynomial's demes and `damped`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDamped {
    poly: Polynomial,
    damped: Vec<usize>,
    width: f64,
    active: Vec<usize>,
}

impl GaussianDamped {
    pub fn new(poly: Polynomial, damped: Vec<usize>, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "damping width {width} must be positive"
            )));
        }
        if !poly.active().iter().all(|i| damped.contains(i)) {
            return Err(Error::InvalidArgument(
                "every polynomial deme must be damped for the product to stay bounded".into(),
            ));
        }
        let mut active = damped.clone();
        active.sort_unstable();
        active.dedup();
        Ok(Self {
            poly,
            damped: active.clone(),
            width,
            active,
        })
    }

    /// `x_deme * exp(-x_deme^2)`.
    pub fn x_exp_neg_x2(deme: usize) -> Self {
        Self::new(Polynomial::power(deme, 1), vec![deme], 1.0).expect("valid parameters")
    }

    fn weight(&self, x: &[f64]) -> f64 {
        let s: f64 = self.damped.iter().map(|&i| x[i] * x[i]).sum();
        (-s / (self.width * self.width)).exp()
    }
}

impl TestFunction for GaussianDamped {
    fn active(&self) -> &[usize] {
        &self.active
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.poly.value(x) * self.weight(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let w = self.weight(x);
        let p = self.poly.value(x);
        let gp = self.poly.gradient(x);
        let c = -2.0 / (self.width * self.width);
        let mut g = vec![0.0; x.len()];
        for &i in &self.active {
            g[i] = w * (gp[i] + p * c * x[i]);
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let w = self.weight(x);
        let p = self.poly.value(x);
        let gp = self.poly.gradient(x);
        let hp = self.poly.hessian(x);
        let c = -2.0 / (self.width * self.width);
        let mut h = zeros(x.len());
        // w_i = w c x_i, w_ij = w (c^2 x_i x_j + c 1{i=j})
        for &i in &self.active {
            for &j in &self.active {
                let wij = c * c * x[i] * x[j] + if i == j { c } else { 0.0 };
                h[i][j] = w * (hp[i][j] + gp[i] * c * x[j] + gp[j] * c * x[i] + p * wij);
            }
        }
        h
    }

    fn bound(&self) -> f64 {
        let w2 = self.width * self.width;
        self.poly
            .terms()
            .iter()
            .map(|m| {
                let k = m.degree() as f64;
                // sup_r r^k exp(-r^2 / w^2)
                let s = if k == 0.0 {
                    1.0
                } else {
                    (k * w2 / 2.0).powf(k / 2.0) * (-k / 2.0).exp()
                };
                m.coef.abs() * s
            })
            .sum()
    }
}

/// Linear combination `sum_k c_k f_k`.
#[derive(Debug, Clone)]
pub struct Combination {
    parts: Vec<(f64, Arc<dyn TestFunction>)>,
    active: Vec<usize>,
}

impl Combination {
    pub fn new(parts: Vec<(f64, Arc<dyn TestFunction>)>) -> Self {
        let mut active: Vec<usize> = parts.iter().flat_map(|p| p.1.active().to_vec()).collect();
        active.sort_unstable();
        active.dedup();
        Self { parts, active }
    }
}

impl TestFunction for Combination {
    fn active(&self) -> &[usize] {
        &self.active
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|(c, f)| c * f.value(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for (c, f) in &self.parts {
            for (gi, v) in g.iter_mut().zip(f.gradient(x)) {
                *gi += c * v;
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h = zeros(x.len());
        for (c, f) in &self.parts {
            for (row, frow) in h.iter_mut().zip(f.hessian(x)) {
                for (v, fv) in row.iter_mut().zip(frow) {
                    *v += c * fv;
                }
            }
        }
        h
    }

    fn bound(&self) -> f64 {
        self.parts.iter().map(|(c, f)| c.abs() * f.bound()).sum()
    }
}
