//! Exact evaluation of the BRWRE and walker generators, the averaged
//! operators of the limit, and numerical checks of the averaging hypotheses.
//!
//! For the BRWRE with scale `n` the generator splits as
//! `L_n = L0 + n L1 + n^2 L2` with
//!
//! ```text
//! L0 f(x)    = n sum_{i,j} a(j,i) x_i (f(x - e_i/n + e_j/n) - f(x))
//! L1 f(x, z) = n sum_i sum_l x_i (f(x + (l-1)/n e_i) - f(x)) z(l)
//! L2 f(x, z) = E[f(x, Z)] - f(x, z)
//! ```
//!
//! The averaged limit operators are
//!
//! ```text
//! A1 f(x)    = sum_{i,j} a(i,j)(x_j - x_i) d_i f + alpha sum_i x_i d_i f + sigma_b^2/2 sum_i x_i d_ii f
//! A2 f(x, r) = r (sum_i x_i d_i f + sum_{i,j} x_i x_j d_ij f)
//! ```

mod functions;
mod report;

pub use functions::{Bump, Combination, GaussianDamped, Monomial, Polynomial, TestFunction};
pub use report::{
    averaging_condition_report, AveragingConfig, AveragingReport, QuantityEstimate, ReportRow,
};

use crate::env::{EnvironmentLaw, OffspringLaw};
use crate::lattice::MigrationKernel;
use crate::limits::SdeSpec;
use crate::numeric::CompensatedSum;
use crate::simulate::SpeedLaw;

/// `L0` applied to an arbitrary function of the state.
pub fn l0_of<G: Fn(&[f64]) -> f64>(kernel: &MigrationKernel, g: &G, x: &[f64], n: u32) -> f64 {
    let nf = n as f64;
    let d = kernel.demes();
    let base = g(x);
    let mut acc = CompensatedSum::new();
    let mut y = x.to_vec();
    for i in 0..d {
        if x[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            let rate = kernel.a(j, i);
            if j == i || rate == 0.0 {
                continue;
            }
            y[i] = x[i] - 1.0 / nf;
            y[j] = x[j] + 1.0 / nf;
            acc.add(nf * rate * x[i] * (g(&y) - base));
            y[i] = x[i];
            y[j] = x[j];
        }
    }
    acc.value()
}

/// `L1` with environment `z` applied to an arbitrary function of the state.
pub fn l1_of<G: Fn(&[f64]) -> f64>(g: &G, x: &[f64], z: &OffspringLaw, n: u32) -> f64 {
    let nf = n as f64;
    let base = g(x);
    let mut acc = CompensatedSum::new();
    let mut y = x.to_vec();
    for i in 0..x.len() {
        if x[i] == 0.0 {
            continue;
        }
        for &(l, p) in z.probs() {
            if l == 1 || p == 0.0 {
                continue;
            }
            y[i] = x[i] + (l as f64 - 1.0) / nf;
            acc.add(nf * x[i] * (g(&y) - base) * p);
        }
        y[i] = x[i];
    }
    acc.value()
}

/// Migration part of the BRWRE generator.
pub fn apply_l0(kernel: &MigrationKernel, f: &dyn TestFunction, x: &[f64], n: u32) -> f64 {
    l0_of(kernel, &|y: &[f64]| f.value(y), x, n)
}

/// Branching part of the BRWRE generator in environment `z`.
pub fn apply_l1(f: &dyn TestFunction, x: &[f64], z: &OffspringLaw, n: u32) -> f64 {
    l1_of(&|y: &[f64]| f.value(y), x, z, n)
}

/// Environment-refresh part: `E[f(x, Z)] - f(x, z)` with `Z` drawn from `env`.
pub fn apply_l2<F: Fn(&[f64], &OffspringLaw) -> f64>(
    f: &F,
    x: &[f64],
    z: &OffspringLaw,
    env: &EnvironmentLaw,
) -> f64 {
    let here = f(x, z);
    let mut acc = CompensatedSum::new();
    for (law, w) in env.atoms() {
        acc.add(w * (f(x, law) - here));
    }
    acc.value()
}

/// `L1 (L1 f)` with the same environment `z` in both applications.
pub fn iterated_l1(f: &dyn TestFunction, x: &[f64], z: &OffspringLaw, n: u32) -> f64 {
    let h = |y: &[f64]| apply_l1(f, y, z, n);
    l1_of(&h, x, z, n)
}

/// `L0 (L1 f)` with environment `z`.
pub fn l0_of_l1(
    kernel: &MigrationKernel,
    f: &dyn TestFunction,
    x: &[f64],
    z: &OffspringLaw,
    n: u32,
) -> f64 {
    let h = |y: &[f64]| apply_l1(f, y, z, n);
    l0_of(kernel, &h, x, n)
}

/// Environment average `E_pi[phi(Z)]` of a per-atom quantity.
pub fn env_average<P: Fn(&OffspringLaw) -> f64>(env: &EnvironmentLaw, phi: P) -> f64 {
    env.expectation(phi)
}

/// First averaged operator of the limit.
pub fn a1(f: &dyn TestFunction, x: &[f64], spec: &SdeSpec) -> f64 {
    let g = f.gradient(x);
    let h = f.hessian(x);
    let d = x.len();
    let mut acc = CompensatedSum::new();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                acc.add(spec.kernel.a(i, j) * (x[j] - x[i]) * g[i]);
            }
        }
        acc.add(spec.alpha * x[i] * g[i]);
        acc.add(0.5 * spec.sigma_b2 * x[i] * h[i][i]);
    }
    acc.value()
}

/// Second averaged operator of the limit, evaluated at level `r`.
pub fn a2(f: &dyn TestFunction, x: &[f64], r: f64) -> f64 {
    let g = f.gradient(x);
    let h = f.hessian(x);
    let mut acc = CompensatedSum::new();
    for i in 0..x.len() {
        acc.add(x[i] * g[i]);
        for j in 0..x.len() {
            acc.add(x[i] * x[j] * h[i][j]);
        }
    }
    r * acc.value()
}

/// Mixture `E_pi[Z]` as a single offspring law.
pub fn mean_law(env: &EnvironmentLaw) -> OffspringLaw {
    let mut probs: Vec<(u32, f64)> = Vec::new();
    for (law, w) in env.atoms() {
        for &(k, p) in law.probs() {
            match probs.iter_mut().find(|e| e.0 == k) {
                Some(e) => e.1 += w * p,
                None => probs.push((k, w * p)),
            }
        }
    }
    OffspringLaw::new(probs).expect("a mixture of offspring laws is an offspring law")
}

/// `|L2 h(x, z) - (E_pi[L1 f(x, .)] - L1 f(x, z))|` with `h = L1 f`.
///
/// The left side applies the refresh operator to `h` atom by atom; the right
/// side uses that `L1` is affine in `z`, so `E_pi[L1 f(x, .)]` is `L1 f`
/// evaluated at the mixture law.
pub fn poisson_identity_residual(
    f: &dyn TestFunction,
    x: &[f64],
    z: &OffspringLaw,
    env: &EnvironmentLaw,
    n: u32,
) -> f64 {
    let h = |y: &[f64], w: &OffspringLaw| apply_l1(f, y, w, n);
    let lhs = apply_l2(&h, x, z, env);
    let rhs = apply_l1(f, x, &mean_law(env), n) - apply_l1(f, x, z, n);
    (lhs - rhs).abs()
}

/// The BRWRE generator parts bound to a kernel and an environment law.
#[derive(Debug, Clone)]
pub struct GeneratorTriple<'a> {
    pub kernel: &'a MigrationKernel,
    pub env: &'a EnvironmentLaw,
}

impl<'a> GeneratorTriple<'a> {
    pub fn new(kernel: &'a MigrationKernel, env: &'a EnvironmentLaw) -> Self {
        Self { kernel, env }
    }

    pub fn n(&self) -> u32 {
        self.env.n()
    }

    pub fn l0(&self, f: &dyn TestFunction, x: &[f64]) -> f64 {
        apply_l0(self.kernel, f, x, self.n())
    }

    pub fn l1(&self, f: &dyn TestFunction, x: &[f64], z: &OffspringLaw) -> f64 {
        apply_l1(f, x, z, self.n())
    }

    /// `L2` of a function that depends on the state only; always zero.
    pub fn l2(&self, f: &dyn TestFunction, x: &[f64], z: &OffspringLaw) -> f64 {
        apply_l2(&|y: &[f64], _: &OffspringLaw| f.value(y), x, z, self.env)
    }

    /// Full generator `L0 + n L1 + n^2 L2` on a function of the state.
    pub fn full(&self, f: &dyn TestFunction, x: &[f64], z: &OffspringLaw) -> f64 {
        let n = self.n() as f64;
        self.l0(f, x) + n * self.l1(f, x, z) + n * n * self.l2(f, x, z)
    }
}

/// Walker generator parts `(z f_x(x, z), E_pi[f(x, .)] - f(x, z))` for a
/// function `f(x, z)` with `x` derivative `f_x`.
pub fn walker_generators<F, D>(f: F, f_x: D, x: f64, z: f64, pi_n: &SpeedLaw) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64,
    D: Fn(f64, f64) -> f64,
{
    let l1 = z * f_x(x, z);
    let here = f(x, z);
    let mut acc = CompensatedSum::new();
    for (v, w) in pi_n.values().iter().zip(pi_n.weights()) {
        acc.add(w * (f(x, *v) - here));
    }
    (l1, acc.value())
}

/// `L1 L1 f = z^2 f''` for the walker with a state-only `f`.
pub fn walker_iterated_l1(f: &dyn TestFunction, x: f64, z: f64) -> f64 {
    z * z * f.hessian(&[x])[0][0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{two_point_environment, two_point_law, Sign};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn x2() -> Polynomial {
        Polynomial::power(0, 2)
    }

    #[test]
    fn l0_examples() {
        let zero = MigrationKernel::complete(2, 0.0).unwrap();
        let f = Polynomial::new(vec![(1.0, vec![(0, 2), (1, 1)])]);
        assert_eq!(apply_l0(&zero, &f, &[1.0, 2.0], 10), 0.0);
        let k = MigrationKernel::complete(2, 1.0).unwrap();
        let total = Polynomial::new(vec![(3.0, vec![(0, 1)]), (3.0, vec![(1, 1)])]);
        assert!(apply_l0(&k, &total, &[0.7, 1.3], 10).abs() < 1e-12);
        let x1 = Polynomial::power(0, 1);
        let v = apply_l0(&k, &x1, &[0.7, 1.3], 10);
        assert!((v - (1.3 - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let f = Polynomial::power(0, 1);
        assert_eq!(apply_l1(&x2(), &[1.5], &OffspringLaw::delta(1), 10), 0.0);
        assert_eq!(
            apply_l1(
                &x2(),
                &[0.0],
                &two_point_law(0.4, 0.3, 10, Sign::Plus).unwrap(),
                10
            ),
            0.0
        );
        let z = two_point_law(0.4, 0.3, 10, Sign::Plus).unwrap();
        let v = apply_l1(&f, &[1.5], &z, 10);
        assert!((v - 1.5 * (z.mean() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn l2_examples() {
        let env = two_point_environment(0.0, 0.3, 10).unwrap();
        let indep = |x: &[f64], _: &OffspringLaw| x[0] * x[0];
        assert_eq!(apply_l2(&indep, &[2.0], env.atom(0), &env), 0.0);
        let upper = env
            .atoms()
            .iter()
            .map(|a| &a.0)
            .max_by(|a, b| a.mean().total_cmp(&b.mean()))
            .unwrap();
        let m = |_: &[f64], z: &OffspringLaw| z.mean();
        assert!((apply_l2(&m, &[1.0], upper, &env) + 0.3).abs() < 1e-12);
        let single = EnvironmentLaw::constant(OffspringLaw::delta(2), 10);
        assert_eq!(apply_l2(&m, &[1.0], &OffspringLaw::delta(0), &single), 2.0);
        assert_eq!(apply_l2(&m, &[1.0], single.atom(0), &single), 0.0);
    }

    #[test]
    fn a1_a2_examples() {
        let spec = SdeSpec::new(MigrationKernel::single(), 1.0, 2.0, 0.0).unwrap();
        assert!((a1(&x2(), &[1.0], &spec) - 4.0).abs() < 1e-15);
        assert_eq!(a1(&x2(), &[0.0], &spec), 0.0);
        assert_eq!(a2(&x2(), &[0.0], 0.5), 0.0);
        assert_eq!(a2(&x2(), &[3.0], 0.0), 0.0);
        assert!((a2(&x2(), &[3.0], 0.5) - 0.5 * (3.0 * 6.0 + 9.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn iterated_examples() {
        assert_eq!(iterated_l1(&x2(), &[1.0], &OffspringLaw::delta(1), 10), 0.0);
        let z = two_point_law(0.4, 0.3, 10, Sign::Minus).unwrap();
        assert_eq!(iterated_l1(&x2(), &[0.0], &z, 10), 0.0);
    }

    /// Closed form for `f = x^2`, single deme, with `e_k = E_z[(l-1)^k]`.
    #[test]
    fn iterated_matches_symbolic_expansion_for_square() {
        for n in [3u32, 5, 8, 25] {
            for sign in [Sign::Plus, Sign::Minus] {
                let z = two_point_law(0.4, 0.3, n, sign).unwrap();
                let nf = n as f64;
                let e1 = z.mean() - 1.0;
                let e2: f64 = z
                    .probs()
                    .iter()
                    .map(|&(l, p)| p * (l as f64 - 1.0).powi(2))
                    .sum();
                let x = 1.7;
                // h(y) = 2 e1 y^2 + e2 y / n, so L1 h = n x sum_l z(l) [h(x + s) - h(x)], s = (l-1)/n
                // = n x [2 e1 (2 x e1 / n + e2 / n^2) + e2 e1 / n^2]
                let want = x * (4.0 * x * e1 * e1 + 2.0 * e1 * e2 / nf + e1 * e2 / nf);
                let got = iterated_l1(&x2(), &[x], &z, n);
                assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn square_error_is_second_order() {
        // E_z[L1 L1 x^2] - A2(x^2, sigma_e^2) = (4 x^2 alpha^2 + 3 x alpha) / n^2
        let (alpha, sigma_e, x) = (0.4, 0.3, 1.3);
        for n in [25u32, 50, 100] {
            let env = two_point_environment(alpha, sigma_e, n).unwrap();
            let e = env_average(&env, |z| iterated_l1(&x2(), &[x], z, n));
            let diff = e - a2(&x2(), &[x], sigma_e * sigma_e);
            let nf = n as f64;
            let want = (4.0 * x * x * alpha * alpha + 3.0 * x * alpha) / (nf * nf);
            assert!((diff - want).abs() < 1e-12, "n={n}: {diff} vs {want}");
        }
    }

    #[test]
    fn poisson_identity_examples() {
        let env = two_point_environment(0.4, 0.3, 5).unwrap();
        for z in [env.atom(0), env.atom(1)] {
            assert!(poisson_identity_residual(&x2(), &[2.0], z, &env, 5) <= 1e-12);
        }
        let single =
            EnvironmentLaw::constant(OffspringLaw::new(vec![(0, 0.3), (2, 0.7)]).unwrap(), 5);
        assert_eq!(
            poisson_identity_residual(&x2(), &[2.0], single.atom(0), &single, 5),
            0.0
        );
    }

    #[test]
    fn walker_examples() {
        let pi = SpeedLaw::two_point(0.0, 1.0).unwrap();
        let f = |x: f64, _: f64| x;
        let fx = |_: f64, _: f64| 1.0;
        assert_eq!(walker_generators(f, fx, 0.3, 0.0, &pi).0, 0.0);
        assert_eq!(walker_generators(f, fx, 0.3, 2.0, &pi), (2.0, 0.0));
        let g = |x: f64, z: f64| x * z;
        let gx = |_: f64, z: f64| z;
        assert!((walker_generators(g, gx, 2.0, 1.0, &pi).1 - (0.0 - 2.0)).abs() < 1e-15);
        assert_eq!(walker_iterated_l1(&x2(), 0.7, 3.0), 18.0);
    }

    #[test]
    fn triple_l2_annihilates_state_functions() {
        let k = MigrationKernel::complete(2, 1.0).unwrap();
        let env = two_point_environment(0.4, 0.3, 10).unwrap();
        let t = GeneratorTriple::new(&k, &env);
        let f = Polynomial::new(vec![(1.0, vec![(0, 2), (1, 1)])]);
        assert_eq!(t.l2(&f, &[0.3, 0.8], env.atom(1)), 0.0);
        let full = t.full(&f, &[0.3, 0.8], env.atom(1));
        let parts = t.l0(&f, &[0.3, 0.8]) + 10.0 * t.l1(&f, &[0.3, 0.8], env.atom(1));
        assert_eq!(full, parts);
    }

    fn arb_function() -> impl Strategy<Value = Arc<dyn TestFunction>> {
        prop_oneof![
            (-2.0..2.0f64, 0u32..4, 0u32..3).prop_map(|(c, k0, k1)| {
                Arc::new(Polynomial::new(vec![
                    (c, vec![(0, k0), (1, k1)]),
                    (1.0, vec![(1, 1)]),
                ])) as Arc<dyn TestFunction>
            }),
            (0.0..2.0f64, 0.0..2.0f64, 0.5..3.0f64).prop_map(|(a, b, r)| {
                Arc::new(Bump::new(vec![0, 1], vec![a, b], r, 1.0).unwrap())
                    as Arc<dyn TestFunction>
            }),
            (0.5..2.0f64).prop_map(|w| {
                Arc::new(
                    GaussianDamped::new(
                        Polynomial::new(vec![(1.0, vec![(0, 1), (1, 1)])]),
                        vec![0, 1],
                        w,
                    )
                    .unwrap(),
                ) as Arc<dyn TestFunction>
            }),
        ]
    }

    fn arb_env() -> impl Strategy<Value = EnvironmentLaw> {
        (
            1u32..40,
            proptest::collection::vec(
                (0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64, 0.1..1.0f64),
                1..4,
            ),
        )
            .prop_map(|(n, atoms)| {
                let total: f64 = atoms.iter().map(|a| a.3).sum();
                let atoms = atoms
                    .into_iter()
                    .map(|(p0, p1, p3, w)| {
                        let s = p0 + p1 + p3;
                        (
                            OffspringLaw::new(vec![(0, p0 / s), (1, p1 / s), (3, p3 / s)]).unwrap(),
                            w / total,
                        )
                    })
                    .collect();
                EnvironmentLaw::new(atoms, n).unwrap()
            })
    }

    proptest! {
        #[test]
        fn operators_are_linear(f in arb_function(), g in arb_function(), c in -3.0..3.0f64,
                                x0 in 0u32..40, x1 in 0u32..40, env in arb_env()) {
            let n = env.n();
            let x = [x0 as f64 / n as f64, x1 as f64 / n as f64];
            let k = MigrationKernel::complete(2, 0.7).unwrap();
            let sum = Combination::new(vec![(1.0, f.clone()), (c, g.clone())]);
            let z = env.atom(0);
            let spec = SdeSpec::new(k.clone(), 0.3, 0.8, 0.1).unwrap();
            let checks: [(f64, f64, f64); 5] = [
                (apply_l0(&k, &sum, &x, n), apply_l0(&k, f.as_ref(), &x, n), apply_l0(&k, g.as_ref(), &x, n)),
                (apply_l1(&sum, &x, z, n), apply_l1(f.as_ref(), &x, z, n), apply_l1(g.as_ref(), &x, z, n)),
                (iterated_l1(&sum, &x, z, n), iterated_l1(f.as_ref(), &x, z, n), iterated_l1(g.as_ref(), &x, z, n)),
                (a1(&sum, &x, &spec), a1(f.as_ref(), &x, &spec), a1(g.as_ref(), &x, &spec)),
                (a2(&sum, &x, 0.4), a2(f.as_ref(), &x, 0.4), a2(g.as_ref(), &x, 0.4)),
            ];
            for (whole, pf, pg) in checks {
                let scale = 1.0 + pf.abs() + (c * pg).abs();
                prop_assert!((whole - (pf + c * pg)).abs() <= 1e-10 * scale, "{} vs {}", whole, pf + c * pg);
            }
        }

        #[test]
        fn poisson_identity_holds(f in arb_function(), env in arb_env(), x0 in 0u32..60, x1 in 0u32..60, k in 0usize..3) {
            let n = env.n();
            let x = [x0 as f64 / n as f64, x1 as f64 / n as f64];
            let z = env.atom(k.min(env.atoms().len() - 1)).clone();
            // roundoff grows with the size of the L1 terms being cancelled
            let scale = 1.0 + apply_l1(f.as_ref(), &x, &mean_law(&env), n).abs() + apply_l1(f.as_ref(), &x, &z, n).abs();
            prop_assert!(poisson_identity_residual(f.as_ref(), &x, &z, &env, n) <= 1e-12 * scale);
        }

        #[test]
        fn l2_kills_z_constant_functions(env in arb_env(), x0 in 0.0..5.0f64) {
            let g = |x: &[f64], _: &OffspringLaw| x[0].sin();
            prop_assert_eq!(apply_l2(&g, &[x0], env.atom(0), &env), 0.0);
        }
    }
}
