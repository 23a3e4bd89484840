//! Source term of the manufactured problem against hyperdual differentiation
//! of its exact field.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use advdiff_pinn::Problem;
use proptest::prelude::*;

/// `a + b·ε₁ + c·ε₂ + d·ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Debug, Clone, Copy)]
struct HyperDual {
    re: f64,
    e1: f64,
    e2: f64,
    e12: f64,
}

impl HyperDual {
    fn constant(re: f64) -> Self {
        Self {
            re,
            e1: 0.0,
            e2: 0.0,
            e12: 0.0,
        }
    }

    fn variable(re: f64, d1: f64, d2: f64) -> Self {
        Self {
            re,
            e1: d1,
            e2: d2,
            e12: 0.0,
        }
    }

    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        Self {
            re: s,
            e1: c * self.e1,
            e2: c * self.e2,
            e12: c * self.e12 - s * self.e1 * self.e2,
        }
    }

    fn scale(self, k: f64) -> Self {
        Self {
            re: k * self.re,
            e1: k * self.e1,
            e2: k * self.e2,
            e12: k * self.e12,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e12: self.e12 + o.e12,
        }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

fn exact(x: HyperDual, y: HyperDual, t: HyperDual) -> HyperDual {
    t * x.scale(PI).sin() * y.scale(PI).sin()
}

/// First derivative along `axis` and second derivative along it, seeded on
/// both infinitesimal parts.
fn derivs(x: f64, y: f64, t: f64, axis: usize) -> (f64, f64) {
    let seed = |a| if a == axis { 1.0 } else { 0.0 };
    let v = exact(
        HyperDual::variable(x, seed(0), seed(0)),
        HyperDual::variable(y, seed(1), seed(1)),
        HyperDual::variable(t, seed(2), seed(2)),
    );
    (v.e1, v.e12)
}

fn oracle_source(problem: &Problem, eps: f64, x: f64, y: f64, t: f64) -> f64 {
    let [bx, by] = problem.advection(x, y, t);
    let (ux, uxx) = derivs(x, y, t, 0);
    let (uy, uyy) = derivs(x, y, t, 1);
    let (ut, _) = derivs(x, y, t, 2);
    ut + bx * ux + by * uy - eps * (uxx + uyy)
}

#[test]
fn hyperdual_arithmetic_sanity() {
    let x = HyperDual::variable(0.3, 1.0, 1.0);
    let sq = x * x + HyperDual::constant(1.0);
    assert_eq!(sq.re, 0.3 * 0.3 + 1.0);
    assert_eq!(sq.e1, 0.6);
    assert_eq!(sq.e12, 2.0);
}

#[test]
fn m1_source_at_center() {
    let problem = Problem::manufactured("M1", 0.1, 1.0).unwrap();
    assert_eq!(problem.advection(0.5, 0.5, 1.0), [0.0, -2.0]);
    let expected = oracle_source(&problem, 0.1, 0.5, 0.5, 1.0);
    // Closed form at the center: ∂t u = 1 and −εΔu = 2επ².
    assert!((expected - (1.0 + 0.2 * PI * PI)).abs() < 1e-12);
    let got = problem.source(0.5, 0.5, 1.0);
    assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
}

#[test]
fn m1_data_vanish() {
    let problem = Problem::manufactured("M1", 0.1, 1.0).unwrap();
    let u = problem.exact().unwrap();
    assert_eq!(u(0.5, 0.5, 0.0).value, 0.0);
    for s in [0.0, 0.25, 0.7, 1.0] {
        assert_eq!(u(0.0, s, 0.6).value, 0.0);
        assert!(problem.dirichlet(1.0, s, 0.6).abs() < 1e-15);
        assert_eq!(problem.initial_condition(s, 0.4), 0.0);
    }
}

proptest! {
    #[test]
    fn m1_source_matches_oracle(
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        t in 0.0f64..1.0,
        eps in 0.01f64..1.0,
    ) {
        let problem = Problem::manufactured("M1", eps, 1.0).unwrap();
        let expected = oracle_source(&problem, eps, x, y, t);
        let got = problem.source(x, y, t);
        prop_assert!((got - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }
}
