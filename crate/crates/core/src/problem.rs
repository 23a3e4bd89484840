//! Governing coefficients and data for
//! `∂t u − kx ∂xx u − ky ∂yy u + β·∇u = f` on (0,1)² × (0,T),
//! with homogeneous Dirichlet data and initial value `u₀`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Value of a function of (x, y) with the derivatives the shift needs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpatialJet {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
}

/// Value of a function of (x, y, t) with the derivatives appearing in the PDE.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpaceTimeJet {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
}

type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
type InitialFn = Arc<dyn Fn(f64, f64) -> SpatialJet + Send + Sync>;
type ExactFn = Arc<dyn Fn(f64, f64, f64) -> SpaceTimeJet + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    name: String,
    kx: f64,
    ky: f64,
    t_final: f64,
    advection: VectorFn,
    source: ScalarFn,
    dirichlet: ScalarFn,
    /// `None` means `u₀ ≡ 0`.
    initial: Option<InitialFn>,
    exact: Option<ExactFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("kx", &self.kx)
            .field("ky", &self.ky)
            .field("t_final", &self.t_final)
            .field("has_initial", &self.initial.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

/// Vertical advection of the inversion layer: still air below `y = 0.1`,
/// downward drift of 2 above it. Constant in time.
pub fn advection_y(y: f64, _t: f64) -> f64 {
    if y < 0.1 {
        0.0
    } else {
        -2.0
    }
}

/// Ground-level emission of a source sweeping left to right.
///
/// A Gaussian height profile in `y` is switched on by a cosine smoothstep
/// whose front moves with speed 10 and has width 0.8. Nothing is emitted
/// above `y = 0.2`.
pub fn snowmobile_source(x: f64, y: f64, t: f64) -> f64 {
    const H_MAX: f64 = 0.5;
    const VELOCITY: f64 = 10.0;
    const WAVE_WIDTH: f64 = 0.8;
    const Y_SPREAD: f64 = 0.4;
    if y > 0.2 {
        return 0.0;
    }
    let height = H_MAX * (-y * y / (2.0 * Y_SPREAD * Y_SPREAD)).exp();
    let alpha = ((VELOCITY * t - x) / WAVE_WIDTH).clamp(0.0, 1.0);
    height * 0.5 * (1.0 - (PI * alpha).cos())
}

/// `t·sin(πx)·sin(πy)` with its derivatives.
fn m1_exact(x: f64, y: f64, t: f64) -> SpaceTimeJet {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    SpaceTimeJet {
        value: t * sx * sy,
        dt: sx * sy,
        dx: t * PI * cx * sy,
        dy: t * PI * sx * cy,
        dxx: -t * PI * PI * sx * sy,
        dyy: -t * PI * PI * sx * sy,
    }
}

impl Problem {
    /// Zero data, zero advection; customize with the `with_*` builders.
    pub fn new(name: impl Into<String>, kx: f64, ky: f64, t_final: f64) -> Result<Self> {
        if !(kx > 0.0 && ky > 0.0) {
            return Err(Error::Config(format!(
                "diffusion coefficients must be positive, got kx={kx} ky={ky}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            name: name.into(),
            kx,
            ky,
            t_final,
            advection: Arc::new(|_, _, _| [0.0, 0.0]),
            source: Arc::new(|_, _, _| 0.0),
            dirichlet: Arc::new(|_, _, _| 0.0),
            initial: None,
            exact: None,
        })
    }

    pub fn with_advection(
        mut self,
        f: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.advection = Arc::new(f);
        self
    }

    pub fn with_source(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_initial(
        mut self,
        f: impl Fn(f64, f64) -> SpatialJet + Send + Sync + 'static,
    ) -> Self {
        self.initial = Some(Arc::new(f));
        self
    }

    pub fn with_exact(
        mut self,
        f: impl Fn(f64, f64, f64) -> SpaceTimeJet + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(f));
        self
    }

    /// The thermal-inversion case study: zero initial data, downward drift
    /// above the ground layer, moving ground-level source.
    pub fn snowmobile(diffusion: f64, t_final: f64) -> Result<Self> {
        Ok(Self::new("snowmobile", diffusion, diffusion, t_final)?
            .with_advection(|_, y, t| [0.0, advection_y(y, t)])
            .with_source(snowmobile_source))
    }

    /// Manufactured problem with a known exact field.
    ///
    /// `M1`: `u* = t·sin(πx)·sin(πy)` under the case-study advection, with the
    /// source chosen so that `u*` solves the equation exactly.
    pub fn manufactured(id: &str, diffusion: f64, t_final: f64) -> Result<Self> {
        match id {
            "M1" => {
                let (kx, ky) = (diffusion, diffusion);
                let base = Self::new("M1", kx, ky, t_final)?
                    .with_advection(|_, y, t| [0.0, advection_y(y, t)])
                    .with_exact(m1_exact);
                Ok(base.with_source(move |x, y, t| {
                    let u = m1_exact(x, y, t);
                    u.dt - kx * u.dxx - ky * u.dyy + advection_y(y, t) * u.dy
                }))
            }
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    /// Look up a built-in scenario by its config name.
    pub fn from_scenario(name: &str, diffusion: f64, t_final: f64) -> Result<Self> {
        match name {
            "snowmobile" => Self::snowmobile(diffusion, t_final),
            "M1" => Self::manufactured("M1", diffusion, t_final),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kx(&self) -> f64 {
        self.kx
    }

    pub fn ky(&self) -> f64 {
        self.ky
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn advection(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        (self.advection)(x, y, t)
    }

    pub fn source(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.source)(x, y, t)
    }

    pub fn dirichlet(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.dirichlet)(x, y, t)
    }

    pub fn has_initial_data(&self) -> bool {
        self.initial.is_some()
    }

    pub fn initial_jet(&self, x: f64, y: f64) -> SpatialJet {
        self.initial
            .as_ref()
            .map_or_else(SpatialJet::default, |f| f(x, y))
    }

    pub fn initial_condition(&self, x: f64, y: f64) -> f64 {
        self.initial_jet(x, y).value
    }

    pub fn exact(&self) -> Option<&(dyn Fn(f64, f64, f64) -> SpaceTimeJet + Send + Sync)> {
        self.exact.as_deref()
    }

    /// `(1 − t/T)·u₀(x, y)`.
    pub fn shift_value(&self, x: f64, y: f64, t: f64) -> f64 {
        (1.0 - t / self.t_final) * self.initial_condition(x, y)
    }

    /// Right-hand side seen by `w = u − u_shift`.
    ///
    /// Substituting `u = w + u_shift` moves the operator applied to the shift
    /// to the right: `F = f − (∂t s − kx ∂xx s − ky ∂yy s + β·∇s)`.
    pub fn effective_source(&self, x: f64, y: f64, t: f64) -> f64 {
        let f = self.source(x, y, t);
        if self.initial.is_none() {
            return f;
        }
        let u0 = self.initial_jet(x, y);
        let w = 1.0 - t / self.t_final;
        let [bx, by] = self.advection(x, y, t);
        let shift_op = -u0.value / self.t_final - w * (self.kx * u0.dxx + self.ky * u0.dyy)
            + w * (bx * u0.dx + by * u0.dy);
        f - shift_op
    }

    /// Pointwise PDE residual of an analytic field.
    pub fn pde_residual(&self, u: &SpaceTimeJet, x: f64, y: f64, t: f64) -> f64 {
        let [bx, by] = self.advection(x, y, t);
        u.dt - self.kx * u.dxx - self.ky * u.dyy + bx * u.dx + by * u.dy - self.source(x, y, t)
    }

    /// Largest |PDE residual| of the exact field over `samples` uniform interior
    /// points, or `None` when the problem has no exact field.
    pub fn self_test(&self, samples: usize, seed: u64) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x: f64 = rng.gen_range(0.0..1.0);
            let y: f64 = rng.gen_range(0.0..1.0);
            let t: f64 = rng.gen_range(0.0..self.t_final);
            worst = worst.max(self.pde_residual(&exact(x, y, t), x, y, t).abs());
        }
        Some(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine_initial(x: f64, y: f64) -> SpatialJet {
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        SpatialJet {
            value: sx * sy,
            dx: PI * cx * sy,
            dy: PI * sx * cy,
            dxx: -PI * PI * sx * sy,
            dyy: -PI * PI * sx * sy,
        }
    }

    #[test]
    fn advection_branches() {
        assert_eq!(advection_y(0.05, 0.3), 0.0);
        assert_eq!(advection_y(0.5, 0.3), -2.0);
        assert_eq!(advection_y(0.5, 0.9), -2.0);
        assert_eq!(advection_y(0.1, 0.0), -2.0);
    }

    #[test]
    fn source_examples() {
        assert_eq!(snowmobile_source(0.0, 0.3, 0.7), 0.0);
        assert!((snowmobile_source(0.0, 0.0, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(snowmobile_source(1.0, 0.0, 0.0), 0.0);
        // Halfway through the front the smoothstep is 1/2.
        let x = 0.6;
        let t = (x + 0.4) / 10.0;
        assert!((snowmobile_source(x, 0.0, t) - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn source_bounded_and_monotone_in_time(
            x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.0f64..1.0, dt in 0.0f64..0.5
        ) {
            let s = snowmobile_source(x, y, t);
            prop_assert!((0.0..=0.5).contains(&s));
            if y <= 0.2 {
                prop_assert!(snowmobile_source(x, y, t + dt) >= s);
            }
        }
    }

    #[test]
    fn case_study_initial_and_shift_vanish() {
        let p = Problem::snowmobile(0.1, 1.0).unwrap();
        assert_eq!(p.initial_condition(0.3, 0.7), 0.0);
        assert_eq!(p.shift_value(0.3, 0.7, 0.4), 0.0);
        assert_eq!(p.effective_source(0.3, 0.1, 0.4), p.source(0.3, 0.1, 0.4));
    }

    #[test]
    fn shift_endpoints() {
        let p = Problem::new("s", 0.1, 0.1, 2.0)
            .unwrap()
            .with_initial(sine_initial);
        let (x, y) = (0.3, 0.6);
        assert_eq!(p.shift_value(x, y, 0.0), p.initial_condition(x, y));
        assert_eq!(p.shift_value(x, y, 2.0), 0.0);
    }

    #[test]
    fn effective_source_at_final_time() {
        let t_final = 1.5;
        let p = Problem::new("s", 0.1, 0.2, t_final)
            .unwrap()
            .with_advection(|_, y, t| [0.3, advection_y(y, t)])
            .with_source(|x, y, t| x + y * t)
            .with_initial(sine_initial);
        let (x, y) = (0.3, 0.6);
        // At t = T only the time derivative −u₀/T of the shift survives.
        let expect = p.source(x, y, t_final) + sine_initial(x, y).value / t_final;
        assert!((p.effective_source(x, y, t_final) - expect).abs() < 1e-14);
    }

    #[test]
    fn effective_source_is_affine_in_initial_data() {
        let make = |scale: f64| {
            Problem::new("s", 0.1, 0.1, 1.0)
                .unwrap()
                .with_advection(|_, y, t| [0.5, advection_y(y, t)])
                .with_source(|x, _, t| x * t)
                .with_initial(move |x, y| {
                    let j = sine_initial(x, y);
                    SpatialJet {
                        value: scale * j.value,
                        dx: scale * j.dx,
                        dy: scale * j.dy,
                        dxx: scale * j.dxx,
                        dyy: scale * j.dyy,
                    }
                })
        };
        let (p0, p1, p2) = (make(0.0), make(1.0), make(2.0));
        for &(x, y, t) in &[(0.2, 0.3, 0.1), (0.7, 0.05, 0.9)] {
            let (a, b, c) = (
                p0.effective_source(x, y, t),
                p1.effective_source(x, y, t),
                p2.effective_source(x, y, t),
            );
            assert!((c - 2.0 * b + a).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_field_solves_shifted_equation() {
        // If u solves the original problem, u − u_shift must solve the one with
        // source F and zero initial data.
        let t_final = 1.0;
        let (k, b) = (0.1, 0.4);
        let exact = move |x: f64, y: f64, t: f64| {
            let s = sine_initial(x, y);
            let e = (-t).exp();
            SpaceTimeJet {
                value: e * s.value,
                dt: -e * s.value,
                dx: e * s.dx,
                dy: e * s.dy,
                dxx: e * s.dxx,
                dyy: e * s.dyy,
            }
        };
        let p = Problem::new("decay", k, k, t_final)
            .unwrap()
            .with_advection(move |_, _, _| [b, 0.0])
            .with_initial(sine_initial)
            .with_source(move |x, y, t| {
                let u = exact(x, y, t);
                u.dt - k * (u.dxx + u.dyy) + b * u.dx
            });
        for &(x, y, t) in &[(0.2, 0.7, 0.3), (0.5, 0.5, 0.9), (0.9, 0.1, 0.05)] {
            let u = exact(x, y, t);
            let s0 = sine_initial(x, y);
            let w = 1.0 - t / t_final;
            let wjet = SpaceTimeJet {
                value: u.value - w * s0.value,
                dt: u.dt + s0.value / t_final,
                dx: u.dx - w * s0.dx,
                dy: u.dy - w * s0.dy,
                dxx: u.dxx - w * s0.dxx,
                dyy: u.dyy - w * s0.dyy,
            };
            let lhs = wjet.dt - k * (wjet.dxx + wjet.dyy) + b * wjet.dx;
            assert!((lhs - p.effective_source(x, y, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn m1_exact_properties() {
        let p = Problem::manufactured("M1", 0.1, 1.0).unwrap();
        let exact = p.exact().unwrap();
        assert_eq!(exact(0.5, 0.5, 0.0).value, 0.0);
        assert_eq!(p.initial_condition(0.5, 0.5), 0.0);
        for &(y, t) in &[(0.3, 0.2), (0.9, 1.0)] {
            assert_eq!(exact(0.0, y, t).value, 0.0);
        }
        assert!(p.self_test(1000, 0).unwrap() < 1e-8);
    }

    #[test]
    fn unknown_scenarios_rejected() {
        assert!(matches!(
            Problem::manufactured("M2", 0.1, 1.0),
            Err(Error::UnknownScenario(_))
        ));
        assert!(Problem::from_scenario("bogus", 0.1, 1.0).is_err());
        assert!(Problem::new("bad", 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn snowmobile_has_no_exact_field() {
        let p = Problem::from_scenario("snowmobile", 0.1, 1.0).unwrap();
        assert!(p.self_test(10, 0).is_none());
        assert_eq!(p.advection(0.4, 0.5, 0.1), [0.0, -2.0]);
    }
}
