use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::loss::residual::{classify, PointClass};
use crate::net::{JetCotangents, Jets, Mlp, ParamGrads};
use crate::problem::Problem;

/// Where the strong-form loss places its collocation points.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    /// The lattice itself, split by [`PointClass`].
    Lattice,
    /// Fixed uniform draws over the interior, the four spatial faces and the
    /// initial plane.
    Uniform {
        interior: usize,
        boundary: usize,
        initial: usize,
        seed: u64,
    },
}

/// Frozen collocation sets and coefficients for the strong-form loss.
#[derive(Debug, Clone)]
pub struct PinnSystem {
    kx: f64,
    ky: f64,
    interior: Vec<[f64; 3]>,
    beta: Vec<[f64; 2]>,
    source: Vec<f64>,
    boundary: Vec<[f64; 3]>,
    boundary_target: Vec<f64>,
    initial: Vec<[f64; 3]>,
    initial_target: Vec<f64>,
}

/// One evaluation of the strong-form loss with the per-point cotangents
/// needed for the parameter gradient.
#[derive(Debug, Clone)]
pub struct PinnEval {
    pub loss: f64,
    pub interior_mse: f64,
    pub boundary_mse: f64,
    pub initial_mse: f64,
    pub interior_cot: JetCotangents,
    pub boundary_cot: Vec<f64>,
    pub initial_cot: Vec<f64>,
}

impl PinnSystem {
    pub fn new(problem: &Problem, grid: &Grid, sampler: &Sampler) -> Result<Self> {
        let (interior, boundary, initial) = match sampler {
            Sampler::Lattice => lattice_sets(grid),
            Sampler::Uniform {
                interior,
                boundary,
                initial,
                seed,
            } => uniform_sets(grid.t_final(), *interior, *boundary, *initial, *seed),
        };
        Self::from_points(problem, interior, boundary, initial)
    }

    pub fn from_points(
        problem: &Problem,
        interior: Vec<[f64; 3]>,
        boundary: Vec<[f64; 3]>,
        initial: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::EmptyPointSet("interior"));
        }
        if boundary.is_empty() {
            return Err(Error::EmptyPointSet("boundary"));
        }
        if initial.is_empty() {
            return Err(Error::EmptyPointSet("initial"));
        }
        let beta = interior
            .iter()
            .map(|&[x, y, t]| problem.advection(x, y, t))
            .collect();
        let source = interior
            .iter()
            .map(|&[x, y, t]| problem.source(x, y, t))
            .collect();
        let boundary_target = boundary
            .iter()
            .map(|&[x, y, t]| problem.dirichlet(x, y, t))
            .collect();
        let initial_target = initial
            .iter()
            .map(|&[x, y, _]| problem.initial_condition(x, y))
            .collect();
        Ok(Self {
            kx: problem.kx(),
            ky: problem.ky(),
            interior,
            beta,
            source,
            boundary,
            boundary_target,
            initial,
            initial_target,
        })
    }

    pub fn interior_points(&self) -> &[[f64; 3]] {
        &self.interior
    }

    pub fn boundary_points(&self) -> &[[f64; 3]] {
        &self.boundary
    }

    pub fn initial_points(&self) -> &[[f64; 3]] {
        &self.initial
    }

    /// Loss from precomputed interior jets and boundary/initial values.
    pub fn loss_from_parts(
        &self,
        interior: &Jets,
        boundary: &[f64],
        initial: &[f64],
    ) -> Result<PinnEval> {
        if interior.value.len() != self.interior.len()
            || boundary.len() != self.boundary.len()
            || initial.len() != self.initial.len()
        {
            return Err(Error::ShapeMismatch(
                "network values do not match the collocation sets".into(),
            ));
        }
        let n_int = self.interior.len() as f64;
        let mut interior_cot = JetCotangents::zeros(self.interior.len());
        let mut interior_mse = 0.0;
        for p in 0..self.interior.len() {
            let [bx, by] = self.beta[p];
            let res = interior.dt[p] + bx * interior.dx[p] + by * interior.dy[p]
                - self.kx * interior.dxx[p]
                - self.ky * interior.dyy[p]
                - self.source[p];
            interior_mse += res * res;
            let c = 2.0 * res / n_int;
            interior_cot.dt[p] = c;
            interior_cot.dx[p] = c * bx;
            interior_cot.dy[p] = c * by;
            interior_cot.dxx[p] = -c * self.kx;
            interior_cot.dyy[p] = -c * self.ky;
        }
        interior_mse /= n_int;
        let (boundary_mse, boundary_cot) = mismatch(boundary, &self.boundary_target);
        let (initial_mse, initial_cot) = mismatch(initial, &self.initial_target);
        Ok(PinnEval {
            loss: interior_mse + boundary_mse + initial_mse,
            interior_mse,
            boundary_mse,
            initial_mse,
            interior_cot,
            boundary_cot,
            initial_cot,
        })
    }

    pub fn loss(&self, mlp: &Mlp) -> Result<PinnEval> {
        let jets = mlp.forward_jets(&self.interior);
        let boundary = mlp.forward(&self.boundary);
        let initial = mlp.forward(&self.initial);
        self.loss_from_parts(&jets, &boundary, &initial)
    }

    pub fn loss_and_grad(&self, mlp: &Mlp) -> Result<(PinnEval, ParamGrads)> {
        let jet_tape = mlp.trace_jets(&self.interior);
        let b_tape = mlp.trace(&self.boundary);
        let i_tape = mlp.trace(&self.initial);
        let eval = self.loss_from_parts(&jet_tape.jets(), &b_tape.output(), &i_tape.output())?;
        let mut grads = mlp.backward_jets(&jet_tape, &eval.interior_cot)?;
        grads.add_assign(&mlp.backward_tape(&b_tape, &eval.boundary_cot));
        grads.add_assign(&mlp.backward_tape(&i_tape, &eval.initial_cot));
        Ok((eval, grads))
    }
}

fn mismatch(values: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = values.len() as f64;
    let mut mse = 0.0;
    let cot = values
        .iter()
        .zip(target)
        .map(|(u, g)| {
            let d = u - g;
            mse += d * d;
            2.0 * d / n
        })
        .collect();
    (mse / n, cot)
}

type PointSets = (Vec<[f64; 3]>, Vec<[f64; 3]>, Vec<[f64; 3]>);

fn lattice_sets(grid: &Grid) -> PointSets {
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut initial = Vec::new();
    for p in 0..grid.len() {
        let (i, j, k) = grid.unravel(p);
        let pt = grid.point(i, j, k);
        match classify(grid, i, j, k) {
            PointClass::Interior => interior.push(pt),
            PointClass::SpatialBoundary => boundary.push(pt),
            PointClass::InitialPlane => initial.push(pt),
            PointClass::FinalPlane => {}
        }
    }
    (interior, boundary, initial)
}

fn uniform_sets(t_final: f64, n_int: usize, n_bnd: usize, n_init: usize, seed: u64) -> PointSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = (0..n_int)
        .map(|_| [rng.gen(), rng.gen(), rng.gen::<f64>() * t_final])
        .collect();
    let boundary = (0..n_bnd)
        .map(|_| {
            let s: f64 = rng.gen();
            let t = rng.gen::<f64>() * t_final;
            match rng.gen_range(0..4) {
                0 => [s, 0.0, t],
                1 => [s, 1.0, t],
                2 => [0.0, s, t],
                _ => [1.0, s, t],
            }
        })
        .collect();
    let initial = (0..n_init).map(|_| [rng.gen(), rng.gen(), 0.0]).collect();
    (interior, boundary, initial)
}
