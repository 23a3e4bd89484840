//! Self-checks of the discrete operators and gradients, run by `verify`.

use std::fmt;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{forward_diff, inner_h, spatial_laplacian, Axis, Grid, GridField};
use crate::loss::{crvpinn_loss, solve_dense, CrvpinnObjective, GramOperator, ResidualSystem};
use crate::net::{finite_difference_error, Mlp};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed error (or the smallest eigenvalue for the SPD check).
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} {:>12.3e} {:>12.3e}  {}",
            self.name,
            self.value,
            self.threshold,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

fn below(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        passed: value < threshold,
    }
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> GridField {
    let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridField::from_values(grid, v).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst `|⟨Au, z⟩ − ⟨u, Aᵀz⟩| / (‖Au‖‖z‖)` over random pairs.
pub fn adjointness(n: usize, pairs: usize, seed: u64) -> Result<f64> {
    let grid = Grid::cube(n)?;
    let problem = Problem::manufactured("M1", 0.1, 1.0)?;
    let system = ResidualSystem::new(&grid, &problem, false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let u = random_field(&grid, &mut rng);
        let z = random_field(&grid, &mut rng);
        let au = system.apply(&u)?;
        let atz = system.residual_adjoint(&z)?;
        let lhs = dot(au.values(), z.values());
        let rhs = dot(u.values(), atz.values());
        let scale = dot(au.values(), au.values()).sqrt() * dot(z.values(), z.values()).sqrt();
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Largest asymmetry and smallest eigenvalue of the dense Gram matrix.
pub fn gram_spectrum(n: usize) -> Result<(f64, f64)> {
    let g = GramOperator::new(&Grid::cube(n)?).to_dense()?;
    let asym = (&g - g.transpose()).amax() / g.amax();
    let min_eig = SymmetricEigen::new(g).eigenvalues.min();
    Ok((asym, min_eig))
}

/// Relative defect of `(−Δu, v)_h = (∇x+u, ∇x+v)_h + (∇y+u, ∇y+v)_h` for
/// random fields vanishing on the spatial rim.
pub fn summation_by_parts(n: usize, seed: u64) -> Result<f64> {
    let grid = Grid::cube(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rimless = || {
        let mut f = random_field(&grid, &mut rng);
        for p in 0..grid.len() {
            let (i, j, _) = grid.unravel(p);
            if i == 0 || i == grid.nx() || j == 0 || j == grid.ny() {
                f.values_mut()[p] = 0.0;
            }
        }
        f
    };
    let u = rimless();
    let v = rimless();
    let lap = spatial_laplacian(&u);
    let lhs = -inner_h(&lap, &v)?;
    let rhs = inner_h(&forward_diff(&u, Axis::X), &forward_diff(&v, Axis::X))?
        + inner_h(&forward_diff(&u, Axis::Y), &forward_diff(&v, Axis::Y))?;
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()))
}

/// Worst relative error of the robust-loss parameter gradient against
/// central finite differences.
pub fn loss_gradient(layers: &[usize], n: usize, seed: u64) -> Result<f64> {
    let grid = Grid::cube(n)?;
    let problem = Problem::manufactured("M1", 0.1, 1.0)?;
    let system = ResidualSystem::new(&grid, &problem, true);
    let mlp = Mlp::new(layers, seed)?;
    let tol = 1e-14;
    let (_, grads) = CrvpinnObjective::new(system.clone(), tol).evaluate_with_grad(&mlp)?;
    let gram = GramOperator::new(&grid);
    Ok(finite_difference_error(&mlp, &grads.flatten(), |m| {
        crvpinn_loss(&system, &gram, m, tol).unwrap().loss
    }))
}

/// `‖z_cg − z_dense‖ / ‖z_dense‖` for one random right-hand side.
pub fn cg_versus_dense(n: usize, seed: u64) -> Result<f64> {
    let grid = Grid::cube(n)?;
    let gram = GramOperator::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_field(&grid, &mut rng);
    let cg = gram.solve(&r, 1e-12)?.solution;
    let dense = solve_dense(&gram, &r)?;
    let a = DVector::from_column_slice(cg.values());
    let b = DVector::from_column_slice(dense.values());
    Ok((a - &b).norm() / b.norm())
}

/// The full suite on small lattices.
pub fn run_all() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    checks.push(below("adjointness", adjointness(8, 100, 1)?, 1e-12));
    let mut worst_asym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for n in [2, 3, 4] {
        let (asym, eig) = gram_spectrum(n)?;
        worst_asym = worst_asym.max(asym);
        min_eig = min_eig.min(eig);
    }
    checks.push(below("gram symmetry", worst_asym, 1e-15));
    checks.push(Check {
        name: "gram min eigenvalue",
        value: min_eig,
        threshold: 0.0,
        passed: min_eig > 0.0,
    });
    checks.push(below(
        "summation by parts",
        summation_by_parts(16, 2)?,
        1e-12,
    ));
    checks.push(below(
        "loss gradient",
        loss_gradient(&[3, 8, 1], 5, 3)?,
        1e-5,
    ));
    checks.push(below("cg vs dense", cg_versus_dense(6, 4)?, 1e-8));
    Ok(checks)
}

pub fn format_table(checks: &[Check]) -> String {
    let mut out = format!(
        "{:<24} {:>12} {:>12}  result\n",
        "check", "value", "threshold"
    );
    for c in checks {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}
