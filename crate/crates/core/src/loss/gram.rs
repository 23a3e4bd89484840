//! Gram operator of the discrete gradient inner product tested with
//! Kronecker deltas: the 7-point space-time stencil scaled by `1/(hx·hy·ht)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, GridField};
use crate::loss::residual::{classify, PointClass};

/// Largest lattice for which a dense copy of the Gram matrix may be built.
pub const DENSE_LIMIT: usize = 1000;

/// Matrix-free Gram stencil.
///
/// Interior rows carry `6` on the diagonal and `−1` towards each interior
/// neighbor; couplings into non-interior points are dropped so the operator
/// stays symmetric. Non-interior rows are identity rows. Everything is scaled
/// by `1/(hx·hy·ht)`.
#[derive(Debug, Clone)]
pub struct GramOperator {
    grid: Grid,
    interior: Vec<bool>,
    scale: f64,
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub solution: GridField,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl GramOperator {
    pub fn new(grid: &Grid) -> Self {
        let interior = (0..grid.len())
            .map(|p| {
                let (i, j, k) = grid.unravel(p);
                classify(grid, i, j, k) == PointClass::Interior
            })
            .collect();
        Self {
            grid: *grid,
            interior,
            scale: 1.0 / grid.cell_volume(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn strides(&self) -> [usize; 3] {
        [
            self.grid.stride(Axis::X),
            self.grid.stride(Axis::Y),
            self.grid.stride(Axis::T),
        ]
    }

    fn apply_slice(&self, z: &[f64], out: &mut [f64]) {
        let strides = self.strides();
        for p in 0..z.len() {
            out[p] = if self.interior[p] {
                let mut acc = 6.0 * z[p];
                for s in strides {
                    for q in [p + s, p - s] {
                        if self.interior[q] {
                            acc -= z[q];
                        }
                    }
                }
                acc * self.scale
            } else {
                z[p] * self.scale
            };
        }
    }

    /// `G·z`.
    pub fn apply(&self, z: &GridField) -> Result<GridField> {
        self.check(z)?;
        let mut out = vec![0.0; z.values().len()];
        self.apply_slice(z.values(), &mut out);
        GridField::from_values(&self.grid, out)
    }

    /// Dense copy, for inspection and cross-checks on small lattices.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.grid.len();
        if n > DENSE_LIMIT {
            return Err(Error::Config(format!(
                "dense Gram matrix limited to {DENSE_LIMIT} points, lattice has {n}"
            )));
        }
        let strides = self.strides();
        let mut g = DMatrix::zeros(n, n);
        for p in 0..n {
            if self.interior[p] {
                g[(p, p)] = 6.0 * self.scale;
                for s in strides {
                    for q in [p + s, p - s] {
                        if self.interior[q] {
                            g[(p, q)] = -self.scale;
                        }
                    }
                }
            } else {
                g[(p, p)] = self.scale;
            }
        }
        Ok(g)
    }

    /// Solve `G·z = r` with plain conjugate gradients from a zero start.
    pub fn solve(&self, r: &GridField, tol: f64) -> Result<CgSolution> {
        self.solve_from(r, tol, None)
    }

    /// Conjugate gradients from an optional starting guess. Stops once
    /// `‖G·z − r‖₂ ≤ tol·‖r‖₂`; gives up after `10·len` iterations.
    pub fn solve_from(
        &self,
        r: &GridField,
        tol: f64,
        guess: Option<&GridField>,
    ) -> Result<CgSolution> {
        self.check(r)?;
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::Config(format!(
                "CG tolerance must be positive, got {tol}"
            )));
        }
        let b = r.values();
        let n = b.len();
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok(CgSolution {
                solution: GridField::zeros(&self.grid),
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let mut x = match guess {
            Some(g) => {
                self.check(g)?;
                g.values().to_vec()
            }
            None => vec![0.0; n],
        };
        let target = tol * b_norm;
        let max_iter = 10 * n;
        let mut ap = vec![0.0; n];
        let mut res = vec![0.0; n];
        let mut iterations = 0;
        // Outer loop restarts from the true residual if the recursive one drifted.
        loop {
            self.apply_slice(&x, &mut ap);
            for p in 0..n {
                res[p] = b[p] - ap[p];
            }
            let mut rr = dot(&res, &res);
            if rr.sqrt() <= target {
                return Ok(CgSolution {
                    solution: GridField::from_values(&self.grid, x)?,
                    iterations,
                    relative_residual: rr.sqrt() / b_norm,
                });
            }
            if iterations >= max_iter {
                return Err(Error::SolverFailure {
                    iterations,
                    residual: rr.sqrt() / b_norm,
                });
            }
            let mut dir = res.clone();
            while iterations < max_iter {
                self.apply_slice(&dir, &mut ap);
                let alpha = rr / dot(&dir, &ap);
                for p in 0..n {
                    x[p] += alpha * dir[p];
                    res[p] -= alpha * ap[p];
                }
                iterations += 1;
                let rr_next = dot(&res, &res);
                if rr_next.sqrt() <= target {
                    break;
                }
                let beta = rr_next / rr;
                for p in 0..n {
                    dir[p] = res[p] + beta * dir[p];
                }
                rr = rr_next;
            }
        }
    }

    fn check(&self, z: &GridField) -> Result<()> {
        if *z.grid() != self.grid {
            return Err(Error::ShapeMismatch(
                "field and Gram operator live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// Solve `G·z = r` through a dense LU factorization.
pub fn solve_dense(gram: &GramOperator, r: &GridField) -> Result<GridField> {
    let g = gram.to_dense()?;
    let rhs = DVector::from_column_slice(r.values());
    let z = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::ShapeMismatch("dense Gram matrix is singular".into()))?;
    GridField::from_values(gram.grid(), z.as_slice().to_vec())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
