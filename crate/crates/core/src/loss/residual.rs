use crate::error::Result;
use crate::grid::{Axis, Grid, GridField};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// `0<i<nx`, `0<j<ny`, `0<k<nt`: carries the discrete PDE residual.
    Interior,
    /// `i ∈ {0, nx}` or `j ∈ {0, ny}`: Dirichlet mismatch.
    SpatialBoundary,
    /// `k = 0` away from the spatial boundary: initial mismatch.
    InitialPlane,
    /// `k = nt` away from the spatial boundary: no equation.
    FinalPlane,
}

pub fn classify(grid: &Grid, i: usize, j: usize, k: usize) -> PointClass {
    if i == 0 || i == grid.nx() || j == 0 || j == grid.ny() {
        PointClass::SpatialBoundary
    } else if k == 0 {
        PointClass::InitialPlane
    } else if k == grid.nt() {
        PointClass::FinalPlane
    } else {
        PointClass::Interior
    }
}

/// The affine collocation residual `r(u) = A·u − c` on one lattice.
///
/// Interior rows hold
/// `∇t+ u + βx ∇x+ u + βy ∇y+ u − kx ∂xx,h u − ky ∂yy,h u − F`;
/// boundary and initial rows hold the data mismatch; final-plane rows are zero.
/// In shifted mode the unknown is `w = u − (1 − t/T)·u₀`, so the initial rows
/// compare against zero and `F` is the effective source.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    grid: Grid,
    problem: Problem,
    shifted: bool,
    classes: Vec<PointClass>,
    beta_x: Vec<f64>,
    beta_y: Vec<f64>,
    rhs: Vec<f64>,
}

impl ResidualSystem {
    pub fn new(grid: &Grid, problem: &Problem, shifted: bool) -> Self {
        let n = grid.len();
        let mut classes = Vec::with_capacity(n);
        let mut beta_x = vec![0.0; n];
        let mut beta_y = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for p in 0..n {
            let (i, j, k) = grid.unravel(p);
            let [x, y, t] = grid.point(i, j, k);
            let class = classify(grid, i, j, k);
            match class {
                PointClass::Interior => {
                    let [bx, by] = problem.advection(x, y, t);
                    beta_x[p] = bx;
                    beta_y[p] = by;
                    rhs[p] = if shifted {
                        problem.effective_source(x, y, t)
                    } else {
                        problem.source(x, y, t)
                    };
                }
                PointClass::SpatialBoundary => {
                    rhs[p] = problem.dirichlet(x, y, t);
                    if shifted {
                        rhs[p] -= problem.shift_value(x, y, t);
                    }
                }
                PointClass::InitialPlane => {
                    rhs[p] = if shifted {
                        0.0
                    } else {
                        problem.initial_condition(x, y)
                    };
                }
                PointClass::FinalPlane => {}
            }
            classes.push(class);
        }
        Self {
            grid: *grid,
            problem: problem.clone(),
            shifted,
            classes,
            beta_x,
            beta_y,
            rhs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn is_shifted(&self) -> bool {
        self.shifted
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    /// The constant part `c` of `r(u) = A·u − c`.
    pub fn rhs(&self) -> GridField {
        GridField::from_values(&self.grid, self.rhs.clone()).unwrap()
    }

    /// Field to add to the unknown to recover the physical solution
    /// (the shift in shifted mode, zero otherwise).
    pub fn solution_offset(&self) -> GridField {
        if self.shifted && self.problem.has_initial_data() {
            let p = &self.problem;
            self.grid.sample(|x, y, t| p.shift_value(x, y, t))
        } else {
            GridField::zeros(&self.grid)
        }
    }

    /// Interior stencil of row `p` as `(neighbor index, coefficient)` pairs.
    #[inline]
    fn stencil(&self, p: usize) -> [(usize, f64); 6] {
        let g = &self.grid;
        let (sx, sy, st) = (g.stride(Axis::X), g.stride(Axis::Y), g.stride(Axis::T));
        let (ihx, ihy, iht) = (1.0 / g.hx(), 1.0 / g.hy(), 1.0 / g.ht());
        let dx2 = self.problem.kx() * ihx * ihx;
        let dy2 = self.problem.ky() * ihy * ihy;
        let (bx, by) = (self.beta_x[p] * ihx, self.beta_y[p] * ihy);
        [
            (p, -iht - bx - by + 2.0 * dx2 + 2.0 * dy2),
            (p + st, iht),
            (p + sx, bx - dx2),
            (p - sx, -dx2),
            (p + sy, by - dy2),
            (p - sy, -dy2),
        ]
    }

    /// `A·u`.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        let uv = u.values();
        let mut out = vec![0.0; uv.len()];
        for (p, o) in out.iter_mut().enumerate() {
            *o = match self.classes[p] {
                PointClass::Interior => self.stencil(p).iter().map(|&(q, c)| c * uv[q]).sum(),
                PointClass::SpatialBoundary | PointClass::InitialPlane => uv[p],
                PointClass::FinalPlane => 0.0,
            };
        }
        GridField::from_values(&self.grid, out)
    }

    /// `r(u) = A·u − c`.
    pub fn assemble_residual(&self, u: &GridField) -> Result<GridField> {
        let mut r = self.apply(u)?;
        for (rv, c) in r.values_mut().iter_mut().zip(&self.rhs) {
            *rv -= c;
        }
        Ok(r)
    }

    /// `Aᵀ·z` by scattering each row's stencil.
    pub fn residual_adjoint(&self, z: &GridField) -> Result<GridField> {
        self.check(z)?;
        let zv = z.values();
        let mut out = vec![0.0; zv.len()];
        for p in 0..zv.len() {
            match self.classes[p] {
                PointClass::Interior => {
                    for (q, c) in self.stencil(p) {
                        out[q] += c * zv[p];
                    }
                }
                PointClass::SpatialBoundary | PointClass::InitialPlane => out[p] += zv[p],
                PointClass::FinalPlane => {}
            }
        }
        GridField::from_values(&self.grid, out)
    }

    fn check(&self, u: &GridField) -> Result<()> {
        u.check_same_grid(&GridField::zeros(&self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{forward_diff, spatial_laplacian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridField::from_values(grid, v).unwrap()
    }

    fn dot(a: &GridField, b: &GridField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn classification_counts() {
        let g = Grid::new(4, 3, 5, 1.0).unwrap();
        let s = ResidualSystem::new(&g, &Problem::snowmobile(0.1, 1.0).unwrap(), false);
        let count = |c| s.classes().iter().filter(|&&x| x == c).count();
        assert_eq!(count(PointClass::Interior), 3 * 2 * 4);
        assert_eq!(count(PointClass::InitialPlane), 3 * 2);
        assert_eq!(count(PointClass::FinalPlane), 3 * 2);
        assert_eq!(count(PointClass::SpatialBoundary), g.len() - 36);
    }

    #[test]
    fn zero_data_zero_field_zero_residual() {
        let g = Grid::cube(5).unwrap();
        let p = Problem::new("zero", 0.1, 0.1, 1.0)
            .unwrap()
            .with_advection(|_, _, _| [0.7, -2.0]);
        let s = ResidualSystem::new(&g, &p, false);
        let r = s.assemble_residual(&GridField::zeros(&g)).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn interior_rows_match_grid_operators() {
        let g = Grid::new(6, 5, 4, 1.0).unwrap();
        let p = Problem::manufactured("M1", 0.1, 1.0).unwrap();
        let s = ResidualSystem::new(&g, &p, false);
        let u = random_field(&g, 2);
        let r = s.assemble_residual(&u).unwrap();
        let ut = forward_diff(&u, Axis::T);
        let uy = forward_diff(&u, Axis::Y);
        let ux = forward_diff(&u, Axis::X);
        let lap = spatial_laplacian(&u);
        for idx in 0..g.len() {
            let (i, j, k) = g.unravel(idx);
            let [x, y, t] = g.point(i, j, k);
            match s.classes()[idx] {
                PointClass::Interior => {
                    let [bx, by] = p.advection(x, y, t);
                    let expect = ut.values()[idx] + bx * ux.values()[idx] + by * uy.values()[idx]
                        - 0.1 * lap.values()[idx]
                        - p.source(x, y, t);
                    assert!((r.values()[idx] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
                }
                PointClass::SpatialBoundary | PointClass::InitialPlane => {
                    assert_eq!(r.values()[idx], u.values()[idx]);
                }
                PointClass::FinalPlane => assert_eq!(r.values()[idx], 0.0),
            }
        }
    }

    #[test]
    fn residual_is_affine() {
        let g = Grid::cube(6).unwrap();
        let s = ResidualSystem::new(&g, &Problem::snowmobile(0.1, 1.0).unwrap(), false);
        let u1 = random_field(&g, 1);
        let u2 = random_field(&g, 2);
        let sum = u1.zip_with(&u2, |a, b| a + b).unwrap();
        let r12 = s.assemble_residual(&sum).unwrap();
        let r1 = s.assemble_residual(&u1).unwrap();
        let r2 = s.assemble_residual(&u2).unwrap();
        let c = s.rhs();
        let scale = r12.max_abs().max(c.max_abs());
        for p in 0..g.len() {
            let d = r12.values()[p] - r1.values()[p] - r2.values()[p] - c.values()[p];
            assert!(d.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let g = Grid::cube(8).unwrap();
        let s = ResidualSystem::new(&g, &Problem::manufactured("M1", 0.1, 1.0).unwrap(), false);
        for seed in 0..10 {
            let u = random_field(&g, 100 + seed);
            let z = random_field(&g, 200 + seed);
            let au = s.apply(&u).unwrap();
            let atz = s.residual_adjoint(&z).unwrap();
            let lhs = dot(&au, &z);
            let rhs = dot(&u, &atz);
            let scale = dot(&au, &au).sqrt() * dot(&z, &z).sqrt();
            assert!((lhs - rhs).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn adjoint_of_delta_is_local() {
        let g = Grid::cube(6).unwrap();
        let s = ResidualSystem::new(&g, &Problem::snowmobile(0.1, 1.0).unwrap(), false);
        let p0 = g.linear_index(3, 3, 3).unwrap();
        let mut z = GridField::zeros(&g);
        z.values_mut()[p0] = 1.0;
        let out = s.residual_adjoint(&z).unwrap();
        for p in 0..g.len() {
            if out.values()[p] != 0.0 {
                let (i, j, k) = g.unravel(p);
                let dist = i.abs_diff(3) + j.abs_diff(3) + k.abs_diff(3);
                assert!(dist <= 1);
            }
        }
        assert_eq!(
            s.residual_adjoint(&GridField::zeros(&g)).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn shifted_mode_zeroes_initial_rows() {
        use crate::problem::SpatialJet;
        use std::f64::consts::PI;
        let g = Grid::cube(4).unwrap();
        let p = Problem::new("s", 0.1, 0.1, 1.0)
            .unwrap()
            .with_initial(|x, y| SpatialJet {
                value: (PI * x).sin() * (PI * y).sin(),
                ..Default::default()
            });
        let plain = ResidualSystem::new(&g, &p, false);
        let shifted = ResidualSystem::new(&g, &p, true);
        let idx = g.linear_index(2, 2, 0).unwrap();
        assert!((plain.rhs().values()[idx] - 1.0).abs() < 1e-12);
        assert_eq!(shifted.rhs().values()[idx], 0.0);
        let off = shifted.solution_offset();
        assert!((off.values()[idx] - 1.0).abs() < 1e-12);
        assert_eq!(off.get(2, 2, 4), 0.0);
    }
}
