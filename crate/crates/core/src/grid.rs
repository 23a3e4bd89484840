//! Regular space-time collocation lattice over (0,1)² × (0,T).
//!
//! Fields are stored flat in x-major order (x, then y, then t). Difference
//! operators return fields of the same shape; entries where the stencil would
//! leave the lattice are stored as 0 and are never read by consumers.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nt: usize,
    t_final: f64,
    hx: f64,
    hy: f64,
    ht: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    T,
}

impl Grid {
    /// Lattice with `nx`, `ny`, `nt` cells per axis and final time `t_final`.
    pub fn new(nx: usize, ny: usize, nt: usize, t_final: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nt == 0 {
            return Err(Error::Config(format!(
                "cell counts must be positive, got nx={nx} ny={ny} nt={nt}"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            nt,
            t_final,
            hx: 1.0 / nx as f64,
            hy: 1.0 / ny as f64,
            ht: t_final / nt as f64,
        })
    }

    /// Cube lattice with `n` cells per axis on the unit time interval.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn ht(&self) -> f64 {
        self.ht
    }

    /// Volume weight of a single lattice point, `hx·hy·ht`.
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy * self.ht
    }

    pub fn len(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nt + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::T => self.nt,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx,
            Axis::Y => self.hy,
            Axis::T => self.ht,
        }
    }

    /// Offset in the flat array between neighbors along `axis`.
    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => (self.ny + 1) * (self.nt + 1),
            Axis::Y => self.nt + 1,
            Axis::T => 1,
        }
    }

    /// Checked linearization `i·(ny+1)(nt+1) + j·(nt+1) + k`.
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        if i > self.nx || j > self.ny || k > self.nt {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                k,
                nx: self.nx,
                ny: self.ny,
                nt: self.nt,
            });
        }
        Ok(self.idx(i, j, k))
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.ny + 1) + j) * (self.nt + 1) + k
    }

    /// Inverse of [`Grid::linear_index`].
    #[inline]
    pub fn unravel(&self, p: usize) -> (usize, usize, usize) {
        let k = p % (self.nt + 1);
        let rest = p / (self.nt + 1);
        (rest / (self.ny + 1), rest % (self.ny + 1), k)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [i as f64 * self.hx, j as f64 * self.hy, k as f64 * self.ht]
    }

    /// All lattice coordinates in linear-index order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|p| {
                let (i, j, k) = self.unravel(p);
                self.point(i, j, k)
            })
            .collect()
    }

    /// Indices of the time slice `k` in x-major order.
    pub fn slice_indices(&self, k: usize) -> Result<Vec<usize>> {
        if k > self.nt {
            return Err(Error::IndexOutOfRange {
                i: 0,
                j: 0,
                k,
                nx: self.nx,
                ny: self.ny,
                nt: self.nt,
            });
        }
        let mut out = Vec::with_capacity((self.nx + 1) * (self.ny + 1));
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                out.push(self.idx(i, j, k));
            }
        }
        Ok(out)
    }

    pub fn sample(&self, f: impl Fn(f64, f64, f64) -> f64) -> GridField {
        let values = self
            .points()
            .into_iter()
            .map(|[x, y, t]| f(x, y, t))
            .collect();
        GridField {
            grid: *self,
            values,
        }
    }
}

/// One scalar per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.idx(i, j, k)]
    }

    /// Membership in the zero-initial subspace (all `k = 0` values vanish).
    pub fn is_zero_initial(&self) -> bool {
        let g = &self.grid;
        (0..=g.nx).all(|i| (0..=g.ny).all(|j| self.get(i, j, 0) == 0.0))
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "fields live on different grids ({:?} vs {:?})",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridField {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Forward difference `(u[p+1] − u[p]) / h` along `axis`; 0 on the top slice.
pub fn forward_diff(field: &GridField, axis: Axis) -> GridField {
    let g = field.grid;
    let stride = g.stride(axis);
    let inv_h = 1.0 / g.spacing(axis);
    let top = g.extent(axis);
    let u = &field.values;
    let mut out = vec![0.0; u.len()];
    for (p, o) in out.iter_mut().enumerate() {
        if axis_coord(&g, p, axis) < top {
            *o = (u[p + stride] - u[p]) * inv_h;
        }
    }
    GridField {
        grid: g,
        values: out,
    }
}

/// Backward difference `(u[p] − u[p−1]) / h` along `axis`; 0 on the bottom slice.
pub fn backward_diff(field: &GridField, axis: Axis) -> GridField {
    let g = field.grid;
    let stride = g.stride(axis);
    let inv_h = 1.0 / g.spacing(axis);
    let u = &field.values;
    let mut out = vec![0.0; u.len()];
    for (p, o) in out.iter_mut().enumerate() {
        if axis_coord(&g, p, axis) > 0 {
            *o = (u[p] - u[p - stride]) * inv_h;
        }
    }
    GridField {
        grid: g,
        values: out,
    }
}

#[inline]
fn axis_coord(g: &Grid, p: usize, axis: Axis) -> usize {
    let (i, j, k) = g.unravel(p);
    match axis {
        Axis::X => i,
        Axis::Y => j,
        Axis::T => k,
    }
}

/// Five-point Laplacian in x and y only, at every time level. Zero wherever
/// `i` or `j` sits on the spatial boundary.
pub fn spatial_laplacian(field: &GridField) -> GridField {
    let g = field.grid;
    let sx = g.stride(Axis::X);
    let sy = g.stride(Axis::Y);
    let (cx, cy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let u = &field.values;
    let mut out = vec![0.0; u.len()];
    for i in 1..g.nx {
        for j in 1..g.ny {
            for k in 0..=g.nt {
                let p = g.idx(i, j, k);
                out[p] = (u[p + sx] - 2.0 * u[p] + u[p - sx]) * cx
                    + (u[p + sy] - 2.0 * u[p] + u[p - sy]) * cy;
            }
        }
    }
    GridField {
        grid: g,
        values: out,
    }
}

/// Discrete L² inner product `hx·hy·ht · Σ u(p)v(p)`.
pub fn inner_h(u: &GridField, v: &GridField) -> Result<f64> {
    u.check_same_grid(v)?;
    let s: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(s * u.grid.cell_volume())
}

/// Discrete H¹ seminorm built from forward differences in x, y and t.
pub fn norm_grad_h(u: &GridField) -> f64 {
    let mut sq = 0.0;
    for axis in [Axis::X, Axis::Y, Axis::T] {
        let d = forward_diff(u, axis);
        sq += d.values.iter().map(|v| v * v).sum::<f64>();
    }
    (sq * u.grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_field(grid: &Grid, seed: u64) -> GridField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridField::from_values(grid, values).unwrap()
    }

    #[test]
    fn linear_index_examples() {
        let g = Grid::cube(2).unwrap();
        assert_eq!(g.linear_index(0, 0, 0).unwrap(), 0);
        assert_eq!(g.linear_index(1, 0, 0).unwrap(), 9);
        assert_eq!(g.linear_index(2, 2, 2).unwrap(), 26);
        assert!(matches!(
            g.linear_index(3, 0, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn linear_index_is_bijective() {
        let g = Grid::new(3, 4, 2, 0.5).unwrap();
        let mut seen = vec![false; g.len()];
        for i in 0..=3 {
            for j in 0..=4 {
                for k in 0..=2 {
                    let p = g.linear_index(i, j, k).unwrap();
                    assert!(!seen[p]);
                    seen[p] = true;
                    assert_eq!(g.unravel(p), (i, j, k));
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(0, 1, 1, 1.0).is_err());
        assert!(Grid::new(1, 1, 1, 0.0).is_err());
        let g = Grid::new(2, 4, 5, 2.0).unwrap();
        assert_eq!(g.point(1, 2, 5), [0.5, 0.5, 2.0]);
    }

    #[test]
    fn differences_of_constant_vanish() {
        let g = Grid::cube(3).unwrap();
        let c = GridField::constant(&g, 2.5);
        for axis in [Axis::X, Axis::Y, Axis::T] {
            assert_eq!(forward_diff(&c, axis).max_abs(), 0.0);
            assert_eq!(backward_diff(&c, axis).max_abs(), 0.0);
        }
        assert_eq!(spatial_laplacian(&c).max_abs(), 0.0);
    }

    #[test]
    fn forward_diff_of_ramp_is_one() {
        let g = Grid::new(4, 3, 2, 1.0).unwrap();
        let u = g.sample(|x, _, _| x);
        let d = forward_diff(&u, Axis::X);
        for i in 0..=4 {
            for j in 0..=3 {
                for k in 0..=2 {
                    let expect = if i < 4 { 1.0 } else { 0.0 };
                    assert!((d.get(i, j, k) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_diff_hand_values() {
        let g = Grid::new(2, 1, 1, 1.0).unwrap();
        let xs = [0.0, 0.25, 1.0];
        let u = g.sample(|x, _, _| xs[(x * 2.0).round() as usize]);
        let d = forward_diff(&u, Axis::X);
        assert!((d.get(0, 0, 0) - 0.5).abs() < 1e-15);
        assert!((d.get(1, 0, 0) - 1.5).abs() < 1e-15);
        assert_eq!(d.get(2, 0, 0), 0.0);
    }

    #[test]
    fn backward_diff_of_time_ramp() {
        let g = Grid::new(2, 2, 4, 2.0).unwrap();
        let u = g.sample(|_, _, t| -3.0 * t);
        let d = backward_diff(&u, Axis::T);
        for p in 0..g.len() {
            let (_, _, k) = g.unravel(p);
            let expect = if k > 0 { -3.0 } else { 0.0 };
            assert!((d.values()[p] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_identity_between_differences() {
        let g = Grid::new(4, 5, 3, 1.0).unwrap();
        let u = random_field(&g, 7);
        for axis in [Axis::X, Axis::Y, Axis::T] {
            let f = forward_diff(&u, axis);
            let b = backward_diff(&u, axis);
            let s = g.stride(axis);
            for p in 0..g.len() {
                if axis_coord(&g, p, axis) > 0 {
                    assert_eq!(b.values()[p], f.values()[p - s]);
                }
            }
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let g = Grid::new(6, 5, 2, 1.0).unwrap();
        let u = g.sample(|x, _, _| x * x);
        let lap = spatial_laplacian(&u);
        for i in 1..6 {
            for j in 1..5 {
                for k in 0..=2 {
                    assert!((lap.get(i, j, k) - 2.0).abs() < 1e-10);
                }
            }
        }
        let lin = g.sample(|x, y, _| x + y);
        assert!(spatial_laplacian(&lin).max_abs() < 1e-10);
    }

    #[test]
    fn inner_h_examples() {
        let g = Grid::cube(1).unwrap();
        let one = GridField::constant(&g, 1.0);
        assert_eq!(inner_h(&one, &one).unwrap(), 8.0);
        let u = random_field(&Grid::cube(3).unwrap(), 1);
        let z = GridField::zeros(u.grid());
        assert_eq!(inner_h(&u, &z).unwrap(), 0.0);
        assert!(inner_h(&one, &u).is_err());
    }

    #[test]
    fn norm_grad_h_of_ramp_matches_brute_force() {
        let g = Grid::cube(4).unwrap();
        let u = g.sample(|x, _, _| x);
        // 4·5·5 valid x-differences, each equal to 1, weighted by h³.
        let mut valid = 0usize;
        for i in 0..=4 {
            for _j in 0..=4 {
                for _k in 0..=4 {
                    if i < 4 {
                        valid += 1;
                    }
                }
            }
        }
        let expect = (valid as f64 * g.cell_volume()).sqrt();
        assert!((norm_grad_h(&u) - expect).abs() < 1e-12);
        assert!((expect - 1.25).abs() < 1e-12);
        assert_eq!(norm_grad_h(&GridField::constant(&g, 3.0)), 0.0);
    }

    #[test]
    fn forward_and_backward_norms_agree_for_boundary_free_fields() {
        let g = Grid::new(5, 4, 6, 1.0).unwrap();
        let mut u = random_field(&g, 3);
        for p in 0..g.len() {
            let (i, j, k) = g.unravel(p);
            if i == 0 || i == 5 || j == 0 || j == 4 || k == 0 || k == 6 {
                u.values_mut()[p] = 0.0;
            }
        }
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for axis in [Axis::X, Axis::Y, Axis::T] {
            let f = forward_diff(&u, axis);
            let b = backward_diff(&u, axis);
            fwd += inner_h(&f, &f).unwrap();
            bwd += inner_h(&b, &b).unwrap();
        }
        assert!((fwd - bwd).abs() <= 1e-12 * fwd);
        assert!((fwd.sqrt() - norm_grad_h(&u)).abs() <= 1e-12 * fwd.sqrt());
    }

    #[test]
    fn summation_by_parts_spatial() {
        let g = Grid::new(7, 6, 3, 1.0).unwrap();
        let zero_rim = |mut f: GridField| {
            for p in 0..g.len() {
                let (i, j, _) = g.unravel(p);
                if i == 0 || i == g.nx() || j == 0 || j == g.ny() {
                    f.values_mut()[p] = 0.0;
                }
            }
            f
        };
        let u = zero_rim(random_field(&g, 11));
        let v = zero_rim(random_field(&g, 12));
        let mut neg_lap = spatial_laplacian(&u);
        neg_lap.values_mut().iter_mut().for_each(|x| *x = -*x);
        let lhs = inner_h(&neg_lap, &v).unwrap();
        let rhs = inner_h(&forward_diff(&u, Axis::X), &forward_diff(&v, Axis::X)).unwrap()
            + inner_h(&forward_diff(&u, Axis::Y), &forward_diff(&v, Axis::Y)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn zero_initial_membership() {
        let g = Grid::cube(2).unwrap();
        assert!(g.sample(|_, _, t| t).is_zero_initial());
        assert!(!g.sample(|_, _, t| t + 1.0).is_zero_initial());
    }

    proptest! {
        #[test]
        fn inner_h_is_symmetric_and_bilinear(seed in 0u64..1000, a in -3.0f64..3.0) {
            let g = Grid::new(3, 2, 4, 0.7).unwrap();
            let u = random_field(&g, seed);
            let v = random_field(&g, seed + 1);
            let w = random_field(&g, seed + 2);
            let uv = inner_h(&u, &v).unwrap();
            prop_assert!((uv - inner_h(&v, &u).unwrap()).abs() < 1e-14);
            let au_w = u.zip_with(&w, |x, y| a * x + y).unwrap();
            let lhs = inner_h(&au_w, &v).unwrap();
            let rhs = a * uv + inner_h(&w, &v).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
