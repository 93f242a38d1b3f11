//! Vector fields on a grid and the discrete calculus on them.
//!
//! A [`VectorField`] stores one value in R^3 per grid node, boundary layer
//! included. The difference operators follow the usual second-order
//! recipes:
//!
//! * [`VectorField::laplacian`]: central second differences per axis in
//!   the interior; the output is zeroed on the boundary layer so the image
//!   of a Dirichlet field is again a Dirichlet field.
//! * [`VectorField::gradient`]: central differences in the interior,
//!   first-order one-sided at the boundary, one output field per axis.
//! * [`VectorField::norms`]: trapezoid quadrature for the integral norms
//!   collected in a [`NormReport`].
//!
//! Tail masses integrate `|u|^2` (and `|grad u|^2` for the H^1 order) over
//! the region `|x| >= m` with the full-grid trapezoid weights restricted
//! by the indicator, which carries an O(h) cut error at the sphere `|x| = m`.

use crate::error::LlbError;
use crate::grid::Grid;
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// Which norm the tail mass integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailOrder {
    /// `|u|^2` only.
    L2,
    /// `|u|^2 + |grad u|^2`.
    H1,
}

/// Quadrature norms of a field, all squared except where noted:
/// `l2 = ||u||_{L2}^2`, `h1 = l2 + ||grad u||^2`, `h2 = h1 + ||lap u||^2`,
/// `l4 = integral of |u|^4`, `linf = max |u(x)|` (not squared), and
/// `cross = integral of |u|^2 |grad u|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub l4: f64,
    pub linf: f64,
    pub cross: f64,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    data: Vec<Vec3>,
}

impl VectorField {
    pub fn zero(grid: &Arc<Grid>) -> VectorField {
        VectorField {
            grid: grid.clone(),
            data: vec![vec3::ZERO; grid.len()],
        }
    }

    /// Evaluate a closure at every node. The closure receives the node
    /// coordinates (second entry 0 in one dimension).
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 2]) -> Vec3) -> VectorField {
        let data = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        VectorField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.data
    }

    pub fn same_grid(&self, other: &VectorField) -> Result<(), LlbError> {
        if self.grid.as_ref() == other.grid.as_ref() {
            Ok(())
        } else {
            Err(LlbError::GridMismatch(format!(
                "fields live on different grids ({}^{} vs {}^{})",
                self.grid.radius(),
                self.grid.dim(),
                other.grid.radius(),
                other.grid.dim()
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| vec3::is_finite(*v))
    }

    /// Quadrature `||u||_{L2}^2` without touching derivatives; cheaper
    /// than [`VectorField::norms`] when only the mass is needed.
    pub fn l2_sq(&self) -> f64 {
        (0..self.data.len())
            .map(|i| self.grid.quad_weight(i) * vec3::norm_sq(self.data[i]))
            .sum()
    }

    /// Largest pointwise Euclidean norm.
    pub fn linf(&self) -> f64 {
        self.data
            .iter()
            .map(|v| vec3::norm_sq(*v))
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Force the boundary layer to zero (Dirichlet condition).
    pub fn zero_boundary(&mut self) {
        for idx in 0..self.data.len() {
            if self.grid.is_boundary(idx) {
                self.data[idx] = vec3::ZERO;
            }
        }
    }

    /// `self += c * other`, on the same grid.
    pub fn add_scaled(&mut self, other: &VectorField, c: f64) {
        debug_assert_eq!(self.grid.as_ref(), other.grid.as_ref());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            a[0] += c * b[0];
            a[1] += c * b[1];
            a[2] += c * b[2];
        }
    }

    /// `a - b` as a new field.
    pub fn difference(a: &VectorField, b: &VectorField) -> Result<VectorField, LlbError> {
        a.same_grid(b)?;
        let mut out = a.clone();
        out.add_scaled(b, -1.0);
        Ok(out)
    }

    /// Central second differences per axis; zero on the boundary layer.
    pub fn laplacian(&self) -> VectorField {
        let g = &self.grid;
        let ppa = g.points_per_axis();
        let inv_h2 = 1.0 / (g.spacing() * g.spacing());
        let mut out = VectorField::zero(&self.grid);
        match g.dim() {
            1 => {
                for i in 1..ppa - 1 {
                    let [l, c, r] = [self.data[i - 1], self.data[i], self.data[i + 1]];
                    for a in 0..3 {
                        out.data[i][a] = (l[a] - 2.0 * c[a] + r[a]) * inv_h2;
                    }
                }
            }
            _ => {
                for ix in 1..ppa - 1 {
                    for iy in 1..ppa - 1 {
                        let idx = ix * ppa + iy;
                        let c = self.data[idx];
                        let xl = self.data[idx - ppa];
                        let xr = self.data[idx + ppa];
                        let yl = self.data[idx - 1];
                        let yr = self.data[idx + 1];
                        for a in 0..3 {
                            out.data[idx][a] =
                                (xl[a] + xr[a] + yl[a] + yr[a] - 4.0 * c[a]) * inv_h2;
                        }
                    }
                }
            }
        }
        out
    }

    /// Per-axis first derivatives: central in the interior, one-sided on
    /// the boundary. Returns `dim` fields.
    pub fn gradient(&self) -> Vec<VectorField> {
        let g = &self.grid;
        let ppa = g.points_per_axis();
        let inv_h = 1.0 / g.spacing();
        let inv_2h = 0.5 * inv_h;
        let mut out = Vec::with_capacity(g.dim());
        for axis in 0..g.dim() {
            let stride = if g.dim() == 1 {
                1
            } else if axis == 0 {
                ppa
            } else {
                1
            };
            let mut d = VectorField::zero(&self.grid);
            for idx in 0..self.data.len() {
                let [ix, iy] = g.axis_indices(idx);
                let i = if axis == 0 { ix } else { iy };
                let v = if i == 0 {
                    let a = self.data[idx];
                    let b = self.data[idx + stride];
                    [
                        (b[0] - a[0]) * inv_h,
                        (b[1] - a[1]) * inv_h,
                        (b[2] - a[2]) * inv_h,
                    ]
                } else if i == ppa - 1 {
                    let a = self.data[idx - stride];
                    let b = self.data[idx];
                    [
                        (b[0] - a[0]) * inv_h,
                        (b[1] - a[1]) * inv_h,
                        (b[2] - a[2]) * inv_h,
                    ]
                } else {
                    let a = self.data[idx - stride];
                    let b = self.data[idx + stride];
                    [
                        (b[0] - a[0]) * inv_2h,
                        (b[1] - a[1]) * inv_2h,
                        (b[2] - a[2]) * inv_2h,
                    ]
                };
                d.data[idx] = v;
            }
            out.push(d);
        }
        out
    }

    /// All quadrature norms in one pass over the node set.
    pub fn norms(&self) -> NormReport {
        let grads = self.gradient();
        let lap = self.laplacian();
        let mut l2 = 0.0;
        let mut grad_sq = 0.0;
        let mut lap_sq = 0.0;
        let mut l4 = 0.0;
        let mut linf: f64 = 0.0;
        let mut cross = 0.0;
        for idx in 0..self.data.len() {
            let w = self.grid.quad_weight(idx);
            let usq = vec3::norm_sq(self.data[idx]);
            let gsq: f64 = grads.iter().map(|g| vec3::norm_sq(g.data[idx])).sum();
            l2 += w * usq;
            grad_sq += w * gsq;
            lap_sq += w * vec3::norm_sq(lap.data[idx]);
            l4 += w * usq * usq;
            cross += w * usq * gsq;
            linf = linf.max(usq);
        }
        NormReport {
            l2,
            h1: l2 + grad_sq,
            h2: l2 + grad_sq + lap_sq,
            l4,
            linf: linf.sqrt(),
            cross,
        }
    }

    /// Quadrature mass of the field outside the sphere `|x| >= m`.
    /// `m = 0` degenerates to the full norm; `m >= n` is rejected.
    pub fn tail_mass(&self, m: f64, order: TailOrder) -> Result<f64, LlbError> {
        if !(m.is_finite() && m >= 0.0) {
            return Err(LlbError::invalid_parameter(
                "m",
                format!("tail radius must be finite and nonnegative, got {m}"),
            ));
        }
        if m >= self.grid.radius() {
            return Err(LlbError::invalid_parameter(
                "m",
                format!(
                    "tail radius {m} must stay below the grid radius {}",
                    self.grid.radius()
                ),
            ));
        }
        let grads = match order {
            TailOrder::L2 => Vec::new(),
            TailOrder::H1 => self.gradient(),
        };
        let mut mass = 0.0;
        for idx in 0..self.data.len() {
            if self.grid.radial(idx) < m {
                continue;
            }
            let w = self.grid.quad_weight(idx);
            let mut q = vec3::norm_sq(self.data[idx]);
            for g in &grads {
                q += vec3::norm_sq(g.data[idx]);
            }
            mass += w * q;
        }
        Ok(mass)
    }

    /// Zero-extend onto a larger concentric grid with the same spacing.
    pub fn embed_into(&self, larger: &Arc<Grid>) -> Result<VectorField, LlbError> {
        let off = self.grid.embedding_offset(larger)?;
        let mut out = VectorField::zero(larger);
        for idx in 0..self.data.len() {
            let [ix, iy] = self.grid.axis_indices(idx);
            let target = larger.flat_index(ix + off, if larger.dim() == 2 { iy + off } else { 0 });
            out.data[target] = self.data[idx];
        }
        Ok(out)
    }

    /// Restrict to a smaller concentric grid with the same spacing.
    pub fn restrict_to(&self, smaller: &Arc<Grid>) -> Result<VectorField, LlbError> {
        let off = smaller.embedding_offset(&self.grid)?;
        let mut out = VectorField::zero(smaller);
        for idx in 0..out.data.len() {
            let [ix, iy] = smaller.axis_indices(idx);
            let source = self
                .grid
                .flat_index(ix + off, if self.grid.dim() == 2 { iy + off } else { 0 });
            out.data[idx] = self.data[source];
        }
        Ok(out)
    }
}

/// Quadrature inner product of two fields on the same grid.
pub fn inner_product(u: &VectorField, v: &VectorField) -> Result<f64, LlbError> {
    u.same_grid(v)?;
    let mut acc = 0.0;
    for idx in 0..u.data.len() {
        acc += u.grid.quad_weight(idx) * vec3::dot(u.data[idx], v.data[idx]);
    }
    Ok(acc)
}

/// A reproducible smooth Dirichlet field: a seeded combination of the
/// lowest sine modes per component, rescaled so the sup norm equals
/// `amplitude`. Used for random initial data and test corpora.
pub fn random_smooth_field(grid: &Arc<Grid>, seed: u64, amplitude: f64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed_f1e1d);
    let n = grid.radius();
    let modes = 6usize;
    // coeffs[component][mode] with a 1/j^2 roll-off keeps the field smooth.
    let mut coeffs = [[0.0f64; 8]; 3];
    let mut coeffs2 = [[0.0f64; 8]; 3];
    for c in coeffs.iter_mut().chain(coeffs2.iter_mut()) {
        for (j, slot) in c.iter_mut().enumerate().take(modes) {
            *slot = rng.random_range(-1.0..1.0) / ((j + 1) * (j + 1)) as f64;
        }
    }
    let mut field = VectorField::from_fn(grid, |p| {
        let mut v = vec3::ZERO;
        for a in 0..3 {
            let mut acc = 0.0;
            for j in 0..modes {
                let kx = (j + 1) as f64 * std::f64::consts::PI / (2.0 * n);
                let sx = (kx * (p[0] + n)).sin();
                if grid.dim() == 1 {
                    acc += coeffs[a][j] * sx;
                } else {
                    for j2 in 0..modes {
                        let ky = (j2 + 1) as f64 * std::f64::consts::PI / (2.0 * n);
                        acc += coeffs[a][j] * coeffs2[a][j2] * sx * (ky * (p[1] + n)).sin();
                    }
                }
            }
            v[a] = acc;
        }
        v
    });
    let sup = field.linf();
    if sup > 0.0 {
        let c = amplitude / sup;
        for v in field.values_mut() {
            *v = vec3::scale(*v, c);
        }
    }
    field.zero_boundary();
    field
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid1(n: f64, h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(1, n, h).unwrap())
    }

    /// First Dirichlet sine mode on [-n, n].
    fn mode1(grid: &Arc<Grid>) -> VectorField {
        let n = grid.radius();
        let k = PI / (2.0 * n);
        VectorField::from_fn(grid, |p| [(k * (p[0] + n)).sin(), 0.0, 0.0])
    }

    #[test]
    fn constant_field_l2_is_edge_times_square() {
        let g = grid1(4.0, 0.25);
        let c = 1.5;
        let f = VectorField::from_fn(&g, |_| [c, 0.0, 0.0]);
        assert_relative_eq!(f.norms().l2, 8.0 * c * c, max_relative = 1e-12);
    }

    #[test]
    fn sine_mode_l2_approaches_half_edge() {
        // integral of sin^2 over [-4, 4] is 4; trapezoid converges to it.
        let g = grid1(4.0, 0.005);
        assert_relative_eq!(mode1(&g).norms().l2, 4.0, max_relative = 1e-6);
    }

    #[test]
    fn laplacian_of_constant_vanishes_in_interior() {
        let g = grid1(4.0, 0.5);
        let f = VectorField::from_fn(&g, |_| [2.0, -1.0, 0.5]);
        let lap = f.laplacian();
        for idx in 0..g.len() {
            if !g.is_boundary(idx) {
                assert_eq!(lap.values()[idx], [0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn laplacian_matches_discrete_eigenvalue_exactly() {
        let g = grid1(4.0, 0.1);
        let h = g.spacing();
        let k = PI / 8.0;
        let lam_h = (2.0 - 2.0 * (k * h).cos()) / (h * h);
        let f = mode1(&g);
        let lap = f.laplacian();
        for idx in 0..g.len() {
            if g.is_boundary(idx) {
                continue;
            }
            assert_relative_eq!(
                lap.values()[idx][0],
                -lam_h * f.values()[idx][0],
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn laplacian_consistency_is_second_order() {
        let lam = (PI / 8.0) * (PI / 8.0);
        let mut errs = Vec::new();
        for &h in &[0.2, 0.1, 0.05] {
            let g = grid1(4.0, h);
            let f = mode1(&g);
            let lap = f.laplacian();
            let mut worst: f64 = 0.0;
            for idx in 0..g.len() {
                let e = (lap.values()[idx][0] + lam * f.values()[idx][0]).abs();
                worst = worst.max(e);
            }
            errs.push(worst);
        }
        let s1 = (errs[0] / errs[1]).log2();
        let s2 = (errs[1] / errs[2]).log2();
        assert!((s1 - 2.0).abs() < 0.2, "slope {s1} from {errs:?}");
        assert!((s2 - 2.0).abs() < 0.2, "slope {s2} from {errs:?}");
    }

    #[test]
    fn gradient_is_exact_on_linear_fields() {
        let g = grid1(2.0, 0.25);
        let f = VectorField::from_fn(&g, |p| [3.0 * p[0] + 1.0, 0.0, -p[0]]);
        let grad = f.gradient();
        for idx in 0..g.len() {
            assert_relative_eq!(grad[0].values()[idx][0], 3.0, max_relative = 1e-12);
            assert_relative_eq!(grad[0].values()[idx][2], -1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_two_dim_axes_are_independent() {
        let g = Arc::new(Grid::new(2, 2.0, 0.25).unwrap());
        let f = VectorField::from_fn(&g, |p| [2.0 * p[0] - p[1], 0.0, 0.0]);
        let grad = f.gradient();
        for idx in 0..g.len() {
            assert_relative_eq!(grad[0].values()[idx][0], 2.0, max_relative = 1e-12);
            assert_relative_eq!(grad[1].values()[idx][0], -1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn norm_report_is_ordered() {
        for seed in 0..50 {
            let g = grid1(4.0, 0.1);
            let f = random_smooth_field(&g, seed, 0.8);
            let n = f.norms();
            assert!(n.h2 >= n.h1 && n.h1 >= n.l2, "{n:?}");
            assert!(n.l4 >= 0.0 && n.cross >= 0.0 && n.linf >= 0.0);
        }
    }

    /// Fine composite-trapezoid quadrature of a scalar function, used as
    /// the independent oracle for tail masses.
    fn fine_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for i in 1..steps {
            acc += f(a + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn gaussian_tail_mass_matches_fine_quadrature_oracle() {
        // u = exp(-x^2) e1 on [-4, 4]; the L2 tail past m = 2 integrates
        // exp(-2 x^2), whose closed form is sqrt(pi/2) erfc(2 sqrt 2)
        // = 7.9388030e-5 (truncation past |x| = 4 is ~2e-11 relative and
        // ignorable). The fine quadrature must reproduce that constant.
        let oracle_l2 = 2.0 * fine_quadrature(|x| (-2.0 * x * x).exp(), 2.0, 4.0, 200_000);
        assert_relative_eq!(oracle_l2, 7.9388030e-5, max_relative = 1e-6);

        let g = grid1(4.0, 0.05);
        let f = VectorField::from_fn(&g, |p| [(-p[0] * p[0]).exp(), 0.0, 0.0]);
        let tail = f.tail_mass(2.0, TailOrder::L2).unwrap();
        // The cut nodes sit exactly on |x| = m and carry full trapezoid
        // weight, overcounting h f(m) of integrand (h f(m)/2 per side);
        // composite-trapezoid curvature adds a few percent more. A factor
        // 1.5 on the leading term covers both.
        let cut_budget = 1.5 * g.spacing() * (-2.0 * 4.0f64).exp();
        assert!(
            (tail - oracle_l2).abs() <= cut_budget,
            "tail {tail} vs oracle {oracle_l2} (budget {cut_budget})"
        );

        // H1 order adds |u'|^2 = 4 x^2 exp(-2 x^2), so the integrand at
        // the cut is 17 exp(-8).
        let oracle_h1 = oracle_l2
            + 2.0 * fine_quadrature(|x| 4.0 * x * x * (-2.0 * x * x).exp(), 2.0, 4.0, 200_000);
        let tail_h1 = f.tail_mass(2.0, TailOrder::H1).unwrap();
        let cut_budget_h1 = 1.5 * g.spacing() * 17.0 * (-2.0 * 4.0f64).exp();
        assert!(
            (tail_h1 - oracle_h1).abs() <= cut_budget_h1,
            "tail {tail_h1} vs oracle {oracle_h1}"
        );
    }

    #[test]
    fn tail_mass_at_zero_equals_full_norm_and_outside_support_vanishes() {
        let g = grid1(4.0, 0.1);
        let f = random_smooth_field(&g, 3, 0.5);
        let full = f.tail_mass(0.0, TailOrder::L2).unwrap();
        assert_relative_eq!(full, f.norms().l2, max_relative = 1e-12);

        // A field supported in |x| <= 1 has no mass past m = 2.
        let bump = VectorField::from_fn(&g, |p| {
            let r = p[0].abs();
            if r < 1.0 {
                [(1.0 - r * r).powi(3), 0.0, 0.0]
            } else {
                [0.0, 0.0, 0.0]
            }
        });
        assert_eq!(bump.tail_mass(2.0, TailOrder::L2).unwrap(), 0.0);
    }

    #[test]
    fn tail_mass_rejects_radii_outside_grid() {
        let g = grid1(4.0, 0.1);
        let f = VectorField::zero(&g);
        assert!(f.tail_mass(4.0, TailOrder::L2).is_err());
        assert!(f.tail_mass(-1.0, TailOrder::L2).is_err());
    }

    #[test]
    fn tail_mass_is_monotone_in_radius() {
        let g = grid1(4.0, 0.1);
        let f = random_smooth_field(&g, 11, 0.7);
        let mut prev = f64::INFINITY;
        for &m in &[0.0, 1.0, 2.0, 3.0, 3.5] {
            let t = f.tail_mass(m, TailOrder::H1).unwrap();
            assert!(t <= prev + 1e-15);
            prev = t;
        }
    }

    #[test]
    fn embed_then_restrict_roundtrips() {
        let small = grid1(4.0, 0.5);
        let large = grid1(8.0, 0.5);
        let f = random_smooth_field(&small, 5, 0.9);
        let big = f.embed_into(&large).unwrap();
        assert_relative_eq!(big.norms().l2, f.norms().l2, max_relative = 1e-12);
        let back = big.restrict_to(&small).unwrap();
        for idx in 0..small.len() {
            assert_eq!(back.values()[idx], f.values()[idx]);
        }
    }

    #[test]
    fn integration_by_parts_defect_shrinks_linearly_or_better() {
        // <lap u, v> + <grad u, grad v> for Dirichlet fields is pure
        // quadrature error, bounded by C * h.
        let mut defects = Vec::new();
        for &h in &[0.2, 0.1, 0.05] {
            let g = grid1(4.0, h);
            let u = random_smooth_field(&g, 21, 1.0);
            let v = random_smooth_field(&g, 22, 1.0);
            let mut lhs = inner_product(&u.laplacian(), &v).unwrap();
            let (gu, gv) = (u.gradient(), v.gradient());
            for a in 0..gu.len() {
                lhs += inner_product(&gu[a], &gv[a]).unwrap();
            }
            defects.push(lhs.abs() / h);
        }
        // defect / h stays bounded as h shrinks.
        let cap = defects[0].max(1e-6) * 4.0;
        assert!(
            defects.iter().all(|d| *d <= cap),
            "defect/h grew: {defects:?}"
        );
    }

    #[test]
    fn sup_norm_interpolation_constant_is_near_one() {
        // |u|_inf <= c1 ||u||^(1/2) ||grad u||^(1/2) in one dimension.
        let g = grid1(4.0, 0.05);
        let mut worst: f64 = 0.0;
        for seed in 0..1000 {
            let f = random_smooth_field(&g, seed, 1.0);
            let n = f.norms();
            let grad = (n.h1 - n.l2).sqrt();
            let c = n.linf / (n.l2.sqrt() * grad).sqrt();
            worst = worst.max(c);
        }
        assert!(
            worst <= 1.05,
            "measured sup-norm interpolation constant {worst}"
        );
        assert!(worst >= 0.2, "corpus degenerate, constant {worst}");
    }

    #[test]
    fn l4_interpolation_constant_is_dimension_dependent() {
        // ||u||_L4 <= c ||grad u||^(d/4) ||u||^((4-d)/4).
        let g1 = grid1(4.0, 0.05);
        let mut worst1: f64 = 0.0;
        for seed in 0..1000 {
            let f = random_smooth_field(&g1, seed, 1.0);
            let n = f.norms();
            let grad = (n.h1 - n.l2).sqrt();
            let c = n.l4.powf(0.25) / (grad.powf(0.25) * n.l2.sqrt().powf(0.75));
            worst1 = worst1.max(c);
        }
        assert!(worst1 <= 1.05, "d=1 constant {worst1}");

        let g2 = Arc::new(Grid::new(2, 2.0, 0.125).unwrap());
        let mut worst2: f64 = 0.0;
        for seed in 0..200 {
            let f = random_smooth_field(&g2, seed, 1.0);
            let n = f.norms();
            let grad = (n.h1 - n.l2).sqrt();
            let c = n.l4.powf(0.25) / (grad.sqrt() * n.l2.sqrt().sqrt());
            worst2 = worst2.max(c);
        }
        assert!(worst2 <= 1.5, "d=2 constant {worst2}");
    }
}
