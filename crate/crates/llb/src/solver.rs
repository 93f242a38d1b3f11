//! Factorized solvers for the implicit half of the semi-implicit scheme.
//!
//! Each step treats the stiff linear drift `lap(u) - u` implicitly, which
//! means solving, per component,
//!
//! ```text
//! ((1 + dt) I - dt lap_h) x = b        on interior nodes, x = 0 on the boundary.
//! ```
//!
//! In one dimension the operator is a constant tridiagonal matrix and the
//! Thomas elimination coefficients are precomputed once. In two dimensions
//! the discrete Dirichlet Laplacian diagonalises exactly in the tensor
//! sine basis, so the solve is two dense sine transforms around a
//! pointwise division; the transform matrix is orthogonal and involutive.
//! Both paths are exact solves (up to rounding), built once per step size
//! and reused across the whole run.

use crate::field::VectorField;
use crate::grid::Grid;
use std::sync::Arc;

#[derive(Debug, Clone)]
enum Factor {
    Tridiag(Thomas),
    Sine2d(Sine2d),
}

#[derive(Debug, Clone)]
pub struct ImplicitSolver {
    dt: f64,
    factor: Factor,
}

impl ImplicitSolver {
    pub fn new(grid: &Arc<Grid>, dt: f64) -> ImplicitSolver {
        let factor = match grid.dim() {
            1 => Factor::Tridiag(Thomas::new(grid, dt)),
            _ => Factor::Sine2d(Sine2d::new(grid, dt)),
        };
        ImplicitSolver { dt, factor }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solve in place for all three components; the boundary layer of the
    /// output is zero.
    pub fn solve_in_place(&self, field: &mut VectorField) {
        match &self.factor {
            Factor::Tridiag(t) => t.solve(field),
            Factor::Sine2d(s) => s.solve(field),
        }
        field.zero_boundary();
    }
}

/// Constant-coefficient Thomas elimination for
/// `diag = 1 + dt + 2 dt / h^2`, `off = -dt / h^2` on the interior chain.
#[derive(Debug, Clone)]
struct Thomas {
    off: f64,
    /// Forward-eliminated superdiagonal `w_i`.
    w: Vec<f64>,
    /// Inverse pivots `1 / (diag - off * w_{i-1})`.
    inv: Vec<f64>,
}

impl Thomas {
    fn new(grid: &Arc<Grid>, dt: f64) -> Thomas {
        let h = grid.spacing();
        let n = grid.points_per_axis() - 2;
        let diag = 1.0 + dt + 2.0 * dt / (h * h);
        let off = -dt / (h * h);
        let mut w = Vec::with_capacity(n);
        let mut inv = Vec::with_capacity(n);
        let mut prev_w = 0.0;
        for _ in 0..n {
            let piv = 1.0 / (diag - off * prev_w);
            let wi = off * piv;
            inv.push(piv);
            w.push(wi);
            prev_w = wi;
        }
        Thomas { off, w, inv }
    }

    fn solve(&self, field: &mut VectorField) {
        let n = self.w.len();
        let data = field.values_mut();
        for a in 0..3 {
            // forward sweep over interior nodes 1..=n
            let mut prev = 0.0;
            for i in 0..n {
                let g = (data[i + 1][a] - self.off * prev) * self.inv[i];
                data[i + 1][a] = g;
                prev = g;
            }
            // back substitution
            let mut next = 0.0;
            for i in (0..n).rev() {
                let x = data[i + 1][a] - self.w[i] * next;
                data[i + 1][a] = x;
                next = x;
            }
        }
    }
}

/// Exact tensor solve in the discrete sine basis for two dimensions.
#[derive(Debug, Clone)]
struct Sine2d {
    /// Interior size per axis.
    n: usize,
    ppa: usize,
    /// Orthonormal sine matrix, row-major `n x n`; symmetric and involutive.
    s: Vec<f64>,
    /// `1 / (1 + dt + dt (mu_j + mu_k))` over interior mode pairs.
    inv_eigs: Vec<f64>,
}

impl Sine2d {
    fn new(grid: &Arc<Grid>, dt: f64) -> Sine2d {
        let intervals = grid.intervals();
        let n = intervals - 1;
        let h = grid.spacing();
        let scale = (2.0 / intervals as f64).sqrt();
        let mut s = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                s[j * n + i] = scale
                    * ((j + 1) as f64 * (i + 1) as f64 * std::f64::consts::PI
                        / intervals as f64)
                        .sin();
            }
        }
        // Discrete eigenvalues of -lap_h per axis.
        let mu: Vec<f64> = (0..n)
            .map(|j| {
                let t = ((j + 1) as f64 * std::f64::consts::PI / (2.0 * intervals as f64)).sin();
                4.0 * t * t / (h * h)
            })
            .collect();
        let mut inv_eigs = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                inv_eigs[j * n + k] = 1.0 / (1.0 + dt + dt * (mu[j] + mu[k]));
            }
        }
        Sine2d {
            n,
            ppa: grid.points_per_axis(),
            s,
            inv_eigs,
        }
    }

    /// `out = S * m * S` for a row-major `n x n` block, using that S is
    /// symmetric.
    fn sine_sandwich(&self, m: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        let n = self.n;
        // tmp = S * m
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += self.s[j * n + i] * m[i * n + k];
                }
                tmp[j * n + k] = acc;
            }
        }
        // out = tmp * S
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += tmp[j * n + i] * self.s[i * n + k];
                }
                out[j * n + k] = acc;
            }
        }
    }

    fn solve(&self, field: &mut VectorField) {
        let n = self.n;
        let ppa = self.ppa;
        let mut block = vec![0.0; n * n];
        let mut tmp = vec![0.0; n * n];
        let mut hat = vec![0.0; n * n];
        for a in 0..3 {
            {
                let data = field.values();
                for ix in 0..n {
                    for iy in 0..n {
                        block[ix * n + iy] = data[(ix + 1) * ppa + (iy + 1)][a];
                    }
                }
            }
            self.sine_sandwich(&block, &mut tmp, &mut hat);
            for (v, inv) in hat.iter_mut().zip(self.inv_eigs.iter()) {
                *v *= inv;
            }
            self.sine_sandwich(&hat, &mut tmp, &mut block);
            let data = field.values_mut();
            for ix in 0..n {
                for iy in 0..n {
                    data[(ix + 1) * ppa + (iy + 1)][a] = block[ix * n + iy];
                }
            }
        }
    }
}
