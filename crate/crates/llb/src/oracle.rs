//! Closed-form validation against the linear degeneration.
//!
//! With the precession, the cubic damping, and the transport part of the
//! noise all switched off, the integrator runs
//!
//! ```text
//! du = (lap(u) - u) dt + eps sum_k f_k dW_k
//! ```
//!
//! on the same code path as the full equation. Projected onto a Dirichlet
//! eigenfunction `e_j` (eigenvalue `lambda_j`), each component performs an
//! Ornstein-Uhlenbeck process with rate `lambda_j + 1` and forcing
//! `eps <f_k, e_j>`, whose stationary variance is
//!
//! ```text
//! v_j = eps^2 sum_k |<f_k, e_j>|^2 / (2 (lambda_j + 1)).
//! ```
//!
//! The oracle builds the eigenfunctions on the grid (sine modes, exactly
//! orthonormal under the trapezoid inner product by discrete sine
//! orthogonality), computes `v_j` from quadrature projections, and
//! compares against the empirical variance of a simulated ensemble. Any
//! systematic error in the noise scaling, the time stepping, or the
//! quadrature shows up as a mismatch here before the nonlinear runs are
//! trusted.

use crate::error::LlbError;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::integrator::{SimConfig, TrajectoryDriver};
use crate::noise::{build_basis, NoiseBasis, TrajectoryRng};
use crate::vec3::Vec3;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// A mode is declared under-resolved when `lambda h^2` exceeds this;
/// beyond it the discrete eigenvalue no longer tracks the continuum one.
const RESOLUTION_LIMIT: f64 = 0.5;

/// One Dirichlet eigenpair sampled on the grid.
#[derive(Debug, Clone)]
pub struct OracleMode {
    /// Continuum eigenvalue `(j pi / 2n)^2` (summed over axes in d = 2).
    pub lambda: f64,
    /// 1-based sine indices per axis; the second entry is 0 in d = 1.
    pub indices: [usize; 2],
    /// Scalar eigenfunction values, normalized to unit quadrature norm.
    shape: Vec<f64>,
}

/// The sorted family of the lowest `count` eigenpairs on a grid.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    grid: Arc<Grid>,
    modes: Vec<OracleMode>,
}

/// Sine value `sin(pi j i / m)` with exact zeros at the endpoints.
fn axis_sine(j: usize, i: usize, m: usize) -> f64 {
    if i == 0 || i == m {
        0.0
    } else {
        (PI * j as f64 * i as f64 / m as f64).sin()
    }
}

impl LinearOracle {
    pub fn new(grid: &Arc<Grid>, count: usize) -> Result<LinearOracle, LlbError> {
        if count == 0 {
            return Err(LlbError::EmptyInput("oracle needs at least one mode".into()));
        }
        let m = grid.intervals();
        let axis_cap = m - 1;
        let n = grid.radius();
        let axis_lambda = |j: usize| {
            let k = j as f64 * PI / (2.0 * n);
            k * k
        };
        let mut modes = Vec::new();
        match grid.dim() {
            1 => {
                if count > axis_cap {
                    return Err(LlbError::invalid_parameter(
                        "oracle.modes",
                        format!(
                            "grid with {m} intervals resolves at most {axis_cap} sine modes, asked for {count}"
                        ),
                    ));
                }
                // ||sin_j||^2 = h sum_i sin^2(pi j i / m) = h m / 2 = n,
                // exactly, so 1/sqrt(n) normalizes.
                let scale = 1.0 / n.sqrt();
                for j in 1..=count {
                    let shape = (0..grid.len())
                        .map(|idx| scale * axis_sine(j, grid.axis_indices(idx)[0], m))
                        .collect();
                    modes.push(OracleMode {
                        lambda: axis_lambda(j),
                        indices: [j, 0],
                        shape,
                    });
                }
            }
            2 => {
                // Any of the `count` lowest tensor eigenvalues has both
                // axis indices at most `count`, so that square of
                // candidates (capped at the grid's resolution) suffices.
                let cap = count.min(axis_cap);
                if count > cap * cap {
                    return Err(LlbError::invalid_parameter(
                        "oracle.modes",
                        format!(
                            "grid with {m} intervals per axis resolves at most {} tensor modes, asked for {count}",
                            cap * cap
                        ),
                    ));
                }
                let mut candidates = Vec::with_capacity(cap * cap);
                for j in 1..=cap {
                    for k in 1..=cap {
                        candidates.push((axis_lambda(j) + axis_lambda(k), j, k));
                    }
                }
                candidates.sort_by(|a, b| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
                });
                let scale = 1.0 / n;
                for &(lambda, j, k) in candidates.iter().take(count) {
                    let shape = (0..grid.len())
                        .map(|idx| {
                            let [ix, iy] = grid.axis_indices(idx);
                            scale * axis_sine(j, ix, m) * axis_sine(k, iy, m)
                        })
                        .collect();
                    modes.push(OracleMode {
                        lambda,
                        indices: [j, k],
                        shape,
                    });
                }
            }
            d => {
                return Err(LlbError::InvalidGrid(format!(
                    "oracle supports dimensions 1 and 2, got {d}"
                )))
            }
        }
        Ok(LinearOracle {
            grid: grid.clone(),
            modes,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn modes(&self) -> &[OracleMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest deviation of the quadrature Gram matrix from the identity.
    /// Discrete sine orthogonality makes this rounding-level on any grid.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ma) in self.modes.iter().enumerate() {
            for (b, mb) in self.modes.iter().enumerate().skip(a) {
                let mut ip = 0.0;
                for idx in 0..self.grid.len() {
                    ip += self.grid.quad_weight(idx) * ma.shape[idx] * mb.shape[idx];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Quadrature projections of each component of `u` onto one mode.
    pub fn project(&self, u: &VectorField, mode: usize) -> Result<Vec3, LlbError> {
        if u.grid() != self.grid.as_ref() {
            return Err(LlbError::GridMismatch(
                "field does not live on the oracle's grid".into(),
            ));
        }
        let shape = &self.modes[mode].shape;
        let mut out = [0.0; 3];
        for idx in 0..self.grid.len() {
            let w = self.grid.quad_weight(idx) * shape[idx];
            let v = u.values()[idx];
            out[0] += w * v[0];
            out[1] += w * v[1];
            out[2] += w * v[2];
        }
        Ok(out)
    }

    /// The mode as a vector field along one component axis; handy both
    /// as structured initial data and as a hand-built noise mode.
    pub fn eigenmode_field(&self, mode: usize, component: usize) -> Result<VectorField, LlbError> {
        if component >= 3 {
            return Err(LlbError::invalid_parameter(
                "component",
                format!("component must be 0, 1, or 2, got {component}"),
            ));
        }
        let shape = &self.modes[mode].shape;
        let mut f = VectorField::zero(&self.grid);
        for (slot, &s) in f.values_mut().iter_mut().zip(shape.iter()) {
            slot[component] = s;
        }
        Ok(f)
    }

    fn check_resolved(&self, mode: usize) -> Result<(), LlbError> {
        let lambda = self.modes[mode].lambda;
        let h = self.grid.spacing();
        if lambda * h * h > RESOLUTION_LIMIT {
            return Err(LlbError::invalid_parameter(
                "oracle.modes",
                format!(
                    "mode {:?} with eigenvalue {lambda:.4} is under-resolved at spacing {h} \
                     (lambda h^2 = {:.3} > {RESOLUTION_LIMIT})",
                    self.modes[mode].indices,
                    lambda * h * h
                ),
            ));
        }
        Ok(())
    }

    /// Closed-form stationary variance of the projection onto one mode
    /// (summed over the three components) under the linear degeneration
    /// driven by `basis`.
    pub fn stationary_variance(&self, basis: &NoiseBasis, mode: usize) -> Result<f64, LlbError> {
        if basis.grid_arc().as_ref() != self.grid.as_ref() {
            return Err(LlbError::GridMismatch(
                "noise basis does not live on the oracle's grid".into(),
            ));
        }
        self.check_resolved(mode)?;
        let lambda = self.modes[mode].lambda;
        let eps = basis.intensity();
        let mut forcing = 0.0;
        for nm in basis.modes() {
            let g = self.project(&nm.shape, mode)?;
            forcing += g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        }
        Ok(eps * eps * forcing / (2.0 * (lambda + 1.0)))
    }
}

/// Predicted versus simulated stationary variance for one mode.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub indices: [usize; 2],
    pub lambda: f64,
    pub predicted: f64,
    pub empirical: f64,
    /// `|empirical - predicted| / predicted`, or the absolute empirical
    /// value when the prediction is exactly zero.
    pub rel_error: f64,
}

/// Per-trajectory accumulator for the pooled projection statistics.
struct ProjectionSums {
    sum: Vec<Vec3>,
    sum_sq: Vec<Vec3>,
    count: usize,
}

fn trajectory_sums(
    cfg: &SimConfig,
    oracle: &LinearOracle,
    burn_in: f64,
    traj_id: u64,
) -> Result<ProjectionSums, LlbError> {
    let mut driver = TrajectoryDriver::new(cfg)?;
    let grid = driver.grid().clone();
    let mut u = VectorField::zero(&grid);
    let mut rng = TrajectoryRng::new(cfg.seed, traj_id);
    let n = cfg.n_steps();
    let mut acc = ProjectionSums {
        sum: vec![[0.0; 3]; oracle.len()],
        sum_sq: vec![[0.0; 3]; oracle.len()],
        count: 0,
    };
    for step in 1..=n {
        let t_before = (step - 1) as f64 * cfg.dt;
        driver.step(&mut u, t_before, &mut rng)?;
        let t = step as f64 * cfg.dt;
        if step % cfg.stride == 0 && t >= burn_in - 1e-12 {
            for j in 0..oracle.len() {
                let p = oracle.project(&u, j)?;
                for a in 0..3 {
                    acc.sum[j][a] += p[a];
                    acc.sum_sq[j][a] += p[a] * p[a];
                }
            }
            acc.count += 1;
        }
    }
    Ok(acc)
}

/// Run the linear degeneration of `cfg` from zero initial data over an
/// ensemble, pool the post-burn-in eigenmode projections, and compare
/// their empirical variances (summed over components, centred) against
/// the closed form. Whatever terms `cfg` enables, the run here always
/// uses the linear flags.
pub fn oracle_compare(
    cfg: &SimConfig,
    oracle_modes: usize,
    trajectories: usize,
    burn_in: f64,
) -> Result<Vec<OracleComparison>, LlbError> {
    if trajectories == 0 {
        return Err(LlbError::EmptyInput("oracle run needs trajectories".into()));
    }
    let lin = cfg.linearised();
    lin.validate()?;
    if !(0.0..lin.horizon).contains(&burn_in) {
        return Err(LlbError::invalid_parameter(
            "oracle.burn_in",
            format!(
                "burn-in {burn_in} must lie in [0, {}) to leave averaging time",
                lin.horizon
            ),
        ));
    }
    let grid = lin.grid()?;
    let oracle = LinearOracle::new(&grid, oracle_modes)?;
    let basis = build_basis(&grid, lin.modes, lin.preset, lin.intensity)?;
    let predicted: Vec<f64> = (0..oracle.len())
        .map(|j| oracle.stationary_variance(&basis, j))
        .collect::<Result<_, _>>()?;

    let serial = std::env::var("LLB_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
    let per_traj: Vec<ProjectionSums> = if serial {
        (0..trajectories as u64)
            .map(|id| trajectory_sums(&lin, &oracle, burn_in, id))
            .collect::<Result<_, _>>()?
    } else {
        (0..trajectories as u64)
            .into_par_iter()
            .map(|id| trajectory_sums(&lin, &oracle, burn_in, id))
            .collect::<Result<_, _>>()?
    };

    let total: usize = per_traj.iter().map(|a| a.count).sum();
    if total == 0 {
        return Err(LlbError::EmptyInput(
            "no samples survived the burn-in; extend the horizon or shrink the stride".into(),
        ));
    }
    let mut out = Vec::with_capacity(oracle.len());
    for j in 0..oracle.len() {
        let mut empirical = 0.0;
        for a in 0..3 {
            let mut s = 0.0;
            let mut ss = 0.0;
            for acc in &per_traj {
                s += acc.sum[j][a];
                ss += acc.sum_sq[j][a];
            }
            let mean = s / total as f64;
            empirical += ss / total as f64 - mean * mean;
        }
        let rel_error = if predicted[j] > 0.0 {
            (empirical - predicted[j]).abs() / predicted[j]
        } else {
            empirical.abs()
        };
        out.push(OracleComparison {
            indices: oracle.modes()[j].indices,
            lambda: oracle.modes()[j].lambda,
            predicted: predicted[j],
            empirical,
            rel_error,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::TermFlags;
    use crate::noise::NoisePreset;
    use approx::assert_relative_eq;

    fn grid1(radius: f64, spacing: f64) -> Arc<Grid> {
        Arc::new(Grid::new(1, radius, spacing).unwrap())
    }

    #[test]
    fn one_dim_modes_are_exactly_orthonormal() {
        let g = grid1(4.0, 0.05);
        let oracle = LinearOracle::new(&g, 8).unwrap();
        assert!(oracle.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn two_dim_tensor_modes_are_exactly_orthonormal_and_sorted() {
        let g = Arc::new(Grid::new(2, 2.0, 0.1).unwrap());
        let oracle = LinearOracle::new(&g, 6).unwrap();
        assert!(oracle.orthonormality_defect() <= 1e-10);
        for w in oracle.modes().windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
        }
        // The ground mode is (1, 1) with lambda = 2 (pi / 2n)^2.
        assert_eq!(oracle.modes()[0].indices, [1, 1]);
        let k = PI / 4.0;
        assert_relative_eq!(oracle.modes()[0].lambda, 2.0 * k * k, max_relative = 1e-12);
    }

    #[test]
    fn ground_eigenvalue_matches_the_closed_form() {
        let g = grid1(4.0, 0.25);
        let oracle = LinearOracle::new(&g, 1).unwrap();
        let k = PI / 8.0;
        assert_relative_eq!(oracle.modes()[0].lambda, k * k, max_relative = 1e-12);
        // The rate constant that the decay and variance tests hinge on.
        assert_relative_eq!(oracle.modes()[0].lambda + 1.0, 1.15421, max_relative = 1e-4);
    }

    #[test]
    fn unit_eigenmode_noise_recovers_the_closed_form_variance() {
        let g = grid1(4.0, 0.25);
        let oracle = LinearOracle::new(&g, 1).unwrap();
        let f1 = oracle.eigenmode_field(0, 0).unwrap();
        let basis = NoiseBasis::from_modes(vec![f1], 1.0).unwrap();
        let v = oracle.stationary_variance(&basis, 0).unwrap();
        let lambda = oracle.modes()[0].lambda;
        assert_relative_eq!(v, 1.0 / (2.0 * (lambda + 1.0)), max_relative = 1e-10);
    }

    #[test]
    fn fourier_preset_projects_diagonally() {
        let g = grid1(4.0, 0.05);
        let oracle = LinearOracle::new(&g, 6).unwrap();
        let basis = build_basis(&g, 6, NoisePreset::Fourier, 1.0).unwrap();
        for (k, nm) in basis.modes().iter().enumerate() {
            let mode_index = k + 1;
            for j in 0..oracle.len() {
                let p = oracle.project(&nm.shape, j).unwrap();
                let total = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if oracle.modes()[j].indices[0] == mode_index {
                    // 2^{-k} sin_k projects onto sin_k/sqrt(n) with size
                    // 2^{-k} sqrt(n).
                    let expect = 0.5f64.powi(mode_index as i32) * g.radius().sqrt();
                    assert_relative_eq!(total, expect, max_relative = 1e-10);
                } else {
                    assert!(
                        total <= 1e-10,
                        "mode {mode_index} leaked {total} onto {:?}",
                        oracle.modes()[j].indices
                    );
                }
            }
        }
    }

    #[test]
    fn under_resolved_modes_are_rejected() {
        let g = grid1(4.0, 1.0);
        // Mode 7 exists (intervals - 1 = 7) but lambda h^2 = 7.55 >> 0.5.
        let oracle = LinearOracle::new(&g, 7).unwrap();
        let basis = build_basis(&g, 2, NoisePreset::Fourier, 1.0).unwrap();
        assert!(oracle.stationary_variance(&basis, 6).is_err());
        assert!(oracle.stationary_variance(&basis, 0).is_ok());
        // Asking past the grid's mode capacity fails outright.
        assert!(LinearOracle::new(&g, 8).is_err());
    }

    #[test]
    fn linear_ensemble_matches_the_stationary_variances() {
        let cfg = SimConfig {
            radius: 4.0,
            spacing: 0.25,
            dt: 0.01,
            horizon: 30.0,
            stride: 10,
            preset: NoisePreset::Fourier,
            modes: 6,
            intensity: 1.0,
            seed: 11,
            terms: TermFlags::full(), // linearised internally
            ..SimConfig::default()
        };
        let report = oracle_compare(&cfg, 3, 48, 3.0).unwrap();
        for cmp in &report {
            assert!(
                cmp.rel_error <= 0.2,
                "mode {:?}: predicted {} vs empirical {} (rel {})",
                cmp.indices,
                cmp.predicted,
                cmp.empirical,
                cmp.rel_error
            );
        }
        // The ground-mode prediction itself has a closed form:
        // (2^{-1})^2 n / (2 (lambda_1 + 1)).
        let lambda = report[0].lambda;
        assert_relative_eq!(
            report[0].predicted,
            0.25 * 4.0 / (2.0 * (lambda + 1.0)),
            max_relative = 1e-10
        );
    }
}
