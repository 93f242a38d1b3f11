//! Observables, ensemble statistics, and empirical-measure tooling.
//!
//! A trajectory is summarised at sample times by an [`ObservableRecord`]:
//! the integral norms of the state plus its mass outside a ladder of
//! radii. Ensembles of such records feed three consumers:
//!
//! * the energy-balance audit, which checks the Ito identity
//!   `d/dt E||u||^2 + 2 E(||grad u||^2 + ||u||^2 + ||u||_{L4}^4)
//!    = eps^2 sum_k ||f_k||^2` against an explicit discretization budget;
//! * long-run empirical measures (uniform weights on pooled post-burn-in
//!   observable vectors) compared through a fixed bounded-Lipschitz
//!   dictionary;
//! * tightness profiles: high quantiles of the tail mass as a function of
//!   the tail radius.

use crate::error::LlbError;
use crate::field::{NormReport, TailOrder, VectorField};
use crate::noise::NoiseBasis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Multiplier on (Monte Carlo error + discretization budget) in the
/// energy-balance pass criterion.
const BALANCE_SIGMA_MULT: f64 = 3.0;
/// Weight of the `dt * mean ||u||_{H2}^2` term in the balance budget.
const BALANCE_TIME_BUDGET: f64 = 2.0;
/// Weight of the `h * mean ||grad u||^2` term in the balance budget.
const BALANCE_SPACE_BUDGET: f64 = 1.0;
/// Number of random clipped ramps in the bounded-Lipschitz dictionary,
/// on top of the per-coordinate ramps.
const BL_RANDOM_FUNCTIONALS: usize = 64;
/// Seed for the dictionary; fixed so every comparison uses the same
/// functionals and the distance is a genuine pseudometric.
const BL_DICTIONARY_SEED: u64 = 0x00b1_d1c7;
/// Quantile reported by the tightness profile.
const TIGHTNESS_QUANTILE: f64 = 0.95;

/// One sample of a trajectory: time, integral norms, and the mass of the
/// state outside each radius of the configured ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub norms: NormReport,
    /// `int_{|x| >= m} |u|^2` for each ladder radius `m`.
    pub tail_l2: Vec<f64>,
    /// Same with the gradient included.
    pub tail_h1: Vec<f64>,
}

/// Measure the state at time `t` against a ladder of tail radii.
pub fn observe(u: &VectorField, t: f64, ladder: &[f64]) -> Result<ObservableRecord, LlbError> {
    let norms = u.norms();
    let mut tail_l2 = Vec::with_capacity(ladder.len());
    let mut tail_h1 = Vec::with_capacity(ladder.len());
    for &m in ladder {
        tail_l2.push(u.tail_mass(m, TailOrder::L2)?);
        tail_h1.push(u.tail_mass(m, TailOrder::H1)?);
    }
    Ok(ObservableRecord {
        t,
        norms,
        tail_l2,
        tail_h1,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile (the common "type 7" definition) of an
/// unsorted, finite sample. `q` must lie in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> Result<f64, LlbError> {
    if xs.is_empty() {
        return Err(LlbError::EmptyInput("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(LlbError::invalid_parameter(
            "q",
            format!("quantile level must lie in [0, 1], got {q}"),
        ));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(LlbError::invalid_parameter("xs", "sample contains NaN"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        Ok(sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac)
    } else {
        Ok(sorted[lo])
    }
}

pub fn median(xs: &[f64]) -> Result<f64, LlbError> {
    quantile(xs, 0.5)
}

/// Sample standard deviation (denominator `n - 1`); zero for singletons.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Outcome of the energy-balance audit at the interior sample times.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    /// Interior sample times (the centred time derivative needs both
    /// neighbours).
    pub times: Vec<f64>,
    /// Ensemble mean of the balance residual at each interior time.
    pub mean_residual: Vec<f64>,
    /// Monte Carlo standard error of that mean.
    pub mc_sigma: Vec<f64>,
    /// Discretization budget:
    /// `2 dt <||u||_{H2}^2> + h <||grad u||^2>`.
    pub budget: Vec<f64>,
    /// Fraction of interior times where
    /// `|mean residual| <= 3 (sigma_MC + budget)`.
    pub pass_fraction: f64,
    /// Whether that fraction reached the required level.
    pub passed: bool,
}

/// Audit the energy balance over an ensemble sampled on a common time
/// mesh. `noise_power` is `eps^2 sum_k ||f_k||_{L2}^2` (see
/// [`noise_power`]), `dt` the integrator step, `spacing` the grid step,
/// and `required_fraction` the share of interior times that must pass.
pub fn energy_balance(
    ensemble: &[Vec<ObservableRecord>],
    noise_power: f64,
    dt: f64,
    spacing: f64,
    required_fraction: f64,
) -> Result<BalanceReport, LlbError> {
    if ensemble.is_empty() {
        return Err(LlbError::EmptyInput("energy balance needs trajectories".into()));
    }
    let len = ensemble[0].len();
    if len < 3 {
        return Err(LlbError::EmptyInput(
            "energy balance needs at least three sample times".into(),
        ));
    }
    let times: Vec<f64> = ensemble[0].iter().map(|r| r.t).collect();
    for records in ensemble {
        if records.len() != len {
            return Err(LlbError::invalid_parameter(
                "ensemble",
                "trajectories sampled at different numbers of times",
            ));
        }
        for (r, &t) in records.iter().zip(times.iter()) {
            if (r.t - t).abs() > 1e-9 * t.abs().max(1.0) {
                return Err(LlbError::invalid_parameter(
                    "ensemble",
                    "trajectories sampled at different times",
                ));
            }
        }
    }

    let m = ensemble.len();
    let mut out_times = Vec::with_capacity(len - 2);
    let mut mean_residual = Vec::with_capacity(len - 2);
    let mut mc_sigma = Vec::with_capacity(len - 2);
    let mut budget = Vec::with_capacity(len - 2);
    let mut passes = 0usize;
    for i in 1..len - 1 {
        let span = times[i + 1] - times[i - 1];
        if span <= 0.0 {
            return Err(LlbError::invalid_parameter(
                "ensemble",
                "sample times are not strictly increasing",
            ));
        }
        let mut residuals = Vec::with_capacity(m);
        let mut h2_sum = 0.0;
        let mut grad_sum = 0.0;
        for records in ensemble {
            let ddt = (records[i + 1].norms.l2 - records[i - 1].norms.l2) / span;
            let n = &records[i].norms;
            residuals.push(ddt + 2.0 * (n.h1 + n.l4) - noise_power);
            h2_sum += n.h2;
            grad_sum += n.h1 - n.l2;
        }
        let mu = mean(&residuals);
        let sigma = std_dev(&residuals) / (m as f64).sqrt();
        let b = BALANCE_TIME_BUDGET * dt * h2_sum / m as f64
            + BALANCE_SPACE_BUDGET * spacing * grad_sum / m as f64;
        if mu.abs() <= BALANCE_SIGMA_MULT * (sigma + b) {
            passes += 1;
        }
        out_times.push(times[i]);
        mean_residual.push(mu);
        mc_sigma.push(sigma);
        budget.push(b);
    }
    let pass_fraction = passes as f64 / (len - 2) as f64;
    Ok(BalanceReport {
        times: out_times,
        mean_residual,
        mc_sigma,
        budget,
        pass_fraction,
        passed: pass_fraction >= required_fraction,
    })
}

/// The constant injected by the noise into the energy balance:
/// `eps^2 sum_k ||f_k||_{L2}^2`.
pub fn noise_power(basis: &NoiseBasis) -> f64 {
    basis.intensity() * basis.intensity() * basis.sum_l2_sq()
}

/// Smallest `C` with `||u(t)||_{H1}^2 <= C (e^{-t} ||u(0)||_{H1}^2 + 1)`
/// along one recorded trajectory. Uniform-in-time dissipation shows up as
/// this constant staying bounded as the horizon and the initial size grow.
pub fn dissipation_envelope_constant(records: &[ObservableRecord]) -> Result<f64, LlbError> {
    let first = records
        .first()
        .ok_or_else(|| LlbError::EmptyInput("dissipation fit needs samples".into()))?;
    let h1_0 = first.norms.h1;
    let mut c: f64 = 0.0;
    for r in records {
        let envelope = (-(r.t - first.t)).exp() * h1_0 + 1.0;
        c = c.max(r.norms.h1 / envelope);
    }
    Ok(c)
}

/// A finitely supported measure with uniform weights on points of a fixed
/// dimension.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<EmpiricalMeasure, LlbError> {
        let dim = points
            .first()
            .ok_or_else(|| LlbError::EmptyInput("empirical measure needs points".into()))?
            .len();
        if dim == 0 {
            return Err(LlbError::EmptyInput("points must have coordinates".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(LlbError::invalid_parameter(
                    "points",
                    "points of mixed dimension",
                ));
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(LlbError::invalid_parameter(
                    "points",
                    "points must be finite",
                ));
            }
        }
        Ok(EmpiricalMeasure { dim, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn mean_of(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().map(|p| g(p)).sum::<f64>() / self.points.len() as f64
    }
}

/// The observable vector pooled into long-run empirical measures:
/// squared L2, H1, the quartic integral, the sup norm, then the H1 tail
/// ladder.
pub fn observable_vector(record: &ObservableRecord) -> Vec<f64> {
    let mut v = vec![
        record.norms.l2,
        record.norms.h1,
        record.norms.l4,
        record.norms.linf,
    ];
    v.extend_from_slice(&record.tail_h1);
    v
}

/// Pool every record with `t >= burn_in` across the ensemble into one
/// uniform-weight empirical measure, the time-averaged
/// (Krylov-Bogoliubov) construction.
pub fn kb_measure(
    ensemble: &[Vec<ObservableRecord>],
    burn_in: f64,
) -> Result<EmpiricalMeasure, LlbError> {
    let mut points = Vec::new();
    for records in ensemble {
        for r in records {
            if r.t >= burn_in - 1e-12 {
                points.push(observable_vector(r));
            }
        }
    }
    if points.is_empty() {
        return Err(LlbError::EmptyInput(format!(
            "no samples at or after the burn-in time {burn_in}"
        )));
    }
    EmpiricalMeasure::new(points)
}

/// One dictionary functional: `v -> clip(<v, direction> - offset)` with
/// the clip to `[-1/2, 1/2]`. Every such map is 1-Lipschitz and bounded
/// by 1/2.
struct ClippedRamp {
    direction: Vec<f64>,
    offset: f64,
}

impl ClippedRamp {
    fn eval(&self, v: &[f64]) -> f64 {
        let s: f64 = v.iter().zip(self.direction.iter()).map(|(a, b)| a * b).sum();
        (s - self.offset).clamp(-0.5, 0.5)
    }
}

/// The fixed dictionary for a given dimension: one axis ramp per
/// coordinate plus [`BL_RANDOM_FUNCTIONALS`] random unit directions with
/// random offsets, drawn from a hard-coded seed.
fn bl_dictionary(dim: usize) -> Vec<ClippedRamp> {
    let mut dict = Vec::with_capacity(dim + BL_RANDOM_FUNCTIONALS);
    for i in 0..dim {
        let mut direction = vec![0.0; dim];
        direction[i] = 1.0;
        dict.push(ClippedRamp {
            direction,
            offset: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BL_DICTIONARY_SEED);
    while dict.len() < dim + BL_RANDOM_FUNCTIONALS {
        let raw: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        let direction = raw.iter().map(|x| x / norm).collect();
        let offset = rng.random_range(-2.0..2.0);
        dict.push(ClippedRamp { direction, offset });
    }
    dict
}

/// Dictionary bounded-Lipschitz distance between two empirical measures:
/// the sup over the fixed dictionary of `|E_a g - E_b g|`.
///
/// Because the dictionary is fixed, data independent, and shared by every
/// call, this is an exact pseudometric (symmetric, triangle inequality to
/// rounding) and a lower bound on the true bounded-Lipschitz distance
/// over `{g : Lip(g) <= 1, |g| <= 1}`. For point masses that differ in a
/// single coordinate, with both values inside the clip window, the axis
/// ramp attains the exact distance `min(1, |a - b|)`.
pub fn bl_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64, LlbError> {
    if a.dim() != b.dim() {
        return Err(LlbError::invalid_parameter(
            "measures",
            format!("dimension mismatch: {} vs {}", a.dim(), b.dim()),
        ));
    }
    let mut best: f64 = 0.0;
    for g in bl_dictionary(a.dim()) {
        let gap = (a.mean_of(|p| g.eval(p)) - b.mean_of(|p| g.eval(p))).abs();
        best = best.max(gap);
    }
    Ok(best)
}

/// For each ladder index, the high quantile (95th percentile) of the H1
/// tail mass over all post-burn-in samples. A profile that decays along
/// the ladder, uniformly over runs, is the practical tightness
/// certificate.
pub fn tightness_profile(
    ensemble: &[Vec<ObservableRecord>],
    burn_in: f64,
) -> Result<Vec<f64>, LlbError> {
    let ladder_len = ensemble
        .first()
        .and_then(|records| records.first())
        .map(|r| r.tail_h1.len())
        .ok_or_else(|| LlbError::EmptyInput("tightness profile needs records".into()))?;
    let mut profile = Vec::with_capacity(ladder_len);
    for k in 0..ladder_len {
        let mut samples = Vec::new();
        for records in ensemble {
            for r in records {
                if r.t >= burn_in - 1e-12 {
                    if r.tail_h1.len() != ladder_len {
                        return Err(LlbError::invalid_parameter(
                            "ensemble",
                            "records carry tail ladders of different lengths",
                        ));
                    }
                    samples.push(r.tail_h1[k]);
                }
            }
        }
        if samples.is_empty() {
            return Err(LlbError::EmptyInput(format!(
                "no samples at or after the burn-in time {burn_in}"
            )));
        }
        profile.push(quantile(&samples, TIGHTNESS_QUANTILE)?);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth_field;
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn record(t: f64, l2: f64, h1: f64, h2: f64, l4: f64, tails: &[f64]) -> ObservableRecord {
        ObservableRecord {
            t,
            norms: NormReport {
                l2,
                h1,
                h2,
                l4,
                linf: l2.sqrt(),
                cross: 0.0,
            },
            tail_l2: tails.to_vec(),
            tail_h1: tails.to_vec(),
        }
    }

    #[test]
    fn observe_reports_time_and_ladder() {
        let grid = Arc::new(Grid::new(1, 4.0, 0.1).unwrap());
        let u = random_smooth_field(&grid, 1, 1.0);
        let rec = observe(&u, 2.5, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(rec.t, 2.5);
        assert_eq!(rec.tail_l2.len(), 3);
        assert_eq!(rec.tail_h1.len(), 3);
        assert!(rec.tail_h1[0] >= rec.tail_h1[2]);
        assert!(rec.norms.h1 >= rec.norms.l2);
    }

    #[test]
    fn quantile_and_median_basics() {
        let xs = [3.0, 1.0, 2.0];
        assert_eq!(median(&xs).unwrap(), 2.0);
        assert_eq!(quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&xs, 1.0).unwrap(), 3.0);
        assert_relative_eq!(quantile(&xs, 0.25).unwrap(), 1.5);
        let even = [4.0, 1.0, 3.0, 2.0];
        assert_relative_eq!(median(&even).unwrap(), 2.5);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&xs, 1.5).is_err());
        assert!(quantile(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn std_dev_matches_hand_value() {
        assert_eq!(std_dev(&[5.0]), 0.0);
        assert_relative_eq!(std_dev(&[1.0, 2.0, 3.0]), 1.0);
    }

    /// Linear mass decay with constant `h1 + l4`, tuned so the residual is
    /// exactly zero: d/dt l2 = -0.02 and 2 (h1 + l4) = 1.1 against a noise
    /// power of 1.08. The norms stay physically ordered (h2 >= h1 >= l2).
    fn balanced_trajectory() -> Vec<ObservableRecord> {
        (0..6)
            .map(|i| {
                let t = i as f64 * 0.1;
                let l2 = 0.4 - 0.02 * t;
                record(t, l2, l2 + 0.05, l2 + 0.15, 0.55 - (l2 + 0.05), &[0.0])
            })
            .collect()
    }

    #[test]
    fn exact_synthetic_balance_passes_everywhere() {
        let ensemble: Vec<_> = (0..4).map(|_| balanced_trajectory()).collect();
        let report = energy_balance(&ensemble, 1.08, 1e-3, 0.05, 0.95).unwrap();
        assert!(report.passed);
        assert_eq!(report.pass_fraction, 1.0);
        assert_eq!(report.times.len(), 4);
        for r in &report.mean_residual {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn corrupted_sample_time_fails_the_balance() {
        let mut ensemble: Vec<_> = (0..4).map(|_| balanced_trajectory()).collect();
        for records in ensemble.iter_mut() {
            records[3].norms.l2 += 10.0;
        }
        let report = energy_balance(&ensemble, 1.08, 1e-3, 0.05, 0.95).unwrap();
        assert!(!report.passed);
        assert!(report.pass_fraction < 0.95);
    }

    #[test]
    fn balance_rejects_mismatched_meshes() {
        let tails = [0.0];
        let a = vec![
            record(0.0, 1.0, 0.3, 0.4, 0.2, &tails),
            record(0.1, 1.0, 0.3, 0.4, 0.2, &tails),
            record(0.2, 1.0, 0.3, 0.4, 0.2, &tails),
        ];
        let mut b = a.clone();
        b[1].t = 0.15;
        assert!(energy_balance(&[a.clone(), b], 0.0, 1e-3, 0.05, 0.95).is_err());
        let short = a[..2].to_vec();
        assert!(energy_balance(&[a, short], 0.0, 1e-3, 0.05, 0.95).is_err());
    }

    #[test]
    fn dissipation_constant_tracks_the_envelope() {
        // Exactly the envelope decay: constant stays at most ~1.
        let decaying: Vec<_> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.1;
                record(t, 1.0, 4.0 * (-2.0 * t).exp(), 1.0, 0.0, &[0.0])
            })
            .collect();
        let c = dissipation_envelope_constant(&decaying).unwrap();
        assert!(c <= 1.0 + 1e-12, "constant {c}");

        // A plateau at height 3 forces the constant up to ~3.
        let flat: Vec<_> = (0..50)
            .map(|i| record(i as f64 * 0.2, 1.0, 3.0, 1.0, 0.0, &[0.0]))
            .collect();
        let c = dissipation_envelope_constant(&flat).unwrap();
        assert!(c > 2.9 && c <= 3.0 + 1e-12, "constant {c}");
    }

    fn point_mass(v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(vec![v.to_vec()]).unwrap()
    }

    #[test]
    fn bl_distance_between_in_window_point_masses_is_exact() {
        let a = point_mass(&[0.3, 0.0, 0.0]);
        let b = point_mass(&[0.1, 0.0, 0.0]);
        let d = bl_distance(&a, &b).unwrap();
        assert_relative_eq!(d, 0.2, max_relative = 1e-12);

        // Far-apart masses saturate the clip at exactly 1.
        let far_a = point_mass(&[-5.0, 0.0]);
        let far_b = point_mass(&[5.0, 0.0]);
        assert_relative_eq!(bl_distance(&far_a, &far_b).unwrap(), 1.0);
    }

    #[test]
    fn bl_distance_is_a_pseudometric() {
        let mk = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<Vec<f64>> = (0..40)
                .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            EmpiricalMeasure::new(points).unwrap()
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        assert_eq!(bl_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(bl_distance(&a, &b).unwrap(), bl_distance(&b, &a).unwrap());
        let (ab, bc, ac) = (
            bl_distance(&a, &b).unwrap(),
            bl_distance(&b, &c).unwrap(),
            bl_distance(&a, &c).unwrap(),
        );
        assert!(ac <= ab + bc + 1e-12, "{ac} > {ab} + {bc}");
        assert!(ab > 0.0);
        assert!(ab <= 1.0);
    }

    #[test]
    fn bl_distance_rejects_dimension_mismatch() {
        let a = point_mass(&[0.0, 0.0]);
        let b = point_mass(&[0.0, 0.0, 0.0]);
        assert!(bl_distance(&a, &b).is_err());
    }

    #[test]
    fn empirical_measure_validates_input() {
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![]]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn kb_measure_pools_only_post_burn_in_samples() {
        let tails = [0.5, 0.1];
        let records: Vec<_> = (0..10)
            .map(|i| record(i as f64, 1.0, 2.0, 3.0, 0.5, &tails))
            .collect();
        let ensemble = vec![records.clone(), records];
        let mu = kb_measure(&ensemble, 4.0).unwrap();
        // Times 4..=9 survive in each of the two trajectories.
        assert_eq!(mu.len(), 12);
        assert_eq!(mu.dim(), 4 + tails.len());
        assert!(kb_measure(&ensemble, 100.0).is_err());
    }

    #[test]
    fn tightness_profile_is_monotone_for_monotone_tails() {
        let records: Vec<_> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.5;
                let base = 1.0 + 0.1 * (i as f64).sin();
                record(
                    t,
                    1.0,
                    2.0,
                    3.0,
                    0.5,
                    &[base, base * 0.3, base * 0.05],
                )
            })
            .collect();
        let profile = tightness_profile(&[records], 2.0).unwrap();
        assert_eq!(profile.len(), 3);
        assert!(profile[0] > profile[1] && profile[1] > profile[2]);
    }
}
