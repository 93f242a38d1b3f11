//! The experiment runners behind the command-line laboratory.
//!
//! Each [`ExperimentKind`](crate::config::ExperimentKind) maps to one
//! runner that validates its configuration, does the compute (spreading
//! trajectories over the rayon pool), and returns a serializable report.
//! Reports are summaries — ensemble means, audits, medians, distances —
//! not raw trajectories, so they stay small no matter the run size.
//!
//! Every runner is deterministic for a fixed configuration: trajectories
//! draw from per-id counter streams and results are reduced in id order,
//! so the thread count never changes the output.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::cutoff::CutoffProfile;
use crate::error::LlbError;
use crate::expansion::run_expansion;
use crate::field::random_smooth_field;
use crate::grid::Grid;
use crate::integrator::{run_ensemble, simulate_coupled, simulate_pair, CoupledRun};
use crate::measure::{
    dissipation_envelope_constant, energy_balance, kb_measure, mean, median, noise_power,
    tightness_profile, BalanceReport,
};
use crate::noise::{build_basis, quadratic_variation_check, NoisePreset};
use crate::oracle::{oracle_compare, LinearOracle, OracleComparison};
use crate::report::{CsvRender, CsvRow};
use crate::vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Tail-mass level used when a report quotes a certified tail radius.
const REPORT_TAIL_THRESHOLD: f64 = 1e-2;

/// Run one experiment. `threads` caps the worker pool (`None` uses the
/// global default); results do not depend on it.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport, LlbError> {
    cfg.validate()?;
    match threads {
        None => run_inner(cfg),
        Some(t) => {
            if t == 0 {
                return Err(LlbError::invalid_parameter(
                    "threads",
                    "thread count must be at least 1",
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| LlbError::invalid_parameter("threads", e.to_string()))?
                .install(|| run_inner(cfg))
        }
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentReport, LlbError> {
    match cfg.kind {
        ExperimentKind::Ensemble => run_ensemble_experiment(cfg).map(ExperimentReport::Ensemble),
        ExperimentKind::Oracle => run_oracle_experiment(cfg).map(ExperimentReport::Oracle),
        ExperimentKind::Expand => run_expand_experiment(cfg).map(ExperimentReport::Expand),
        ExperimentKind::Sweep => run_sweep_experiment(cfg).map(ExperimentReport::Sweep),
        ExperimentKind::Identities => run_identity_experiment(cfg).map(ExperimentReport::Identities),
        ExperimentKind::Continuity => run_continuity_experiment(cfg).map(ExperimentReport::Continuity),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ExperimentReport {
    Ensemble(EnsembleReport),
    Oracle(OracleReport),
    Expand(ExpandReport),
    Sweep(SweepReport),
    Identities(IdentitiesReport),
    Continuity(ContinuityReport),
}

impl ExperimentReport {
    /// File stem for the report, by convention the experiment name.
    pub fn stem(&self) -> &'static str {
        match self {
            ExperimentReport::Ensemble(_) => "ensemble",
            ExperimentReport::Oracle(_) => "oracle",
            ExperimentReport::Expand(_) => "expand",
            ExperimentReport::Sweep(_) => "sweep",
            ExperimentReport::Identities(_) => "identities",
            ExperimentReport::Continuity(_) => "continuity",
        }
    }

    /// A pass/fail verdict, for the experiments that carry one.
    pub fn verdict(&self) -> Option<bool> {
        match self {
            ExperimentReport::Identities(r) => Some(r.all_passed),
            _ => None,
        }
    }
}

impl CsvRender for ExperimentReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        match self {
            ExperimentReport::Ensemble(r) => r.csv_rows(),
            ExperimentReport::Oracle(r) => r.csv_rows(),
            ExperimentReport::Expand(r) => r.csv_rows(),
            ExperimentReport::Sweep(r) => r.csv_rows(),
            ExperimentReport::Identities(r) => r.csv_rows(),
            ExperimentReport::Continuity(r) => r.csv_rows(),
        }
    }
}

// ---------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub trajectories: usize,
    pub times: Vec<f64>,
    pub mean_l2: Vec<f64>,
    pub mean_h1: Vec<f64>,
    pub mean_l4: Vec<f64>,
    pub mean_linf: Vec<f64>,
    pub balance: BalanceReport,
    pub ladder: Vec<f64>,
    /// 95th percentile of the post-burn-in H1 tail mass, per ladder radius.
    pub tightness: Vec<f64>,
    /// Largest dissipation envelope constant over the ensemble.
    pub dissipation_constant: f64,
    /// Number of pooled occupation-measure samples past the burn-in.
    pub kb_samples: usize,
    pub burn_in: f64,
}

fn run_ensemble_experiment(cfg: &ExperimentConfig) -> Result<EnsembleReport, LlbError> {
    let grid = cfg.sim.grid()?;
    let u0 = cfg.init.build(&grid)?;
    let ensemble = run_ensemble(&cfg.sim, &u0, cfg.ensemble_size)?;
    let basis = build_basis(&grid, cfg.sim.modes, cfg.sim.preset, cfg.sim.intensity)?;
    let balance = energy_balance(
        &ensemble,
        noise_power(&basis),
        cfg.sim.dt,
        cfg.sim.spacing,
        cfg.balance_fraction,
    )?;
    let tightness = tightness_profile(&ensemble, cfg.burn_in)?;
    let kb = kb_measure(&ensemble, cfg.burn_in)?;
    let mut dissipation_constant: f64 = 0.0;
    for records in &ensemble {
        dissipation_constant = dissipation_constant.max(dissipation_envelope_constant(records)?);
    }
    let times: Vec<f64> = ensemble[0].iter().map(|r| r.t).collect();
    let series = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
        (0..times.len())
            .map(|i| {
                let xs: Vec<f64> = (0..ensemble.len()).map(|j| f(j, i)).collect();
                mean(&xs)
            })
            .collect()
    };
    Ok(EnsembleReport {
        trajectories: cfg.ensemble_size,
        mean_l2: series(&|j, i| ensemble[j][i].norms.l2),
        mean_h1: series(&|j, i| ensemble[j][i].norms.h1),
        mean_l4: series(&|j, i| ensemble[j][i].norms.l4),
        mean_linf: series(&|j, i| ensemble[j][i].norms.linf),
        times,
        balance,
        ladder: cfg.sim.m_ladder.clone(),
        tightness,
        dissipation_constant,
        kb_samples: kb.len(),
        burn_in: cfg.burn_in,
    })
}

impl CsvRender for EnsembleReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            rows.push(CsvRow::series(t, "mean_l2", self.mean_l2[i]));
            rows.push(CsvRow::series(t, "mean_h1", self.mean_h1[i]));
            rows.push(CsvRow::series(t, "mean_l4", self.mean_l4[i]));
            rows.push(CsvRow::series(t, "mean_linf", self.mean_linf[i]));
        }
        for (i, &t) in self.balance.times.iter().enumerate() {
            rows.push(CsvRow::series(t, "balance_mean_residual", self.balance.mean_residual[i]));
            rows.push(CsvRow::series(t, "balance_mc_sigma", self.balance.mc_sigma[i]));
            rows.push(CsvRow::series(t, "balance_budget", self.balance.budget[i]));
        }
        for (k, &m) in self.ladder.iter().enumerate() {
            rows.push(CsvRow::scalar(format!("tail_q95_m{m}"), self.tightness[k]));
        }
        rows.push(CsvRow::scalar("balance_pass_fraction", self.balance.pass_fraction));
        rows.push(CsvRow::scalar("balance_passed", f64::from(u8::from(self.balance.passed))));
        rows.push(CsvRow::scalar("dissipation_constant", self.dissipation_constant));
        rows.push(CsvRow::scalar("kb_samples", self.kb_samples as f64));
        rows.push(CsvRow::scalar("trajectories", self.trajectories as f64));
        rows
    }
}

// ---------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub trajectories: usize,
    pub burn_in: f64,
    pub comparisons: Vec<OracleComparison>,
    pub worst_rel_error: f64,
}

fn run_oracle_experiment(cfg: &ExperimentConfig) -> Result<OracleReport, LlbError> {
    let comparisons = oracle_compare(
        &cfg.sim,
        cfg.oracle_modes,
        cfg.oracle_trajectories,
        cfg.burn_in,
    )?;
    let worst_rel_error = comparisons.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(OracleReport {
        trajectories: cfg.oracle_trajectories,
        burn_in: cfg.burn_in,
        comparisons,
        worst_rel_error,
    })
}

impl CsvRender for OracleReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for (i, c) in self.comparisons.iter().enumerate() {
            rows.push(CsvRow::scalar(format!("mode{i}_lambda"), c.lambda));
            rows.push(CsvRow::scalar(format!("mode{i}_predicted"), c.predicted));
            rows.push(CsvRow::scalar(format!("mode{i}_empirical"), c.empirical));
            rows.push(CsvRow::scalar(format!("mode{i}_rel_error"), c.rel_error));
        }
        rows.push(CsvRow::scalar("worst_rel_error", self.worst_rel_error));
        rows.push(CsvRow::scalar("trajectories", self.trajectories as f64));
        rows
    }
}

// ---------------------------------------------------------------------
// Expand
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExpandPairSummary {
    pub small: f64,
    pub large: f64,
    pub median_gap: f64,
    pub gaps_by_seed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandReport {
    pub radii: Vec<f64>,
    pub seeds: usize,
    pub ladder: Vec<f64>,
    pub pairs: Vec<ExpandPairSummary>,
    /// `[radius][ladder]` mean over seeds of the sup-in-time H1 tail.
    pub tail_sup_mean: Vec<Vec<f64>>,
    /// Smallest ladder radius certified below the reporting threshold
    /// uniformly over the domain radii, if any.
    pub certified_tail_radius: Option<f64>,
    pub tail_threshold: f64,
}

fn run_expand_experiment(cfg: &ExperimentConfig) -> Result<ExpandReport, LlbError> {
    let base_grid = Arc::new(Grid::new(
        cfg.sim.dim,
        cfg.expand_radii.first().copied().unwrap_or(cfg.sim.radius),
        cfg.sim.spacing,
    )?);
    let u0 = cfg.init.build(&base_grid)?;
    let report = run_expansion(&cfg.sim, &cfg.expand_radii, cfg.expand_seeds, &u0)?;
    let pairs = report
        .pairs
        .iter()
        .map(|p| {
            Ok(ExpandPairSummary {
                small: p.small,
                large: p.large,
                median_gap: p.median_gap()?,
                gaps_by_seed: p.sup_gap_by_seed.clone(),
            })
        })
        .collect::<Result<Vec<_>, LlbError>>()?;
    Ok(ExpandReport {
        radii: report.radii.clone(),
        seeds: report.seeds,
        ladder: report.ladder.clone(),
        pairs,
        certified_tail_radius: report.uniform_tail_radius(REPORT_TAIL_THRESHOLD),
        tail_sup_mean: report.tail_sup_mean,
        tail_threshold: REPORT_TAIL_THRESHOLD,
    })
}

impl CsvRender for ExpandReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for (i, p) in self.pairs.iter().enumerate() {
            rows.push(CsvRow::scalar(format!("pair{i}_small"), p.small));
            rows.push(CsvRow::scalar(format!("pair{i}_large"), p.large));
            rows.push(CsvRow::scalar(format!("pair{i}_median_gap"), p.median_gap));
        }
        for (r, &radius) in self.radii.iter().enumerate() {
            for (k, &m) in self.ladder.iter().enumerate() {
                rows.push(CsvRow::scalar(
                    format!("radius{radius}_tail_sup_mean_m{m}"),
                    self.tail_sup_mean[r][k],
                ));
            }
        }
        if let Some(m) = self.certified_tail_radius {
            rows.push(CsvRow::scalar("certified_tail_radius", m));
        }
        rows.push(CsvRow::scalar("seeds", self.seeds as f64));
        rows
    }
}

// ---------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepDeltaReport {
    pub delta: f64,
    pub intensity: f64,
    /// Median over trajectories of `sup_t ||u_eps - u_base||_{H1}`.
    pub median_sup_h1_gap: f64,
    pub mean_sup_h1_gap: f64,
    /// Dictionary bounded-Lipschitz distance between the occupation
    /// measures at the two intensities.
    pub bl_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub base: f64,
    pub trajectories: usize,
    pub burn_in: f64,
    pub deltas: Vec<SweepDeltaReport>,
    /// Least-squares slope of `ln(median gap)` against `ln(delta)`;
    /// absent when fewer than two deltas or a zero gap make it undefined.
    pub gap_slope: Option<f64>,
}

fn run_sweep_experiment(cfg: &ExperimentConfig) -> Result<SweepReport, LlbError> {
    let grid = cfg.sim.grid()?;
    let u0 = cfg.init.build(&grid)?;
    let mut eps_list = vec![cfg.sweep_base];
    eps_list.extend(cfg.sweep_deltas.iter().map(|d| cfg.sweep_base + d));
    let count = cfg.sweep_trajectories;

    let serial = std::env::var("LLB_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
    let runs: Vec<CoupledRun> = if serial {
        (0..count as u64)
            .map(|id| simulate_coupled(&cfg.sim, &u0, &eps_list, id))
            .collect::<Result<_, _>>()?
    } else {
        (0..count as u64)
            .into_par_iter()
            .map(|id| simulate_coupled(&cfg.sim, &u0, &eps_list, id))
            .collect::<Result<_, _>>()?
    };

    // Pool records per intensity for the occupation measures.
    let mut per_eps: Vec<Vec<_>> = (0..eps_list.len()).map(|_| Vec::with_capacity(count)).collect();
    let mut gaps: Vec<Vec<f64>> = vec![Vec::with_capacity(count); cfg.sweep_deltas.len()];
    for run in runs {
        for (k, recs) in run.records.into_iter().enumerate() {
            per_eps[k].push(recs);
        }
        for p in &run.pairs {
            if p.i == 0 {
                gaps[p.j - 1].push(p.sup_h1);
            }
        }
    }
    let base_measure = kb_measure(&per_eps[0], cfg.burn_in)?;
    let mut deltas = Vec::with_capacity(cfg.sweep_deltas.len());
    for (j, &delta) in cfg.sweep_deltas.iter().enumerate() {
        let other = kb_measure(&per_eps[j + 1], cfg.burn_in)?;
        deltas.push(SweepDeltaReport {
            delta,
            intensity: eps_list[j + 1],
            median_sup_h1_gap: median(&gaps[j])?,
            mean_sup_h1_gap: mean(&gaps[j]),
            bl_distance: crate::measure::bl_distance(&base_measure, &other)?,
        });
    }
    let gap_slope = fit_log_slope(
        &deltas.iter().map(|d| d.delta).collect::<Vec<_>>(),
        &deltas.iter().map(|d| d.median_sup_h1_gap).collect::<Vec<_>>(),
    );
    Ok(SweepReport {
        base: cfg.sweep_base,
        trajectories: count,
        burn_in: cfg.burn_in,
        deltas,
        gap_slope,
    })
}

/// Least-squares slope of `ln y` against `ln x`; `None` when fewer than
/// two points or any value is nonpositive.
fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

impl CsvRender for SweepReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for (i, d) in self.deltas.iter().enumerate() {
            rows.push(CsvRow::scalar(format!("delta{i}"), d.delta));
            rows.push(CsvRow::scalar(format!("delta{i}_intensity"), d.intensity));
            rows.push(CsvRow::scalar(format!("delta{i}_median_sup_h1_gap"), d.median_sup_h1_gap));
            rows.push(CsvRow::scalar(format!("delta{i}_mean_sup_h1_gap"), d.mean_sup_h1_gap));
            rows.push(CsvRow::scalar(format!("delta{i}_bl_distance"), d.bl_distance));
        }
        if let Some(s) = self.gap_slope {
            rows.push(CsvRow::scalar("gap_slope", s));
        }
        rows.push(CsvRow::scalar("base_intensity", self.base));
        rows.push(CsvRow::scalar("trajectories", self.trajectories as f64));
        rows
    }
}

// ---------------------------------------------------------------------
// Identities
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct IdentityFamilyReport {
    pub name: String,
    pub samples: usize,
    pub worst_residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitiesReport {
    pub families: Vec<IdentityFamilyReport>,
    pub all_passed: bool,
}

fn run_identity_experiment(cfg: &ExperimentConfig) -> Result<IdentitiesReport, LlbError> {
    let samples = cfg.identity_samples;
    let mut families = Vec::new();
    let mut push = |name: &str, n: usize, worst: f64, threshold: f64| {
        families.push(IdentityFamilyReport {
            name: name.to_string(),
            samples: n,
            worst_residual: worst,
            threshold,
            passed: worst <= threshold,
        });
    };

    // Quadratic-variation cancellation of the noise on random states,
    // over both presets and a range of amplitudes.
    {
        let grid = Arc::new(Grid::new(1, 4.0, 0.25)?);
        let amps = [0.3, 1.0, 3.0];
        let mut worst: f64 = 0.0;
        for s in 0..samples as u64 {
            let preset = if s % 2 == 0 { NoisePreset::Bumps } else { NoisePreset::Fourier };
            let basis = build_basis(&grid, 8, preset, 1.0)?;
            let u = random_smooth_field(&grid, s, amps[(s % 3) as usize]);
            worst = worst.max(quadratic_variation_check(&u, &basis)?);
        }
        push("quadratic_variation", samples, worst, 1e-10);
    }

    // The plateau and its complement partition unity exactly, and both
    // stay inside [0, 1].
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0_ffee);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let scale = rng.random_range(1.0..32.0);
            let point = [
                rng.random_range(-2.0 * scale..2.0 * scale),
                rng.random_range(-2.0 * scale..2.0 * scale),
            ];
            let theta = CutoffProfile::theta(scale)?.value(point);
            let phi = CutoffProfile::phi(scale)?.value(point);
            let partition = (theta + phi - 1.0).abs();
            let range = (-theta).max(theta - 1.0).max(-phi).max(phi - 1.0).max(0.0);
            worst = worst.max(partition).max(range);
        }
        push("cutoff_partition", samples, worst, 1e-15);
    }

    // <a x b, b> = 0 and <(a x b) x b, a> = -|a x b|^2, pointwise.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        let mut worst_triple: f64 = 0.0;
        let mut worst_contraction: f64 = 0.0;
        for _ in 0..samples {
            let mut draw = || -> [f64; 3] {
                [
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ]
            };
            let (a, b) = (draw(), draw());
            let cross = vec3::cross(a, b);
            let scale = 1.0 + vec3::norm(a) * vec3::norm_sq(b);
            worst_triple = worst_triple.max(vec3::dot(cross, b).abs() / scale);
            let contraction = vec3::dot(vec3::double_cross(a, b), a) + vec3::norm_sq(cross);
            worst_contraction = worst_contraction.max(contraction.abs() / scale);
        }
        push("triple_product", samples, worst_triple, 1e-12);
        push("double_cross_contraction", samples, worst_contraction, 1e-12);
    }

    // Discrete sine orthonormality on both supported dimensions.
    {
        let g1 = Arc::new(Grid::new(1, 4.0, 0.25)?);
        let g2 = Arc::new(Grid::new(2, 2.0, 0.25)?);
        let defect = LinearOracle::new(&g1, 5)?
            .orthonormality_defect()
            .max(LinearOracle::new(&g2, 4)?.orthonormality_defect());
        push("eigen_orthonormality", 2, defect, 1e-10);
    }

    let all_passed = families.iter().all(|f| f.passed);
    Ok(IdentitiesReport {
        families,
        all_passed,
    })
}

impl CsvRender for IdentitiesReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for f in &self.families {
            rows.push(CsvRow::scalar(format!("{}_worst_residual", f.name), f.worst_residual));
            rows.push(CsvRow::scalar(format!("{}_threshold", f.name), f.threshold));
            rows.push(CsvRow::scalar(
                format!("{}_passed", f.name),
                f64::from(u8::from(f.passed)),
            ));
        }
        rows.push(CsvRow::scalar("all_passed", f64::from(u8::from(self.all_passed))));
        rows
    }
}

// ---------------------------------------------------------------------
// Continuity
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityDeltaReport {
    pub delta: f64,
    /// `||u_a(0) - u_b(0)||_{L2}` after the plateau cut.
    pub initial_gap: f64,
    /// Mean over trajectories of `sup_t ||u_a - u_b||_{L2}`.
    pub mean_sup_gap: f64,
    /// Mean over trajectories of `sup_t ||u_a - u_b||_{H1}`.
    pub mean_sup_h1_gap: f64,
    /// `mean_sup_gap / initial_gap`.
    pub amplification: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub trajectories: usize,
    pub deltas: Vec<ContinuityDeltaReport>,
    /// Largest over smallest amplification across the deltas; near 1
    /// when the response to the initial gap is linear.
    pub amplification_spread: f64,
}

fn run_continuity_experiment(cfg: &ExperimentConfig) -> Result<ContinuityReport, LlbError> {
    let grid = cfg.sim.grid()?;
    let u0 = cfg.init.build(&grid)?;
    let direction = random_smooth_field(&grid, cfg.init.seed.wrapping_add(1), 1.0);
    let count = cfg.continuity_trajectories;
    let serial = std::env::var("LLB_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);

    let mut deltas = Vec::with_capacity(cfg.continuity_deltas.len());
    for &delta in &cfg.continuity_deltas {
        let mut perturbed = u0.clone();
        perturbed.add_scaled(&direction, delta);
        let runs: Vec<_> = if serial {
            (0..count as u64)
                .map(|id| simulate_pair(&cfg.sim, &u0, &perturbed, id))
                .collect::<Result<_, _>>()?
        } else {
            (0..count as u64)
                .into_par_iter()
                .map(|id| simulate_pair(&cfg.sim, &u0, &perturbed, id))
                .collect::<Result<_, _>>()?
        };
        let initial_gap = runs[0].diff0_l2_sq.sqrt();
        if initial_gap <= 0.0 {
            return Err(LlbError::invalid_parameter(
                "continuity.deltas",
                format!("perturbation of size {delta} vanishes after the plateau cut"),
            ));
        }
        let sup_gaps: Vec<f64> = runs.iter().map(|r| r.sup_diff_l2_sq.sqrt()).collect();
        let sup_h1: Vec<f64> = runs.iter().map(|r| r.sup_diff_h1_sq.sqrt()).collect();
        let mean_sup_gap = mean(&sup_gaps);
        deltas.push(ContinuityDeltaReport {
            delta,
            initial_gap,
            mean_sup_gap,
            mean_sup_h1_gap: mean(&sup_h1),
            amplification: mean_sup_gap / initial_gap,
        });
    }
    let lo = deltas.iter().map(|d| d.amplification).fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().map(|d| d.amplification).fold(0.0f64, f64::max);
    Ok(ContinuityReport {
        trajectories: count,
        deltas,
        amplification_spread: hi / lo,
    })
}

impl CsvRender for ContinuityReport {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for (i, d) in self.deltas.iter().enumerate() {
            rows.push(CsvRow::scalar(format!("delta{i}"), d.delta));
            rows.push(CsvRow::scalar(format!("delta{i}_initial_gap"), d.initial_gap));
            rows.push(CsvRow::scalar(format!("delta{i}_mean_sup_gap"), d.mean_sup_gap));
            rows.push(CsvRow::scalar(format!("delta{i}_mean_sup_h1_gap"), d.mean_sup_h1_gap));
            rows.push(CsvRow::scalar(format!("delta{i}_amplification"), d.amplification));
        }
        rows.push(CsvRow::scalar("amplification_spread", self.amplification_spread));
        rows.push(CsvRow::scalar("trajectories", self.trajectories as f64));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitConfig, InitKind};
    use crate::report::render_csv;

    /// A small but complete configuration that runs in well under a
    /// second per experiment.
    fn quick_cfg(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.kind = kind;
        cfg.sim.spacing = 0.1;
        cfg.sim.horizon = 0.5;
        cfg.sim.stride = 10;
        cfg.sim.modes = 4;
        cfg.sim.m_ladder = vec![1.0, 2.0, 3.0];
        cfg.burn_in = 0.2;
        cfg.ensemble_size = 4;
        cfg.oracle_trajectories = 4;
        cfg.oracle_modes = 2;
        cfg.expand_seeds = 2;
        cfg.sweep_trajectories = 4;
        cfg.sweep_deltas = vec![0.2, 0.1];
        cfg.identity_samples = 50;
        cfg.continuity_deltas = vec![0.2, 0.02];
        cfg.continuity_trajectories = 4;
        cfg
    }

    #[test]
    fn ensemble_report_has_consistent_series_and_audit() {
        let report = run(&quick_cfg(ExperimentKind::Ensemble), None).unwrap();
        let ExperimentReport::Ensemble(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.times.len(), r.mean_l2.len());
        assert_eq!(r.balance.times.len(), r.times.len() - 2);
        assert_eq!(r.tightness.len(), 3);
        assert!(r.kb_samples > 0);
        assert!(r.dissipation_constant > 0.0);
        assert!(report.verdict().is_none());
        let csv = render_csv(&report.csv_rows());
        assert!(csv.contains("mean_l2"));
        assert!(csv.contains("balance_pass_fraction"));
    }

    #[test]
    fn oracle_report_round_trips_through_runner() {
        let mut cfg = quick_cfg(ExperimentKind::Oracle);
        cfg.sim.preset = NoisePreset::Fourier;
        cfg.sim.intensity = 1.0;
        cfg.sim.spacing = 0.25;
        cfg.sim.dt = 0.01;
        cfg.sim.horizon = 4.0;
        cfg.burn_in = 1.0;
        let report = run(&cfg, None).unwrap();
        let ExperimentReport::Oracle(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.comparisons.len(), 2);
        assert!(r.worst_rel_error >= 0.0);
        assert_eq!(report.stem(), "oracle");
    }

    #[test]
    fn expand_report_summarises_pairs_and_tails() {
        let report = run(&quick_cfg(ExperimentKind::Expand), None).unwrap();
        let ExperimentReport::Expand(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].gaps_by_seed.len(), 2);
        assert_eq!(r.tail_sup_mean.len(), 2);
    }

    #[test]
    fn sweep_report_orders_gaps_by_delta() {
        let report = run(&quick_cfg(ExperimentKind::Sweep), None).unwrap();
        let ExperimentReport::Sweep(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.deltas.len(), 2);
        // Larger intensity offsets open larger path gaps.
        assert!(r.deltas[0].median_sup_h1_gap > r.deltas[1].median_sup_h1_gap);
        assert!(r.gap_slope.is_some());
        for d in &r.deltas {
            assert!(d.bl_distance >= 0.0 && d.bl_distance <= 1.0);
        }
    }

    #[test]
    fn identities_pass_and_gate_the_verdict() {
        let report = run(&quick_cfg(ExperimentKind::Identities), None).unwrap();
        assert_eq!(report.verdict(), Some(true));
        let ExperimentReport::Identities(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.families.len(), 5);
        for f in &r.families {
            assert!(f.passed, "{} at {}", f.name, f.worst_residual);
        }
    }

    #[test]
    fn continuity_amplification_is_stable_across_scales() {
        let mut cfg = quick_cfg(ExperimentKind::Continuity);
        cfg.init = InitConfig {
            kind: InitKind::Bump,
            amplitude: 0.4,
            mode: 1,
            seed: 9,
        };
        let report = run(&cfg, None).unwrap();
        let ExperimentReport::Continuity(r) = &report else {
            panic!("wrong report type")
        };
        assert_eq!(r.deltas.len(), 2);
        // Initial gaps scale exactly linearly with delta (the cut is
        // linear), so the spread measures genuine dynamical nonlinearity.
        let ratio = r.deltas[0].initial_gap / r.deltas[1].initial_gap;
        approx::assert_relative_eq!(ratio, 10.0, max_relative = 1e-9);
        assert!(r.amplification_spread < 3.0, "spread {}", r.amplification_spread);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = quick_cfg(ExperimentKind::Ensemble);
        let a = run(&cfg, Some(1)).unwrap();
        let b = run(&cfg, Some(4)).unwrap();
        let (ExperimentReport::Ensemble(ra), ExperimentReport::Ensemble(rb)) = (&a, &b) else {
            panic!("wrong report types")
        };
        assert_eq!(ra.mean_l2, rb.mean_l2);
        assert_eq!(ra.balance.mean_residual, rb.balance.mean_residual);
        assert_eq!(ra.tightness, rb.tightness);
    }

    #[test]
    fn invalid_configurations_are_rejected_before_compute() {
        let mut cfg = quick_cfg(ExperimentKind::Ensemble);
        cfg.sim.intensity = 1.5;
        let err = run(&cfg, None).unwrap_err();
        assert!(err.to_string().contains("[0, 1]"));

        let mut cfg = quick_cfg(ExperimentKind::Sweep);
        cfg.sweep_base = 0.99;
        assert!(run(&cfg, None).is_err());
    }
}
