//! Time integration of the field equation.
//!
//! The default scheme is semi-implicit: the stiff linear drift
//! `lap(u) - u` is absorbed into a factorized constant solve
//! `((1+dt) I - dt lap_h)`, while the bounded drift terms
//!
//! ```text
//! u x lap(u)  -  |u|^2 u  +  (eps^2/2) sum_k (u x f_k) x f_k
//! ```
//!
//! are applied explicitly at the current state and the noise enters as a
//! plain Euler-Maruyama kick. The boundary layer is re-zeroed after every
//! update. A fully explicit variant exists behind a stability guard
//! (`dt <= h^2 / (2 d safety)`).
//!
//! If a candidate update leaves the finite range or exceeds the sup-norm
//! ceiling, the step is retried on two half steps whose increments come
//! from a Brownian bridge split of the already drawn increment, so the
//! underlying Wiener path is unchanged. Six levels of halving are allowed
//! before the trajectory is declared blown up.
//!
//! Every trajectory draws from its own counter-seeded stream keyed by
//! `(seed, trajectory id)`; ensembles therefore produce bit-identical
//! results whether they run serially or over a thread pool.

use crate::cutoff::CutoffProfile;
use crate::error::LlbError;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::measure::{observe, ObservableRecord};
use crate::noise::{
    build_basis, diffusion, ito_correction, NoiseBasis, NoisePreset, TrajectoryRng,
    WienerIncrement, WienerPath,
};
use crate::solver::ImplicitSolver;
use crate::vec3;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Substep depth budget before a trajectory is declared blown up.
const MAX_SUBSTEP_DEPTH: usize = 6;

/// Relative tolerance for "does dt tile the horizon" checks.
const TILING_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    SemiImplicit,
    Explicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SemiImplicit => "semi-implicit",
            Scheme::Explicit => "explicit",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "semi-implicit" => Some(Scheme::SemiImplicit),
            "explicit" => Some(Scheme::Explicit),
            _ => None,
        }
    }
}

/// Switches for the three terms beyond the linear skeleton. All on is the
/// full equation; all off degenerates to the linear Ornstein-Uhlenbeck
/// system `du = (lap(u) - u) dt + eps sum_k f_k dW_k` on the same code
/// path, which is what the closed-form oracle validates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TermFlags {
    /// Precession `u x lap(u)`.
    pub cross_term: bool,
    /// Cubic damping `-|u|^2 u` (the linear `-u` part always stays on).
    pub cubic_term: bool,
    /// Transport part `u x f_k` of the noise, plus its Ito correction.
    pub multiplicative_noise: bool,
}

impl TermFlags {
    pub fn full() -> TermFlags {
        TermFlags {
            cross_term: true,
            cubic_term: true,
            multiplicative_noise: true,
        }
    }

    pub fn linear() -> TermFlags {
        TermFlags {
            cross_term: false,
            cubic_term: false,
            multiplicative_noise: false,
        }
    }
}

/// Everything one trajectory needs to run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dim: usize,
    pub radius: f64,
    pub spacing: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Steps between observable records.
    pub stride: usize,
    pub scheme: Scheme,
    pub preset: NoisePreset,
    /// Number of noise modes kept.
    pub modes: usize,
    /// Noise intensity `eps` in `[0, 1]`.
    pub intensity: f64,
    pub seed: u64,
    /// Sup-norm ceiling that triggers local step halving.
    pub linf_ceiling: f64,
    /// Safety factor (>= 1) in the explicit stability guard.
    pub safety: f64,
    pub terms: TermFlags,
    /// Tail radii recorded with every observable sample.
    pub m_ladder: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            dim: 1,
            radius: 4.0,
            spacing: 0.05,
            dt: 1e-3,
            horizon: 5.0,
            stride: 10,
            scheme: Scheme::SemiImplicit,
            preset: NoisePreset::Bumps,
            modes: 16,
            intensity: 0.5,
            seed: 1,
            linf_ceiling: 10.0,
            safety: 1.0,
            terms: TermFlags::full(),
            m_ladder: vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), LlbError> {
        Grid::new(self.dim, self.radius, self.spacing)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LlbError::invalid_parameter(
                "sim.dt",
                format!("step size must be positive and finite, got {}", self.dt),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(LlbError::invalid_parameter(
                "sim.horizon",
                format!("horizon must be nonnegative, got {}", self.horizon),
            ));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > TILING_RTOL * ratio.max(1.0) {
            return Err(LlbError::invalid_parameter(
                "sim.dt",
                format!(
                    "step size {} does not tile the horizon {} (ratio {ratio})",
                    self.dt, self.horizon
                ),
            ));
        }
        if self.stride == 0 {
            return Err(LlbError::invalid_parameter("sim.stride", "stride must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.intensity) || !self.intensity.is_finite() {
            return Err(LlbError::invalid_parameter(
                "noise.intensity",
                format!("noise intensity must lie in [0, 1], got {}", self.intensity),
            ));
        }
        if self.modes == 0 {
            return Err(LlbError::invalid_parameter(
                "noise.modes",
                "at least one noise mode is required",
            ));
        }
        if !(self.linf_ceiling.is_finite() && self.linf_ceiling > 0.0) {
            return Err(LlbError::invalid_parameter(
                "sim.linf_ceiling",
                format!("ceiling must be positive, got {}", self.linf_ceiling),
            ));
        }
        if self.scheme == Scheme::Explicit {
            if self.safety < 1.0 {
                return Err(LlbError::invalid_parameter(
                    "sim.safety",
                    format!("explicit safety factor must be >= 1, got {}", self.safety),
                ));
            }
            let cap = self.spacing * self.spacing / (2.0 * self.dim as f64 * self.safety);
            if self.dt > cap {
                return Err(LlbError::invalid_parameter(
                    "sim.dt",
                    format!(
                        "explicit scheme stability guard: dt must satisfy dt <= h^2/(2 d safety) = {cap:.3e}, got {}",
                        self.dt
                    ),
                ));
            }
        }
        let mut prev = -1.0;
        for &m in &self.m_ladder {
            if !(m.is_finite() && m >= 0.0 && m < self.radius) {
                return Err(LlbError::invalid_parameter(
                    "measure.ladder",
                    format!("tail radius {m} must lie in [0, {})", self.radius),
                ));
            }
            if m <= prev {
                return Err(LlbError::invalid_parameter(
                    "measure.ladder",
                    "tail radii must be strictly increasing",
                ));
            }
            prev = m;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, LlbError> {
        Ok(Arc::new(Grid::new(self.dim, self.radius, self.spacing)?))
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Copy with the linear degeneration switched on.
    pub fn linearised(&self) -> SimConfig {
        let mut c = self.clone();
        c.terms = TermFlags::linear();
        c
    }
}

/// Full drift at a state: `lap(u) - u` plus whatever terms the flags keep.
pub fn drift(u: &VectorField, basis: &NoiseBasis, terms: TermFlags) -> Result<VectorField, LlbError> {
    let lap = u.laplacian();
    let mut out = nonstiff_drift(u, &lap, basis, terms)?;
    out.add_scaled(&lap, 1.0);
    out.add_scaled(u, -1.0);
    if !out.is_finite() {
        return Err(LlbError::Blowup {
            t: f64::NAN,
            message: "drift produced non-finite values".into(),
        });
    }
    Ok(out)
}

/// The explicitly treated drift terms (everything except `lap(u) - u`).
fn nonstiff_drift(
    u: &VectorField,
    lap: &VectorField,
    basis: &NoiseBasis,
    terms: TermFlags,
) -> Result<VectorField, LlbError> {
    let mut out = VectorField::zero(u.grid_arc());
    if terms.cross_term || terms.cubic_term {
        for (i, slot) in out.values_mut().iter_mut().enumerate() {
            let ui = u.values()[i];
            if terms.cross_term {
                let c = vec3::cross(ui, lap.values()[i]);
                slot[0] += c[0];
                slot[1] += c[1];
                slot[2] += c[2];
            }
            if terms.cubic_term {
                let s = vec3::norm_sq(ui);
                slot[0] -= s * ui[0];
                slot[1] -= s * ui[1];
                slot[2] -= s * ui[2];
            }
        }
    }
    if terms.multiplicative_noise && basis.intensity() > 0.0 {
        let corr = ito_correction(u, basis)?;
        out.add_scaled(&corr, 1.0);
    }
    Ok(out)
}

/// Shared per-trajectory machinery: grid, noise basis, and one factorized
/// solver per substep depth (built on demand).
pub struct TrajectoryDriver {
    cfg: SimConfig,
    grid: Arc<Grid>,
    basis: Arc<NoiseBasis>,
    solvers: Vec<ImplicitSolver>,
}

impl TrajectoryDriver {
    pub fn new(cfg: &SimConfig) -> Result<TrajectoryDriver, LlbError> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let basis = Arc::new(build_basis(&grid, cfg.modes, cfg.preset, cfg.intensity)?);
        Ok(TrajectoryDriver {
            cfg: cfg.clone(),
            grid,
            basis,
            solvers: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn basis(&self) -> &Arc<NoiseBasis> {
        &self.basis
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Cut the initial state by the plateau profile at the grid radius and
    /// enforce the boundary condition.
    pub fn prepare_initial(&self, u0: &VectorField) -> Result<VectorField, LlbError> {
        if u0.grid() != self.grid.as_ref() {
            return Err(LlbError::GridMismatch(
                "initial data does not live on the run's grid".into(),
            ));
        }
        let profile = CutoffProfile::theta(self.grid.radius())?;
        let mut u = crate::cutoff::apply_cutoff(u0, &profile);
        u.zero_boundary();
        Ok(u)
    }

    fn solver(&mut self, depth: usize) -> &ImplicitSolver {
        while self.solvers.len() <= depth {
            let dt = self.cfg.dt / (1u64 << self.solvers.len()) as f64;
            self.solvers.push(ImplicitSolver::new(&self.grid, dt));
        }
        &self.solvers[depth]
    }

    /// One candidate update over `dt_local` with a given increment.
    fn advance_once(
        &mut self,
        u: &VectorField,
        dt_local: f64,
        dw: &WienerIncrement,
        depth: usize,
    ) -> Result<VectorField, LlbError> {
        let lap = u.laplacian();
        let explicit = nonstiff_drift(u, &lap, &self.basis, self.cfg.terms)?;
        let kick = diffusion(u, &self.basis, dw, self.cfg.terms.multiplicative_noise)?;
        let mut next = u.clone();
        match self.cfg.scheme {
            Scheme::SemiImplicit => {
                next.add_scaled(&explicit, dt_local);
                next.add_scaled(&kick, 1.0);
                self.solver(depth).solve_in_place(&mut next);
            }
            Scheme::Explicit => {
                next.add_scaled(&lap, dt_local);
                next.add_scaled(u, -dt_local);
                next.add_scaled(&explicit, dt_local);
                next.add_scaled(&kick, 1.0);
                next.zero_boundary();
            }
        }
        Ok(next)
    }

    fn advance_guarded(
        &mut self,
        u: &VectorField,
        t: f64,
        dt_local: f64,
        dw: WienerIncrement,
        rng: &mut TrajectoryRng,
        depth: usize,
        halvings: &mut usize,
    ) -> Result<VectorField, LlbError> {
        let cand = self.advance_once(u, dt_local, &dw, depth)?;
        if cand.is_finite() && cand.linf() <= self.cfg.linf_ceiling {
            return Ok(cand);
        }
        if depth >= MAX_SUBSTEP_DEPTH {
            return Err(LlbError::Blowup {
                t,
                message: format!(
                    "state exceeded the sup-norm ceiling {} after {MAX_SUBSTEP_DEPTH} halvings",
                    self.cfg.linf_ceiling
                ),
            });
        }
        *halvings += 1;
        let (dw1, dw2) = rng.bridge_split(&dw, dt_local);
        let half = 0.5 * dt_local;
        let mid = self.advance_guarded(u, t, half, dw1, rng, depth + 1, halvings)?;
        self.advance_guarded(&mid, t + half, half, dw2, rng, depth + 1, halvings)
    }

    /// Advance one full step, drawing the increment from the trajectory
    /// stream. Returns the number of local halvings that were needed.
    pub fn step(
        &mut self,
        u: &mut VectorField,
        t: f64,
        rng: &mut TrajectoryRng,
    ) -> Result<usize, LlbError> {
        let dw = rng.wiener_increment(self.basis.len(), self.cfg.dt);
        let mut halvings = 0;
        let next = self.advance_guarded(u, t, self.cfg.dt, dw, rng, 0, &mut halvings)?;
        *u = next;
        Ok(halvings)
    }

    /// Advance one full step with a caller-supplied increment and no
    /// substepping; used by coupled and path-driven runs that must stay in
    /// lockstep. A ceiling breach is a hard blow-up here.
    pub fn step_with_increment(
        &mut self,
        u: &mut VectorField,
        t: f64,
        dw: &WienerIncrement,
    ) -> Result<(), LlbError> {
        let cand = self.advance_once(u, self.cfg.dt, dw, 0)?;
        if !cand.is_finite() || cand.linf() > self.cfg.linf_ceiling {
            return Err(LlbError::Blowup {
                t,
                message: format!(
                    "lockstep trajectory left the stable range (ceiling {})",
                    self.cfg.linf_ceiling
                ),
            });
        }
        *u = cand;
        Ok(())
    }
}

/// Run one trajectory, recording observables every `stride` steps (plus
/// the initial and final states). The initial data is cut by the plateau
/// profile at the grid radius before the first record.
pub fn simulate(
    cfg: &SimConfig,
    u0: &VectorField,
    traj_id: u64,
) -> Result<Vec<ObservableRecord>, LlbError> {
    let mut driver = TrajectoryDriver::new(cfg)?;
    let mut u = driver.prepare_initial(u0)?;
    let mut rng = TrajectoryRng::new(cfg.seed, traj_id);
    let n = cfg.n_steps();
    let mut records = Vec::with_capacity(n / cfg.stride + 2);
    records.push(observe(&u, 0.0, &cfg.m_ladder)?);
    for step in 1..=n {
        let t = (step - 1) as f64 * cfg.dt;
        driver.step(&mut u, t, &mut rng)?;
        if step % cfg.stride == 0 || step == n {
            records.push(observe(&u, step as f64 * cfg.dt, &cfg.m_ladder)?);
        }
    }
    Ok(records)
}

/// Run `count` independent trajectories (ids `0..count`). Work is spread
/// over the rayon pool unless `LLB_DETERMINISTIC=1` forces a serial loop;
/// results are identical either way because every trajectory owns its
/// stream and the output order is fixed by the id.
pub fn run_ensemble(
    cfg: &SimConfig,
    u0: &VectorField,
    count: usize,
) -> Result<Vec<Vec<ObservableRecord>>, LlbError> {
    if count == 0 {
        return Err(LlbError::EmptyInput("ensemble needs at least one trajectory".into()));
    }
    let serial = std::env::var("LLB_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
    if serial {
        (0..count as u64).map(|id| simulate(cfg, u0, id)).collect()
    } else {
        (0..count as u64)
            .into_par_iter()
            .map(|id| simulate(cfg, u0, id))
            .collect()
    }
}

/// Sup-in-time gaps between two coupled trajectories, recorded at the
/// sampling stride.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledPair {
    pub i: usize,
    pub j: usize,
    /// max over samples of ||u_i - u_j||_{H1} (not squared).
    pub sup_h1: f64,
    /// max over samples of ||u_i - u_j||_{L2}.
    pub sup_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledRun {
    pub eps: Vec<f64>,
    pub records: Vec<Vec<ObservableRecord>>,
    pub pairs: Vec<CoupledPair>,
}

/// Drive one trajectory per intensity in `eps_list` through the same
/// Wiener path (one draw per step shared by all states) and record the
/// pairwise sup-in-time differences. No substepping: the states must stay
/// in lockstep, so a ceiling breach aborts the run.
pub fn simulate_coupled(
    cfg: &SimConfig,
    u0: &VectorField,
    eps_list: &[f64],
    traj_id: u64,
) -> Result<CoupledRun, LlbError> {
    if eps_list.is_empty() {
        return Err(LlbError::EmptyInput("coupled run needs at least one intensity".into()));
    }
    let mut drivers = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut c = cfg.clone();
        c.intensity = eps;
        drivers.push(TrajectoryDriver::new(&c)?);
    }
    let mut states: Vec<VectorField> = drivers
        .iter()
        .map(|d| d.prepare_initial(u0))
        .collect::<Result<_, _>>()?;
    let mut rng = TrajectoryRng::new(cfg.seed, traj_id);
    let n = cfg.n_steps();
    let modes = cfg.modes;

    let mut records: Vec<Vec<ObservableRecord>> = states
        .iter()
        .map(|u| Ok(vec![observe(u, 0.0, &cfg.m_ladder)?]))
        .collect::<Result<_, LlbError>>()?;
    let mut pairs = Vec::new();
    for i in 0..eps_list.len() {
        for j in i + 1..eps_list.len() {
            pairs.push(CoupledPair {
                i,
                j,
                sup_h1: 0.0,
                sup_l2: 0.0,
            });
        }
    }
    let update_pairs = |states: &[VectorField], pairs: &mut [CoupledPair]| -> Result<(), LlbError> {
        for p in pairs.iter_mut() {
            let d = VectorField::difference(&states[p.i], &states[p.j])?;
            let norms = d.norms();
            p.sup_h1 = p.sup_h1.max(norms.h1.sqrt());
            p.sup_l2 = p.sup_l2.max(norms.l2.sqrt());
        }
        Ok(())
    };
    update_pairs(&states, &mut pairs)?;

    for step in 1..=n {
        let t = (step - 1) as f64 * cfg.dt;
        let dw = rng.wiener_increment(modes, cfg.dt);
        for (driver, u) in drivers.iter_mut().zip(states.iter_mut()) {
            driver.step_with_increment(u, t, &dw)?;
        }
        if step % cfg.stride == 0 || step == n {
            let t_now = step as f64 * cfg.dt;
            for (rec, u) in records.iter_mut().zip(states.iter()) {
                rec.push(observe(u, t_now, &cfg.m_ladder)?);
            }
            update_pairs(&states, &mut pairs)?;
        }
    }
    Ok(CoupledRun {
        eps: eps_list.to_vec(),
        records,
        pairs,
    })
}

/// Result of a two-initial-data coupling on one Wiener path.
#[derive(Debug, Clone, Serialize)]
pub struct PairRun {
    /// `||u_a(0) - u_b(0)||_{L2}^2` after the cut-off.
    pub diff0_l2_sq: f64,
    /// Sup over samples of the squared L2 gap.
    pub sup_diff_l2_sq: f64,
    /// Sup over samples of the squared H1 gap.
    pub sup_diff_h1_sq: f64,
}

/// Drive two initial states through the same Wiener path at the same
/// intensity and track the gap between them.
pub fn simulate_pair(
    cfg: &SimConfig,
    u0_a: &VectorField,
    u0_b: &VectorField,
    traj_id: u64,
) -> Result<PairRun, LlbError> {
    let mut driver_a = TrajectoryDriver::new(cfg)?;
    let mut driver_b = TrajectoryDriver::new(cfg)?;
    let mut a = driver_a.prepare_initial(u0_a)?;
    let mut b = driver_b.prepare_initial(u0_b)?;
    let diff0 = VectorField::difference(&a, &b)?.l2_sq();
    let mut rng = TrajectoryRng::new(cfg.seed, traj_id);
    let n = cfg.n_steps();
    let mut sup_l2 = diff0;
    let mut sup_h1 = VectorField::difference(&a, &b)?.norms().h1;
    for step in 1..=n {
        let t = (step - 1) as f64 * cfg.dt;
        let dw = rng.wiener_increment(cfg.modes, cfg.dt);
        driver_a.step_with_increment(&mut a, t, &dw)?;
        driver_b.step_with_increment(&mut b, t, &dw)?;
        if step % cfg.stride == 0 || step == n {
            let d = VectorField::difference(&a, &b)?;
            sup_l2 = sup_l2.max(d.l2_sq());
            sup_h1 = sup_h1.max(d.norms().h1);
        }
    }
    Ok(PairRun {
        diff0_l2_sq: diff0,
        sup_diff_l2_sq: sup_l2,
        sup_diff_h1_sq: sup_h1,
    })
}

/// Integrate along a pre-drawn increment table (no substepping). The path
/// must match the configured step size, step count, and mode count.
/// Returns the final state; used by path-refinement convergence studies.
pub fn simulate_on_path(
    cfg: &SimConfig,
    u0: &VectorField,
    path: &WienerPath,
) -> Result<VectorField, LlbError> {
    let n = cfg.n_steps();
    if path.steps() != n {
        return Err(LlbError::invalid_parameter(
            "path",
            format!("path has {} steps, config needs {n}", path.steps()),
        ));
    }
    if (path.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(LlbError::invalid_parameter(
            "path",
            format!("path step {} does not match config step {}", path.dt, cfg.dt),
        ));
    }
    let mut driver = TrajectoryDriver::new(cfg)?;
    let mut u = driver.prepare_initial(u0)?;
    for (step, dw) in path.increments.iter().enumerate() {
        if dw.len() != cfg.modes {
            return Err(LlbError::invalid_parameter(
                "path",
                format!("path increment {step} carries {} modes, config needs {}", dw.len(), cfg.modes),
            ));
        }
        let t = step as f64 * cfg.dt;
        driver.step_with_increment(
            &mut u,
            t,
            &WienerIncrement { dw: dw.clone() },
        )?;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth_field;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn quiet_cfg() -> SimConfig {
        SimConfig {
            spacing: 0.1,
            horizon: 1.0,
            modes: 4,
            ..SimConfig::default()
        }
    }

    fn eigenmode(grid: &Arc<Grid>, amp: f64) -> VectorField {
        let n = grid.radius();
        let k = PI / (2.0 * n);
        VectorField::from_fn(grid, |p| [amp * (k * (p[0] + n)).sin(), 0.0, 0.0])
    }

    #[test]
    fn noise_free_eigenmode_decays_at_the_linear_rate() {
        let mut cfg = quiet_cfg();
        cfg.spacing = 0.05;
        cfg.intensity = 0.0;
        let grid = cfg.grid().unwrap();
        let u0 = eigenmode(&grid, 1e-3);
        let records = simulate(&cfg, &u0, 0).unwrap();
        let first = records.first().unwrap().norms.l2;
        let last = records.last().unwrap().norms.l2;
        // ||u||_{L2}^2 decays like exp(-2 (lambda_1 + 1) t).
        let rate = -0.5 * (last / first).ln() / cfg.horizon;
        let lambda1 = (PI / 8.0) * (PI / 8.0);
        assert_relative_eq!(rate, lambda1 + 1.0, max_relative = 0.05);
    }

    #[test]
    fn noise_free_l2_mass_never_grows() {
        let mut cfg = quiet_cfg();
        cfg.intensity = 0.0;
        cfg.stride = 1;
        cfg.horizon = 0.3;
        let grid = cfg.grid().unwrap();
        for seed in 0..20 {
            let u0 = random_smooth_field(&grid, seed, 1.0);
            let records = simulate(&cfg, &u0, seed).unwrap();
            for w in records.windows(2) {
                assert!(
                    w[1].norms.l2 <= w[0].norms.l2 * (1.0 + 1e-12),
                    "seed {seed}: mass grew {} -> {}",
                    w[0].norms.l2,
                    w[1].norms.l2
                );
            }
        }
    }

    #[test]
    fn boundary_layer_stays_zero_under_noise() {
        let cfg = quiet_cfg();
        let grid = cfg.grid().unwrap();
        let mut driver = TrajectoryDriver::new(&cfg).unwrap();
        let mut u = driver.prepare_initial(&random_smooth_field(&grid, 2, 0.5)).unwrap();
        let mut rng = TrajectoryRng::new(cfg.seed, 0);
        for step in 0..200 {
            driver.step(&mut u, step as f64 * cfg.dt, &mut rng).unwrap();
        }
        for idx in 0..grid.len() {
            if grid.is_boundary(idx) {
                assert_eq!(u.values()[idx], [0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn replays_are_bit_identical_and_ensembles_order_independent() {
        let mut cfg = quiet_cfg();
        cfg.horizon = 0.2;
        let grid = cfg.grid().unwrap();
        let u0 = random_smooth_field(&grid, 3, 0.5);
        let a = simulate(&cfg, &u0, 5).unwrap();
        let b = simulate(&cfg, &u0, 5).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(b.iter()) {
            assert_eq!(ra.norms, rb.norms);
            assert_eq!(ra.tail_l2, rb.tail_l2);
        }
        // The pooled ensemble must agree with per-id serial runs exactly.
        let ensemble = run_ensemble(&cfg, &u0, 6).unwrap();
        for (id, records) in ensemble.iter().enumerate() {
            let solo = simulate(&cfg, &u0, id as u64).unwrap();
            for (re, rs) in records.iter().zip(solo.iter()) {
                assert_eq!(re.norms, rs.norms);
            }
        }
    }

    #[test]
    fn strong_self_convergence_on_a_refined_path() {
        let mut cfg = quiet_cfg();
        cfg.horizon = 0.25;
        cfg.intensity = 0.8;
        let grid = cfg.grid().unwrap();

        // RMS error over several paths: a single realization scatters by
        // a factor comparable to its mean and need not even be monotone.
        let dt_fine = 6.25e-5;
        let fine_steps = (cfg.horizon / dt_fine).round() as usize;
        let dts = [1e-3, 5e-4, 2.5e-4];
        let paths = 8u64;
        let mut sq_err = [0.0f64; 3];
        for path_id in 0..paths {
            let u0 = random_smooth_field(&grid, 40 + path_id, 0.5);
            let mut rng = TrajectoryRng::new(99, path_id);
            let fine = WienerPath::generate(&mut rng, fine_steps, cfg.modes, dt_fine);
            let mut ref_cfg = cfg.clone();
            ref_cfg.dt = dt_fine;
            let reference = simulate_on_path(&ref_cfg, &u0, &fine).unwrap();
            for (acc, &dt) in sq_err.iter_mut().zip(dts.iter()) {
                let mut c = cfg.clone();
                c.dt = dt;
                let coarse = fine.coarsen((dt / dt_fine).round() as usize).unwrap();
                let u = simulate_on_path(&c, &u0, &coarse).unwrap();
                *acc += VectorField::difference(&u, &reference).unwrap().l2_sq();
            }
        }
        let errs: Vec<f64> = sq_err.iter().map(|e| (e / paths as f64).sqrt()).collect();
        assert!(
            errs[0] > errs[1] && errs[1] > errs[2],
            "RMS errors do not decrease under refinement: {errs:?}"
        );
        // errs ~ C dt^q across a factor-4 span of steps.
        let slope = (errs[0] / errs[2]).ln() / (4.0f64).ln();
        assert!(
            slope >= 0.35,
            "strong order too low: errors {errs:?}, slope {slope}"
        );
    }

    #[test]
    fn ceiling_breach_past_substep_budget_is_a_blowup() {
        let mut cfg = quiet_cfg();
        cfg.linf_ceiling = 0.5;
        cfg.horizon = 0.1;
        let grid = cfg.grid().unwrap();
        let u0 = random_smooth_field(&grid, 6, 5.0);
        match simulate(&cfg, &u0, 0) {
            Err(LlbError::Blowup { t, .. }) => assert!(t >= 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn coupled_run_with_equal_intensities_has_zero_gap() {
        let mut cfg = quiet_cfg();
        cfg.horizon = 0.2;
        let grid = cfg.grid().unwrap();
        let u0 = random_smooth_field(&grid, 7, 0.4);
        let run = simulate_coupled(&cfg, &u0, &[0.5, 0.5], 0).unwrap();
        assert_eq!(run.pairs.len(), 1);
        assert_eq!(run.pairs[0].sup_h1, 0.0);

        let run = simulate_coupled(&cfg, &u0, &[0.5, 0.6], 0).unwrap();
        assert!(run.pairs[0].sup_h1 > 0.0);
    }

    #[test]
    fn coupled_pair_with_equal_initial_data_has_zero_gap() {
        let mut cfg = quiet_cfg();
        cfg.horizon = 0.2;
        let grid = cfg.grid().unwrap();
        let u0 = random_smooth_field(&grid, 8, 0.4);
        let run = simulate_pair(&cfg, &u0, &u0, 0).unwrap();
        assert_eq!(run.diff0_l2_sq, 0.0);
        assert_eq!(run.sup_diff_l2_sq, 0.0);
    }

    #[test]
    fn explicit_and_semi_implicit_schemes_agree_at_small_steps() {
        let mut cfg = quiet_cfg();
        cfg.dt = 1e-4;
        cfg.horizon = 0.05;
        cfg.intensity = 0.3;
        let grid = cfg.grid().unwrap();
        let u0 = random_smooth_field(&grid, 9, 0.5);
        let steps = cfg.n_steps();
        let mut rng = TrajectoryRng::new(17, 0);
        let path = WienerPath::generate(&mut rng, steps, cfg.modes, cfg.dt);

        let a = simulate_on_path(&cfg, &u0, &path).unwrap();
        let mut explicit_cfg = cfg.clone();
        explicit_cfg.scheme = Scheme::Explicit;
        explicit_cfg.validate().unwrap();
        let b = simulate_on_path(&explicit_cfg, &u0, &path).unwrap();

        let gap = VectorField::difference(&a, &b).unwrap().l2_sq().sqrt();
        let scale = a.l2_sq().sqrt();
        assert!(gap <= 0.05 * scale, "schemes disagree: {gap} vs scale {scale}");
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = quiet_cfg();
        cfg.intensity = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = quiet_cfg();
        cfg.scheme = Scheme::Explicit;
        cfg.dt = 1e-2; // above h^2 / 2 = 5e-3
        assert!(cfg.validate().is_err());

        let mut cfg = quiet_cfg();
        cfg.horizon = 1.0005;
        assert!(cfg.validate().is_err());

        let mut cfg = quiet_cfg();
        cfg.m_ladder = vec![1.0, 5.0];
        assert!(cfg.validate().is_err());
    }
}
