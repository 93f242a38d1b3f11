//! Domain-expansion harness: the same dynamics on growing cubes.
//!
//! For an ascending list of radii, the harness runs one trajectory per
//! radius in lockstep — identical spacing, identical time step, and the
//! *same* Wiener increments each step — so the only difference between
//! the runs is where the Dirichlet wall sits. Two families of statistics
//! come out:
//!
//! * **plateau gaps**: for consecutive radii `n < N`, both states are cut
//!   by the plateau profile at scale `n` (identity on `|x| <= n/2`) on
//!   the common larger grid, and the L2 gap is tracked in time. Stability
//!   under expansion shows up as these gaps shrinking when the pair of
//!   radii grows.
//! * **tail profiles**: per radius, the supremum over time of the H1 mass
//!   outside each ladder radius, averaged over noise realizations. A tail
//!   radius whose profile is small uniformly over the domain sizes is the
//!   practical tightness certificate on expanding domains.
//!
//! Only the bump preset drives this harness: its modes are supported in
//! `|x| <= 2` regardless of the domain, so "the same noise" is meaningful
//! across radii. The Fourier modes stretch with the domain and would
//! confound the comparison.

use crate::cutoff::CutoffProfile;
use crate::error::LlbError;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::integrator::{SimConfig, TrajectoryDriver};
use crate::measure::{mean, median, observe, ObservableRecord};
use crate::noise::{NoisePreset, TrajectoryRng};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Sup-in-time plateau gap between consecutive radii, one entry per
/// noise realization.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionPairGap {
    pub small: f64,
    pub large: f64,
    /// `sup_t ||theta_n (u_small - u_large)||_{L2}` per seed.
    pub sup_gap_by_seed: Vec<f64>,
}

impl ExpansionPairGap {
    pub fn median_gap(&self) -> Result<f64, LlbError> {
        median(&self.sup_gap_by_seed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub radii: Vec<f64>,
    pub seeds: usize,
    pub ladder: Vec<f64>,
    /// Gaps for consecutive radius pairs, in order.
    pub pairs: Vec<ExpansionPairGap>,
    /// `[radius][ladder index]`: mean over seeds of the sup-in-time H1
    /// tail mass.
    pub tail_sup_mean: Vec<Vec<f64>>,
    /// `[radius][seed]`: the usual observable records.
    pub records: Vec<Vec<Vec<ObservableRecord>>>,
}

impl ExpansionReport {
    /// Median (over seeds) plateau gap for each consecutive pair.
    pub fn median_gaps(&self) -> Result<Vec<f64>, LlbError> {
        self.pairs.iter().map(|p| p.median_gap()).collect()
    }

    /// Smallest ladder radius whose sup-tail mean is below `threshold`
    /// for *every* domain radius — the uniform-in-n tail certificate.
    pub fn uniform_tail_radius(&self, threshold: f64) -> Option<f64> {
        'ladder: for (k, &m) in self.ladder.iter().enumerate() {
            for per_radius in &self.tail_sup_mean {
                if per_radius[k] >= threshold {
                    continue 'ladder;
                }
            }
            return Some(m);
        }
        None
    }
}

/// Everything one seed produces; kept per seed so the parallel map can
/// combine results in id order, independent of scheduling.
struct SeedOutcome {
    records: Vec<Vec<ObservableRecord>>,
    sup_gaps: Vec<f64>,
    sup_tails: Vec<Vec<f64>>,
}

fn expansion_seed(
    configs: &[SimConfig],
    grids: &[Arc<Grid>],
    profiles: &[CutoffProfile],
    u0: &VectorField,
    seed_id: u64,
) -> Result<SeedOutcome, LlbError> {
    let base = &configs[0];
    let mut drivers = configs
        .iter()
        .map(TrajectoryDriver::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mut states = Vec::with_capacity(configs.len());
    for (driver, grid) in drivers.iter().zip(grids.iter()) {
        let embedded = u0.embed_into(grid)?;
        states.push(driver.prepare_initial(&embedded)?);
    }
    let mut rng = TrajectoryRng::new(base.seed, seed_id);
    let n_steps = base.n_steps();
    let ladder_len = base.m_ladder.len();

    let mut records: Vec<Vec<ObservableRecord>> = Vec::with_capacity(states.len());
    for u in &states {
        records.push(vec![observe(u, 0.0, &base.m_ladder)?]);
    }
    let mut sup_gaps = vec![0.0f64; configs.len() - 1];
    let sample = |states: &[VectorField],
                      t: f64,
                      records: &mut Vec<Vec<ObservableRecord>>,
                      sup_gaps: &mut [f64]|
     -> Result<(), LlbError> {
        if t > 0.0 {
            for (rec, u) in records.iter_mut().zip(states.iter()) {
                rec.push(observe(u, t, &base.m_ladder)?);
            }
        }
        for (p, gap) in sup_gaps.iter_mut().enumerate() {
            let small_on_large = states[p].embed_into(&grids[p + 1])?;
            let cut_small = crate::cutoff::apply_cutoff(&small_on_large, &profiles[p]);
            let cut_large = crate::cutoff::apply_cutoff(&states[p + 1], &profiles[p]);
            let d = VectorField::difference(&cut_small, &cut_large)?;
            *gap = gap.max(d.l2_sq().sqrt());
        }
        Ok(())
    };
    sample(&states, 0.0, &mut records, &mut sup_gaps)?;

    for step in 1..=n_steps {
        let t_before = (step - 1) as f64 * base.dt;
        let dw = rng.wiener_increment(base.modes, base.dt);
        for (driver, u) in drivers.iter_mut().zip(states.iter_mut()) {
            driver.step_with_increment(u, t_before, &dw)?;
        }
        if step % base.stride == 0 || step == n_steps {
            sample(&states, step as f64 * base.dt, &mut records, &mut sup_gaps)?;
        }
    }

    let sup_tails = records
        .iter()
        .map(|recs| {
            (0..ladder_len)
                .map(|k| recs.iter().map(|r| r.tail_h1[k]).fold(0.0f64, f64::max))
                .collect()
        })
        .collect();
    Ok(SeedOutcome {
        records,
        sup_gaps,
        sup_tails,
    })
}

/// Run the expansion study. `cfg.radius` is ignored; each entry of
/// `radii` defines one domain with the shared spacing, step size, noise
/// family, and term flags of `cfg`. The initial data lives on the
/// smallest domain and is zero-extended to the larger ones (each run then
/// applies its own plateau cut). `seeds` independent noise realizations
/// are driven; realization `s` uses the trajectory stream `s` of
/// `cfg.seed`.
pub fn run_expansion(
    cfg: &SimConfig,
    radii: &[f64],
    seeds: usize,
    u0: &VectorField,
) -> Result<ExpansionReport, LlbError> {
    if radii.len() < 2 {
        return Err(LlbError::invalid_parameter(
            "expand.radii",
            "expansion needs at least two radii to compare",
        ));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LlbError::invalid_parameter(
            "expand.radii",
            "radii must be strictly increasing",
        ));
    }
    if seeds == 0 {
        return Err(LlbError::EmptyInput("expansion needs at least one seed".into()));
    }
    if cfg.preset != NoisePreset::Bumps {
        return Err(LlbError::invalid_parameter(
            "noise.preset",
            "domain expansion requires the bump preset; its modes are supported in |x| <= 2 \
             on every domain, while fourier modes stretch with the domain",
        ));
    }

    let mut configs = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut c = cfg.clone();
        c.radius = r;
        c.validate()?;
        configs.push(c);
    }
    let grids = configs
        .iter()
        .map(SimConfig::grid)
        .collect::<Result<Vec<_>, _>>()?;
    // Fail early if any pair of grids cannot nest.
    for w in grids.windows(2) {
        w[0].embedding_offset(&w[1])?;
    }
    if u0.grid() != grids[0].as_ref() {
        return Err(LlbError::GridMismatch(
            "initial data must live on the smallest domain's grid".into(),
        ));
    }
    let profiles = radii[..radii.len() - 1]
        .iter()
        .map(|&r| CutoffProfile::theta(r))
        .collect::<Result<Vec<_>, _>>()?;

    let serial = std::env::var("LLB_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
    let outcomes: Vec<SeedOutcome> = if serial {
        (0..seeds as u64)
            .map(|id| expansion_seed(&configs, &grids, &profiles, u0, id))
            .collect::<Result<_, _>>()?
    } else {
        (0..seeds as u64)
            .into_par_iter()
            .map(|id| expansion_seed(&configs, &grids, &profiles, u0, id))
            .collect::<Result<_, _>>()?
    };

    let pairs = (0..radii.len() - 1)
        .map(|p| ExpansionPairGap {
            small: radii[p],
            large: radii[p + 1],
            sup_gap_by_seed: outcomes.iter().map(|o| o.sup_gaps[p]).collect(),
        })
        .collect();
    let tail_sup_mean = (0..radii.len())
        .map(|r| {
            (0..cfg.m_ladder.len())
                .map(|k| {
                    let by_seed: Vec<f64> =
                        outcomes.iter().map(|o| o.sup_tails[r][k]).collect();
                    mean(&by_seed)
                })
                .collect()
        })
        .collect();
    let records = {
        // Reindex [seed][radius] -> [radius][seed].
        let mut per_radius: Vec<Vec<Vec<ObservableRecord>>> =
            (0..radii.len()).map(|_| Vec::with_capacity(seeds)).collect();
        for o in outcomes {
            for (r, recs) in o.records.into_iter().enumerate() {
                per_radius[r].push(recs);
            }
        }
        per_radius
    };
    Ok(ExpansionReport {
        radii: radii.to_vec(),
        seeds,
        ladder: cfg.m_ladder.clone(),
        pairs,
        tail_sup_mean,
        records,
    })
}
