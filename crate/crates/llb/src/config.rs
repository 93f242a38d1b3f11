//! Flat `key = value` experiment configuration.
//!
//! A config file is a list of dotted keys, one per line, with `#`
//! comments and blank lines ignored:
//!
//! ```text
//! experiment = ensemble
//! sim.radius = 4
//! sim.spacing = 0.05
//! noise.intensity = 0.5
//! measure.ladder = 1, 1.5, 2, 2.5, 3, 3.5
//! ```
//!
//! Parsing is strict: unknown keys, duplicate keys, and malformed values
//! are all reported together (not just the first), each tied to its key.
//! Every key has a default, so the empty file is a valid configuration.
//! [`serialize_config`] writes the full key set back out with round-trip
//! float formatting, and `parse(serialize(c)) == c` exactly.

use crate::error::LlbError;
use crate::field::{random_smooth_field, VectorField};
use crate::integrator::{Scheme, SimConfig, TermFlags};
use crate::noise::{bump, NoisePreset};
use crate::oracle::LinearOracle;
use crate::report::ReportFormat;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// The experiment families the laboratory knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    /// Ensemble of full-equation trajectories: mean observables, energy
    /// balance audit, tightness profile, dissipation envelope.
    Ensemble,
    /// Linear degeneration against the closed-form stationary variances.
    Oracle,
    /// The same dynamics on growing domains, coupled through one noise
    /// realization.
    Expand,
    /// Noise-intensity sweep: coupled runs at `base` and `base + delta`,
    /// gap slopes and occupation-measure distances.
    Sweep,
    /// Fuzz campaign over the exact algebraic identities the scheme
    /// relies on.
    Identities,
    /// Continuity in the initial data: coupled pairs at scaled
    /// perturbations.
    Continuity,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Expand => "expand",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Identities => "identities",
            ExperimentKind::Continuity => "continuity",
        }
    }

    pub fn parse(s: &str) -> Option<ExperimentKind> {
        match s {
            "ensemble" => Some(ExperimentKind::Ensemble),
            "oracle" => Some(ExperimentKind::Oracle),
            "expand" => Some(ExperimentKind::Expand),
            "sweep" => Some(ExperimentKind::Sweep),
            "identities" => Some(ExperimentKind::Identities),
            "continuity" => Some(ExperimentKind::Continuity),
            _ => None,
        }
    }

    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Ensemble,
        ExperimentKind::Oracle,
        ExperimentKind::Expand,
        ExperimentKind::Sweep,
        ExperimentKind::Identities,
        ExperimentKind::Continuity,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitKind {
    Zero,
    /// A smooth compact bump supported in `|x| <= 2`.
    Bump,
    /// A Dirichlet eigenmode (`init.mode` is the 1-based index in the
    /// eigenvalue ordering).
    Eigenmode,
    /// A reproducible random smooth field (`init.seed` selects it).
    Random,
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Zero => "zero",
            InitKind::Bump => "bump",
            InitKind::Eigenmode => "eigenmode",
            InitKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<InitKind> {
        match s {
            "zero" => Some(InitKind::Zero),
            "bump" => Some(InitKind::Bump),
            "eigenmode" => Some(InitKind::Eigenmode),
            "random" => Some(InitKind::Random),
            _ => None,
        }
    }
}

/// Initial data recipe. Fields that a kind does not use are carried but
/// ignored, which keeps serialization total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitConfig {
    pub kind: InitKind,
    pub amplitude: f64,
    /// Eigenmode index (1-based), for `kind = eigenmode`.
    pub mode: usize,
    /// Seed of the random field, for `kind = random`.
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> InitConfig {
        InitConfig {
            kind: InitKind::Bump,
            amplitude: 0.5,
            mode: 1,
            seed: 0,
        }
    }
}

impl InitConfig {
    /// Realize the initial data on a grid.
    pub fn build(&self, grid: &std::sync::Arc<crate::grid::Grid>) -> Result<VectorField, LlbError> {
        if !self.amplitude.is_finite() {
            return Err(LlbError::invalid_parameter(
                "init.amplitude",
                format!("amplitude must be finite, got {}", self.amplitude),
            ));
        }
        match self.kind {
            InitKind::Zero => Ok(VectorField::zero(grid)),
            InitKind::Bump => {
                let a = self.amplitude;
                Ok(VectorField::from_fn(grid, |p| {
                    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    [a * bump(r / 2.0), 0.0, 0.0]
                }))
            }
            InitKind::Eigenmode => {
                if self.mode == 0 {
                    return Err(LlbError::invalid_parameter(
                        "init.mode",
                        "eigenmode indices are 1-based",
                    ));
                }
                let oracle = LinearOracle::new(grid, self.mode)?;
                let mut f = oracle.eigenmode_field(self.mode - 1, 0)?;
                for v in f.values_mut() {
                    v[0] *= self.amplitude;
                }
                Ok(f)
            }
            InitKind::Random => Ok(random_smooth_field(grid, self.seed, self.amplitude)),
        }
    }
}

/// The full resolved configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sim: SimConfig,
    pub init: InitConfig,
    /// Trajectories in an `ensemble` run.
    pub ensemble_size: usize,
    /// Time before which samples are discarded from occupation measures
    /// (and from the oracle averaging).
    pub burn_in: f64,
    /// Fraction of interior times the balance audit must pass.
    pub balance_fraction: f64,
    /// Domain radii of an `expand` run.
    pub expand_radii: Vec<f64>,
    /// Noise realizations of an `expand` run.
    pub expand_seeds: usize,
    /// Base intensity of a `sweep` run.
    pub sweep_base: f64,
    /// Intensity offsets probed by a `sweep` run.
    pub sweep_deltas: Vec<f64>,
    /// Coupled trajectories per `sweep` run.
    pub sweep_trajectories: usize,
    /// Eigenmodes checked by an `oracle` run.
    pub oracle_modes: usize,
    /// Trajectories of an `oracle` run.
    pub oracle_trajectories: usize,
    /// Random draws per identity family in an `identities` run.
    pub identity_samples: usize,
    /// Perturbation sizes of a `continuity` run.
    pub continuity_deltas: Vec<f64>,
    /// Coupled pairs per perturbation size.
    pub continuity_trajectories: usize,
    /// Where reports are written.
    pub output_dir: String,
    pub output_format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Ensemble,
            sim: SimConfig::default(),
            init: InitConfig::default(),
            ensemble_size: 16,
            burn_in: 1.0,
            balance_fraction: 0.95,
            expand_radii: vec![4.0, 8.0],
            expand_seeds: 8,
            sweep_base: 0.5,
            sweep_deltas: vec![0.1, 0.05, 0.025],
            sweep_trajectories: 32,
            oracle_modes: 3,
            oracle_trajectories: 64,
            identity_samples: 200,
            continuity_deltas: vec![0.1, 0.01],
            continuity_trajectories: 32,
            output_dir: ".".into(),
            output_format: ReportFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Cross-field validation beyond per-value parsing. Runners repeat
    /// the checks that concern them; this catches everything a run would
    /// reject, before any compute starts.
    pub fn validate(&self) -> Result<(), LlbError> {
        self.sim.validate()?;
        match self.kind {
            ExperimentKind::Ensemble => {
                if self.ensemble_size == 0 {
                    return Err(LlbError::invalid_parameter(
                        "ensemble.size",
                        "at least one trajectory is required",
                    ));
                }
                self.check_burn_in()?;
                if !(0.0..=1.0).contains(&self.balance_fraction) {
                    return Err(LlbError::invalid_parameter(
                        "measure.balance_fraction",
                        format!("fraction must lie in [0, 1], got {}", self.balance_fraction),
                    ));
                }
            }
            ExperimentKind::Oracle => {
                if self.oracle_modes == 0 || self.oracle_trajectories == 0 {
                    return Err(LlbError::invalid_parameter(
                        "oracle.modes",
                        "oracle runs need at least one mode and one trajectory",
                    ));
                }
                self.check_burn_in()?;
            }
            ExperimentKind::Expand => {
                if self.expand_seeds == 0 {
                    return Err(LlbError::EmptyInput(
                        "expansion needs at least one seed".into(),
                    ));
                }
                if self.expand_radii.len() < 2 {
                    return Err(LlbError::invalid_parameter(
                        "expand.radii",
                        "expansion needs at least two radii to compare",
                    ));
                }
            }
            ExperimentKind::Sweep => {
                if self.sweep_trajectories == 0 || self.sweep_deltas.is_empty() {
                    return Err(LlbError::invalid_parameter(
                        "sweep.deltas",
                        "sweep runs need at least one delta and one trajectory",
                    ));
                }
                for &d in &self.sweep_deltas {
                    if !(d.is_finite() && d > 0.0) {
                        return Err(LlbError::invalid_parameter(
                            "sweep.deltas",
                            format!("deltas must be positive, got {d}"),
                        ));
                    }
                    if self.sweep_base + d > 1.0 + 1e-12 {
                        return Err(LlbError::invalid_parameter(
                            "sweep.deltas",
                            format!(
                                "base {} + delta {d} leaves the admissible intensity range [0, 1]",
                                self.sweep_base
                            ),
                        ));
                    }
                }
                if !(0.0..=1.0).contains(&self.sweep_base) {
                    return Err(LlbError::invalid_parameter(
                        "sweep.base",
                        format!("base intensity must lie in [0, 1], got {}", self.sweep_base),
                    ));
                }
                self.check_burn_in()?;
            }
            ExperimentKind::Identities => {
                if self.identity_samples == 0 {
                    return Err(LlbError::invalid_parameter(
                        "identities.samples",
                        "at least one sample is required",
                    ));
                }
            }
            ExperimentKind::Continuity => {
                if self.continuity_trajectories == 0 || self.continuity_deltas.is_empty() {
                    return Err(LlbError::invalid_parameter(
                        "continuity.deltas",
                        "continuity runs need at least one delta and one trajectory",
                    ));
                }
                for &d in &self.continuity_deltas {
                    if !(d.is_finite() && d > 0.0) {
                        return Err(LlbError::invalid_parameter(
                            "continuity.deltas",
                            format!("deltas must be positive, got {d}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_burn_in(&self) -> Result<(), LlbError> {
        let window = self.sim.horizon - self.burn_in;
        let min_window = 2.0 * self.sim.stride as f64 * self.sim.dt;
        if !(self.burn_in >= 0.0 && window >= min_window) {
            return Err(LlbError::invalid_parameter(
                "measure.burn_in",
                format!(
                    "burn-in {} leaves {window:.3} of the horizon {} for averaging; \
                     at least two sampling strides ({min_window}) are needed",
                    self.burn_in, self.sim.horizon
                ),
            ));
        }
        Ok(())
    }
}

/// One parse problem, tied to the key (or line) it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Raw `key = value` pairs, with duplicate and syntax problems recorded.
fn split_pairs(text: &str) -> (BTreeMap<String, String>, Vec<FieldError>) {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(FieldError {
                key: format!("line {}", lineno + 1),
                message: format!("expected `key = value`, got {line:?}"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            errors.push(FieldError {
                key: format!("line {}", lineno + 1),
                message: "empty key".into(),
            });
            continue;
        }
        if map.insert(key.clone(), value).is_some() {
            errors.push(FieldError {
                key,
                message: "duplicate key".into(),
            });
        }
    }
    (map, errors)
}

struct Parser {
    map: BTreeMap<String, String>,
    errors: Vec<FieldError>,
}

impl Parser {
    fn take<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> T {
        match self.map.remove(key) {
            None => default,
            Some(raw) => match parse(&raw) {
                Ok(v) => v,
                Err(message) => {
                    self.errors.push(FieldError {
                        key: key.to_string(),
                        message,
                    });
                    default
                }
            },
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.take(key, default, |s| {
            s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
        })
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.take(key, default, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("not a nonnegative integer: {s:?}"))
        })
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        self.take(key, default, |s| {
            s.parse::<u64>()
                .map_err(|_| format!("not a nonnegative integer: {s:?}"))
        })
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        self.take(key, default, |s| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got {s:?}")),
        })
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Vec<f64> {
        self.take(key, default, |s| {
            s.split(',')
                .map(|part| {
                    let part = part.trim();
                    part.parse::<f64>()
                        .map_err(|_| format!("list entry is not a number: {part:?}"))
                })
                .collect()
        })
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.take(key, default.to_string(), |s| Ok(s.to_string()))
    }
}

/// Parse a config file. All problems are collected and returned together;
/// a non-empty error list means the configuration must not be run.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<FieldError>> {
    let (map, errors) = split_pairs(text);
    let mut p = Parser { map, errors };
    let d = ExperimentConfig::default();

    let kind = p.take("experiment", d.kind, |s| {
        ExperimentKind::parse(s).ok_or_else(|| {
            format!(
                "unknown experiment {s:?}; expected one of {}",
                ExperimentKind::ALL.map(|k| k.name()).join(", ")
            )
        })
    });
    let sim = SimConfig {
        seed: p.u64("seed", d.sim.seed),
        dim: p.usize("sim.dim", d.sim.dim),
        radius: p.f64("sim.radius", d.sim.radius),
        spacing: p.f64("sim.spacing", d.sim.spacing),
        dt: p.f64("sim.dt", d.sim.dt),
        horizon: p.f64("sim.horizon", d.sim.horizon),
        stride: p.usize("sim.stride", d.sim.stride),
        scheme: p.take("sim.scheme", d.sim.scheme, |s| {
            Scheme::parse(s).ok_or_else(|| format!("expected semi-implicit or explicit, got {s:?}"))
        }),
        safety: p.f64("sim.safety", d.sim.safety),
        linf_ceiling: p.f64("sim.linf_ceiling", d.sim.linf_ceiling),
        preset: p.take("noise.preset", d.sim.preset, |s| {
            NoisePreset::parse(s).ok_or_else(|| format!("expected bumps or fourier, got {s:?}"))
        }),
        modes: p.usize("noise.modes", d.sim.modes),
        intensity: p.f64("noise.intensity", d.sim.intensity),
        terms: TermFlags {
            cross_term: p.bool("terms.cross", d.sim.terms.cross_term),
            cubic_term: p.bool("terms.cubic", d.sim.terms.cubic_term),
            multiplicative_noise: p.bool("terms.multiplicative", d.sim.terms.multiplicative_noise),
        },
        m_ladder: p.list("measure.ladder", d.sim.m_ladder.clone()),
    };
    let init = InitConfig {
        kind: p.take("init.kind", d.init.kind, |s| {
            InitKind::parse(s)
                .ok_or_else(|| format!("expected zero, bump, eigenmode, or random, got {s:?}"))
        }),
        amplitude: p.f64("init.amplitude", d.init.amplitude),
        mode: p.usize("init.mode", d.init.mode),
        seed: p.u64("init.seed", d.init.seed),
    };
    let cfg = ExperimentConfig {
        kind,
        sim,
        init,
        ensemble_size: p.usize("ensemble.size", d.ensemble_size),
        burn_in: p.f64("measure.burn_in", d.burn_in),
        balance_fraction: p.f64("measure.balance_fraction", d.balance_fraction),
        expand_radii: p.list("expand.radii", d.expand_radii.clone()),
        expand_seeds: p.usize("expand.seeds", d.expand_seeds),
        sweep_base: p.f64("sweep.base", d.sweep_base),
        sweep_deltas: p.list("sweep.deltas", d.sweep_deltas.clone()),
        sweep_trajectories: p.usize("sweep.trajectories", d.sweep_trajectories),
        oracle_modes: p.usize("oracle.modes", d.oracle_modes),
        oracle_trajectories: p.usize("oracle.trajectories", d.oracle_trajectories),
        identity_samples: p.usize("identities.samples", d.identity_samples),
        continuity_deltas: p.list("continuity.deltas", d.continuity_deltas.clone()),
        continuity_trajectories: p.usize("continuity.trajectories", d.continuity_trajectories),
        output_dir: p.string("output.dir", &d.output_dir),
        output_format: p.take("output.format", d.output_format, |s| {
            ReportFormat::parse(s).ok_or_else(|| format!("expected csv or json, got {s:?}"))
        }),
    };
    for key in p.map.keys() {
        p.errors.push(FieldError {
            key: key.clone(),
            message: "unknown key".into(),
        });
    }
    if p.errors.is_empty() {
        Ok(cfg)
    } else {
        p.errors.sort_by(|a, b| a.key.cmp(&b.key));
        Err(p.errors)
    }
}

/// Write the full key set of a configuration in the file format
/// [`parse_config`] reads. Floats use round-trip formatting, so parsing
/// the output reproduces `cfg` exactly.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let list = |xs: &[f64]| {
        xs.iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    };
    let _ = writeln!(out, "experiment = {}", cfg.kind.name());
    let _ = writeln!(out, "seed = {}", cfg.sim.seed);
    let _ = writeln!(out);
    let _ = writeln!(out, "sim.dim = {}", cfg.sim.dim);
    let _ = writeln!(out, "sim.radius = {}", cfg.sim.radius);
    let _ = writeln!(out, "sim.spacing = {}", cfg.sim.spacing);
    let _ = writeln!(out, "sim.dt = {}", cfg.sim.dt);
    let _ = writeln!(out, "sim.horizon = {}", cfg.sim.horizon);
    let _ = writeln!(out, "sim.stride = {}", cfg.sim.stride);
    let _ = writeln!(out, "sim.scheme = {}", cfg.sim.scheme.name());
    let _ = writeln!(out, "sim.safety = {}", cfg.sim.safety);
    let _ = writeln!(out, "sim.linf_ceiling = {}", cfg.sim.linf_ceiling);
    let _ = writeln!(out, "terms.cross = {}", cfg.sim.terms.cross_term);
    let _ = writeln!(out, "terms.cubic = {}", cfg.sim.terms.cubic_term);
    let _ = writeln!(out, "terms.multiplicative = {}", cfg.sim.terms.multiplicative_noise);
    let _ = writeln!(out);
    let _ = writeln!(out, "noise.preset = {}", cfg.sim.preset.name());
    let _ = writeln!(out, "noise.modes = {}", cfg.sim.modes);
    let _ = writeln!(out, "noise.intensity = {}", cfg.sim.intensity);
    let _ = writeln!(out);
    let _ = writeln!(out, "init.kind = {}", cfg.init.kind.name());
    let _ = writeln!(out, "init.amplitude = {}", cfg.init.amplitude);
    let _ = writeln!(out, "init.mode = {}", cfg.init.mode);
    let _ = writeln!(out, "init.seed = {}", cfg.init.seed);
    let _ = writeln!(out);
    let _ = writeln!(out, "ensemble.size = {}", cfg.ensemble_size);
    let _ = writeln!(out, "measure.burn_in = {}", cfg.burn_in);
    let _ = writeln!(out, "measure.balance_fraction = {}", cfg.balance_fraction);
    let _ = writeln!(out, "measure.ladder = {}", list(&cfg.sim.m_ladder));
    let _ = writeln!(out);
    let _ = writeln!(out, "expand.radii = {}", list(&cfg.expand_radii));
    let _ = writeln!(out, "expand.seeds = {}", cfg.expand_seeds);
    let _ = writeln!(out);
    let _ = writeln!(out, "sweep.base = {}", cfg.sweep_base);
    let _ = writeln!(out, "sweep.deltas = {}", list(&cfg.sweep_deltas));
    let _ = writeln!(out, "sweep.trajectories = {}", cfg.sweep_trajectories);
    let _ = writeln!(out);
    let _ = writeln!(out, "oracle.modes = {}", cfg.oracle_modes);
    let _ = writeln!(out, "oracle.trajectories = {}", cfg.oracle_trajectories);
    let _ = writeln!(out);
    let _ = writeln!(out, "identities.samples = {}", cfg.identity_samples);
    let _ = writeln!(out);
    let _ = writeln!(out, "continuity.deltas = {}", list(&cfg.continuity_deltas));
    let _ = writeln!(out, "continuity.trajectories = {}", cfg.continuity_trajectories);
    let _ = writeln!(out);
    let _ = writeln!(out, "output.dir = {}", cfg.output_dir);
    let _ = writeln!(out, "output.format = {}", cfg.output_format.name());
    out
}
