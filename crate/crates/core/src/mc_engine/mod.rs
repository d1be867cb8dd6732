//! Particle Monte Carlo for trapped reactive molecules.
//!
//! Each step advances every live particle along its trap orbit, resolves
//! binary collisions (elastic with an anisotropic angular law, or reactive
//! with both partners lost), then applies the evaporation cut.

mod collide;
mod experiments;
mod record;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{macro_state, Dim, EnsembleError, ParticleEnsemble, TrapPotential};
use crate::scattering::{AngleSampler, AngularLaw, CrossSectionTable, ScatteringError};

pub use collide::{apply_collision, CollisionEvent, Outcome};
pub use experiments::*;
pub use record::{TrajectoryPoint, TrajectoryRecord};

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite velocity for particle {id} at step {step} (t = {t:e} s)")]
    NonFinite { id: u32, step: u64, t: f64 },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("writing trajectory: {0}")]
    Io(#[from] std::io::Error),
}

/// Pair-finding backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollisionModel {
    /// Pairs collide when their swept separation during the step falls below
    /// the cross-section diameter while approaching. Exact but only practical
    /// for small ensembles.
    DistanceThreshold,
    /// No-time-counter sampling within spatial cells whose side is
    /// `cell_frac` times the per-axis cloud width.
    CellSampling { cell_frac: f64 },
}

impl Default for CollisionModel {
    fn default() -> Self {
        Self::CellSampling { cell_frac: 0.1 }
    }
}

/// Elastic cross section. In 2D sizes are lengths (m), in 3D areas (m²).
#[derive(Debug, Clone)]
pub enum ElasticSource {
    None,
    /// Energy-independent magnitude with a fixed angular law. In 3D only the
    /// leading `cos^{2α}` term is used.
    Constant { size: f64, law: AngularLaw },
    /// Energy-dependent magnitude and angular law (2D only).
    Table(Arc<CrossSectionTable>),
}

/// Reactive cross section, same size convention as [`ElasticSource`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ReactiveSource {
    None,
    /// Fixed multiple of the elastic cross section at the same energy.
    Ratio { zeta: f64 },
    /// `size = coeff · E_rel^{1/2}`.
    PowerLaw { coeff: f64 },
    Constant { size: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Evaporation {
    None,
    /// Remove every particle with energy above `eta` times the current mean.
    ConstantEta { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TimeStep {
    Fixed { dt: f64 },
    /// Re-evaluated every few steps as
    /// `min(max_dt, collision_fraction / γ_measured)`.
    Adaptive { max_dt: f64, collision_fraction: f64 },
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub time_step: TimeStep,
    pub collision_model: CollisionModel,
    pub elastic: ElasticSource,
    pub reactive: ReactiveSource,
    pub evaporation: Evaporation,
    /// Record every `sample_every` steps.
    pub sample_every: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self, dim: Dim) -> Result<(), McError> {
        let bad = |m: &str| Err(McError::Config(m.to_string()));
        match self.time_step {
            TimeStep::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => return bad("time step must be positive"),
            TimeStep::Adaptive {
                max_dt,
                collision_fraction,
            } if !(max_dt > 0.0 && collision_fraction > 0.0 && collision_fraction <= 0.1) => {
                return bad("adaptive step needs max_dt > 0 and collision_fraction in (0, 0.1]")
            }
            _ => {}
        }
        if let CollisionModel::CellSampling { cell_frac } = self.collision_model {
            if !(cell_frac > 0.0 && cell_frac <= 1.0) {
                return bad("cell_frac must lie in (0, 1]");
            }
        }
        match &self.elastic {
            ElasticSource::Constant { size, law } => {
                law.validate()?;
                if !(*size >= 0.0) {
                    return bad("elastic cross section must be non-negative");
                }
                if dim == Dim::Three && law.a_prime != 0.0 {
                    return bad("3D scattering uses a single-term angular law (a_prime = 0)");
                }
            }
            ElasticSource::Table(_) if dim == Dim::Three => {
                return bad("tabulated cross sections are 2D lengths");
            }
            _ => {}
        }
        match self.reactive {
            ReactiveSource::Ratio { zeta } if !(zeta >= 0.0) => return bad("zeta must be non-negative"),
            ReactiveSource::Ratio { .. } if matches!(self.elastic, ElasticSource::None) => {
                return bad("a reactive ratio needs an elastic cross section")
            }
            ReactiveSource::PowerLaw { coeff } if !(coeff >= 0.0) => return bad("power-law coefficient must be non-negative"),
            ReactiveSource::Constant { size } if !(size >= 0.0) => return bad("reactive size must be non-negative"),
            _ => {}
        }
        if let Evaporation::ConstantEta { eta } = self.evaporation {
            if !(eta > 1.0) {
                return bad("eta must exceed 1");
            }
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1");
        }
        Ok(())
    }
}

/// Cumulative event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub elastic: u64,
    pub reactive_pairs: u64,
    pub evaporated: u64,
}

/// Cross-section lookup resolved from the configuration.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    dim: Dim,
    elastic: ElasticSource,
    reactive: ReactiveSource,
    samplers: Vec<(f64, AngleSampler)>,
    alpha_3d: f64,
}

impl Kernel {
    fn new(cfg: &McConfig, dim: Dim) -> Result<Self, McError> {
        let (samplers, alpha_3d) = match &cfg.elastic {
            ElasticSource::None => (Vec::new(), 0.0),
            ElasticSource::Constant { law, .. } => (vec![(1.0, AngleSampler::new(law)?)], law.alpha),
            ElasticSource::Table(t) => {
                let mut s = Vec::new();
                for &(e, _) in t.elastic_points() {
                    s.push((e, AngleSampler::new(&t.angular_law_at(e))?));
                }
                (s, 0.0)
            }
        };
        Ok(Self {
            dim,
            elastic: cfg.elastic.clone(),
            reactive: cfg.reactive,
            samplers,
            alpha_3d,
        })
    }

    /// (elastic, reactive) sizes at relative energy `e`.
    pub(crate) fn sizes(&self, e: f64) -> (f64, f64) {
        let el = match &self.elastic {
            ElasticSource::None => 0.0,
            ElasticSource::Constant { size, .. } => *size,
            ElasticSource::Table(t) => {
                if e > 0.0 {
                    t.total_elastic(e).unwrap_or(0.0)
                } else {
                    0.0
                }
            }
        };
        let re = match self.reactive {
            ReactiveSource::None => 0.0,
            ReactiveSource::Ratio { zeta } => zeta * el,
            ReactiveSource::PowerLaw { coeff } => coeff * e.max(0.0).sqrt(),
            ReactiveSource::Constant { size } => size,
        };
        (el, re)
    }

    fn sampler_at(&self, e: f64) -> &AngleSampler {
        if self.samplers.len() == 1 || e <= 0.0 {
            return &self.samplers[0].1;
        }
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (k, (ek, _)) in self.samplers.iter().enumerate() {
            let d = (ek / e).ln().abs();
            if d < dist {
                dist = d;
                best = k;
            }
        }
        &self.samplers[best].1
    }
}

/// Advance every live particle by `dt` along its trap orbit.
///
/// Harmonic traps use the exact per-axis rotation in phase space (symplectic
/// and free of phase error); the Gaussian trap uses kick-drift-kick leapfrog.
pub fn step_free_motion(ens: &mut ParticleEnsemble, trap: &TrapPotential, dt: f64) {
    let d = ens.dim.n();
    if trap.is_harmonic() {
        let om = trap.omegas();
        let rot: Vec<(f64, f64, f64)> = (0..d)
            .map(|k| {
                let (s, c) = (om[k] * dt).sin_cos();
                (c, s, om[k])
            })
            .collect();
        for i in 0..ens.pos.len() {
            if !ens.alive[i] {
                continue;
            }
            let (x, v) = (&mut ens.pos[i], &mut ens.vel[i]);
            for (k, &(c, s, w)) in rot.iter().enumerate() {
                let (x0, v0) = (x[k], v[k]);
                x[k] = x0 * c + v0 / w * s;
                v[k] = v0 * c - x0 * w * s;
            }
        }
    } else {
        let m = ens.mass;
        for i in 0..ens.pos.len() {
            if !ens.alive[i] {
                continue;
            }
            let a = trap.accel(m, &ens.pos[i]);
            let (x, v) = (&mut ens.pos[i], &mut ens.vel[i]);
            for k in 0..d {
                v[k] += 0.5 * dt * a[k];
                x[k] += dt * v[k];
            }
            let a = trap.accel(m, x);
            for k in 0..d {
                v[k] += 0.5 * dt * a[k];
            }
        }
    }
}

/// Remove every live particle whose energy exceeds `eta` times the mean
/// energy of the live ensemble. Returns the number removed.
pub fn apply_evaporation_cut(ens: &mut ParticleEnsemble, trap: &TrapPotential, eta: f64) -> usize {
    let energies: Vec<(usize, f64)> = (0..ens.pos.len())
        .filter(|&i| ens.alive[i])
        .map(|i| (i, ens.energy(trap, i)))
        .collect();
    if energies.is_empty() {
        return 0;
    }
    let mean = energies.iter().map(|e| e.1).sum::<f64>() / energies.len() as f64;
    let cut = eta * mean;
    let mut removed = 0;
    for (i, e) in energies {
        if e > cut {
            ens.alive[i] = false;
            removed += 1;
        }
    }
    ens.n_evaporated += removed as u64;
    removed
}

/// A running simulation: ensemble, trap, configuration and RNG stream.
pub struct Simulation {
    pub ens: ParticleEnsemble,
    pub trap: TrapPotential,
    pub cfg: McConfig,
    kernel: Kernel,
    rng: ChaCha8Rng,
    pub t: f64,
    pub step: u64,
    pub counters: Counters,
    dt: f64,
    /// Running bound on `size·g` for the cell sampler.
    sg_max: f64,
    window_events: u64,
    window_time: f64,
    window_steps: u32,
    /// Optional per-event hook used by tests and diagnostics.
    pub record_events: bool,
    pub events: Vec<CollisionEvent>,
}

impl Simulation {
    pub fn new(ens: ParticleEnsemble, trap: TrapPotential, cfg: McConfig) -> Result<Self, McError> {
        trap.validate()?;
        if ens.dim != trap.dim() {
            return Err(McError::Config("ensemble and trap dimensions differ".into()));
        }
        cfg.validate(trap.dim())?;
        let kernel = Kernel::new(&cfg, trap.dim())?;
        let dt = match cfg.time_step {
            TimeStep::Fixed { dt } => dt,
            TimeStep::Adaptive { max_dt, .. } => max_dt,
        };
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let counters = Counters {
            elastic: 0,
            reactive_pairs: ens.n_reactive_pairs,
            evaporated: ens.n_evaporated,
        };
        let mut sim = Self {
            ens,
            trap,
            cfg,
            kernel,
            rng,
            t: 0.0,
            step: 0,
            counters,
            dt,
            sg_max: 0.0,
            window_events: 0,
            window_time: 0.0,
            window_steps: 0,
            record_events: false,
            events: Vec::new(),
        };
        sim.sg_max = sim.estimate_sg_max();
        Ok(sim)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
    }

    pub fn n_alive(&self) -> usize {
        self.ens.len_alive()
    }

    /// Advance by one step: free motion, collisions, evaporation cut.
    pub fn advance(&mut self) -> Result<(), McError> {
        let dt = self.dt;
        step_free_motion(&mut self.ens, &self.trap, dt);
        let events = match self.cfg.collision_model {
            CollisionModel::CellSampling { cell_frac } => self.collide_cells(cell_frac, dt),
            CollisionModel::DistanceThreshold => self.collide_distance(dt),
        };
        for i in 0..self.ens.pos.len() {
            if self.ens.alive[i] && !self.ens.vel[i].iter().all(|v| v.is_finite()) {
                return Err(McError::NonFinite {
                    id: self.ens.id[i],
                    step: self.step,
                    t: self.t,
                });
            }
        }
        if let Evaporation::ConstantEta { eta } = self.cfg.evaporation {
            let removed = apply_evaporation_cut(&mut self.ens, &self.trap, eta);
            self.counters.evaporated += removed as u64;
        }
        self.t += dt;
        self.step += 1;
        self.window_events += events;
        self.window_time += dt;
        self.window_steps += 1;
        if self.window_steps >= 10 {
            self.adapt_dt();
        }
        // Keep the arrays dense once most slots are dead.
        let alive = self.n_alive();
        if alive * 2 < self.ens.pos.len() && self.ens.pos.len() > 64 {
            self.ens.compact();
        }
        Ok(())
    }

    fn adapt_dt(&mut self) {
        if let TimeStep::Adaptive {
            max_dt,
            collision_fraction,
        } = self.cfg.time_step
        {
            let n = self.n_alive().max(1) as f64;
            let gamma = 2.0 * self.window_events as f64 / (n * self.window_time);
            let target = if gamma > 0.0 { collision_fraction / gamma } else { max_dt };
            self.dt = target.min(max_dt).clamp(self.dt / 1.5, self.dt * 1.5).min(max_dt);
        }
        self.window_events = 0;
        self.window_time = 0.0;
        self.window_steps = 0;
    }

    pub fn snapshot(&self) -> TrajectoryPoint {
        let ms = macro_state(&self.ens, &self.trap);
        TrajectoryPoint::from_state(self.t, &ms, &self.counters)
    }

    /// Run until `stop` returns true (checked after every step) or `t_max`.
    pub fn run_until<F>(&mut self, t_max: f64, mut stop: F) -> Result<TrajectoryRecord, McError>
    where
        F: FnMut(&Simulation) -> bool,
    {
        let mut rec = TrajectoryRecord::new(self.trap.dim());
        rec.push(self.snapshot());
        let mut since = 0usize;
        while self.t < t_max {
            self.advance()?;
            since += 1;
            let done = stop(self) || self.n_alive() < 2;
            if since >= self.cfg.sample_every || done || self.t >= t_max {
                rec.push(self.snapshot());
                since = 0;
            }
            if done {
                break;
            }
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests;
