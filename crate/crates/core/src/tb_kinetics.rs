//! Truncated-Boltzmann kinetics of constant-η evaporation in harmonic traps.
//!
//! The gas is assumed to stay in a Boltzmann distribution truncated at the
//! cut energy `ε_t`. Each step lowers the cut, removes the particles that
//! collisions promote above it, removes reactive pairs, and then re-derives
//! the temperature from the surviving number and energy.
//!
//! For a colliding pair at a common position let `S = (ε₁+ε₂)/2` and
//! `P = √(K_cm K_rel)`, where `K_cm = P_cm²/(2·2m)` and `K_rel = μg²/2`.
//! The individual energies before and after the collision are `S ± P cos θ`
//! with `θ` the angle between the centre-of-mass and relative momenta, so the
//! isotropic angular average of every loss term depends on `(S, P)` only. The
//! pair density at fixed `(S, P)` is closed-form, which leaves a 2D quadrature
//! per rate.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{phase_space_density, Dim, TrapPotential};
use crate::mc_engine::{equilibrium_rate_constant, self_consistent_cut, TrajectoryPoint, TrajectoryRecord};
use crate::special::{bracketed_root, gamma_p, integrate_vec, QuadratureError, Tolerance};
use crate::units::K_B;

#[derive(Debug, Error)]
pub enum TbError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("temperature closure has no root in [{lo:e}, {hi:e}] K for E/N = {mean_energy:e} J, cut {eps_t:e} J")]
    Closure {
        lo: f64,
        hi: f64,
        mean_energy: f64,
        eps_t: f64,
    },
    #[error("gas went extinct at t = {t:e} s")]
    Extinct { t: f64 },
    #[error("no loss after {steps} steps; the trajectory cannot reach the stop fraction")]
    Stalled { steps: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Macroscopic state of a truncated harmonic gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbState {
    pub t: f64,
    /// Particle number (real-valued).
    pub n: f64,
    /// Total energy, J.
    pub energy: f64,
    /// Cut energy, J.
    pub eps_t: f64,
    /// Temperature parameter of the truncated distribution, K.
    pub temp: f64,
}

/// Mean energy per particle in units of `k_B T` for a cut at `x = ε_t/k_BT`.
fn mean_energy_kt(dim: Dim, x: f64) -> f64 {
    let d = dim.as_f64();
    d * gamma_p(d + 1.0, x) / gamma_p(d, x)
}

impl TbState {
    /// Truncated distribution with `n` particles at temperature `temp` and cut `eps_t`.
    pub fn truncated(dim: Dim, n: f64, temp: f64, eps_t: f64) -> Result<Self, TbError> {
        if !(n > 0.0 && temp > 0.0 && eps_t > 0.0) {
            return Err(TbError::State(format!("need N, T, ε_t > 0 (got {n}, {temp}, {eps_t})")));
        }
        let kt = K_B * temp;
        Ok(Self {
            t: 0.0,
            n,
            energy: n * kt * mean_energy_kt(dim, eps_t / kt),
            eps_t,
            temp,
        })
    }

    /// Initial state whose cut already sits at `η·E/N`.
    pub fn at_self_consistent_cut(dim: Dim, n: f64, temp: f64, eta: f64) -> Result<Self, TbError> {
        let x = self_consistent_cut(dim, eta).ok_or_else(|| TbError::Config(format!("no self-consistent cut for eta = {eta}")))?;
        Self::truncated(dim, n, temp, x * K_B * temp)
    }

    /// `ε_t/(k_B T)`.
    pub fn eta_t(&self) -> f64 {
        self.eps_t / (K_B * self.temp)
    }

    /// `E/(d N k_B)`, the temperature the particle simulation reports.
    pub fn t_eff(&self, dim: Dim) -> f64 {
        self.energy / (dim.as_f64() * self.n * K_B)
    }

    /// Relative mismatch between `E/N` and the truncated-Boltzmann mean energy.
    pub fn closure_residual(&self, dim: Dim) -> f64 {
        let kt = K_B * self.temp;
        let model = kt * mean_energy_kt(dim, self.eps_t / kt);
        (self.energy / self.n - model).abs() / model
    }

    pub fn omega_psd(&self, trap: &TrapPotential) -> Option<f64> {
        phase_space_density(trap, self.n, self.t_eff(trap.dim()))
    }
}

/// Constant-η evaporation with isotropic, energy-independent cross sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TbConfig {
    pub trap: TrapPotential,
    pub mass: f64,
    /// Elastic cross section: a length in 2D, an area in 3D.
    pub size: f64,
    /// Reactive-to-elastic cross-section ratio.
    pub zeta: f64,
    pub eta: f64,
    /// Largest time step, s.
    pub dt: f64,
    /// The step is shortened so that no more than this fraction of the
    /// particles is lost per step.
    pub max_loss_per_step: f64,
    /// Relative quadrature tolerance.
    pub tol: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub cut_rule: CutRule,
}

/// How the cut follows the gas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutRule {
    /// `ε_t = η·E/N`, the rule the particle simulation uses.
    #[default]
    MeanEnergy,
    /// `ε_t = η·k_B T` with `T` the truncated-distribution temperature.
    Thermal,
}

impl TbConfig {
    pub fn new(trap: TrapPotential, mass: f64, size: f64, zeta: f64, eta: f64, dt: f64) -> Self {
        Self {
            trap,
            mass,
            size,
            zeta,
            eta,
            dt,
            max_loss_per_step: 2e-3,
            tol: 1e-8,
            max_steps: 1_000_000,
            cut_rule: CutRule::MeanEnergy,
        }
    }

    pub fn dim(&self) -> Dim {
        self.trap.dim()
    }

    pub fn validate(&self) -> Result<(), TbError> {
        let bad = |m: &str| Err(TbError::Config(m.to_string()));
        if !self.trap.is_harmonic() {
            return bad("truncated-Boltzmann kinetics needs a harmonic trap");
        }
        self.trap.validate().map_err(|e| TbError::Config(e.to_string()))?;
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.size > 0.0) {
            return bad("elastic cross section must be positive");
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return bad("zeta must be non-negative");
        }
        if !(self.eta > 1.0) {
            return bad("eta must exceed 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.max_loss_per_step > 0.0 && self.max_loss_per_step < 0.5) {
            return bad("max_loss_per_step must lie in (0, 0.5)");
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return bad("tol must lie in (0, 1e-2)");
        }
        Ok(())
    }
}

/// Collision integrals of a truncated gas relative to the untruncated
/// equilibrium pair rate `N γ` at the same `N` and `T`. Energies are in
/// units of `k_B T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateIntegrals {
    /// Pair integral over both partners below the cut.
    pub pairs: f64,
    /// Same, weighted by `(ε₁+ε₂)/2`.
    pub pair_energy: f64,
    /// Collisions that promote one partner above the cut.
    pub evap: f64,
    /// Same, weighted by the promoted partner's energy.
    pub evap_energy: f64,
}

/// Pair density at fixed `(S, P)` in reduced units, integrated over
/// `P' ∈ [0, a]`.
fn pair_density_cumulative(dim: Dim, s: f64, a: f64) -> f64 {
    match dim {
        Dim::Two => {
            let prim = |w: f64| (2.0 / 3.0) * s * w.powf(1.5) - 0.4 * w.powf(2.5);
            4.0 * SQRT_2 * (prim(s) - prim((s - a).max(0.0)))
        }
        Dim::Three => SQRT_2 * PI * (s * a.powi(3) / 3.0 - a.powi(4) / 4.0),
    }
}

fn pair_density(dim: Dim, s: f64, p: f64) -> f64 {
    match dim {
        Dim::Two => 4.0 * SQRT_2 * p * (s - p).max(0.0).sqrt(),
        Dim::Three => SQRT_2 * PI * p * p * (s - p),
    }
}

/// Untruncated normalisation `∫ g e^{-2S} dS dP`.
fn pair_norm(dim: Dim) -> f64 {
    match dim {
        Dim::Two => PI.sqrt() / 4.0,
        Dim::Three => PI / (8.0 * SQRT_2),
    }
}

/// `[pre, pre·S, pre·p_up, pre·e_up]` where `pre` is the chance that both
/// incoming partners lie below the cut, `p_up` the chance that the tagged
/// outgoing partner ends above it and `e_up` its energy on that branch.
fn angular_weights(dim: Dim, s: f64, p: f64, x: f64) -> [f64; 4] {
    let c = ((x - s) / p).clamp(-1.0, 1.0);
    let (pre, p_up, e_up) = match dim {
        Dim::Two => {
            let a = c.acos();
            let pre = 2.0 / PI * c.asin();
            (pre, a / PI, (a * s + p * (1.0 - c * c).sqrt()) / PI)
        }
        Dim::Three => (c, 0.5 * (1.0 - c), 0.5 * (s * (1.0 - c) + 0.5 * p * (1.0 - c * c))),
    };
    [pre, pre * s, pre * p_up, pre * e_up]
}

/// Loss integrals for a cut at `x = ε_t/(k_BT)`, with relative tolerance `tol`.
pub fn rate_integrals(dim: Dim, x: f64, tol: f64) -> Result<RateIntegrals, QuadratureError> {
    let outer_tol = Tolerance::relative(tol).with_abs(1e-300);
    let inner_tol = Tolerance::relative(tol * 1e-2).with_abs(1e-300);
    // S < x/2: no pair can promote a partner, everything is closed-form in P
    let (low, _) = integrate_vec(
        |s| {
            let w = (-2.0 * s).exp() * pair_density_cumulative(dim, s, s);
            [w, w * s]
        },
        0.0,
        0.5 * x,
        outer_tol,
    )?;
    let mut inner_err = None;
    let (high, _) = integrate_vec(
        |s| {
            let e2 = (-2.0 * s).exp();
            let a = x - s;
            let g_low = pair_density_cumulative(dim, s, a);
            let mut out = [e2 * g_low, e2 * g_low * s, 0.0, 0.0];
            let inner = integrate_vec(
                |p| {
                    let g = pair_density(dim, s, p);
                    angular_weights(dim, s, p, x).map(|w| w * g)
                },
                a,
                s,
                inner_tol,
            );
            match inner {
                Ok((v, _)) => {
                    for k in 0..4 {
                        out[k] += e2 * v[k];
                    }
                }
                Err(e) => inner_err = Some(e),
            }
            out
        },
        0.5 * x,
        x,
        outer_tol,
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    let norm = pair_norm(dim) * gamma_p(dim.as_f64(), x).powi(2);
    Ok(RateIntegrals {
        pairs: (low[0] + high[0]) / norm,
        pair_energy: (low[1] + high[1]) / norm,
        evap: high[2] / norm,
        evap_energy: high[3] / norm,
    })
}

/// The three loss channels of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TbIncrements {
    /// Lost number per channel: cut shrink, evaporation, reactive.
    pub dn: [f64; 3],
    /// Lost energy per channel, J.
    pub de: [f64; 3],
    /// Elastic collision events during the step.
    pub elastic: f64,
    pub dt: f64,
}

fn solve_temperature(dim: Dim, n: f64, energy: f64, eps_t: f64, t_guess: f64) -> Result<f64, TbError> {
    let mean = energy / n;
    let f = |t: f64| {
        let kt = K_B * t;
        kt * mean_energy_kt(dim, eps_t / kt) - mean
    };
    let (lo, hi) = (0.25 * t_guess, 4.0 * t_guess);
    bracketed_root(f, lo, hi, 1e-13).ok_or(TbError::Closure {
        lo,
        hi,
        mean_energy: mean,
        eps_t,
    })
}

/// Advance one step: shrink the cut to `min(η E/N, ε_t)`, apply evaporation
/// and reactive loss over the step, then close on the new temperature.
pub fn tb_step(state: &TbState, cfg: &TbConfig) -> Result<(TbState, TbIncrements), TbError> {
    let dim = cfg.dim();
    let d = dim.as_f64();
    if !(state.n > 0.0 && state.energy > 0.0 && state.eps_t > 0.0 && state.temp > 0.0) {
        return Err(TbError::State(format!("{state:?}")));
    }
    let kt = K_B * state.temp;
    let x_old = state.eps_t / kt;
    let target = match cfg.cut_rule {
        CutRule::MeanEnergy => cfg.eta * state.energy / state.n,
        CutRule::Thermal => cfg.eta * kt,
    };
    let eps_new = target.min(state.eps_t);
    let x = eps_new / kt;

    // step 1: the tail between the new and old cut is dropped
    let p_old = gamma_p(d, x_old);
    let scale = state.n / p_old;
    let dn1 = scale * (p_old - gamma_p(d, x));
    let de1 = scale * kt * d * (gamma_p(d + 1.0, x_old) - gamma_p(d + 1.0, x));
    let n1 = state.n - dn1;

    // steps 2 and 3 at the new cut
    let ri = rate_integrals(dim, x, cfg.tol)?;
    let pair_rate = n1 * equilibrium_rate_constant(&cfg.trap, state.temp, cfg.size, n1, cfg.mass)
        .map_err(|e| TbError::Config(e.to_string()))?;
    let rate_n2 = pair_rate * ri.evap;
    let rate_e2 = pair_rate * kt * ri.evap_energy;
    let rate_n3 = cfg.zeta * pair_rate * ri.pairs;
    // each reactive event removes both partners, i.e. ε₁+ε₂ = 2S per event
    let rate_e3 = cfg.zeta * pair_rate * kt * ri.pair_energy;
    let loss_rate = rate_n2 + rate_n3;
    let mut dt = cfg.dt;
    if loss_rate > 0.0 {
        dt = dt.min(cfg.max_loss_per_step * n1 / loss_rate);
    }
    let inc = TbIncrements {
        dn: [dn1, rate_n2 * dt, rate_n3 * dt],
        de: [de1, rate_e2 * dt, rate_e3 * dt],
        elastic: 0.5 * pair_rate * ri.pairs * dt,
        dt,
    };
    let n = state.n - inc.dn.iter().sum::<f64>();
    let energy = state.energy - inc.de.iter().sum::<f64>();
    if !(n > 0.0 && energy > 0.0) {
        return Err(TbError::Extinct { t: state.t + dt });
    }
    let temp = solve_temperature(dim, n, energy, eps_new, state.temp)?;
    Ok((
        TbState {
            t: state.t + dt,
            n,
            energy,
            eps_t: eps_new,
            temp,
        },
        inc,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TbTrajectory {
    pub states: Vec<TbState>,
    /// Same schema as the particle simulation; the collision columns carry
    /// integrated rates.
    pub record: TrajectoryRecord,
    /// `ln(Ω_f/Ω₀)` at the stop fraction, with `Ω` built from `E/(d N k_B)`.
    pub log_psd_gain: Option<f64>,
}

fn point(state: &TbState, trap: &TrapPotential, totals: &TbIncrements) -> TrajectoryPoint {
    let dim = trap.dim();
    let te = state.t_eff(dim);
    TrajectoryPoint {
        t: state.t,
        n: state.n,
        temp: te,
        temp_axis: vec![te; dim.n()],
        energy: state.energy,
        omega_psd: state.omega_psd(trap),
        n_elastic: totals.elastic,
        n_reactive: 0.5 * totals.dn[2],
        n_evap: totals.dn[0] + totals.dn[1],
    }
}

/// Iterate [`tb_step`] until `N/N₀ <= stop_fraction`.
pub fn run_tb_trajectory(init: TbState, cfg: &TbConfig, stop_fraction: f64) -> Result<TbTrajectory, TbError> {
    cfg.validate()?;
    if !(stop_fraction > 0.0 && stop_fraction < 1.0) {
        return Err(TbError::Config("stop fraction must lie in (0, 1)".into()));
    }
    let dim = cfg.dim();
    let mut states = vec![init];
    let mut totals = TbIncrements::default();
    let mut record = TrajectoryRecord::new(dim);
    record.push(point(&init, &cfg.trap, &totals));
    let target = stop_fraction * init.n;
    let mut s = init;
    let mut idle = 0usize;
    for step in 0..cfg.max_steps {
        if s.n <= target {
            break;
        }
        let (next, inc) = tb_step(&s, cfg)?;
        let lost: f64 = inc.dn.iter().sum();
        idle = if lost > 1e-12 * s.n { 0 } else { idle + 1 };
        if idle > 1000 {
            return Err(TbError::Stalled { steps: step + 1 });
        }
        for k in 0..3 {
            totals.dn[k] += inc.dn[k];
            totals.de[k] += inc.de[k];
        }
        totals.elastic += inc.elastic;
        s = next;
        states.push(s);
        record.push(point(&s, &cfg.trap, &totals));
    }
    if s.n > target {
        return Err(TbError::Stalled { steps: cfg.max_steps });
    }
    let log_psd_gain = record.log_psd_gain_at(stop_fraction);
    Ok(TbTrajectory {
        states,
        record,
        log_psd_gain,
    })
}

/// Run a constant-η trajectory from an equilibrium start at the self-consistent cut.
pub fn tb_log_psd_gain(cfg: &TbConfig, n0: f64, temp: f64, stop_fraction: f64) -> Result<f64, TbError> {
    let init = TbState::at_self_consistent_cut(cfg.dim(), n0, temp, cfg.eta)?;
    run_tb_trajectory(init, cfg, stop_fraction)?
        .log_psd_gain
        .ok_or(TbError::Stalled { steps: cfg.max_steps })
}
