//! Named Monte Carlo experiments built on [`Simulation`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    CollisionModel, ElasticSource, Evaporation, McConfig, McError, ReactiveSource, Simulation, TimeStep,
    TrajectoryRecord,
};
use crate::ensemble::{
    collision_rate_gamma, collision_rate_gamma_3d, sample_boltzmann_axes, sample_truncated_with, Dim, TrapPotential,
};
use crate::scattering::{kappa_3d, kappa_two_term_2d, AngularLaw};
use crate::special::{bracketed_root, gamma_p, integrate, Tolerance};
use crate::units::K_B;

/// `(1/N)∫n² d^dx` for an equilibrium harmonic gas, m⁻ᵈ.
fn density_overlap(trap: &TrapPotential, t: f64, n: f64, mass: f64) -> f64 {
    let d = trap.dim().n();
    let om = trap.omegas();
    let widths: f64 = om[..d].iter().map(|w| (K_B * t / mass).sqrt() / w).product();
    n / ((4.0 * PI).powf(d as f64 / 2.0) * widths)
}

/// Per-particle collision rate of an equilibrium harmonic gas for an
/// energy-independent cross section `size` (m in 2D, m² in 3D).
pub fn equilibrium_rate_constant(trap: &TrapPotential, t: f64, size: f64, n: f64, mass: f64) -> Result<f64, McError> {
    Ok(match trap.dim() {
        Dim::Two => collision_rate_gamma(trap, t, size, n, mass)?,
        Dim::Three => collision_rate_gamma_3d(trap, t, size, n, mass)?,
    })
}

/// Per-particle rate for `size = coeff·E_rel^{1/2}` in a harmonic trap:
/// `⟨size·g⟩ = coeff·(√m/2)·⟨g²⟩` with `⟨g²⟩ = 2 d k_B T/m`.
pub fn equilibrium_rate_power_law(trap: &TrapPotential, t: f64, coeff: f64, n: f64, mass: f64) -> f64 {
    let d = trap.dim().as_f64();
    density_overlap(trap, t, n, mass) * coeff * 0.5 * mass.sqrt() * 2.0 * d * K_B * t / mass
}

/// Cross-section magnitude giving an equilibrium per-particle rate `gamma`.
pub fn size_for_rate(trap: &TrapPotential, t: f64, gamma: f64, n: f64, mass: f64) -> Result<f64, McError> {
    Ok(gamma / equilibrium_rate_constant(trap, t, 1.0, n, mass)?)
}

/// Solve `η_t = η · ⟨ε⟩(η_t)/k_BT` for a truncated harmonic gas, i.e. the cut
/// (in units of `k_B T`) that sits at `eta` times the resulting mean energy.
pub fn self_consistent_cut(dim: Dim, eta: f64) -> Option<f64> {
    let d = dim.as_f64();
    let f = |x: f64| x - eta * d * gamma_p(d + 1.0, x) / gamma_p(d, x);
    bracketed_root(f, 1e-9, eta * d, 1e-14)
}

/// Energy carried away per lost particle, in units of `k_B T`, for two-body
/// loss with `λ ∝ E_rel^p` in an equilibrium `d`-dimensional harmonic gas.
///
/// Losses happen at coincident positions, so the pair's potential energy is
/// drawn from `n(X)²` (a Gaussian with half the variance), its centre-of-mass
/// motion is thermal, and the relative energy is weighted by `λ(g)·g`.
pub fn loss_energy_per_particle(dim: Dim, p: f64) -> f64 {
    let d = dim.as_f64();
    let tol = Tolerance::relative(1e-12);
    // pair potential 2V(X) per axis, X ~ exp(-u²) in reduced units
    let (num, _) = integrate(|u| u * u * (-u * u).exp(), -12.0, 12.0, tol).expect("smooth integrand");
    let (den, _) = integrate(|u| (-u * u).exp(), -12.0, 12.0, tol).expect("smooth integrand");
    let potential = d * num / den;
    let com = d / 2.0;
    // relative energy x = μg²/(2k_BT) with weight x^{p + (d-1)/2} e^{-x}
    let a = p + (d - 1.0) / 2.0;
    let upper = 80.0 + 4.0 * a;
    let (m1, _) = integrate(|x| x.powf(a + 1.0) * (-x).exp(), 0.0, upper, tol).expect("smooth integrand");
    let (m0, _) = integrate(|x| x.powf(a) * (-x).exp(), 0.0, upper, tol).expect("smooth integrand");
    (potential + com + m1 / m0) / 2.0
}

/// Weighted least-squares fit of `A·exp(-k t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    pub amplitude_stderr: f64,
    pub rate_stderr: f64,
    /// RMS residual relative to the amplitude.
    pub relative_residual: f64,
}

pub fn fit_exponential(ts: &[f64], ys: &[f64]) -> Option<ExpFit> {
    if ts.len() < 3 || ts.len() != ys.len() {
        return None;
    }
    // log-linear start on the points that are still clearly positive
    let y0 = ys[0];
    if !(y0.abs() > 0.0) {
        return None;
    }
    let sign = y0.signum();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y * sign > 0.3 * y0.abs())
        .map(|(&t, &y)| (t, (y * sign).ln()))
        .collect();
    let (mut amp, mut k) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let st: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sty - st * sy) / (n * stt - st * st);
        let icpt = (sy - slope * st) / n;
        (sign * icpt.exp(), (-slope).max(1e-12 / ts[ts.len() - 1].max(1e-300)))
    } else {
        (y0, 1.0 / ts[ts.len() - 1].max(1e-300))
    };
    // Gauss–Newton with step halving
    let ssr = |a: f64, k: f64| -> f64 { ts.iter().zip(ys).map(|(&t, &y)| (y - a * (-k * t).exp()).powi(2)).sum() };
    let mut cur = ssr(amp, k);
    for _ in 0..100 {
        let (mut jaa, mut jak, mut jkk, mut ga, mut gk) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in ts.iter().zip(ys) {
            let e = (-k * t).exp();
            let r = y - amp * e;
            let da = e;
            let dk = -amp * t * e;
            jaa += da * da;
            jak += da * dk;
            jkk += dk * dk;
            ga += da * r;
            gk += dk * r;
        }
        let det = jaa * jkk - jak * jak;
        if det == 0.0 {
            break;
        }
        let step_a = (jkk * ga - jak * gk) / det;
        let step_k = (jaa * gk - jak * ga) / det;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let (na, nk) = (amp + lambda * step_a, k + lambda * step_k);
            let s = ssr(na, nk);
            if s <= cur {
                let done = (cur - s) <= 1e-15 * cur.max(1e-300);
                amp = na;
                k = nk;
                cur = s;
                improved = !done;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let n = ts.len() as f64;
    let sigma2 = cur / (n - 2.0);
    let (mut jaa, mut jak, mut jkk) = (0.0, 0.0, 0.0);
    for &t in ts {
        let e = (-k * t).exp();
        let dk = -amp * t * e;
        jaa += e * e;
        jak += e * dk;
        jkk += dk * dk;
    }
    let det = jaa * jkk - jak * jak;
    Some(ExpFit {
        amplitude: amp,
        rate: k,
        amplitude_stderr: (sigma2 * jkk / det).sqrt(),
        rate_stderr: (sigma2 * jaa / det).sqrt(),
        relative_residual: (cur / n).sqrt() / amp.abs(),
    })
}

/// Fit only the initial decay: samples up to and including the first one
/// that drops below `1/e` of the starting value. The anisotropy relaxes
/// non-exponentially (the hot tail lags), so later samples pull the rate
/// down; the moment-method κ describes the initial slope.
pub fn fit_initial_decay(ts: &[f64], ys: &[f64]) -> Option<ExpFit> {
    let y0 = *ys.first()?;
    let end = ys
        .iter()
        .position(|&y| y * y0.signum() <= y0.abs() * (-1.0f64).exp())
        .map_or(ys.len(), |i| i + 1)
        .max(3)
        .min(ys.len());
    fit_exponential(&ts[..end], &ys[..end])
}

/// Cross-dimensional relaxation setup.
#[derive(Debug, Clone)]
pub struct ThermalizationSpec {
    pub n: usize,
    /// Harmonic trap (2D or 3D).
    pub trap: TrapPotential,
    pub temperature: f64,
    /// Relative depletion of the y-axis temperature at t = 0.
    pub xi: f64,
    /// Angular law; in 3D only `alpha` is used.
    pub law: AngularLaw,
    /// Elastic cross section (m in 2D, m² in 3D).
    pub size: f64,
    pub mass: f64,
    pub seed: u64,
    pub collision_model: CollisionModel,
    /// Simulated time; defaults to three expected relaxation times.
    pub duration: Option<f64>,
    /// Number of recorded samples.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalizationResult {
    pub seed: u64,
    pub kappa: f64,
    pub kappa_stderr: f64,
    pub tau: f64,
    /// Per-particle collision rate from the event counter, 1/s.
    pub gamma_measured: f64,
    /// Equilibrium rate from the closed-form overlap integral, 1/s.
    pub gamma_theory: f64,
    pub fit: ExpFit,
    /// Set when the decay is visibly non-exponential.
    pub non_exponential: bool,
    /// (t, (Tx−Ty)/(Tx+Ty)) samples.
    pub series: Vec<(f64, f64)>,
}

/// Residual threshold (relative to amplitude) above which a fit is flagged.
pub const NON_EXPONENTIAL_RESIDUAL: f64 = 0.25;

/// Expected κ for the law in the trap's dimension.
pub fn kappa_expected(dim: Dim, law: &AngularLaw) -> f64 {
    match dim {
        Dim::Two => kappa_two_term_2d(law).unwrap_or(f64::NAN),
        Dim::Three => kappa_3d(law.alpha),
    }
}

pub fn run_thermalization_experiment(spec: &ThermalizationSpec) -> Result<ThermalizationResult, McError> {
    if !spec.trap.is_harmonic() {
        return Err(McError::Config("thermalization needs a harmonic trap".into()));
    }
    if !(spec.xi > 0.0 && spec.xi <= 0.2) {
        return Err(McError::Config("xi must lie in (0, 0.2]".into()));
    }
    let dim = spec.trap.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut temps = vec![spec.temperature; dim.n()];
    temps[1] *= 1.0 - spec.xi;
    let ens = sample_boltzmann_axes(&spec.trap, &temps, spec.n, spec.mass, &mut rng)?;
    let t_mean = spec.temperature * (1.0 - spec.xi / dim.as_f64());
    let gamma_theory = equilibrium_rate_constant(&spec.trap, t_mean, spec.size, spec.n as f64, spec.mass)?;
    let tau_guess = kappa_expected(dim, &spec.law) / gamma_theory;
    let duration = spec.duration.unwrap_or(2.5 * tau_guess);
    let dt = (0.1 / spec.trap.omega_max()).min(0.05 / gamma_theory);
    let steps = (duration / dt).ceil() as usize;
    let cfg = McConfig {
        time_step: TimeStep::Fixed { dt },
        collision_model: spec.collision_model,
        elastic: ElasticSource::Constant {
            size: spec.size,
            law: match dim {
                Dim::Two => spec.law,
                Dim::Three => AngularLaw::new(1.0, 0.0, spec.law.alpha, 0.0)?,
            },
        },
        reactive: ReactiveSource::None,
        evaporation: Evaporation::None,
        sample_every: (steps / spec.samples.max(3)).max(1),
        seed: spec.seed ^ 0x5eed_0001,
    };
    let mut sim = Simulation::new(ens, spec.trap, cfg)?;
    let rec = sim.run_until(duration, |_| false)?;
    let series: Vec<(f64, f64)> = rec
        .points
        .iter()
        .map(|p| (p.t, (p.temp_axis[0] - p.temp_axis[1]) / (p.temp_axis[0] + p.temp_axis[1])))
        .collect();
    let ts: Vec<f64> = series.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = series.iter().map(|s| s.1).collect();
    let fit = fit_initial_decay(&ts, &ys).ok_or_else(|| McError::Config("relaxation fit failed".into()))?;
    let t_end = rec.last().t;
    let gamma_measured = 2.0 * rec.last().n_elastic / (spec.n as f64 * t_end);
    let tau = 1.0 / fit.rate;
    let kappa = tau * gamma_measured;
    Ok(ThermalizationResult {
        seed: spec.seed,
        kappa,
        kappa_stderr: kappa * fit.rate_stderr / fit.rate,
        tau,
        gamma_measured,
        gamma_theory,
        fit,
        non_exponential: fit.relative_residual > NON_EXPONENTIAL_RESIDUAL,
        series,
    })
}

/// κ from the seed-averaged relaxation curve, with a jackknife error over
/// seeds. Averaging curves first keeps the fit out of the noise floor that
/// single runs hit after about one relaxation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub kappa_mean: f64,
    pub kappa_stderr: f64,
    pub runs: Vec<ThermalizationResult>,
}

fn pooled_kappa(runs: &[&ThermalizationResult]) -> Option<f64> {
    let m = runs.iter().map(|r| r.series.len()).min()?;
    let k = runs.len() as f64;
    let ts: Vec<f64> = runs[0].series[..m].iter().map(|s| s.0).collect();
    let ys: Vec<f64> = (0..m).map(|i| runs.iter().map(|r| r.series[i].1).sum::<f64>() / k).collect();
    let gamma = runs.iter().map(|r| r.gamma_measured).sum::<f64>() / k;
    fit_initial_decay(&ts, &ys).map(|f| gamma / f.rate)
}

pub fn run_thermalization_seeds(spec: &ThermalizationSpec, seeds: &[u64]) -> Result<KappaSummary, McError> {
    if seeds.is_empty() {
        return Err(McError::Config("at least one seed is required".into()));
    }
    let runs: Vec<ThermalizationResult> = seeds
        .par_iter()
        .map(|&s| {
            let mut sp = spec.clone();
            sp.seed = s;
            run_thermalization_experiment(&sp)
        })
        .collect::<Result<_, _>>()?;
    let all: Vec<&ThermalizationResult> = runs.iter().collect();
    let fail = || McError::Config("relaxation fit failed".into());
    let kappa = pooled_kappa(&all).ok_or_else(fail)?;
    let n = runs.len();
    let stderr = if n < 2 {
        runs[0].kappa_stderr
    } else {
        let loo: Vec<f64> = (0..n)
            .map(|skip| {
                let sub: Vec<&ThermalizationResult> = all.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, r)| *r).collect();
                pooled_kappa(&sub).ok_or_else(fail)
            })
            .collect::<Result<_, _>>()?;
        let mean = loo.iter().sum::<f64>() / n as f64;
        ((n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
    };
    Ok(KappaSummary {
        kappa_mean: kappa,
        kappa_stderr: stderr,
        runs,
    })
}

pub fn mean_stderr<I: IntoIterator<Item = f64>>(xs: I) -> (f64, f64) {
    let v: Vec<f64> = xs.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Constant-η evaporation setup.
#[derive(Debug, Clone)]
pub struct EvaporationSpec {
    pub trap: TrapPotential,
    pub n0: usize,
    pub temperature: f64,
    pub eta: f64,
    pub elastic: ElasticSource,
    pub reactive: ReactiveSource,
    pub mass: f64,
    /// Stop once `N/N₀` falls to this fraction.
    pub stop_fraction: f64,
    pub t_max: f64,
    pub seed: u64,
    pub collision_model: CollisionModel,
    /// Target mean collisions per particle per step.
    pub collision_fraction: f64,
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaporationResult {
    pub seed: u64,
    pub eta: f64,
    /// `ln(Ω_f/Ω₀)` at `N/N₀ = stop_fraction`, if reached.
    pub log_psd_gain: Option<f64>,
    pub final_fraction: f64,
    pub record: TrajectoryRecord,
}

pub fn run_evaporation_trajectory(spec: &EvaporationSpec) -> Result<EvaporationResult, McError> {
    let dim = spec.trap.dim();
    let eta_t = self_consistent_cut(dim, spec.eta)
        .ok_or_else(|| McError::Config(format!("no self-consistent cut for eta = {}", spec.eta)))?;
    let kt = K_B * spec.temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ens = sample_truncated_with(&spec.trap, spec.temperature, eta_t * kt, spec.n0, spec.mass, &mut rng)?;
    let max_dt = 0.1 / spec.trap.omega_max();
    let cfg = McConfig {
        time_step: TimeStep::Adaptive {
            max_dt,
            collision_fraction: spec.collision_fraction,
        },
        collision_model: spec.collision_model,
        elastic: spec.elastic.clone(),
        reactive: spec.reactive,
        evaporation: Evaporation::ConstantEta { eta: spec.eta },
        sample_every: spec.sample_every,
        seed: spec.seed ^ 0x5eed_0002,
    };
    let mut sim = Simulation::new(ens, spec.trap, cfg)?;
    // start from the equilibrium rate estimate rather than the orbit bound
    let (el, re) = sim.kernel.sizes(kt);
    if let Ok(g) = equilibrium_rate_constant(&spec.trap, spec.temperature, el + re, spec.n0 as f64, spec.mass) {
        if g > 0.0 {
            sim.set_dt((spec.collision_fraction / g).min(max_dt));
        }
    }
    let n_stop = spec.stop_fraction * spec.n0 as f64;
    let rec = sim.run_until(spec.t_max, |s| (s.n_alive() as f64) <= n_stop)?;
    Ok(EvaporationResult {
        seed: spec.seed,
        eta: spec.eta,
        log_psd_gain: rec.log_psd_gain_at(spec.stop_fraction),
        final_fraction: rec.last().n / spec.n0 as f64,
        record: rec,
    })
}

/// Reactive-only two-body loss setup.
#[derive(Debug, Clone)]
pub struct AntiEvapSpec {
    pub trap: TrapPotential,
    pub n: usize,
    pub temperature: f64,
    pub reactive: ReactiveSource,
    pub mass: f64,
    pub stop_fraction: f64,
    pub seed: u64,
    pub collision_model: CollisionModel,
    pub samples: usize,
}

pub fn initial_loss_rate(spec: &AntiEvapSpec) -> Result<f64, McError> {
    Ok(match spec.reactive {
        ReactiveSource::PowerLaw { coeff } => {
            equilibrium_rate_power_law(&spec.trap, spec.temperature, coeff, spec.n as f64, spec.mass)
        }
        ReactiveSource::Constant { size } => {
            equilibrium_rate_constant(&spec.trap, spec.temperature, size, spec.n as f64, spec.mass)?
        }
        _ => return Err(McError::Config("anti-evaporation needs a power-law or constant reactive source".into())),
    })
}

pub fn run_antievaporation_experiment(spec: &AntiEvapSpec) -> Result<TrajectoryRecord, McError> {
    if !spec.trap.is_harmonic() {
        return Err(McError::Config("anti-evaporation runs use a harmonic trap".into()));
    }
    let dim = spec.trap.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ens = sample_boltzmann_axes(&spec.trap, &vec![spec.temperature; dim.n()], spec.n, spec.mass, &mut rng)?;
    let gamma = initial_loss_rate(spec)?;
    let dt = (0.1 / spec.trap.omega_max()).min(0.02 / gamma);
    // two-body decay: N/N₀ = 1/(1 + γt) with T-dependence only through γ
    let t_max = 20.0 * (1.0 / spec.stop_fraction - 1.0) / gamma;
    let expected_steps = ((1.0 / spec.stop_fraction - 1.0) / gamma / dt).ceil() as usize;
    let cfg = McConfig {
        time_step: TimeStep::Fixed { dt },
        collision_model: spec.collision_model,
        elastic: ElasticSource::None,
        reactive: spec.reactive,
        evaporation: Evaporation::None,
        sample_every: (expected_steps / spec.samples.max(3)).max(1),
        seed: spec.seed ^ 0x5eed_0003,
    };
    let mut sim = Simulation::new(ens, spec.trap, cfg)?;
    let n_stop = spec.stop_fraction * spec.n as f64;
    sim.run_until(t_max, |s| (s.n_alive() as f64) <= n_stop)
}
