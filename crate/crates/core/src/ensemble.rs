//! Traps, particle ensembles, equilibrium sampling and macroscopic estimators.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::gamma_p;
use crate::units::{HBAR, K_B};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("particle count must be positive")]
    ZeroParticles,
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("invalid trap: {0}")]
    InvalidTrap(String),
    #[error("operation requires a harmonic trap")]
    NotHarmonic,
    #[error("cross section must be non-negative, got {0}")]
    NegativeCrossSection(f64),
    #[error("truncated sampling acceptance {0:e} is below 1e-6")]
    LowAcceptance(f64),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch { expected: Dim, got: Dim },
    #[error("writing snapshot: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2d")]
    Two,
    #[serde(rename = "3d")]
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.n() as f64
    }

    /// Degeneracy threshold for the peak phase-space density.
    pub fn omega_critical(self) -> f64 {
        match self {
            Dim::Two => 2.0,
            Dim::Three => 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrapPotential {
    Harmonic2d { omega: [f64; 2] },
    Harmonic3d { omega: [f64; 3] },
    /// `V(r) = U₀(1 − exp(−mω²r²/(2U₀)))`, isotropic in the plane.
    Gaussian2d { omega: f64, depth: f64 },
}

impl TrapPotential {
    pub fn harmonic2d(wx: f64, wy: f64) -> Self {
        Self::Harmonic2d { omega: [wx, wy] }
    }

    pub fn harmonic3d(wx: f64, wy: f64, wz: f64) -> Self {
        Self::Harmonic3d { omega: [wx, wy, wz] }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let ok = |w: f64| w > 0.0 && w.is_finite();
        match *self {
            Self::Harmonic2d { omega } if omega.iter().all(|&w| ok(w)) => Ok(()),
            Self::Harmonic3d { omega } if omega.iter().all(|&w| ok(w)) => Ok(()),
            Self::Gaussian2d { omega, depth } if ok(omega) && ok(depth) => Ok(()),
            _ => Err(EnsembleError::InvalidTrap(format!("{self:?}"))),
        }
    }

    pub fn dim(&self) -> Dim {
        match self {
            Self::Harmonic3d { .. } => Dim::Three,
            _ => Dim::Two,
        }
    }

    pub fn is_harmonic(&self) -> bool {
        !matches!(self, Self::Gaussian2d { .. })
    }

    /// Per-axis (bottom-of-trap) angular frequencies; unused axes are zero.
    pub fn omegas(&self) -> [f64; 3] {
        match *self {
            Self::Harmonic2d { omega } => [omega[0], omega[1], 0.0],
            Self::Harmonic3d { omega } => omega,
            Self::Gaussian2d { omega, .. } => [omega, omega, 0.0],
        }
    }

    pub fn omega_max(&self) -> f64 {
        self.omegas().iter().cloned().fold(0.0, f64::max)
    }

    /// Geometric mean frequency over the active axes.
    pub fn omega_bar(&self) -> f64 {
        let d = self.dim().n();
        self.omegas()[..d].iter().product::<f64>().powf(1.0 / d as f64)
    }

    pub fn potential(&self, mass: f64, x: &[f64; 3]) -> f64 {
        match *self {
            Self::Harmonic2d { omega } => {
                0.5 * mass * (omega[0].powi(2) * x[0] * x[0] + omega[1].powi(2) * x[1] * x[1])
            }
            Self::Harmonic3d { omega } => {
                0.5 * mass * (0..3).map(|i| omega[i].powi(2) * x[i] * x[i]).sum::<f64>()
            }
            Self::Gaussian2d { omega, depth } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                -depth * (-mass * omega * omega * r2 / (2.0 * depth)).exp_m1()
            }
        }
    }

    /// Potential energy of one axis; for the Gaussian trap this is the
    /// harmonic approximation.
    pub fn axis_potential(&self, mass: f64, axis: usize, xi: f64) -> f64 {
        0.5 * mass * self.omegas()[axis].powi(2) * xi * xi
    }

    /// Acceleration `−∇V/m`.
    pub fn accel(&self, mass: f64, x: &[f64; 3]) -> [f64; 3] {
        match *self {
            Self::Harmonic2d { omega } => [-omega[0].powi(2) * x[0], -omega[1].powi(2) * x[1], 0.0],
            Self::Harmonic3d { omega } => [
                -omega[0].powi(2) * x[0],
                -omega[1].powi(2) * x[1],
                -omega[2].powi(2) * x[2],
            ],
            Self::Gaussian2d { omega, depth } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let f = -omega * omega * (-mass * omega * omega * r2 / (2.0 * depth)).exp();
                [f * x[0], f * x[1], 0.0]
            }
        }
    }
}

/// Molecules in a trap. Inactive particles keep their slot until
/// [`ParticleEnsemble::compact`] is called.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: Dim,
    pub mass: f64,
    pub id: Vec<u32>,
    pub pos: Vec<[f64; 3]>,
    pub vel: Vec<[f64; 3]>,
    pub alive: Vec<bool>,
    pub n_initial: usize,
    pub n_evaporated: u64,
    pub n_reactive_pairs: u64,
}

impl ParticleEnsemble {
    pub fn new(dim: Dim, mass: f64, pos: Vec<[f64; 3]>, vel: Vec<[f64; 3]>) -> Self {
        assert_eq!(pos.len(), vel.len());
        let n = pos.len();
        Self {
            dim,
            mass,
            id: (0..n as u32).collect(),
            pos,
            vel,
            alive: vec![true; n],
            n_initial: n,
            n_evaporated: 0,
            n_reactive_pairs: 0,
        }
    }

    pub fn len_alive(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn kinetic(&self, i: usize) -> f64 {
        let v = &self.vel[i];
        0.5 * self.mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    }

    pub fn energy(&self, trap: &TrapPotential, i: usize) -> f64 {
        self.kinetic(i) + trap.potential(self.mass, &self.pos[i])
    }

    pub fn total_energy(&self, trap: &TrapPotential) -> f64 {
        (0..self.pos.len())
            .filter(|&i| self.alive[i])
            .map(|i| self.energy(trap, i))
            .sum()
    }

    /// Drop inactive slots, keeping the order of the survivors.
    pub fn compact(&mut self) {
        let mut k = 0;
        for i in 0..self.pos.len() {
            if self.alive[i] {
                self.id[k] = self.id[i];
                self.pos[k] = self.pos[i];
                self.vel[k] = self.vel[i];
                self.alive[k] = true;
                k += 1;
            }
        }
        self.id.truncate(k);
        self.pos.truncate(k);
        self.vel.truncate(k);
        self.alive.truncate(k);
    }

    /// CSV snapshot with columns `id, x, y[, z], vx, vy[, vz], alive`.
    pub fn write_snapshot_csv<W: Write>(&self, w: W) -> Result<(), EnsembleError> {
        let mut wtr = csv::Writer::from_writer(w);
        let three = self.dim == Dim::Three;
        let header: Vec<&str> = if three {
            vec!["id", "x", "y", "z", "vx", "vy", "vz", "alive"]
        } else {
            vec!["id", "x", "y", "vx", "vy", "alive"]
        };
        wtr.write_record(&header).map_err(csv_io)?;
        let d = self.dim.n();
        for i in 0..self.pos.len() {
            let mut rec = vec![self.id[i].to_string()];
            rec.extend(self.pos[i][..d].iter().map(|v| format!("{v:e}")));
            rec.extend(self.vel[i][..d].iter().map(|v| format!("{v:e}")));
            rec.push(u8::from(self.alive[i]).to_string());
            wtr.write_record(&rec).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> EnsembleError {
    EnsembleError::Io(std::io::Error::other(e))
}

/// Macroscopic summary of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroState {
    pub n: usize,
    /// Per-axis temperature, K.
    pub t_axis: Vec<f64>,
    /// Total energy, J.
    pub energy: f64,
    /// `E/(d N k_B)`, K.
    pub t_eff: f64,
    /// Peak phase-space density; `None` for an empty or zero-temperature state.
    pub omega_psd: Option<f64>,
}

impl MacroState {
    pub fn empty(dim: Dim) -> Self {
        Self {
            n: 0,
            t_axis: vec![0.0; dim.n()],
            energy: 0.0,
            t_eff: 0.0,
            omega_psd: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Peak phase-space density `N ∏ħω_i / (k_B T)^d`.
pub fn phase_space_density(trap: &TrapPotential, n: f64, t: f64) -> Option<f64> {
    if !(t > 0.0) || n <= 0.0 {
        return None;
    }
    let d = trap.dim().n();
    let prod: f64 = trap.omegas()[..d].iter().map(|w| HBAR * w / (K_B * t)).product();
    Some(n * prod)
}

pub fn macro_state(ens: &ParticleEnsemble, trap: &TrapPotential) -> MacroState {
    let d = ens.dim.n();
    let mut n = 0usize;
    let mut axis = [0.0f64; 3];
    let mut energy = 0.0;
    for i in 0..ens.pos.len() {
        if !ens.alive[i] {
            continue;
        }
        n += 1;
        let (x, v) = (&ens.pos[i], &ens.vel[i]);
        for k in 0..d {
            let kin = 0.5 * ens.mass * v[k] * v[k];
            axis[k] += if trap.is_harmonic() {
                kin + trap.axis_potential(ens.mass, k, x[k])
            } else {
                2.0 * kin
            };
        }
        energy += ens.energy(trap, i);
    }
    if n == 0 {
        return MacroState::empty(ens.dim);
    }
    let t_axis = axis[..d].iter().map(|e| e / (n as f64 * K_B)).collect();
    let t_eff = energy / (d as f64 * n as f64 * K_B);
    MacroState {
        n,
        t_axis,
        energy,
        t_eff,
        omega_psd: phase_space_density(trap, n as f64, t_eff),
    }
}

fn check_sampling(trap: &TrapPotential, t: f64, n: usize) -> Result<(), EnsembleError> {
    trap.validate()?;
    if n == 0 {
        return Err(EnsembleError::ZeroParticles);
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(EnsembleError::BadTemperature(t));
    }
    Ok(())
}

fn draw_harmonic<R: Rng>(rng: &mut R, trap: &TrapPotential, temps: &[f64], mass: f64) -> ([f64; 3], [f64; 3]) {
    let om = trap.omegas();
    let mut x = [0.0; 3];
    let mut v = [0.0; 3];
    for k in 0..temps.len() {
        let kt = K_B * temps[k];
        let gx: f64 = rng.sample(StandardNormal);
        let gv: f64 = rng.sample(StandardNormal);
        x[k] = gx * (kt / mass).sqrt() / om[k];
        v[k] = gv * (kt / mass).sqrt();
    }
    (x, v)
}

/// Equilibrium sample with per-axis temperatures `temps` (K).
pub fn sample_boltzmann_axes<R: Rng>(
    trap: &TrapPotential,
    temps: &[f64],
    n: usize,
    mass: f64,
    rng: &mut R,
) -> Result<ParticleEnsemble, EnsembleError> {
    let d = trap.dim().n();
    if temps.len() != d {
        return Err(EnsembleError::InvalidTrap(format!(
            "expected {d} axis temperatures, got {}",
            temps.len()
        )));
    }
    for &t in temps {
        check_sampling(trap, t, n)?;
    }
    if !trap.is_harmonic() {
        return Err(EnsembleError::NotHarmonic);
    }
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, v) = draw_harmonic(rng, trap, temps, mass);
        pos.push(x);
        vel.push(v);
    }
    Ok(ParticleEnsemble::new(trap.dim(), mass, pos, vel))
}

/// Equilibrium sample of `n` particles at temperature `t` in a harmonic trap.
pub fn sample_boltzmann(
    trap: &TrapPotential,
    t: f64,
    n: usize,
    mass: f64,
    seed: u64,
) -> Result<ParticleEnsemble, EnsembleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_boltzmann_axes(trap, &vec![t; trap.dim().n()], n, mass, &mut rng)
}

/// Equilibrium sample restricted to single-particle energies below `eps_t`.
pub fn sample_truncated_with<R: Rng>(
    trap: &TrapPotential,
    t: f64,
    eps_t: f64,
    n: usize,
    mass: f64,
    rng: &mut R,
) -> Result<ParticleEnsemble, EnsembleError> {
    check_sampling(trap, t, n)?;
    if !(eps_t > 0.0) {
        return Err(EnsembleError::InvalidTrap(format!("cut-off energy must be positive, got {eps_t}")));
    }
    let kt = K_B * t;
    let d = trap.dim().n();
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    match *trap {
        TrapPotential::Gaussian2d { omega, depth } => {
            if eps_t >= depth {
                return Err(EnsembleError::InvalidTrap(format!(
                    "cut-off energy {eps_t:e} J is not below the trap depth {depth:e} J"
                )));
            }
            // Uniform positions in the disk V < ε_t weighted by the
            // Boltzmann factor, then Maxwellian velocities below the cut.
            let r_max2 = -2.0 * depth / (mass * omega * omega) * (-eps_t / depth).ln_1p();
            let r_max = r_max2.sqrt();
            let mut attempts = 0u64;
            while pos.len() < n {
                attempts += 1;
                if attempts > 10_000_000 && (pos.len() as f64) < attempts as f64 * 1e-6 {
                    return Err(EnsembleError::LowAcceptance(pos.len() as f64 / attempts as f64));
                }
                let r = r_max * rng.random::<f64>().sqrt();
                let th = 2.0 * PI * rng.random::<f64>();
                let x = [r * th.cos(), r * th.sin(), 0.0];
                let u = trap.potential(mass, &x);
                if rng.random::<f64>() >= (-u / kt).exp() {
                    continue;
                }
                let s = (kt / mass).sqrt();
                let v = [
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                    0.0,
                ];
                let e = u + 0.5 * mass * (v[0] * v[0] + v[1] * v[1]);
                if e < eps_t {
                    pos.push(x);
                    vel.push(v);
                }
            }
        }
        _ => {
            // The energy of a harmonic Boltzmann gas is Gamma(d, kT)
            // distributed, which gives the acceptance rate up front.
            let acceptance = gamma_p(d as f64, eps_t / kt);
            if acceptance < 1e-6 {
                return Err(EnsembleError::LowAcceptance(acceptance));
            }
            let temps = vec![t; d];
            while pos.len() < n {
                let (x, v) = draw_harmonic(rng, trap, &temps, mass);
                let e = trap.potential(mass, &x) + 0.5 * mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                if e < eps_t {
                    pos.push(x);
                    vel.push(v);
                }
            }
        }
    }
    Ok(ParticleEnsemble::new(trap.dim(), mass, pos, vel))
}

pub fn sample_truncated(
    trap: &TrapPotential,
    t: f64,
    eps_t: f64,
    n: usize,
    mass: f64,
    seed: u64,
) -> Result<ParticleEnsemble, EnsembleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_truncated_with(trap, t, eps_t, n, mass, &mut rng)
}

/// Mean energy per particle of a truncated harmonic Boltzmann gas, in units
/// of `k_B T`, for cut `eta_t = ε_t/(k_B T)`.
pub fn truncated_mean_energy(dim: Dim, eta_t: f64) -> f64 {
    let d = dim.as_f64();
    d * gamma_p(d + 1.0, eta_t) / gamma_p(d, eta_t)
}

/// Per-particle collision rate `γ = (1/N)∫n²λ⟨g⟩ d²x` of an equilibrium 2D
/// harmonic gas with a constant cross section `lambda` (m).
pub fn collision_rate_gamma(
    trap: &TrapPotential,
    t: f64,
    lambda: f64,
    n: f64,
    mass: f64,
) -> Result<f64, EnsembleError> {
    if lambda < 0.0 {
        return Err(EnsembleError::NegativeCrossSection(lambda));
    }
    if !(t > 0.0) {
        return Err(EnsembleError::BadTemperature(t));
    }
    match *trap {
        TrapPotential::Harmonic2d { omega } => {
            Ok(n * lambda * omega[0] * omega[1] / (4.0 * PI) * (PI * mass / (K_B * t)).sqrt())
        }
        _ => Err(EnsembleError::DimMismatch {
            expected: Dim::Two,
            got: trap.dim(),
        }),
    }
}

/// 3D counterpart of [`collision_rate_gamma`] for a constant cross section
/// `sigma` (m²).
pub fn collision_rate_gamma_3d(
    trap: &TrapPotential,
    t: f64,
    sigma: f64,
    n: f64,
    mass: f64,
) -> Result<f64, EnsembleError> {
    if sigma < 0.0 {
        return Err(EnsembleError::NegativeCrossSection(sigma));
    }
    if !(t > 0.0) {
        return Err(EnsembleError::BadTemperature(t));
    }
    match *trap {
        TrapPotential::Harmonic3d { omega } => {
            let kt = K_B * t;
            let widths: f64 = omega.iter().map(|w| (kt / mass).sqrt() / w).product();
            let n2 = n * n / (8.0 * PI.powf(1.5) * widths);
            let g_mean = 4.0 * (kt / (PI * mass)).sqrt();
            Ok(n2 * sigma * g_mean / n)
        }
        _ => Err(EnsembleError::DimMismatch {
            expected: Dim::Three,
            got: trap.dim(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{integrate, Tolerance};
    use crate::units::{hz_to_omega, nk_to_joule, KRB_MASS};
    use approx::assert_relative_eq;

    fn trap2() -> TrapPotential {
        TrapPotential::harmonic2d(hz_to_omega(20.0), hz_to_omega(20.0))
    }

    #[test]
    fn boltzmann_recovers_temperature() {
        let n = 100_000;
        let ens = sample_boltzmann(&trap2(), 200e-9, n, KRB_MASS, 1).unwrap();
        let ms = macro_state(&ens, &trap2());
        let sigma = (2.0 / (2.0 * n as f64)).sqrt();
        assert!((ms.t_eff / 200e-9 - 1.0).abs() < 3.0 * sigma, "{}", ms.t_eff);
        let mean_x = ens.pos.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let sx = (K_B * 200e-9 / KRB_MASS).sqrt() / hz_to_omega(20.0);
        assert!(mean_x.abs() < 4.0 * sx / (n as f64).sqrt());
    }

    #[test]
    fn anisotropic_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ens = sample_boltzmann_axes(&trap2(), &[200e-9, 180e-9], 200_000, KRB_MASS, &mut rng).unwrap();
        let ms = macro_state(&ens, &trap2());
        let ratio = ms.t_axis[0] / ms.t_axis[1];
        assert!((ratio - 1.0 / 0.9).abs() < 4.0 * (2.0 / 200_000.0f64).sqrt() * 1.2, "{ratio}");
    }

    #[test]
    fn truncated_mean_energy_oracle() {
        // independent: quadrature of ε² e^{-ε} over ε ∫ e^{-ε} on [0, 4]
        let tol = Tolerance::relative(1e-13);
        let (num, _) = integrate(|e| e * e * (-e).exp(), 0.0, 4.0, tol).unwrap();
        let (den, _) = integrate(|e| e * (-e).exp(), 0.0, 4.0, tol).unwrap();
        assert_relative_eq!(truncated_mean_energy(Dim::Two, 4.0), num / den, max_relative = 1e-12);
        assert!((num / den - 1.6774).abs() < 1e-4);

        let t = 200e-9;
        let eps_t = 4.0 * K_B * t;
        let ens = sample_truncated(&trap2(), t, eps_t, 200_000, KRB_MASS, 9).unwrap();
        let trap = trap2();
        let mean = ens.total_energy(&trap) / (K_B * t * 200_000.0);
        assert!((mean - num / den).abs() < 0.01, "{mean}");
        assert!((0..ens.pos.len()).all(|i| ens.energy(&trap, i) < eps_t));
    }

    #[test]
    fn gaussian_truncated_sampling_respects_cut() {
        let trap = TrapPotential::Gaussian2d {
            omega: hz_to_omega(20.0),
            depth: nk_to_joule(2000.0),
        };
        let eps = nk_to_joule(1000.0);
        let ens = sample_truncated(&trap, 200e-9, eps, 5000, KRB_MASS, 2).unwrap();
        assert_eq!(ens.len_alive(), 5000);
        assert!((0..5000).all(|i| ens.energy(&trap, i) < eps));
        assert!(sample_truncated(&trap, 200e-9, nk_to_joule(3000.0), 10, KRB_MASS, 2).is_err());
    }

    #[test]
    fn low_acceptance_rejected() {
        let r = sample_truncated(&trap2(), 200e-9, 1e-4 * K_B * 200e-9, 10, KRB_MASS, 1);
        assert!(matches!(r, Err(EnsembleError::LowAcceptance(_))));
    }

    #[test]
    fn psd_and_degenerate_states() {
        let trap = trap2();
        let ens = sample_boltzmann(&trap, 100e-9, 50_000, KRB_MASS, 5).unwrap();
        let ms = macro_state(&ens, &trap);
        let w = hz_to_omega(20.0);
        let expected = 50_000.0 * (HBAR * w / (K_B * 100e-9)).powi(2);
        assert!((ms.omega_psd.unwrap() / expected - 1.0).abs() < 0.03);

        let still = ParticleEnsemble::new(Dim::Two, KRB_MASS, vec![[0.0; 3]], vec![[0.0; 3]]);
        let ms = macro_state(&still, &trap);
        assert_eq!(ms.energy, 0.0);
        assert!(ms.omega_psd.is_none());

        let mut empty = still.clone();
        empty.alive[0] = false;
        assert!(macro_state(&empty, &trap).is_empty());
    }

    #[test]
    fn velocity_scaling_doubles_kinetic_temperature() {
        let trap = TrapPotential::Gaussian2d {
            omega: 100.0,
            depth: nk_to_joule(1e6),
        };
        let mut ens = sample_boltzmann(&trap2(), 100e-9, 1000, KRB_MASS, 5).unwrap();
        let before = macro_state(&ens, &trap).t_axis.clone();
        for v in ens.vel.iter_mut() {
            for c in v.iter_mut() {
                *c *= 2f64.sqrt();
            }
        }
        let after = macro_state(&ens, &trap).t_axis;
        for k in 0..2 {
            assert_relative_eq!(after[k], 2.0 * before[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_scaling() {
        let trap = trap2();
        assert_eq!(collision_rate_gamma(&trap, 1e-7, 0.0, 1e5, KRB_MASS).unwrap(), 0.0);
        let g1 = collision_rate_gamma(&trap, 1e-7, 1e-8, 1e5, KRB_MASS).unwrap();
        let g4 = collision_rate_gamma(&trap, 4e-7, 1e-8, 1e5, KRB_MASS).unwrap();
        assert_relative_eq!(g4 / g1, 0.5, max_relative = 1e-12);
        assert!(collision_rate_gamma(&trap, 1e-7, -1.0, 1e5, KRB_MASS).is_err());
    }

    #[test]
    fn gaussian_trap_is_harmonic_near_bottom() {
        let w = hz_to_omega(20.0);
        let g = TrapPotential::Gaussian2d {
            omega: w,
            depth: nk_to_joule(1e3),
        };
        let h = TrapPotential::harmonic2d(w, w);
        let x = [1e-7, 0.0, 0.0];
        assert_relative_eq!(g.potential(KRB_MASS, &x), h.potential(KRB_MASS, &x), max_relative = 1e-6);
    }

    #[test]
    fn snapshot_columns() {
        let ens = sample_boltzmann(&trap2(), 100e-9, 3, KRB_MASS, 5).unwrap();
        let mut buf = Vec::new();
        ens.write_snapshot_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,x,y,vx,vy,alive\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
