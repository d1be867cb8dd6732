//! Band-resolved two-body loss of identical fermions in a pancake trap.
//!
//! Every molecule sits in a fixed oscillator mode `(n_x, n_y, n_z)` and
//! carries a survival probability `ρ`. Pairs are lost through p-wave
//! reactions at mode-dependent rates
//!
//! ```text
//! Γ = 3√(2π) b_p³ √(ω_r ω_z)/a_r³ · Σ_σ (ω_σ/ω_r) Ip_σ ∏_{τ≠σ} Is_τ
//! ```
//!
//! where `Is_σ = Is(n_σ, m_σ, n_σ, m_σ)` and `Ip_σ` is its Wronskian
//! counterpart. For equal `n_z` the `z` term vanishes and the sum reduces to
//! the in-plane pair; for different `n_z` all three axes contribute.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc_engine::mean_stderr;
use crate::special::gauss_hermite_scaled;
use crate::units::{HBAR, K_B, NANOKELVIN};

#[derive(Debug, Error)]
pub enum MultibandError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("modes {0:?} are occupied twice (identical fermions)")]
    Pauli([u32; 3]),
    #[error("negative pair rate {rate:e} for modes {a:?} and {b:?}")]
    NegativeRate { rate: f64, a: [u32; 3], b: [u32; 3] },
    #[error("survival probability of molecule {index} left [0, 1]: {value:e} at t = {t:e} s")]
    Probability { index: usize, value: f64, t: f64 },
    #[error("mode {mode:?} exceeds the rate table (cap {cap})")]
    TableCap { mode: [u32; 3], cap: usize },
    #[error("could not place {wanted} molecules in distinct modes after {tries} draws")]
    ModesExhausted { wanted: usize, tries: usize },
}

/// Oscillator eigenfunctions `ψ_0..=ψ_{n_max}` and their derivatives at `u`,
/// from the orthonormal recurrence with a running log-scale so that large
/// `n` and `u` neither overflow nor lose the Gaussian factor prematurely.
fn oscillator_values(n_max: usize, u: f64) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut raw = vec![0.0; n_max + 2];
    let mut log_scale = vec![0.0; n_max + 2];
    let mut ls = -0.5 * u * u;
    raw[0] = PIM4;
    raw[1] = std::f64::consts::SQRT_2 * u * PIM4;
    log_scale[0] = ls;
    log_scale[1] = ls;
    for n in 1..=n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * u * raw[n] - (nf / (nf + 1.0)).sqrt() * raw[n - 1];
        raw[n + 1] = next;
        if next.abs() > 1e150 {
            raw[n + 1] *= 1e-150;
            raw[n] *= 1e-150;
            ls += 150.0 * std::f64::consts::LN_10;
            log_scale[n] = ls;
        }
        log_scale[n + 1] = ls;
    }
    let psi: Vec<f64> = raw
        .iter()
        .zip(&log_scale)
        .map(|(r, l)| if *r == 0.0 { 0.0 } else { r.signum() * (r.abs().ln() + l).exp() })
        .collect();
    let mut dpsi = vec![0.0; n_max + 1];
    for n in 0..=n_max {
        let nf = n as f64;
        let lower = if n > 0 { (nf / 2.0).sqrt() * psi[n - 1] } else { 0.0 };
        dpsi[n] = lower - ((nf + 1.0) / 2.0).sqrt() * psi[n + 1];
    }
    (psi[..=n_max].to_vec(), dpsi)
}

/// Nodes and weights for `∫ F(u) du` with `F = e^{-2u²}·polynomial`, exact
/// up to polynomial degree `2k-1`.
fn doubled_gaussian_rule(k: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_hermite_scaled(k);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (t.iter().map(|x| x * s).collect(), w.iter().map(|x| x * s).collect())
}

fn nodes_for(n: usize, m: usize, p: usize, q: usize) -> usize {
    (2 * (n + m + p + q) + 1).max(8)
}

/// `∫ ψ_n ψ_m ψ_p ψ_q du`, i.e. the Hermite overlap
/// `∫ e^{-2u²} H_n H_m H_p H_q / (π √(2^{n+m+p+q} n!m!p!q!)) du`.
pub fn hermite_integral_is(n: usize, m: usize, p: usize, q: usize) -> f64 {
    is_with_nodes(n, m, p, q, nodes_for(n, m, p, q))
}

fn is_with_nodes(n: usize, m: usize, p: usize, q: usize, k: usize) -> f64 {
    let top = n.max(m).max(p).max(q);
    let (u, w) = doubled_gaussian_rule(k);
    u.iter()
        .zip(&w)
        .map(|(&x, &wi)| {
            let (psi, _) = oscillator_values(top, x);
            wi * psi[n] * psi[m] * psi[p] * psi[q]
        })
        .sum()
}

/// `∫ W(ψ_n, ψ_m) W(ψ_p, ψ_q) du` with `W(a, b) = a'b - ab'`; the Hermite
/// form carries the same prefactor as [`hermite_integral_is`].
pub fn hermite_integral_ip(n: usize, m: usize, p: usize, q: usize) -> f64 {
    ip_with_nodes(n, m, p, q, nodes_for(n, m, p, q))
}

fn ip_with_nodes(n: usize, m: usize, p: usize, q: usize, k: usize) -> f64 {
    let top = n.max(m).max(p).max(q);
    let (u, w) = doubled_gaussian_rule(k);
    u.iter()
        .zip(&w)
        .map(|(&x, &wi)| {
            let (psi, d) = oscillator_values(top, x);
            wi * (d[n] * psi[m] - psi[n] * d[m]) * (d[p] * psi[q] - psi[p] * d[q])
        })
        .sum()
}

/// `3√(2π) b_p³ √(ω_r ω_z)/a_r³` with `a_r = √(ħ/(m ω_r))`.
pub fn rate_prefactor(bp3: f64, omega_r: f64, omega_z: f64, mass: f64) -> f64 {
    let a_r = (HBAR / (mass * omega_r)).sqrt();
    3.0 * (2.0 * std::f64::consts::PI).sqrt() * bp3 * (omega_r * omega_z).sqrt() / a_r.powi(3)
}

/// Convention for `b_p³` from a 3D reactive cross section obeying the p-wave
/// threshold law `σ(E) = σ_ref (E/E_ref)^{1/2}`, with `E` the relative energy
/// `μg²/2`.
///
/// In a uniform thermal gas the loss Hamiltonian gives `dn/dt = -β n²` with
/// `β = 18√(2π) b_p³ k_BT/ħ`; matching `β = ⟨σ g⟩` makes the temperature
/// drop out. This is a modelling choice, not a measured relation.
pub fn bp3_from_cross_section(sigma_ref: f64, e_ref: f64, mass: f64) -> f64 {
    sigma_ref * HBAR / (6.0 * (2.0 * std::f64::consts::PI).sqrt() * (mass * e_ref).sqrt())
}

/// Precomputed `Is(n,m,n,m)` and `Ip(n,m,n,m)` tables for the transverse and
/// axial oscillators. Read-only once built.
#[derive(Debug, Clone)]
pub struct RateCache {
    pub omega_r: f64,
    pub omega_z: f64,
    pub prefactor: f64,
    cap_r: usize,
    cap_z: usize,
    is_r: Vec<f64>,
    ip_r: Vec<f64>,
    is_z: Vec<f64>,
    ip_z: Vec<f64>,
}

fn diagonal_tables(cap: usize) -> (Vec<f64>, Vec<f64>) {
    // ψ_n²ψ_m² has degree 4·cap, so 2·cap + 1 nodes are exact
    let (u, w) = doubled_gaussian_rule(2 * cap + 2);
    let dim = cap + 1;
    let mut is = vec![0.0; dim * dim];
    let mut ip = vec![0.0; dim * dim];
    for (&x, &wi) in u.iter().zip(&w) {
        let (psi, d) = oscillator_values(cap, x);
        for n in 0..dim {
            let pn2 = psi[n] * psi[n];
            for m in n..dim {
                let wr = d[n] * psi[m] - psi[n] * d[m];
                is[n * dim + m] += wi * pn2 * psi[m] * psi[m];
                ip[n * dim + m] += wi * wr * wr;
            }
        }
    }
    for n in 0..dim {
        for m in 0..n {
            is[n * dim + m] = is[m * dim + n];
            ip[n * dim + m] = ip[m * dim + n];
        }
    }
    (is, ip)
}

impl RateCache {
    /// Tables for transverse indices up to `cap_r` and axial up to `cap_z`.
    pub fn new(bp3: f64, omega_r: f64, omega_z: f64, mass: f64, cap_r: usize, cap_z: usize) -> Self {
        let (is_r, ip_r) = diagonal_tables(cap_r);
        let (is_z, ip_z) = diagonal_tables(cap_z);
        Self {
            omega_r,
            omega_z,
            prefactor: rate_prefactor(bp3, omega_r, omega_z, mass),
            cap_r,
            cap_z,
            is_r,
            ip_r,
            is_z,
            ip_z,
        }
    }

    fn lookup(&self, axis: usize, n: u32, m: u32) -> (f64, f64) {
        let (cap, is, ip) = if axis == 2 {
            (self.cap_z, &self.is_z, &self.ip_z)
        } else {
            (self.cap_r, &self.is_r, &self.ip_r)
        };
        let i = n as usize * (cap + 1) + m as usize;
        (is[i], ip[i])
    }

    fn covers(&self, mode: [u32; 3]) -> bool {
        (mode[0] as usize) <= self.cap_r && (mode[1] as usize) <= self.cap_r && (mode[2] as usize) <= self.cap_z
    }

    /// Loss rate of the pair `(a, b)`, 1/s.
    pub fn pair_rate(&self, a: [u32; 3], b: [u32; 3]) -> Result<f64, MultibandError> {
        if a == b {
            return Err(MultibandError::Pauli(a));
        }
        for mode in [a, b] {
            if !self.covers(mode) {
                return Err(MultibandError::TableCap {
                    mode,
                    cap: self.cap_r.max(self.cap_z),
                });
            }
        }
        let f: [(f64, f64); 3] = std::array::from_fn(|k| self.lookup(k, a[k], b[k]));
        let weight = [1.0, 1.0, self.omega_z / self.omega_r];
        let mut sum = 0.0;
        for s in 0..3 {
            let others: f64 = (0..3).filter(|&k| k != s).map(|k| f[k].0).product();
            sum += weight[s] * f[s].1 * others;
        }
        let rate = self.prefactor * sum;
        // Ip_σ is a square integral, so only rounding can push it below zero
        if rate < -1e-12 * self.prefactor.abs() {
            return Err(MultibandError::NegativeRate { rate, a, b });
        }
        Ok(rate.max(0.0))
    }
}

/// Fraction of molecules per band from the Boltzmann ratio
/// `exp(-α ħω_z/k_BT)`. With `n_max = Some(k)` bands `0..k-1` keep their
/// ratio and the remainder goes to band `k-1`; with `None` bands are listed
/// until the ratio underflows.
pub fn band_fractions(temp: f64, omega_z: f64, n_max: Option<usize>) -> Result<Vec<f64>, MultibandError> {
    if !(temp > 0.0 && omega_z > 0.0) {
        return Err(MultibandError::Config("temperature and ω_z must be positive".into()));
    }
    let q = (-HBAR * omega_z / (K_B * temp)).exp();
    let p = |a: usize| (1.0 - q) * q.powi(a as i32);
    match n_max {
        Some(0) => Err(MultibandError::Config("n_max must be at least 1".into())),
        Some(k) => {
            let mut out: Vec<f64> = (0..k - 1).map(p).collect();
            out.push(q.powi(k as i32 - 1));
            Ok(out)
        }
        None => {
            let mut out = Vec::new();
            let mut a = 0;
            while out.is_empty() || p(a) > 1e-16 {
                out.push(p(a));
                a += 1;
            }
            Ok(out)
        }
    }
}

/// Integer band occupations for `n` molecules by largest remainder, so the
/// counts always sum to `n`.
pub fn init_band_populations(n: usize, temp: f64, omega_z: f64, n_max: usize) -> Result<Vec<usize>, MultibandError> {
    let frac = band_fractions(temp, omega_z, Some(n_max))?;
    let exact: Vec<f64> = frac.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let short = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n_max).collect();
    // ties go to the lower band
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(short) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Molecules with fixed modes and survival probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRegister {
    pub modes: Vec<[u32; 3]>,
    pub rho: Vec<f64>,
    pub omega_r: f64,
}

impl ModeRegister {
    pub fn new(modes: Vec<[u32; 3]>, omega_r: f64) -> Result<Self, MultibandError> {
        let mut seen = HashSet::new();
        for m in &modes {
            if !seen.insert(*m) {
                return Err(MultibandError::Pauli(*m));
            }
        }
        let rho = vec![1.0; modes.len()];
        Ok(Self { modes, rho, omega_r })
    }

    pub fn number(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// `Σ ħω_r (n_x + n_y) ρ / (N k_B)`, K.
    pub fn temperature(&self) -> f64 {
        let n = self.number();
        if n <= 0.0 {
            return 0.0;
        }
        let e: f64 = self
            .modes
            .iter()
            .zip(&self.rho)
            .map(|(m, r)| (m[0] + m[1]) as f64 * r)
            .sum();
        HBAR * self.omega_r * e / (n * K_B)
    }

    /// Draw band occupations per [`init_band_populations`] and transverse
    /// modes from a Boltzmann distribution at `temp`, redrawing duplicates.
    pub fn draw<R: Rng>(cfg: &MultibandConfig, rng: &mut R) -> Result<Self, MultibandError> {
        let counts = init_band_populations(cfg.n0, cfg.temp, cfg.omega_z, cfg.n_max)?;
        let q = (-HBAR * cfg.omega_r / (K_B * cfg.temp)).exp();
        let geo = Geometric::new(1.0 - q).map_err(|e| MultibandError::Config(e.to_string()))?;
        let mut seen = HashSet::with_capacity(cfg.n0);
        let mut modes = Vec::with_capacity(cfg.n0);
        let max_tries = 1000 * cfg.n0.max(1);
        let mut tries = 0;
        for (band, &count) in counts.iter().enumerate() {
            let mut placed = 0;
            while placed < count {
                tries += 1;
                if tries > max_tries {
                    return Err(MultibandError::ModesExhausted {
                        wanted: cfg.n0,
                        tries,
                    });
                }
                let mode = [geo.sample(rng) as u32, geo.sample(rng) as u32, band as u32];
                if seen.insert(mode) {
                    modes.push(mode);
                    placed += 1;
                }
            }
        }
        Self::new(modes, cfg.omega_r)
    }
}

/// Configuration of a band-resolved loss run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultibandConfig {
    pub n0: usize,
    /// Initial temperature, K.
    pub temp: f64,
    pub omega_r: f64,
    pub omega_z: f64,
    pub n_max: usize,
    /// p-wave scattering volume, m³.
    pub bp3: f64,
    pub mass: f64,
    pub draws: usize,
    pub seed: u64,
    pub t_end: f64,
    /// Output samples including `t = 0`.
    pub n_out: usize,
    /// Largest relative change of any `ρ` in one step.
    pub max_step_change: f64,
}

impl MultibandConfig {
    pub fn validate(&self) -> Result<(), MultibandError> {
        let bad = |m: &str| Err(MultibandError::Config(m.to_string()));
        if self.n0 < 2 {
            return bad("need at least two molecules");
        }
        if !(self.temp > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.omega_r > 0.0 && self.omega_z > self.omega_r) {
            return bad("need 0 < ω_r < ω_z");
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1");
        }
        if !(self.bp3 >= 0.0) {
            return bad("b_p³ must be non-negative");
        }
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if self.draws == 0 {
            return bad("draws must be at least 1");
        }
        if !(self.t_end > 0.0) || self.n_out < 2 {
            return bad("need t_end > 0 and at least two output samples");
        }
        if !(self.max_step_change > 0.0 && self.max_step_change <= 1e-2) {
            return bad("max_step_change must lie in (0, 1e-2]");
        }
        Ok(())
    }

    pub fn output_times(&self) -> Vec<f64> {
        (0..self.n_out)
            .map(|k| self.t_end * k as f64 / (self.n_out - 1) as f64)
            .collect()
    }
}

/// Dense pair-rate matrix for one register.
pub fn rate_matrix(reg: &ModeRegister, cache: &RateCache) -> Result<Vec<f64>, MultibandError> {
    let n = reg.modes.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = cache.pair_rate(reg.modes[i], reg.modes[j])?;
            g[i * n + j] = r;
            g[j * n + i] = r;
        }
    }
    Ok(g)
}

fn loss_rates(g: &[f64], rho: &[f64], out: &mut [f64]) {
    let n = rho.len();
    for i in 0..n {
        let row = &g[i * n..(i + 1) * n];
        let s: f64 = row.iter().zip(rho).map(|(a, b)| a * b).sum();
        out[i] = s;
    }
}

/// Integrate `dρ_i/dt = -ρ_i Σ_j Γ_ij ρ_j` with RK4, reporting `(N, T)` at
/// each of `times` (which must start at 0 and increase).
pub fn evolve_register(
    reg: &mut ModeRegister,
    g: &[f64],
    times: &[f64],
    max_change: f64,
) -> Result<Vec<(f64, f64)>, MultibandError> {
    let n = reg.rho.len();
    let mut out = vec![(reg.number(), reg.temperature())];
    let mut t = times.first().copied().unwrap_or(0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut lam = vec![0.0; n];
    let deriv = |rho: &[f64], lam: &mut [f64], k: &mut [f64]| {
        loss_rates(g, rho, lam);
        for i in 0..n {
            k[i] = -rho[i] * lam[i];
        }
    };
    for &t_next in &times[1..] {
        while t < t_next {
            deriv(&reg.rho, &mut lam, &mut k1);
            let fastest = lam.iter().cloned().fold(0.0, f64::max);
            let mut h = t_next - t;
            if fastest > 0.0 {
                h = h.min(max_change / fastest);
            }
            for i in 0..n {
                tmp[i] = reg.rho[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut lam, &mut k2);
            for i in 0..n {
                tmp[i] = reg.rho[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut lam, &mut k3);
            for i in 0..n {
                tmp[i] = reg.rho[i] + h * k3[i];
            }
            deriv(&tmp, &mut lam, &mut k4);
            for i in 0..n {
                reg.rho[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            // land exactly on the output time to avoid a sliver step
            t = if t_next - (t + h) <= 1e-12 * t_next { t_next } else { t + h };
            for (i, r) in reg.rho.iter_mut().enumerate() {
                if !(*r >= -1e-9 && *r <= 1.0 + 1e-9) {
                    return Err(MultibandError::Probability { index: i, value: *r, t });
                }
                *r = r.clamp(0.0, 1.0);
            }
        }
        out.push((reg.number(), reg.temperature()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultibandPoint {
    pub t: f64,
    pub n_mean: f64,
    pub n_stderr: f64,
    pub temp_mean: f64,
    pub temp_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultibandResult {
    pub bands: usize,
    pub series: Vec<MultibandPoint>,
    /// Per draw, `(N, T)` at each output time.
    pub draws: Vec<Vec<(f64, f64)>>,
}

impl MultibandResult {
    /// CSV with columns `t_s, N_mean, N_stderr, T_nK_mean, T_nK_stderr, bands`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_s", "N_mean", "N_stderr", "T_nK_mean", "T_nK_stderr", "bands"])
            .map_err(std::io::Error::other)?;
        for p in &self.series {
            wtr.write_record([
                p.t.to_string(),
                p.n_mean.to_string(),
                p.n_stderr.to_string(),
                (p.temp_mean / NANOKELVIN).to_string(),
                (p.temp_stderr / NANOKELVIN).to_string(),
                self.bands.to_string(),
            ])
            .map_err(std::io::Error::other)?;
        }
        wtr.flush()
    }
}

/// Draw `cfg.draws` registers (seeds `seed + k`), evolve each and average.
pub fn evolve_master_equation(cfg: &MultibandConfig) -> Result<MultibandResult, MultibandError> {
    cfg.validate()?;
    let registers: Vec<ModeRegister> = (0..cfg.draws)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
            ModeRegister::draw(cfg, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let cap_r = registers
        .iter()
        .flat_map(|r| r.modes.iter().map(|m| m[0].max(m[1]) as usize))
        .max()
        .unwrap_or(0);
    let cache = RateCache::new(cfg.bp3, cfg.omega_r, cfg.omega_z, cfg.mass, cap_r, cfg.n_max - 1);
    let times = cfg.output_times();
    let draws: Vec<Vec<(f64, f64)>> = registers
        .into_par_iter()
        .map(|mut reg| {
            let g = rate_matrix(&reg, &cache)?;
            evolve_register(&mut reg, &g, &times, cfg.max_step_change)
        })
        .collect::<Result<_, _>>()?;
    let series = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (n_mean, n_stderr) = mean_stderr(draws.iter().map(|d| d[k].0));
            let (temp_mean, temp_stderr) = mean_stderr(draws.iter().map(|d| d[k].1));
            MultibandPoint {
                t,
                n_mean,
                n_stderr,
                temp_mean,
                temp_stderr,
            }
        })
        .collect();
    Ok(MultibandResult {
        bands: cfg.n_max,
        series,
        draws,
    })
}

/// Initial `-dN/dt / N` averaged over a few draws; `1/(N₀·rate)` sets the
/// two-body half-life scale.
pub fn initial_loss_rate(cfg: &MultibandConfig, draws: usize) -> Result<f64, MultibandError> {
    let mut total = 0.0;
    for k in 0..draws.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        let reg = ModeRegister::draw(cfg, &mut rng)?;
        let cap_r = reg.modes.iter().map(|m| m[0].max(m[1]) as usize).max().unwrap_or(0);
        let cache = RateCache::new(cfg.bp3, cfg.omega_r, cfg.omega_z, cfg.mass, cap_r, cfg.n_max - 1);
        let g = rate_matrix(&reg, &cache)?;
        total += g.iter().sum::<f64>() / reg.modes.len() as f64;
    }
    Ok(total / draws.max(1) as f64)
}
