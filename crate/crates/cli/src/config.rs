//! TOML experiment configs: parsing, unit conversion, defaults and
//! validation. Everything is checked here, before any simulation starts.

use std::ops::Range;
use std::path::{Path, PathBuf};

use evapsim_core::mc_engine::{equilibrium_rate_power_law, self_consistent_cut, size_for_rate};
use evapsim_core::multiband::{initial_loss_rate, MultibandConfig};
use evapsim_core::scattering::{CrossSectionTable, KRB_TABLE};
use evapsim_core::tb_kinetics::CutRule;
use evapsim_core::units::{hz_to_omega, KRB_MASS, K_B};
use evapsim_core::{AngularLaw, Dim, TrapPotential};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::units::{parse_quantity, Dimension, RawQuantity};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    At { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Defaults applied when a key is absent.
pub mod defaults {
    pub const ZETA: f64 = 1.0 / 200.0;
    pub const DRAWS: usize = 32;
    pub const STOP_FRACTION: f64 = 0.1;
    pub const COLLISION_FRACTION: f64 = 0.02;
    pub const T_MAX_S: f64 = 1e4;
    pub const SAMPLE_EVERY: usize = 20;
    pub const XI: f64 = 0.1;
    pub const THERMALIZATION_SEEDS: usize = 8;
    pub const SAMPLES: usize = 60;
    pub const ANTIEVAP_RATE: f64 = 0.1;
    pub const ANTIEVAP_STOP: f64 = 0.5;
    pub const ANTIEVAP_SEEDS: usize = 10;
    pub const HALF_LIVES: f64 = 3.0;
    pub const N_OUT: usize = 41;
    pub const MAX_STEP_CHANGE: f64 = 1e-3;
    pub const MAX_LOSS_PER_STEP: f64 = 2e-3;
}

type Q = Spanned<RawQuantity>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Spanned<String>,
    #[serde(default)]
    seed: u64,
    output: Option<String>,
    trap: Option<Spanned<RawTrap>>,
    gas: Option<Spanned<RawGas>>,
    elastic: Option<Spanned<RawElastic>>,
    reactive: Option<Spanned<RawReactive>>,
    evaporation: Option<Spanned<RawEvaporation>>,
    thermalization: Option<Spanned<RawThermalization>>,
    antievap: Option<Spanned<RawAntiEvap>>,
    multiband: Option<Spanned<RawMultiband>>,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    /// Two entries for a 2D trap, three for 3D.
    frequencies: Spanned<Vec<RawQuantity>>,
    /// Depth of an isotropic 2D Gaussian trap, as a temperature.
    gaussian_depth: Option<Q>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGas {
    n: usize,
    temperature: Q,
    mass: Option<Q>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElastic {
    law: Option<Spanned<String>>,
    a: Option<f64>,
    a_prime: Option<f64>,
    alpha: Option<f64>,
    alpha_prime: Option<f64>,
    /// Length in 2D, area in 3D.
    cross_section: Option<Q>,
    /// Equilibrium collision rate at t = 0 in units of the largest trap ω.
    rate: Option<Spanned<f64>>,
    table: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReactive {
    zeta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaporation {
    eta: Option<Spanned<f64>>,
    stop_fraction: Option<f64>,
    collision_fraction: Option<f64>,
    t_max: Option<Q>,
    cut_rule: Option<CutRule>,
    max_loss_per_step: Option<f64>,
    sample_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermalization {
    xi: Option<f64>,
    seeds: Option<usize>,
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntiEvap {
    /// Initial loss rate in units of the largest trap ω.
    rate: Option<f64>,
    stop_fraction: Option<f64>,
    seeds: Option<usize>,
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMultiband {
    n0: usize,
    temperature: Q,
    nu_r: Q,
    nu_z: Q,
    n_max: usize,
    bp3: Q,
    mass: Option<Q>,
    draws: Option<usize>,
    t_end: Option<Q>,
    /// End time in units of the single-band two-body half-life.
    half_lives: Option<f64>,
    n_out: Option<usize>,
    max_step_change: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    base: Spanned<String>,
    eta: Option<Vec<f64>>,
    laws: Option<Vec<String>>,
    alpha: Option<Vec<f64>>,
    traps: Option<Vec<Vec<RawQuantity>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Thermalization,
    Evaporation,
    Tb,
    Antievap,
    Multiband,
    Sweep,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "thermalization" => Self::Thermalization,
            "evaporation" => Self::Evaporation,
            "tb" => Self::Tb,
            "antievap" => Self::Antievap,
            "multiband" => Self::Multiband,
            "sweep" => Self::Sweep,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Thermalization => "thermalization",
            Self::Evaporation => "evaporation",
            Self::Tb => "tb",
            Self::Antievap => "antievap",
            Self::Multiband => "multiband",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Gas {
    pub trap: TrapPotential,
    pub n: usize,
    /// K.
    pub temperature: f64,
    /// kg.
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Law {
    Fixed { name: String, law: AngularLaw },
    /// Energy-dependent cross sections; `path` is `None` for the built-in
    /// KRb set.
    Table { path: Option<PathBuf> },
}

impl Law {
    pub fn label(&self) -> String {
        match self {
            Self::Fixed { name, .. } => name.clone(),
            Self::Table { path: None } => "krb".into(),
            Self::Table { path: Some(p) } => p.display().to_string(),
        }
    }

    pub fn load_table(&self) -> Result<Option<CrossSectionTable>, String> {
        match self {
            Self::Fixed { .. } => Ok(None),
            Self::Table { path: None } => Ok(Some(CrossSectionTable::krb())),
            Self::Table { path: Some(p) } => CrossSectionTable::from_csv_path(p).map(Some).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Elastic {
    pub law: Law,
    /// Length (2D) or area (3D); absent for tables, which carry their own.
    pub size: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvapJob {
    pub gas: Gas,
    pub elastic: Elastic,
    pub zeta: f64,
    pub eta: f64,
    pub stop_fraction: f64,
    pub collision_fraction: f64,
    pub t_max: f64,
    pub cut_rule: CutRule,
    pub max_loss_per_step: f64,
    pub sample_every: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermJob {
    pub gas: Gas,
    pub law: AngularLaw,
    pub size: f64,
    pub xi: f64,
    pub seeds: Vec<u64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AntiJob {
    pub gas: Gas,
    /// `λ_re = coeff·E^{1/2}`.
    pub coeff: f64,
    pub stop_fraction: f64,
    pub seeds: Vec<u64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepChild {
    pub index: usize,
    pub seed: u64,
    pub dim: usize,
    pub law: String,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub job: Job,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepJob {
    pub base: Kind,
    pub children: Vec<SweepChild>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Job {
    Thermalization(ThermJob),
    Evaporation(EvapJob),
    Tb(EvapJob),
    Antievap(AntiJob),
    Multiband(MultibandConfig),
    Sweep(SweepJob),
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub seed: u64,
    pub output: PathBuf,
    pub job: Job,
}

impl ExperimentSpec {
    /// Every seed that drives a random stream, in run order.
    pub fn seeds(&self) -> Vec<u64> {
        fn of(job: &Job, seed: u64) -> Vec<u64> {
            match job {
                Job::Thermalization(t) => t.seeds.clone(),
                Job::Antievap(a) => a.seeds.clone(),
                Job::Multiband(m) => (0..m.draws as u64).map(|k| m.seed + k).collect(),
                Job::Sweep(s) => s.children.iter().flat_map(|c| of(&c.job, c.seed)).collect(),
                Job::Evaporation(_) | Job::Tb(_) => vec![seed],
            }
        }
        of(&self.job, self.seed)
    }

    /// Replace the master seed and re-derive every child seed.
    pub fn reseed(&mut self, seed: u64) {
        fn apply(job: &mut Job, seed: u64) {
            match job {
                Job::Thermalization(t) => t.seeds = sub_seeds(seed, t.seeds.len()),
                Job::Antievap(a) => a.seeds = sub_seeds(seed, a.seeds.len()),
                Job::Multiband(m) => m.seed = seed,
                Job::Sweep(s) => {
                    for c in &mut s.children {
                        c.seed = child_seed(seed, c.index);
                        apply(&mut c.job, c.seed);
                    }
                }
                Job::Evaporation(_) | Job::Tb(_) => {}
            }
        }
        self.seed = seed;
        apply(&mut self.job, seed);
    }
}

/// Seed of the `k`-th sweep child.
pub fn child_seed(master: u64, k: usize) -> u64 {
    master.wrapping_add(k as u64)
}

/// Independent seeds for repeated runs inside one child, drawn from
/// separate ChaCha streams so that asking for more never changes the first.
pub fn sub_seeds(seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng.next_u64()
        })
        .collect()
}

struct Ctx<'a> {
    src: &'a str,
    base_dir: &'a Path,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, msg: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError::At {
            line: self.line(span),
            msg: msg.into(),
        })
    }

    fn quantity(&self, q: &Q, dim: Dimension, what: &str) -> Result<f64, ConfigError> {
        parse_quantity(q.get_ref(), dim).or_else(|m| self.err(q.span(), format!("{what}: {m}")))
    }

    fn positive(&self, q: &Q, dim: Dimension, what: &str) -> Result<f64, ConfigError> {
        let v = self.quantity(q, dim, what)?;
        if v > 0.0 {
            Ok(v)
        } else {
            self.err(q.span(), format!("{what} must be positive"))
        }
    }

    fn frequencies(&self, raw: &[RawQuantity], span: Range<usize>) -> Result<Vec<f64>, ConfigError> {
        raw.iter()
            .map(|q| match parse_quantity(q, Dimension::Frequency) {
                Ok(v) if v > 0.0 => Ok(hz_to_omega(v)),
                Ok(_) => self.err(span.clone(), "trap frequencies must be positive"),
                Err(m) => self.err(span.clone(), format!("trap frequency: {m}")),
            })
            .collect()
    }
}

fn in_unit_interval(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

fn build_trap(ctx: &Ctx, omegas: &[f64], depth: Option<&Q>, span: Range<usize>) -> Result<TrapPotential, ConfigError> {
    let trap = match (omegas, depth) {
        (&[wx, wy], None) => TrapPotential::harmonic2d(wx, wy),
        (&[wx, wy, wz], None) => TrapPotential::harmonic3d(wx, wy, wz),
        (&[w], Some(d)) => TrapPotential::Gaussian2d {
            omega: w,
            depth: K_B * ctx.positive(d, Dimension::Temperature, "gaussian_depth")?,
        },
        (_, Some(_)) => return ctx.err(span, "a Gaussian trap takes exactly one frequency"),
        _ => return ctx.err(span, "frequencies needs two (2D) or three (3D) entries"),
    };
    Ok(trap)
}

fn named_law(name: &str) -> Option<AngularLaw> {
    let row = |e: f64| KRB_TABLE.iter().find(|r| r.0 == e).map(|r| r.2);
    match name {
        "isotropic" => Some(AngularLaw::isotropic()),
        "krb_1nK" => row(1.0),
        "krb_10nK" => row(10.0),
        "krb_100nK" => row(100.0),
        "krb_1uK" => row(1000.0),
        _ => None,
    }
}

const LAW_NAMES: &str = "isotropic, krb_1nK, krb_10nK, krb_100nK, krb_1uK, krb, table, custom, alpha_<x>";

fn resolve_law(ctx: &Ctx, raw: &RawElastic, name_override: Option<&str>, span: Range<usize>) -> Result<Law, ConfigError> {
    let name = name_override
        .map(str::to_string)
        .or_else(|| raw.law.as_ref().map(|l| l.get_ref().clone()));
    let name_span = raw.law.as_ref().map_or(span.clone(), |l| l.span());
    let name = match name {
        Some(n) => n,
        None if raw.alpha.is_some() => "custom".into(),
        None => "isotropic".into(),
    };
    if let Some(law) = named_law(&name) {
        return Ok(Law::Fixed { name, law });
    }
    if let Some(a) = name.strip_prefix("alpha_") {
        let alpha: f64 = a.parse().or_else(|_| ctx.err(name_span.clone(), format!("bad law `{name}`")))?;
        let law = AngularLaw::single(alpha).or_else(|e| ctx.err(name_span.clone(), e.to_string()))?;
        return Ok(Law::Fixed { name, law });
    }
    match name.as_str() {
        "krb" => Ok(Law::Table { path: None }),
        "table" => {
            let t = raw
                .table
                .as_ref()
                .map_or_else(|| ctx.err(span.clone(), "law = \"table\" needs `table = <csv path>`"), Ok)?;
            let path = ctx.base_dir.join(t.get_ref());
            if !path.is_file() {
                return ctx.err(t.span(), format!("table file {} does not exist", path.display()));
            }
            CrossSectionTable::from_csv_path(&path).or_else(|e| ctx.err(t.span(), e.to_string()))?;
            Ok(Law::Table { path: Some(path) })
        }
        "custom" => {
            let alpha = raw.alpha.unwrap_or(0.0);
            let law = AngularLaw::new(
                raw.a.unwrap_or(1.0),
                raw.a_prime.unwrap_or(0.0),
                alpha,
                raw.alpha_prime.unwrap_or(alpha),
            )
            .or_else(|e| ctx.err(span.clone(), e.to_string()))?;
            Ok(Law::Fixed { name, law })
        }
        _ => ctx.err(name_span, format!("unknown law `{name}` (expected one of {LAW_NAMES})")),
    }
}

fn resolve_elastic(ctx: &Ctx, raw: &Spanned<RawElastic>, gas: &Gas, law_override: Option<&str>) -> Result<Elastic, ConfigError> {
    let span = raw.span();
    let raw = raw.get_ref();
    let law = resolve_law(ctx, raw, law_override, span.clone())?;
    if matches!(law, Law::Table { .. }) && gas.trap.dim() == Dim::Three {
        return ctx.err(span, "energy-dependent tables are only supported in 2D");
    }
    let size = match (&law, &raw.cross_section, &raw.rate) {
        (Law::Table { .. }, None, None) => None,
        (Law::Table { .. }, _, _) => return ctx.err(span, "tables carry their own magnitude; drop cross_section/rate"),
        (_, Some(_), Some(_)) => return ctx.err(span, "give either cross_section or rate, not both"),
        (_, Some(q), None) => {
            let dim = match gas.trap.dim() {
                Dim::Two => Dimension::Length,
                Dim::Three => Dimension::Area,
            };
            Some(ctx.positive(q, dim, "cross_section")?)
        }
        (_, None, Some(r)) => {
            if !(*r.get_ref() > 0.0) {
                return ctx.err(r.span(), "rate must be positive");
            }
            let gamma = r.get_ref() * gas.trap.omega_max();
            let size = size_for_rate(&gas.trap, gas.temperature, gamma, gas.n as f64, gas.mass)
                .or_else(|e| ctx.err(r.span(), e.to_string()))?;
            Some(size)
        }
        (_, None, None) => return ctx.err(span, "[elastic] needs cross_section or rate"),
    };
    Ok(Elastic { law, size })
}

fn need<'a, T>(ctx: &Ctx, v: &'a Option<Spanned<T>>, section: &str, kind_span: Range<usize>) -> Result<&'a Spanned<T>, ConfigError> {
    v.as_ref()
        .map_or_else(|| ctx.err(kind_span, format!("this kind needs a [{section}] section")), Ok)
}

struct Resolver<'a> {
    ctx: Ctx<'a>,
    raw: RawConfig,
}

impl Resolver<'_> {
    fn kind_span(&self) -> Range<usize> {
        self.raw.kind.span()
    }

    fn gas(&self, trap_override: Option<&[f64]>) -> Result<Gas, ConfigError> {
        let ctx = &self.ctx;
        let trap_raw = need(ctx, &self.raw.trap, "trap", self.kind_span())?;
        let gas_raw = need(ctx, &self.raw.gas, "gas", self.kind_span())?;
        let t = trap_raw.get_ref();
        let omegas = match trap_override {
            Some(w) => w.to_vec(),
            None => ctx.frequencies(t.frequencies.get_ref(), t.frequencies.span())?,
        };
        let trap = build_trap(ctx, &omegas, t.gaussian_depth.as_ref(), t.frequencies.span())?;
        let g = gas_raw.get_ref();
        if g.n < 2 {
            return ctx.err(gas_raw.span(), "gas.n must be at least 2");
        }
        Ok(Gas {
            trap,
            n: g.n,
            temperature: ctx.positive(&g.temperature, Dimension::Temperature, "temperature")?,
            mass: match &g.mass {
                Some(m) => ctx.positive(m, Dimension::Mass, "mass")?,
                None => KRB_MASS,
            },
        })
    }

    fn zeta(&self) -> Result<f64, ConfigError> {
        match &self.raw.reactive {
            None => Ok(defaults::ZETA),
            Some(r) => match r.get_ref().zeta {
                None => Ok(defaults::ZETA),
                Some(z) if (0.0..=1.0).contains(&z) => Ok(z),
                Some(_) => self.ctx.err(r.span(), "zeta must lie in [0, 1]"),
            },
        }
    }

    fn evap(&self, kind: Kind, gas: Gas, law: Option<&str>, eta: Option<f64>) -> Result<EvapJob, ConfigError> {
        let ctx = &self.ctx;
        let ev_raw = need(ctx, &self.raw.evaporation, "evaporation", self.kind_span())?;
        let ev = ev_raw.get_ref();
        let el_raw = need(ctx, &self.raw.elastic, "elastic", self.kind_span())?;
        let elastic = resolve_elastic(ctx, el_raw, &gas, law)?;
        let eta = match (eta, &ev.eta) {
            (Some(e), _) => e,
            (None, Some(e)) => *e.get_ref(),
            (None, None) => return ctx.err(ev_raw.span(), "evaporation.eta is required"),
        };
        let eta_span = ev.eta.as_ref().map_or(ev_raw.span(), |e| e.span());
        if !(eta > 1.0) || self_consistent_cut(gas.trap.dim(), eta).is_none() {
            return ctx.err(eta_span, format!("eta = {eta} has no self-consistent cut (need eta > 1)"));
        }
        let stop_fraction = ev.stop_fraction.unwrap_or(defaults::STOP_FRACTION);
        let collision_fraction = ev.collision_fraction.unwrap_or(defaults::COLLISION_FRACTION);
        let max_loss = ev.max_loss_per_step.unwrap_or(defaults::MAX_LOSS_PER_STEP);
        if !in_unit_interval(stop_fraction) {
            return ctx.err(ev_raw.span(), "stop_fraction must lie in (0, 1)");
        }
        if !(collision_fraction > 0.0 && collision_fraction <= 0.1) {
            return ctx.err(ev_raw.span(), "collision_fraction must lie in (0, 0.1]");
        }
        if !(max_loss > 0.0 && max_loss < 0.1) {
            return ctx.err(ev_raw.span(), "max_loss_per_step must lie in (0, 0.1)");
        }
        if kind == Kind::Tb {
            if !gas.trap.is_harmonic() {
                return ctx.err(self.kind_span(), "the truncated-Boltzmann solver needs a harmonic trap");
            }
            if matches!(elastic.law, Law::Table { .. }) {
                return ctx.err(el_raw.span(), "the truncated-Boltzmann solver needs a constant cross section");
            }
        }
        Ok(EvapJob {
            gas,
            elastic,
            zeta: self.zeta()?,
            eta,
            stop_fraction,
            collision_fraction,
            t_max: match &ev.t_max {
                Some(q) => ctx.positive(q, Dimension::Time, "t_max")?,
                None => defaults::T_MAX_S,
            },
            cut_rule: ev.cut_rule.unwrap_or_default(),
            max_loss_per_step: max_loss,
            sample_every: ev.sample_every.unwrap_or(defaults::SAMPLE_EVERY).max(1),
        })
    }

    fn thermalization(&self, gas: Gas, law: Option<&str>, seed: u64) -> Result<ThermJob, ConfigError> {
        let ctx = &self.ctx;
        if !gas.trap.is_harmonic() {
            return ctx.err(self.kind_span(), "thermalization runs need a harmonic trap");
        }
        let el_raw = need(ctx, &self.raw.elastic, "elastic", self.kind_span())?;
        let elastic = resolve_elastic(ctx, el_raw, &gas, law)?;
        let Law::Fixed { law, .. } = elastic.law else {
            return ctx.err(el_raw.span(), "thermalization needs a fixed angular law");
        };
        let (xi, seeds, samples, span) = match &self.raw.thermalization {
            Some(t) => {
                let r = t.get_ref();
                (r.xi, r.seeds, r.samples, t.span())
            }
            None => (None, None, None, self.kind_span()),
        };
        let xi = xi.unwrap_or(defaults::XI);
        if !(xi > 0.0 && xi <= 0.2) {
            return ctx.err(span, "xi must lie in (0, 0.2]");
        }
        let seeds = seeds.unwrap_or(defaults::THERMALIZATION_SEEDS);
        if seeds == 0 {
            return ctx.err(span, "seeds must be at least 1");
        }
        Ok(ThermJob {
            gas,
            law,
            size: elastic.size.expect("fixed laws carry a size"),
            xi,
            seeds: sub_seeds(seed, seeds),
            samples: samples.unwrap_or(defaults::SAMPLES).max(3),
        })
    }

    fn antievap(&self, gas: Gas, seed: u64) -> Result<AntiJob, ConfigError> {
        let ctx = &self.ctx;
        if !gas.trap.is_harmonic() {
            return ctx.err(self.kind_span(), "anti-evaporation runs need a harmonic trap");
        }
        let (rate, stop, seeds, samples, span) = match &self.raw.antievap {
            Some(a) => {
                let r = a.get_ref();
                (r.rate, r.stop_fraction, r.seeds, r.samples, a.span())
            }
            None => (None, None, None, None, self.kind_span()),
        };
        let rate = rate.unwrap_or(defaults::ANTIEVAP_RATE);
        let stop_fraction = stop.unwrap_or(defaults::ANTIEVAP_STOP);
        if !(rate > 0.0) {
            return ctx.err(span, "rate must be positive");
        }
        if !in_unit_interval(stop_fraction) {
            return ctx.err(span, "stop_fraction must lie in (0, 1)");
        }
        let seeds = seeds.unwrap_or(defaults::ANTIEVAP_SEEDS);
        if seeds == 0 {
            return ctx.err(span, "seeds must be at least 1");
        }
        let per_coeff = equilibrium_rate_power_law(&gas.trap, gas.temperature, 1.0, gas.n as f64, gas.mass);
        Ok(AntiJob {
            coeff: rate * gas.trap.omega_max() / per_coeff,
            gas,
            stop_fraction,
            seeds: sub_seeds(seed, seeds),
            samples: samples.unwrap_or(defaults::SAMPLES).max(3),
        })
    }

    fn multiband(&self, seed: u64) -> Result<MultibandConfig, ConfigError> {
        let ctx = &self.ctx;
        let raw = need(ctx, &self.raw.multiband, "multiband", self.kind_span())?;
        let m = raw.get_ref();
        let mut cfg = MultibandConfig {
            n0: m.n0,
            temp: ctx.positive(&m.temperature, Dimension::Temperature, "temperature")?,
            omega_r: hz_to_omega(ctx.positive(&m.nu_r, Dimension::Frequency, "nu_r")?),
            omega_z: hz_to_omega(ctx.positive(&m.nu_z, Dimension::Frequency, "nu_z")?),
            n_max: m.n_max,
            bp3: ctx.quantity(&m.bp3, Dimension::Volume, "bp3")?,
            mass: match &m.mass {
                Some(q) => ctx.positive(q, Dimension::Mass, "mass")?,
                None => KRB_MASS,
            },
            draws: m.draws.unwrap_or(defaults::DRAWS),
            seed,
            t_end: 1.0,
            n_out: m.n_out.unwrap_or(defaults::N_OUT),
            max_step_change: m.max_step_change.unwrap_or(defaults::MAX_STEP_CHANGE),
        };
        cfg.validate().or_else(|e| ctx.err(raw.span(), e.to_string()))?;
        cfg.t_end = match (&m.t_end, m.half_lives) {
            (Some(_), Some(_)) => return ctx.err(raw.span(), "give either t_end or half_lives, not both"),
            (Some(q), None) => ctx.positive(q, Dimension::Time, "t_end")?,
            (None, h) => {
                let h = h.unwrap_or(defaults::HALF_LIVES);
                if !(h > 0.0) {
                    return ctx.err(raw.span(), "half_lives must be positive");
                }
                // same time axis for every band count: the single-band rate
                let reference = MultibandConfig { n_max: 1, ..cfg.clone() };
                let rate = initial_loss_rate(&reference, 4).or_else(|e| ctx.err(raw.span(), e.to_string()))?;
                if !(rate > 0.0) {
                    return ctx.err(raw.span(), "zero loss rate; set t_end explicitly");
                }
                h / rate
            }
        };
        Ok(cfg)
    }

    fn single(&self, kind: Kind, seed: u64) -> Result<Job, ConfigError> {
        Ok(match kind {
            Kind::Thermalization => Job::Thermalization(self.thermalization(self.gas(None)?, None, seed)?),
            Kind::Evaporation => Job::Evaporation(self.evap(kind, self.gas(None)?, None, None)?),
            Kind::Tb => Job::Tb(self.evap(kind, self.gas(None)?, None, None)?),
            Kind::Antievap => Job::Antievap(self.antievap(self.gas(None)?, seed)?),
            Kind::Multiband => Job::Multiband(self.multiband(seed)?),
            Kind::Sweep => unreachable!("sweeps are expanded separately"),
        })
    }

    fn sweep(&self, seed: u64) -> Result<SweepJob, ConfigError> {
        let ctx = &self.ctx;
        let raw = need(ctx, &self.raw.sweep, "sweep", self.kind_span())?;
        let s = raw.get_ref();
        let base = match Kind::parse(s.base.get_ref()) {
            Some(k @ (Kind::Thermalization | Kind::Evaporation | Kind::Tb)) => k,
            _ => return ctx.err(s.base.span(), "sweep.base must be thermalization, evaporation or tb"),
        };
        let traps: Vec<Option<Vec<f64>>> = match &s.traps {
            Some(list) if !list.is_empty() => list
                .iter()
                .map(|t| ctx.frequencies(t, raw.span()).map(Some))
                .collect::<Result<_, _>>()?,
            _ => vec![None],
        };
        let mut laws: Vec<Option<String>> = s.laws.clone().unwrap_or_default().into_iter().map(Some).collect();
        if let Some(alphas) = &s.alpha {
            laws.extend(alphas.iter().map(|a| Some(format!("alpha_{a}"))));
        }
        if laws.is_empty() {
            laws.push(None);
        }
        let etas: Vec<Option<f64>> = match (&s.eta, base) {
            (Some(_), Kind::Thermalization) => return ctx.err(raw.span(), "thermalization sweeps take no eta list"),
            (Some(e), _) if !e.is_empty() => e.iter().cloned().map(Some).collect(),
            _ => vec![None],
        };
        let mut children = Vec::new();
        for trap in &traps {
            for law in &laws {
                for eta in &etas {
                    let index = children.len();
                    let cs = child_seed(seed, index);
                    let gas = self.gas(trap.as_deref())?;
                    let dim = gas.trap.dim().n();
                    let job = match base {
                        Kind::Thermalization => Job::Thermalization(self.thermalization(gas, law.as_deref(), cs)?),
                        Kind::Evaporation => Job::Evaporation(self.evap(base, gas, law.as_deref(), *eta)?),
                        _ => Job::Tb(self.evap(base, gas, law.as_deref(), *eta)?),
                    };
                    let (law_label, alpha, eta) = match &job {
                        Job::Thermalization(t) => (law.clone().unwrap_or_else(|| "configured".into()), Some(t.law.alpha), None),
                        Job::Evaporation(e) | Job::Tb(e) => (e.elastic.law.label(), None, Some(e.eta)),
                        _ => unreachable!(),
                    };
                    children.push(SweepChild {
                        index,
                        seed: cs,
                        dim,
                        law: law_label,
                        alpha,
                        eta,
                        job,
                    });
                }
            }
        }
        Ok(SweepJob { base, children })
    }
}

/// Parse and fully resolve a config. `base_dir` anchors relative paths
/// (table files, the default output directory).
pub fn parse_config_str(src: &str, base_dir: &Path) -> Result<ExperimentSpec, ConfigError> {
    let ctx = Ctx { src, base_dir };
    let raw: RawConfig = toml::from_str(src).map_err(|e| match e.span() {
        Some(span) => ConfigError::At {
            line: ctx.line(span),
            msg: e.message().to_string(),
        },
        None => ConfigError::Invalid(e.message().to_string()),
    })?;
    let kind = Kind::parse(raw.kind.get_ref()).map_or_else(
        || {
            ctx.err(
                raw.kind.span(),
                format!(
                    "unknown kind `{}` (expected thermalization, evaporation, tb, antievap, multiband or sweep)",
                    raw.kind.get_ref()
                ),
            )
        },
        Ok,
    )?;
    let seed = raw.seed;
    let output = match &raw.output {
        Some(o) => base_dir.join(o),
        None => base_dir.join("runs").join(kind.name()),
    };
    let r = Resolver { ctx, raw };
    let job = match kind {
        Kind::Sweep => Job::Sweep(r.sweep(seed)?),
        k => r.single(k, seed)?,
    };
    Ok(ExperimentSpec {
        kind,
        seed,
        output,
        job,
    })
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&src, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THERM: &str = r#"
kind = "thermalization"
seed = 3

[trap]
frequencies = ["20 Hz", "20.6 Hz"]

[gas]
n = 50000
temperature = "500 nK"

[elastic]
alpha = 1.0
rate = 0.1667
"#;

    fn parse(src: &str) -> Result<ExperimentSpec, ConfigError> {
        parse_config_str(src, Path::new("/tmp/evapsim-test"))
    }

    #[test]
    fn minimal_thermalization_resolves_to_si() {
        let spec = parse(THERM).unwrap();
        let Job::Thermalization(t) = &spec.job else { panic!() };
        assert_eq!(t.gas.temperature, 500e-9);
        assert_eq!(t.gas.n, 50_000);
        assert_eq!(t.law.alpha, 1.0);
        assert_eq!(t.seeds.len(), defaults::THERMALIZATION_SEEDS);
        assert_eq!(t.gas.trap.omegas()[0], hz_to_omega(20.0));
        let echo = serde_json::to_value(&spec).unwrap();
        assert_eq!(echo["job"]["kind"], "thermalization");
        assert_eq!(echo["job"]["xi"], 0.1);
    }

    #[test]
    fn eta_sweep_expands_with_counter_seeds() {
        let src = r#"
kind = "sweep"
seed = 100
[trap]
frequencies = ["20 Hz", "20.6 Hz"]
[gas]
n = 20000
temperature = "500 nK"
[elastic]
law = "isotropic"
rate = 2.0
[evaporation]
stop_fraction = 0.1
[sweep]
base = "evaporation"
eta = [2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0]
"#;
        let spec = parse(src).unwrap();
        let Job::Sweep(s) = &spec.job else { panic!() };
        assert_eq!(s.children.len(), 8);
        for (k, c) in s.children.iter().enumerate() {
            assert_eq!(c.seed, 100 + k as u64);
            assert_eq!(c.eta, Some(2.5 + 0.5 * k as f64));
        }
        assert_eq!(spec.seeds(), (100..108).collect::<Vec<_>>());
    }

    #[test]
    fn centimetre_cross_section_is_exact() {
        let src = THERM.replace("rate = 0.1667", "cross_section = \"3.42e-6 cm\"");
        let Job::Thermalization(t) = parse(&src).unwrap().job else { panic!() };
        assert_eq!(t.size, 3.42e-8);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let src = THERM.replace("n = 50000", "n = 50000\ntemprature = \"1 nK\"");
        let err = parse(&src).unwrap_err().to_string();
        assert!(err.starts_with("line 10:"), "{err}");
        assert!(err.contains("temprature"), "{err}");
    }

    #[test]
    fn unit_errors_carry_line_numbers() {
        let src = THERM.replace("\"500 nK\"", "\"500 nHz\"");
        let err = parse(&src).unwrap_err().to_string();
        assert!(err.starts_with("line 10:"), "{err}");
        assert!(err.contains("unknown temperature unit `nHz`"), "{err}");
    }

    #[test]
    fn range_errors_are_caught_before_running() {
        let src = THERM.replace("[elastic]", "[thermalization]\nxi = 0.5\n\n[elastic]");
        assert!(parse(&src).unwrap_err().to_string().contains("xi must lie"));
        let src = THERM.replace("alpha = 1.0", "law = \"table\"");
        assert!(parse(&src).unwrap_err().to_string().contains("needs `table"));
        let src = THERM.replace("kind = \"thermalization\"", "kind = \"evaporate\"");
        assert!(parse(&src).unwrap_err().to_string().contains("unknown kind"));
    }

    #[test]
    fn missing_table_file_is_a_config_error() {
        let src = THERM.replace("alpha = 1.0\nrate = 0.1667", "law = \"table\"\ntable = \"nope.csv\"");
        let err = parse(&src).unwrap_err().to_string();
        assert!(err.contains("does not exist"), "{err}");
    }

    #[test]
    fn sub_seeds_are_prefix_stable() {
        let a = sub_seeds(9, 3);
        let b = sub_seeds(9, 5);
        assert_eq!(a[..], b[..3]);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn reseeding_rederives_children() {
        let mut spec = parse(THERM).unwrap();
        let before = spec.seeds();
        spec.reseed(4);
        assert_ne!(spec.seeds(), before);
        spec.reseed(3);
        assert_eq!(spec.seeds(), before);
    }
}
