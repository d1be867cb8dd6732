//! Executes a resolved [`ExperimentSpec`] and writes its artifacts.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use evapsim_core::mc_engine::{
    kappa_expected, loss_energy_per_particle, mean_stderr, run_antievaporation_experiment,
    run_evaporation_trajectory, run_thermalization_seeds, AntiEvapSpec, CollisionModel, ElasticSource,
    EvaporationSpec, ReactiveSource, ThermalizationSpec, TrajectoryRecord,
};
use evapsim_core::multiband::{evolve_master_equation, MultibandConfig};
use evapsim_core::tb_kinetics::{run_tb_trajectory, TbConfig, TbState};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{AntiJob, EvapJob, Job, Law, SweepJob, ThermJob};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Sim(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sim<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Sim(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, RunError> {
    fs::File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(sim)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_record(path: &Path, rec: &TrajectoryRecord) -> Result<(), RunError> {
    rec.write_csv(create(path)?).map_err(io_err(path))
}

/// Outcome of one job: the headline number (κ, ln Ω gain, ...) plus a
/// summary that also lands in `summary.json`.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub value: Option<f64>,
    pub summary: Value,
    /// Non-fatal problems, e.g. failed sweep children.
    pub failures: Vec<String>,
}

pub fn run_job(job: &Job, seed: u64, out: &Path) -> Result<JobOutput, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let res = match job {
        Job::Thermalization(t) => thermalization(t, out)?,
        Job::Evaporation(e) => evaporation(e, seed, out)?,
        Job::Tb(e) => tb(e, out)?,
        Job::Antievap(a) => antievap(a, out)?,
        Job::Multiband(m) => multiband(m, out)?,
        Job::Sweep(s) => sweep(s, out)?,
    };
    write_json(&out.join("summary.json"), &res.summary)?;
    Ok(res)
}

fn thermalization(job: &ThermJob, out: &Path) -> Result<JobOutput, RunError> {
    let spec = ThermalizationSpec {
        n: job.gas.n,
        trap: job.gas.trap,
        temperature: job.gas.temperature,
        xi: job.xi,
        law: job.law,
        size: job.size,
        mass: job.gas.mass,
        seed: job.seeds[0],
        collision_model: CollisionModel::default(),
        duration: None,
        samples: job.samples,
    };
    let summary = run_thermalization_seeds(&spec, &job.seeds).map_err(sim)?;

    let path = out.join("kappa.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["seed", "kappa", "kappa_stderr", "tau_s", "gamma_measured", "gamma_theory", "non_exponential"])
        .map_err(sim)?;
    for r in &summary.runs {
        w.serialize((r.seed, r.kappa, r.kappa_stderr, r.tau, r.gamma_measured, r.gamma_theory, r.non_exponential))
            .map_err(sim)?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = out.join("relaxation.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["seed", "t_s", "anisotropy"]).map_err(sim)?;
    for r in &summary.runs {
        for &(t, a) in &r.series {
            w.serialize((r.seed, t, a)).map_err(sim)?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let expected = kappa_expected(job.gas.trap.dim(), &job.law);
    Ok(JobOutput {
        value: Some(summary.kappa_mean),
        summary: json!({
            "kappa": summary.kappa_mean,
            "kappa_stderr": summary.kappa_stderr,
            "kappa_expected": expected,
            "seeds": job.seeds,
        }),
        failures: Vec::new(),
    })
}

fn elastic_source(job: &EvapJob) -> Result<ElasticSource, RunError> {
    Ok(match (&job.elastic.law, job.elastic.size) {
        (Law::Fixed { law, .. }, Some(size)) => ElasticSource::Constant { size, law: *law },
        (law @ Law::Table { .. }, _) => ElasticSource::Table(Arc::new(
            law.load_table().map_err(RunError::Sim)?.expect("table law loads a table"),
        )),
        (Law::Fixed { .. }, None) => unreachable!("fixed laws are resolved with a size"),
    })
}

fn trajectory_summary(rec: &TrajectoryRecord, gain: Option<f64>, job: &EvapJob) -> Value {
    let (p0, p1) = (rec.first(), rec.last());
    json!({
        "eta": job.eta,
        "log_psd_gain": gain,
        "stop_fraction": job.stop_fraction,
        "final_fraction": p1.n / p0.n,
        "final_temperature_K": p1.temp,
        "duration_s": p1.t,
    })
}

fn evaporation(job: &EvapJob, seed: u64, out: &Path) -> Result<JobOutput, RunError> {
    let spec = EvaporationSpec {
        trap: job.gas.trap,
        n0: job.gas.n,
        temperature: job.gas.temperature,
        eta: job.eta,
        elastic: elastic_source(job)?,
        reactive: ReactiveSource::Ratio { zeta: job.zeta },
        mass: job.gas.mass,
        stop_fraction: job.stop_fraction,
        t_max: job.t_max,
        seed,
        collision_model: CollisionModel::default(),
        collision_fraction: job.collision_fraction,
        sample_every: job.sample_every,
    };
    let res = run_evaporation_trajectory(&spec).map_err(sim)?;
    write_record(&out.join("trajectory.csv"), &res.record)?;
    let mut failures = Vec::new();
    if res.log_psd_gain.is_none() {
        failures.push(format!(
            "stop fraction {} not reached by t_max (N/N0 = {:.3})",
            job.stop_fraction, res.final_fraction
        ));
    }
    Ok(JobOutput {
        value: res.log_psd_gain,
        summary: trajectory_summary(&res.record, res.log_psd_gain, job),
        failures,
    })
}

fn tb(job: &EvapJob, out: &Path) -> Result<JobOutput, RunError> {
    let size = job.elastic.size.expect("resolution rejects tables for tb");
    let mut cfg = TbConfig::new(
        job.gas.trap,
        job.gas.mass,
        size,
        job.zeta,
        job.eta,
        // the loss limit sets the working step; this only caps it
        job.t_max / 1000.0,
    );
    cfg.cut_rule = job.cut_rule;
    cfg.max_loss_per_step = job.max_loss_per_step;
    let init = TbState::at_self_consistent_cut(job.gas.trap.dim(), job.gas.n as f64, job.gas.temperature, job.eta)
        .map_err(sim)?;
    let traj = run_tb_trajectory(init, &cfg, job.stop_fraction).map_err(sim)?;
    write_record(&out.join("trajectory.csv"), &traj.record)?;
    Ok(JobOutput {
        value: traj.log_psd_gain,
        summary: trajectory_summary(&traj.record, traj.log_psd_gain, job),
        failures: Vec::new(),
    })
}

fn antievap(job: &AntiJob, out: &Path) -> Result<JobOutput, RunError> {
    let records: Vec<TrajectoryRecord> = job
        .seeds
        .par_iter()
        .map(|&seed| {
            run_antievaporation_experiment(&AntiEvapSpec {
                trap: job.gas.trap,
                n: job.gas.n,
                temperature: job.gas.temperature,
                reactive: ReactiveSource::PowerLaw { coeff: job.coeff },
                mass: job.gas.mass,
                stop_fraction: job.stop_fraction,
                seed,
                collision_model: CollisionModel::default(),
                samples: job.samples,
            })
            .map_err(sim)
        })
        .collect::<Result<_, _>>()?;
    let mut drifts = Vec::new();
    let mut per_loss = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        write_record(&out.join(format!("trajectory_{k:02}.csv")), rec)?;
        let n_stop = job.stop_fraction * rec.first().n;
        let end = rec.points.iter().find(|p| p.n <= n_stop).unwrap_or(rec.last());
        drifts.push(end.temp / rec.first().temp - 1.0);
        if let Some(e) = rec.energy_per_loss(job.stop_fraction) {
            per_loss.push(e);
        }
    }
    let (drift, drift_se) = mean_stderr(drifts.iter().copied());
    let (epl, epl_se) = mean_stderr(per_loss.iter().copied());
    Ok(JobOutput {
        value: Some(drift),
        summary: json!({
            "temperature_drift": drift,
            "temperature_drift_stderr": drift_se,
            "energy_per_loss_kT": epl,
            "energy_per_loss_kT_stderr": epl_se,
            "energy_per_loss_kT_expected": loss_energy_per_particle(job.gas.trap.dim(), 0.5),
            "seeds": job.seeds,
        }),
        failures: Vec::new(),
    })
}

fn multiband(cfg: &MultibandConfig, out: &Path) -> Result<JobOutput, RunError> {
    let res = evolve_master_equation(cfg).map_err(sim)?;
    let path = out.join("multiband.csv");
    res.write_csv(create(&path)?).map_err(io_err(&path))?;
    let (p0, p1) = (&res.series[0], &res.series[res.series.len() - 1]);
    let drift = p1.temp_mean / p0.temp_mean - 1.0;
    Ok(JobOutput {
        value: Some(drift),
        summary: json!({
            "bands": res.bands,
            "draws": cfg.draws,
            "t_end_s": cfg.t_end,
            "final_n": p1.n_mean,
            "final_fraction": p1.n_mean / p0.n_mean,
            "temperature_drift": drift,
        }),
        failures: Vec::new(),
    })
}

fn sweep(job: &SweepJob, out: &Path) -> Result<JobOutput, RunError> {
    let results: Vec<Result<JobOutput, RunError>> = job
        .children
        .par_iter()
        .map(|c| run_job(&c.job, c.seed, &out.join(format!("child_{:03}", c.index))))
        .collect();

    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["child", "seed", "dim", "law", "alpha", "eta", "value", "status"])
        .map_err(sim)?;
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (c, r) in job.children.iter().zip(&results) {
        let (value, status) = match r {
            Ok(o) if o.failures.is_empty() => (o.value, "ok".to_string()),
            Ok(o) => (o.value, format!("failed: {}", o.failures.join("; "))),
            Err(e) => (None, format!("failed: {e}")),
        };
        if status != "ok" {
            failures.push(format!("child {}: {}", c.index, &status["failed: ".len()..]));
        }
        w.serialize((c.index, c.seed, c.dim, &c.law, c.alpha, c.eta, value, &status))
            .map_err(sim)?;
        rows.push(json!({"child": c.index, "law": c.law, "alpha": c.alpha, "eta": c.eta, "value": value, "status": status}));
    }
    w.flush().map_err(io_err(&path))?;
    Ok(JobOutput {
        value: None,
        summary: json!({ "base": job.base, "children": rows }),
        failures,
    })
}
