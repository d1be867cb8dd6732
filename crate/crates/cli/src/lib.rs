//! Config parsing and experiment execution behind the `evapsim` binary.

// `!(x > 0.0)` is used on purpose: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod manifest;
pub mod presets;
pub mod run;
pub mod units;

use std::path::Path;

use config::ExperimentSpec;
use manifest::{Manifest, Status};
use run::{run_job, RunError};

/// Run a resolved spec into `spec.output` on a pool of `workers` threads,
/// bracketing it with manifest writes. Returns the final manifest.
pub fn execute(spec: &ExperimentSpec, config_path: Option<&Path>, workers: usize) -> Result<Manifest, RunError> {
    let out = spec.output.as_path();
    std::fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut manifest = Manifest::start(spec, config_path, workers);
    manifest.write(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Sim(e.to_string()))?;
    let result = pool.install(|| run_job(&spec.job, spec.seed, out));
    match result {
        Ok(o) => {
            let status = if o.failures.is_empty() { Status::Complete } else { Status::Partial };
            manifest.finish(out, status, o.failures)?;
            manifest.write(out)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.finish(out, Status::Failed, vec![e.to_string()])?;
            manifest.write(out)?;
            Err(e)
        }
    }
}
