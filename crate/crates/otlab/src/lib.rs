//! Experiment runner for `otlab-core`: configs, artifacts, SVG rendering and
//! parameter sweeps. The `otlab` binary is a thin layer over this crate.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiments;
pub mod render;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifacts::{Manifest, Status};
pub use config::{Experiment, ExperimentConfig, Param};
pub use error::CliError;
pub use experiments::run;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OTLAB_THREADS";

/// Reads the thread cap from [`THREADS_ENV`]; `None` when unset.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Parameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub value: f64,
    pub output_dir: PathBuf,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub param: String,
    pub base: ExperimentConfig,
    pub members: Vec<SweepMember>,
}

/// Output directory of one sweep member, keyed by the swept value.
pub fn member_dir(base: &Path, param: Param, value: f64) -> PathBuf {
    base.join(format!("{}={value}", param.name()))
}

/// Runs `config` once per value of `param`, `jobs` members at a time.
///
/// Members write to disjoint directories, and the sweep manifest lists
/// them in the order of `values` whatever the completion order. The first
/// member error is returned after all members have finished.
pub fn sweep(config: &ExperimentConfig, param: Param, values: &[f64], jobs: usize) -> Result<SweepManifest, CliError> {
    if values.is_empty() {
        return Err(CliError::Parameter("a sweep needs at least one value".into()));
    }
    let base = config.resolved()?;
    let root = base.output_dir();
    let mut members = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = config.clone();
        c.set(param, v)?;
        c.output_dir = Some(member_dir(&root, param, v));
        members.push(c.resolved()?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Manifest, CliError>> = pool.install(|| members.par_iter().map(run).collect());
    let mut first_error = None;
    let listed = members
        .iter()
        .zip(values)
        .zip(results)
        .map(|((c, &value), r)| {
            let output_dir = c.output_dir();
            match r {
                Ok(_) => {
                    let bytes = std::fs::read(output_dir.join(artifacts::MANIFEST_NAME))?;
                    Ok(SweepMember {
                        value,
                        output_dir,
                        status: Status::Complete,
                        manifest_sha256: Some(artifacts::sha256_hex(&bytes)),
                        error: None,
                    })
                }
                Err(e) => {
                    let m = SweepMember {
                        value,
                        output_dir,
                        status: Status::Partial,
                        manifest_sha256: None,
                        error: Some(e.to_string()),
                    };
                    first_error.get_or_insert(e);
                    Ok(m)
                }
            }
        })
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let manifest = SweepManifest {
        param: param.name().to_string(),
        base,
        members: listed,
    };
    std::fs::create_dir_all(&root)?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    std::fs::write(root.join("sweep.json"), text)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Renders an artifact written by [`run`] (`diagram.json` or
/// `samples.json`) to SVG text.
pub fn render_artifact(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let r: render::Renderable =
        serde_json::from_str(&text).map_err(|e| CliError::Parameter(format!("{}: not a renderable artifact: {e}", path.display())))?;
    Ok(render::render(&r, &render::SvgStyle::default()))
}
