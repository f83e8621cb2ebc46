//! Experiment runners. Each turns a validated spec into rendered artifacts
//! without touching the filesystem.

pub mod height;
pub mod mobility;
pub mod multicell;
pub mod snapshot;

use crate::error::CliError;
use crate::output::Artifacts;
use crate::spec::{CampaignSpec, Experiment, ManifestInfo};

/// Run the experiment on up to `jobs` threads (all cores when `None`) and
/// render all outputs, including the manifest.
pub fn execute(spec: &CampaignSpec, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    spec.validate()?;
    let run = || match spec.experiment {
        Experiment::Snapshot => snapshot::run(spec),
        Experiment::MulticellReport => multicell::run(spec),
        Experiment::HeightReport => height::run(spec),
        Experiment::Mobility => mobility::run(spec),
    };
    let mut artifacts = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run)?,
        None => run()?,
    };
    artifacts.add("manifest.toml", manifest(spec));
    Ok(artifacts)
}

/// The spec as run, re-runnable as-is.
pub fn manifest(spec: &CampaignSpec) -> String {
    let echo = CampaignSpec {
        output_dir: None,
        manifest: Some(ManifestInfo {
            generator: "skysim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }),
        ..spec.clone()
    };
    echo.to_toml()
}
