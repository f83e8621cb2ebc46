//! Campaign runner and trace replay on top of `skysim-core`.

pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod replay;
pub mod spec;

use std::fs;
use std::path::{Path, PathBuf};

pub use error::CliError;
pub use output::Artifacts;
pub use spec::CampaignSpec;

/// Environment variable overriding the output directory of a spec.
pub const OUT_ENV: &str = "SKYSIM_OUT";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// `--out`; wins over `env_out`.
    pub out: Option<PathBuf>,
    /// Value of `SKYSIM_OUT`; wins over the spec's `output_dir`.
    pub env_out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    /// Informational notes, e.g. power classes using the extended P0 range.
    pub notes: Vec<String>,
}

/// Spec text and a display name for a path or built-in preset name.
pub fn load_source(arg: &str) -> Result<(String, String), CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Ok((text, arg.to_string()));
    }
    match presets::find(arg) {
        Some(p) => Ok((p.text.to_string(), format!("preset:{}", p.name))),
        None => Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or preset"),
        )),
    }
}

/// Parse and validate a spec, applying a seed override.
pub fn prepare(text: &str, source_name: &str, seed: Option<u64>) -> Result<CampaignSpec, CliError> {
    let mut spec = CampaignSpec::parse(text, source_name)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn extended_range_notes(spec: &CampaignSpec) -> Vec<String> {
    let mut notes = Vec::new();
    let base = spec.power.clone().unwrap_or_default();
    let mut check = |label: &str, section: &spec::PowerSection| {
        for class in section.validate().unwrap_or_default() {
            notes.push(format!("{label}: {class} p0_ue_specific uses the extended range"));
        }
    };
    if spec.power.is_some() {
        check("power", &base);
    }
    if let Some(classes) = spec.sweep.as_ref().and_then(|s| s.classes.as_ref()) {
        for c in classes {
            let section = spec::PowerSection {
                terrestrial: Some(c.terrestrial),
                aerial: Some(c.aerial),
                ..base.clone()
            };
            check(&c.label, &section);
        }
    }
    notes
}

/// Parse, validate, compute, and only then write every output file.
pub fn run(text: &str, source_name: &str, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let spec = prepare(text, source_name, opts.seed)?;
    let artifacts = experiments::execute(&spec, opts.jobs)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| opts.env_out.clone())
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("skysim-out").join(output::slug(spec.label())));
    artifacts.write_to(&out_dir)?;
    Ok(RunSummary {
        out_dir,
        files: artifacts.paths().map(String::from).collect(),
        notes: extended_range_notes(&spec),
    })
}

/// Replay a trace file against a measurement config file; returns the report log.
pub fn replay_files(trace: &Path, meas_cfg: &Path) -> Result<String, CliError> {
    let cfg_text = fs::read_to_string(meas_cfg).map_err(|e| CliError::io(meas_cfg, e))?;
    let cfg = replay::ReplayConfig::parse(&cfg_text, &meas_cfg.display().to_string())?;
    let trace_text = fs::read_to_string(trace).map_err(|e| CliError::io(trace, e))?;
    let rows = replay::parse_trace(&trace_text, &trace.display().to_string())?;
    let reports = replay::replay(&rows, &cfg)?;
    Ok(replay::report_log_csv(&reports))
}
