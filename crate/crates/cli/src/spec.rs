//! Campaign spec: the versioned TOML document behind every run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use skysim_core::deploy::{AntennaPattern, ScenarioConfig, ScenarioKind, UeKind};
use skysim_core::meas::MeasConfig;
use skysim_core::mobility::HandoverConfig;
use skysim_core::power::{validate_alpha, validate_p0_ue, P0Range, PowerClass, PowerControlConfig};
use skysim_core::ConfigError;

use crate::error::{in_section, CliError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Snapshot,
    MulticellReport,
    HeightReport,
    Mobility,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Snapshot => "snapshot",
            Experiment::MulticellReport => "multicell_report",
            Experiment::HeightReport => "height_report",
            Experiment::Mobility => "mobility",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multicell: Option<MulticellSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<HeightSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobility: Option<MobilitySection>,
    /// Written into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub generator: String,
    pub version: String,
}

macro_rules! scenario_section {
    ($($field:ident: $ty:ty),* $(,)?) => {
        /// A scenario preset plus optional per-field overrides.
        #[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct ScenarioSection {
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub preset: Option<ScenarioKind>,
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl ScenarioSection {
            /// Overrides applied on top of the preset for `kind`.
            pub fn apply(&self, kind: ScenarioKind) -> ScenarioConfig {
                let mut c = ScenarioConfig::preset(kind);
                $(
                    if let Some(v) = &self.$field {
                        c.$field = v.clone();
                    }
                )*
                c
            }
        }
    };
}

scenario_section! {
    inter_site_distance: f64,
    enb_height: f64,
    carrier_freq: f64,
    bandwidth_rbs: u32,
    ues_per_cell: u32,
    aerial_ratio: f64,
    aerial_height_range: [f64; 2],
    n_sites: u32,
    sectors_per_site: u32,
    noise_figure: f64,
    ue_noise_figure: f64,
    thermal_noise_density: f64,
    enb_tx_power: f64,
    downtilt: f64,
    antenna: AntennaPattern,
    ue_antenna_gain: f64,
    indoor_fraction: f64,
    indoor_penetration_loss: f64,
    min_ue_distance: f64,
}

impl ScenarioSection {
    pub fn resolve(&self) -> ScenarioConfig {
        self.apply(self.preset.unwrap_or(ScenarioKind::UmaAv))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_nominal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_cmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tpc_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrestrial: Option<PowerClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aerial: Option<PowerClass>,
}

impl PowerSection {
    pub fn resolve(&self) -> PowerControlConfig {
        let mut pc = PowerControlConfig::default();
        if let Some(v) = self.p0_nominal {
            pc.p0_nominal = v;
        }
        if let Some(v) = self.p_cmax {
            pc.p_cmax = v;
        }
        if let Some(v) = self.tpc_step {
            pc.tpc_step = v;
        }
        if let Some(v) = self.min_power {
            pc.min_power = v;
        }
        let t = self.terrestrial.unwrap_or(pc.default_class);
        let a = self.aerial.unwrap_or(pc.default_class);
        pc.with_terrestrial_and_aerial(t, a)
    }

    /// Check every configured class; returns the classes using extended-range P0.
    pub fn validate(&self) -> Result<Vec<&'static str>, ConfigError> {
        let mut extended = Vec::new();
        for (name, class) in [("terrestrial", self.terrestrial), ("aerial", self.aerial)] {
            let Some(c) = class else { continue };
            validate_alpha(c.alpha).map_err(in_section(name))?;
            if validate_p0_ue(c.p0_ue_specific).map_err(in_section(name))? == P0Range::Extended {
                extended.push(name);
            }
        }
        self.resolve().validate()?;
        Ok(extended)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    AerialRatio,
    PowerClasses,
    HeightThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCombo {
    pub label: String,
    pub terrestrial: PowerClass,
    pub aerial: PowerClass,
}

/// The single swept variable of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<PowerCombo>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    pub n_drops: usize,
    pub n_snapshots: usize,
    #[serde(default = "one")]
    pub activity_factor: f64,
    #[serde(default)]
    pub site_shadow_correlation: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticellSection {
    pub altitude: f64,
    pub speed_kmh: f64,
    pub path_length: f64,
    pub sample_period_ms: u64,
    /// Cells that must qualify after the report without triggering another.
    #[serde(default = "one_usize")]
    pub extra_cells: usize,
    pub search_attempts: u64,
    pub meas: MeasConfig,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightUe {
    pub label: String,
    pub start: [f64; 3],
    pub end: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightSection {
    pub height_threshold: f64,
    pub hysteresis_h: f64,
    pub sample_period_ms: u64,
    pub duration_ms: u64,
    pub ues: Vec<HeightUe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityGroup {
    pub label: String,
    pub scenario: ScenarioKind,
    pub kind: UeKind,
    pub height: f64,
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilitySection {
    pub n_seeds: usize,
    pub n_ues: usize,
    pub duration_ms: u64,
    pub tick_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handover: Option<HandoverConfig>,
    pub groups: Vec<MobilityGroup>,
}

impl CampaignSpec {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, CliError> {
        let spec: CampaignSpec = toml::from_str(text).map_err(|e| CliError::toml(source_name, text, &e))?;
        Ok(spec)
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.experiment.name())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Structural and value checks; the error names the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let unused = |present: bool, field: &str| {
            if present {
                Err(ConfigError::new(
                    field,
                    format!("not used by experiment {}", self.experiment.name()),
                ))
            } else {
                Ok(())
            }
        };
        let required = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::new(
                    field,
                    format!("section required by experiment {}", self.experiment.name()),
                ))
            }
        };
        let e = self.experiment;
        unused(self.snapshot.is_some() && e != Experiment::Snapshot, "snapshot")?;
        unused(self.multicell.is_some() && e != Experiment::MulticellReport, "multicell")?;
        unused(self.height.is_some() && e != Experiment::HeightReport, "height")?;
        unused(self.mobility.is_some() && e != Experiment::Mobility, "mobility")?;
        unused(self.power.is_some() && e != Experiment::Snapshot, "power")?;
        unused(self.scenario.is_some() && e == Experiment::HeightReport, "scenario")?;
        match e {
            Experiment::Snapshot => required(self.snapshot.is_some(), "snapshot")?,
            Experiment::MulticellReport => required(self.multicell.is_some(), "multicell")?,
            Experiment::HeightReport => required(self.height.is_some(), "height")?,
            Experiment::Mobility => required(self.mobility.is_some(), "mobility")?,
        }
        if let Some(s) = &self.sweep {
            self.validate_sweep(s).map_err(in_section("sweep"))?;
        }

        let scenario = self.scenario.clone().unwrap_or_default();
        if e == Experiment::Mobility {
            if scenario.preset.is_some() {
                return Err(ConfigError::new(
                    "scenario.preset",
                    "mobility groups choose their own scenario",
                ));
            }
        } else if e != Experiment::HeightReport {
            scenario.resolve().validate().map_err(in_section("scenario"))?;
        }

        if let Some(p) = &self.power {
            p.validate().map_err(in_section("power"))?;
        }
        if let Some(s) = &self.snapshot {
            validate_snapshot(s).map_err(in_section("snapshot"))?;
        }
        if let Some(m) = &self.multicell {
            validate_multicell(m).map_err(in_section("multicell"))?;
        }
        if let Some(h) = &self.height {
            validate_height(h).map_err(in_section("height"))?;
        }
        if let Some(m) = &self.mobility {
            validate_mobility(m, &scenario).map_err(in_section("mobility"))?;
        }
        Ok(())
    }

    fn validate_sweep(&self, s: &Sweep) -> Result<(), ConfigError> {
        let allowed = match self.experiment {
            Experiment::Snapshot => &[SweepVariable::AerialRatio, SweepVariable::PowerClasses][..],
            Experiment::HeightReport => &[SweepVariable::HeightThreshold][..],
            _ => &[][..],
        };
        if !allowed.contains(&s.variable) {
            return Err(ConfigError::new(
                "variable",
                format!("{:?} cannot be swept in experiment {}", s.variable, self.experiment.name()),
            ));
        }
        match s.variable {
            SweepVariable::PowerClasses => {
                if s.values.is_some() {
                    return Err(ConfigError::new("values", "power_classes sweeps use `classes`"));
                }
                let classes = s
                    .classes
                    .as_ref()
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| ConfigError::new("classes", "need at least one power class combination"))?;
                let base = self.power.clone().unwrap_or_default();
                for (i, c) in classes.iter().enumerate() {
                    PowerSection {
                        terrestrial: Some(c.terrestrial),
                        aerial: Some(c.aerial),
                        ..base.clone()
                    }
                    .validate()
                    .map_err(in_section(&format!("classes[{i}]")))?;
                }
            }
            SweepVariable::AerialRatio | SweepVariable::HeightThreshold => {
                if s.classes.is_some() {
                    return Err(ConfigError::new("classes", "only power_classes sweeps take `classes`"));
                }
                let values = s
                    .values
                    .as_ref()
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| ConfigError::new("values", "need at least one value"))?;
                if s.variable == SweepVariable::AerialRatio {
                    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(ConfigError::new("values", format!("aerial ratio {v} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_snapshot(s: &SnapshotSection) -> Result<(), ConfigError> {
    if s.n_drops == 0 {
        return Err(ConfigError::new("n_drops", "must be at least 1"));
    }
    if s.n_snapshots == 0 {
        return Err(ConfigError::new("n_snapshots", "must be at least 1"));
    }
    skysim_core::sysim::SysimConfig {
        activity_factor: s.activity_factor,
        site_shadow_correlation: s.site_shadow_correlation,
        ..Default::default()
    }
    .validate()
}

fn validate_multicell(m: &MulticellSection) -> Result<(), ConfigError> {
    m.meas.validate().map_err(in_section("meas"))?;
    if m.meas.serving_cell.is_some() {
        return Err(ConfigError::new("meas.serving_cell", "chosen by the trace search"));
    }
    if m.sample_period_ms == 0 {
        return Err(ConfigError::new("sample_period_ms", "must be positive"));
    }
    if !m.meas.ttt.is_multiple_of(m.sample_period_ms) {
        return Err(ConfigError::new("meas.ttt", "must be a multiple of sample_period_ms"));
    }
    if !(m.altitude > 0.0 && m.altitude <= skysim_core::deploy::MAX_AERIAL_HEIGHT) {
        return Err(ConfigError::new("altitude", "must lie in (0, 300] m"));
    }
    if !(m.speed_kmh > 0.0 && m.speed_kmh.is_finite()) {
        return Err(ConfigError::new("speed_kmh", "must be positive"));
    }
    if !(m.path_length > 0.0 && m.path_length.is_finite()) {
        return Err(ConfigError::new("path_length", "must be positive"));
    }
    if m.search_attempts == 0 {
        return Err(ConfigError::new("search_attempts", "must be at least 1"));
    }
    Ok(())
}

fn validate_height(h: &HeightSection) -> Result<(), ConfigError> {
    skysim_core::meas::HeightReportConfig {
        height_threshold: h.height_threshold,
        hysteresis_h: h.hysteresis_h,
    }
    .validate()?;
    if h.sample_period_ms == 0 || !h.duration_ms.is_multiple_of(h.sample_period_ms) {
        return Err(ConfigError::new(
            "sample_period_ms",
            "must be positive and divide duration_ms",
        ));
    }
    if h.ues.is_empty() {
        return Err(ConfigError::new("ues", "need at least one UE"));
    }
    for (i, u) in h.ues.iter().enumerate() {
        for z in [u.start[2], u.end[2]] {
            if !(0.0..=skysim_core::deploy::MAX_AERIAL_HEIGHT).contains(&z) {
                return Err(ConfigError::new(format!("ues[{i}]"), "height outside [0, 300] m"));
            }
        }
    }
    Ok(())
}

fn validate_mobility(m: &MobilitySection, scenario: &ScenarioSection) -> Result<(), ConfigError> {
    if m.n_seeds == 0 {
        return Err(ConfigError::new("n_seeds", "must be at least 1"));
    }
    if m.groups.is_empty() {
        return Err(ConfigError::new("groups", "need at least one group"));
    }
    for (i, g) in m.groups.iter().enumerate() {
        mobility_config(m, g, scenario)
            .validate()
            .map_err(in_section(&format!("groups[{i}]")))?;
    }
    Ok(())
}

pub(crate) fn mobility_config(
    m: &MobilitySection,
    g: &MobilityGroup,
    scenario: &ScenarioSection,
) -> skysim_core::mobility::MobilityConfig {
    skysim_core::mobility::MobilityConfig {
        scenario: scenario.apply(g.scenario),
        handover: m.handover.unwrap_or_default(),
        ue: skysim_core::mobility::MobilityUeSpec {
            kind: g.kind,
            height: g.height,
            speed_kmh: g.speed_kmh,
        },
        n_ues: m.n_ues,
        duration_ms: m.duration_ms,
        tick_ms: m.tick_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
experiment = "snapshot"
seed = 7

[snapshot]
n_drops = 1
n_snapshots = 1
"#;

    #[test]
    fn minimal_spec_parses_and_validates() {
        let s = CampaignSpec::parse(MINIMAL, "t.toml").unwrap();
        s.validate().unwrap();
        assert_eq!(s.label(), "snapshot");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut s = CampaignSpec::parse(MINIMAL, "t.toml").unwrap();
        s.sweep = Some(Sweep {
            variable: SweepVariable::AerialRatio,
            values: Some(vec![0.0, 0.5]),
            classes: None,
        });
        s.scenario = Some(ScenarioSection {
            preset: Some(ScenarioKind::RmaAv),
            aerial_ratio: Some(0.25),
            ..Default::default()
        });
        let back = CampaignSpec::parse(&s.to_toml(), "echo").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = format!("{MINIMAL}bogus = 3\n");
        match CampaignSpec::parse(&text, "t.toml").unwrap_err() {
            CliError::Parse { line, column, .. } => {
                let expected = text.lines().position(|l| l.starts_with("bogus")).unwrap() + 1;
                assert_eq!(line, expected);
                assert!(column >= 1);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "schema_version = 1\nexperiment = \"snapshot\"\nseed = = 3\n";
        match CampaignSpec::parse(text, "t.toml").unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn validation_names_nested_field() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\n[scenario]\naerial_ratio = 1.5");
        let s = CampaignSpec::parse(&text, "t.toml").unwrap();
        assert_eq!(s.validate().unwrap_err().field, "scenario.aerial_ratio");

        let text = MINIMAL.replace("seed = 7", "seed = 7\n[power]\naerial = { alpha = 0.8, p0_ue_specific = 16 }");
        let s = CampaignSpec::parse(&text, "t.toml").unwrap();
        assert_eq!(s.validate().unwrap_err().field, "power.aerial.p0_ue_specific");
    }

    #[test]
    fn wrong_schema_version_is_a_validation_error() {
        let s = CampaignSpec::parse(&MINIMAL.replace("schema_version = 1", "schema_version = 2"), "t").unwrap();
        assert_eq!(s.validate().unwrap_err().field, "schema_version");
    }

    #[test]
    fn sections_must_match_experiment() {
        let text = format!("{MINIMAL}\n[mobility]\nn_seeds = 1\nn_ues = 1\nduration_ms = 10\ntick_ms = 10\ngroups = []\n");
        let s = CampaignSpec::parse(&text, "t").unwrap();
        assert_eq!(s.validate().unwrap_err().field, "mobility");
    }
}
