//! Measurement-trace files, replay through the event engines, and the
//! report log format.
//!
//! Trace CSV columns: `t_ms,record,cell_id,rsrp_dbm,x_m,y_m,height_m,vx_mps,vy_mps,vz_mps`.
//! `record` is `rsrp` (uses `cell_id`, `rsrp_dbm`) or `kin` (uses the
//! position and velocity columns); unused columns are left empty. Rows with
//! equal `t_ms` form one sampling instant and `t_ms` must never decrease.
//!
//! Report log columns: `t_ms,report_kind,n_cells,cells,height_m,x_m,y_m,h_speed_mps,v_speed_mps`,
//! where `cells` lists `id@rsrp@rsrq` entries joined by `;`.

use serde::{Deserialize, Serialize};
use skysim_core::geometry::Point3;
use skysim_core::meas::{HeightReportConfig, HeightReporter, Kinematics, MeasConfig, MeasEngine, MeasReport};
use skysim_core::{CellId, ConfigError};

use crate::error::{in_section, CliError};
use crate::output::{fmt_f64, fmt_opt, Csv};
use crate::spec::SCHEMA_VERSION;

pub const TRACE_HEADER: [&str; 10] = [
    "t_ms", "record", "cell_id", "rsrp_dbm", "x_m", "y_m", "height_m", "vx_mps", "vy_mps", "vz_mps",
];

pub const REPORT_LOG_HEADER: [&str; 9] = [
    "t_ms",
    "report_kind",
    "n_cells",
    "cells",
    "height_m",
    "x_m",
    "y_m",
    "h_speed_mps",
    "v_speed_mps",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceRow {
    Rsrp { t_ms: u64, cell_id: CellId, rsrp_dbm: f64 },
    Kin { t_ms: u64, kin: Kinematics },
}

impl TraceRow {
    pub fn t_ms(&self) -> u64 {
        match *self {
            TraceRow::Rsrp { t_ms, .. } | TraceRow::Kin { t_ms, .. } => t_ms,
        }
    }
}

/// Replay configuration: an event configuration, a height-report
/// configuration, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<MeasConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<HeightReportConfig>,
}

impl ReplayConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, CliError> {
        let cfg: ReplayConfig = toml::from_str(text).map_err(|e| CliError::toml(source_name, text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.event.is_none() && self.height.is_none() {
            return Err(ConfigError::new("event", "need an [event] or [height] section"));
        }
        if let Some(e) = &self.event {
            e.validate().map_err(in_section("event"))?;
        }
        if let Some(h) = &self.height {
            h.validate().map_err(in_section("height"))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn trace_error(source_name: &str, message: impl Into<String>) -> CliError {
    CliError::Trace {
        source_name: source_name.to_string(),
        message: message.into(),
    }
}

pub fn parse_trace(text: &str, source_name: &str) -> Result<Vec<TraceRow>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| trace_error(source_name, e.to_string()))?
        .clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(trace_error(
            source_name,
            format!("header must be `{}`", TRACE_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    let mut last_t = 0u64;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let err = |m: String| trace_error(source_name, format!("line {line}: {m}"));
        let record = record.map_err(|e| err(e.to_string()))?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let num = |idx: usize| -> Result<f64, CliError> {
            field(idx)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{}` needs a finite number, got {:?}", TRACE_HEADER[idx], field(idx))))
        };
        let t_ms: u64 = field(0)
            .parse()
            .map_err(|_| err(format!("t_ms must be a non-negative integer, got {:?}", field(0))))?;
        if t_ms < last_t {
            return Err(err(format!("t_ms went backwards from {last_t} to {t_ms}")));
        }
        last_t = t_ms;
        let row = match field(1) {
            "rsrp" => TraceRow::Rsrp {
                t_ms,
                cell_id: field(2)
                    .parse()
                    .map_err(|_| err(format!("cell_id must be an integer, got {:?}", field(2))))?,
                rsrp_dbm: num(3)?,
            },
            "kin" => TraceRow::Kin {
                t_ms,
                kin: Kinematics {
                    position: Point3::new(num(4)?, num(5)?, num(6)?),
                    velocity: Point3::new(num(7)?, num(8)?, num(9)?),
                },
            },
            other => return Err(err(format!("unknown record kind {other:?}"))),
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut csv = Csv::new(&TRACE_HEADER);
    for row in rows {
        match *row {
            TraceRow::Rsrp { t_ms, cell_id, rsrp_dbm } => csv.row([
                t_ms.to_string(),
                "rsrp".into(),
                cell_id.to_string(),
                fmt_f64(rsrp_dbm),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]),
            TraceRow::Kin { t_ms, kin } => {
                let (p, v) = (kin.position, kin.velocity);
                csv.row([
                    t_ms.to_string(),
                    "kin".into(),
                    String::new(),
                    String::new(),
                    fmt_f64(p.x),
                    fmt_f64(p.y),
                    fmt_f64(p.z),
                    fmt_f64(v.x),
                    fmt_f64(v.y),
                    fmt_f64(v.z),
                ])
            }
        }
    }
    csv.finish()
}

/// Run the configured engines over the trace. At each instant kinematics rows
/// apply first, then the event engine steps if the instant carries RSRP rows,
/// then the height reporter steps if it carries a kinematics row.
pub fn replay(rows: &[TraceRow], cfg: &ReplayConfig) -> Result<Vec<MeasReport>, CliError> {
    let mut engine = cfg.event.clone().map(MeasEngine::new).transpose()?;
    let mut height = cfg.height.map(HeightReporter::new).transpose()?;
    let contract = |e: skysim_core::meas::MeasError| trace_error("replay", e.to_string());
    let mut reports = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].t_ms();
        let end = i + rows[i..].iter().take_while(|r| r.t_ms() == t).count();
        let mut samples = Vec::new();
        let mut kin = None;
        for row in &rows[i..end] {
            match *row {
                TraceRow::Rsrp { cell_id, rsrp_dbm, .. } => samples.push((cell_id, rsrp_dbm)),
                TraceRow::Kin { kin: k, .. } => kin = Some(k),
            }
        }
        if let (Some(e), Some(k)) = (engine.as_mut(), kin) {
            e.set_kinematics(k);
        }
        if let Some(e) = engine.as_mut().filter(|_| !samples.is_empty()) {
            reports.extend(e.step(t, &samples).map_err(contract)?);
        }
        if let (Some(h), Some(k)) = (height.as_mut(), kin) {
            reports.extend(h.step(t, k).map_err(contract)?);
        }
        i = end;
    }
    Ok(reports)
}

pub fn report_log_csv(reports: &[MeasReport]) -> String {
    let mut csv = Csv::new(&REPORT_LOG_HEADER);
    for r in reports {
        csv.row(report_fields(r));
    }
    csv.finish()
}

/// Report-log fields of one report, in header order.
pub fn report_fields(r: &MeasReport) -> Vec<String> {
    let cells: Vec<String> = r
        .cells
        .iter()
        .map(|c| format!("{}@{}@{}", c.cell_id, fmt_f64(c.rsrp), fmt_f64(c.rsrq)))
        .collect();
    vec![
        r.t_ms.to_string(),
        r.kind.name().to_string(),
        r.cells.len().to_string(),
        cells.join(";"),
        fmt_opt(r.height),
        fmt_opt(r.location.map(|p| p.x)),
        fmt_opt(r.location.map(|p| p.y)),
        fmt_opt(r.horizontal_speed),
        fmt_opt(r.vertical_speed),
    ]
}
