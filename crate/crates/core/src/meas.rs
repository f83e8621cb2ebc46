//! Measurement-event engine: layer-3 filtering, A3/A4/A5 entry and leave
//! conditions, time-to-trigger, multi-cell triggering on a triggered-cell
//! list, and height-threshold reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ConfigError;
use crate::geometry::{Point2, Point3};
use crate::units::{db_to_lin, lin_to_db};
use crate::CellId;

/// Default measurement sampling period.
pub const SAMPLE_PERIOD_MS: u64 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasError {
    #[error("time went from {prev} ms to {t} ms; samples must strictly increase")]
    NonMonotonic { prev: u64, t: u64 },
}

/// Layer-3 smoothing with coefficient `k`; `k = 0` passes samples through.
pub fn l3_filter(prev: f64, sample: f64, k: u32) -> f64 {
    let a = 0.5f64.powf(f64::from(k) / 4.0);
    (1.0 - a) * prev + a * sample
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    A3,
    A4,
    A5,
}

/// How the time-to-trigger applies to the multi-cell condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TttMode {
    /// Each cell must meet its entry condition for TTT before it joins the list.
    #[default]
    PerCell,
    /// Cells join on entry; the list must hold at least X cells for TTT.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasConfig {
    pub event: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a3_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a4_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a5_threshold1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a5_threshold2: Option<f64>,
    #[serde(default)]
    pub hysteresis: f64,
    #[serde(default)]
    pub ttt: u64,
    #[serde(default = "one")]
    pub cell_count_x: usize,
    #[serde(default)]
    pub l3_filter_k: u32,
    #[serde(default)]
    pub ttt_mode: TttMode,
    /// Cell excluded from evaluation and used as Mp for A3/A5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serving_cell: Option<CellId>,
}

fn one() -> usize {
    1
}

impl MeasConfig {
    pub fn a4(threshold: f64, hysteresis: f64, ttt: u64, x: usize) -> Self {
        Self {
            event: EventKind::A4,
            a3_offset: None,
            a4_threshold: Some(threshold),
            a5_threshold1: None,
            a5_threshold2: None,
            hysteresis,
            ttt,
            cell_count_x: x,
            l3_filter_k: 0,
            ttt_mode: TttMode::PerCell,
            serving_cell: None,
        }
    }

    pub fn a3(offset: f64, hysteresis: f64, ttt: u64, x: usize) -> Self {
        Self {
            event: EventKind::A3,
            a3_offset: Some(offset),
            a4_threshold: None,
            ..Self::a4(0.0, hysteresis, ttt, x)
        }
    }

    pub fn a5(threshold1: f64, threshold2: f64, hysteresis: f64, ttt: u64, x: usize) -> Self {
        Self {
            event: EventKind::A5,
            a4_threshold: None,
            a5_threshold1: Some(threshold1),
            a5_threshold2: Some(threshold2),
            ..Self::a4(0.0, hysteresis, ttt, x)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let need = |v: Option<f64>, field: &str| match v {
            Some(x) if x.is_finite() => Ok(()),
            Some(_) => Err(ConfigError::new(field, "must be finite")),
            None => Err(ConfigError::new(field, format!("required for event {:?}", self.event))),
        };
        match self.event {
            EventKind::A3 => need(self.a3_offset, "a3_offset")?,
            EventKind::A4 => need(self.a4_threshold, "a4_threshold")?,
            EventKind::A5 => {
                need(self.a5_threshold1, "a5_threshold1")?;
                need(self.a5_threshold2, "a5_threshold2")?;
            }
        }
        if !(self.hysteresis >= 0.0 && self.hysteresis.is_finite()) {
            return Err(ConfigError::new("hysteresis", "must be finite and >= 0"));
        }
        if self.cell_count_x < 1 {
            return Err(ConfigError::new("cell_count_x", "must be at least 1"));
        }
        Ok(())
    }

    /// Entry condition for neighbour `mn` given serving `mp`.
    pub fn entry(&self, mn: f64, mp: Option<f64>) -> bool {
        self.condition(mn, mp, self.hysteresis)
    }

    /// Leave condition: the entry comparison with the hysteresis sign flipped.
    pub fn leave(&self, mn: f64, mp: Option<f64>) -> bool {
        match self.event {
            EventKind::A3 => mp.is_some_and(|mp| mn + self.hysteresis < mp + self.a3_offset.unwrap_or(0.0)),
            EventKind::A4 => mn + self.hysteresis < self.a4_threshold.unwrap_or(f64::INFINITY),
            EventKind::A5 => mp.is_some_and(|mp| {
                mp - self.hysteresis > self.a5_threshold1.unwrap_or(f64::INFINITY)
                    || mn + self.hysteresis < self.a5_threshold2.unwrap_or(f64::INFINITY)
            }),
        }
    }

    fn condition(&self, mn: f64, mp: Option<f64>, hys: f64) -> bool {
        match self.event {
            EventKind::A3 => mp.is_some_and(|mp| mn - hys > mp + self.a3_offset.unwrap_or(0.0)),
            EventKind::A4 => mn - hys > self.a4_threshold.unwrap_or(f64::INFINITY),
            EventKind::A5 => mp.is_some_and(|mp| {
                mp + hys < self.a5_threshold1.unwrap_or(f64::NEG_INFINITY)
                    && mn - hys > self.a5_threshold2.unwrap_or(f64::INFINITY)
            }),
        }
    }
}

/// Entry condition of `event` for neighbour `mn` against serving `mp`.
pub fn evaluate_entry(cfg: &MeasConfig, mn: f64, mp: f64) -> bool {
    cfg.entry(mn, Some(mp))
}

/// Position and velocity attached to reports.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: Point3,
    pub velocity: Point3,
}

impl Kinematics {
    pub fn horizontal_speed(&self) -> f64 {
        self.velocity.xy().norm()
    }

    pub fn vertical_speed(&self) -> f64 {
        self.velocity.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellMeas {
    pub cell_id: CellId,
    pub rsrp: f64,
    pub rsrq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    MultiCell,
    HeightAbove,
    HeightBelow,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::MultiCell => "multicell",
            ReportKind::HeightAbove => "height_above",
            ReportKind::HeightBelow => "height_below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasReport {
    pub t_ms: u64,
    pub kind: ReportKind,
    /// Triggered cells, strongest first.
    pub cells: Vec<CellMeas>,
    pub height: Option<f64>,
    pub location: Option<Point2>,
    pub horizontal_speed: Option<f64>,
    pub vertical_speed: Option<f64>,
}

impl MeasReport {
    fn new(t_ms: u64, kind: ReportKind, cells: Vec<CellMeas>, kin: Option<Kinematics>) -> Self {
        Self {
            t_ms,
            kind,
            cells,
            height: kin.map(|k| k.position.z),
            location: kin.map(|k| k.position.xy()),
            horizontal_speed: kin.map(|k| k.horizontal_speed()),
            vertical_speed: kin.map(|k| k.vertical_speed()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct CellState {
    filtered: f64,
    since: Option<u64>,
    in_list: bool,
}

/// Incremental engine for one UE.
#[derive(Debug, Clone)]
pub struct MeasEngine {
    cfg: MeasConfig,
    cells: BTreeMap<CellId, CellState>,
    serving: Option<f64>,
    armed: bool,
    count_since: Option<u64>,
    last_t: Option<u64>,
    kinematics: Option<Kinematics>,
}

impl MeasEngine {
    pub fn new(cfg: MeasConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            cells: BTreeMap::new(),
            serving: None,
            armed: true,
            count_since: None,
            last_t: None,
            kinematics: None,
        })
    }

    pub fn config(&self) -> &MeasConfig {
        &self.cfg
    }

    pub fn set_kinematics(&mut self, k: Kinematics) {
        self.kinematics = Some(k);
    }

    pub fn filtered(&self, cell: CellId) -> Option<f64> {
        if Some(cell) == self.cfg.serving_cell {
            return self.serving;
        }
        self.cells.get(&cell).map(|c| c.filtered)
    }

    /// Cells currently on the triggered list, ascending id.
    pub fn triggered(&self) -> Vec<CellId> {
        self.cells.iter().filter(|(_, c)| c.in_list).map(|(&id, _)| id).collect()
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    /// Advance to `t_ms` with the raw samples taken at that instant. Cells
    /// absent from `samples` keep their last filtered value.
    pub fn step(&mut self, t_ms: u64, samples: &[(CellId, f64)]) -> Result<Option<MeasReport>, MeasError> {
        if let Some(prev) = self.last_t {
            if t_ms <= prev {
                return Err(MeasError::NonMonotonic { prev, t: t_ms });
            }
        }
        self.last_t = Some(t_ms);
        let k = self.cfg.l3_filter_k;
        for &(id, x) in samples {
            if Some(id) == self.cfg.serving_cell {
                self.serving = Some(self.serving.map_or(x, |p| l3_filter(p, x, k)));
            } else {
                self.cells
                    .entry(id)
                    .and_modify(|c| c.filtered = l3_filter(c.filtered, x, k))
                    .or_insert(CellState {
                        filtered: x,
                        ..CellState::default()
                    });
            }
        }

        let ttt = match self.cfg.ttt_mode {
            TttMode::PerCell => self.cfg.ttt,
            TttMode::Shared => 0,
        };
        let mp = self.serving;
        for c in self.cells.values_mut() {
            if c.in_list {
                if self.cfg.leave(c.filtered, mp) {
                    c.in_list = false;
                    c.since = None;
                }
            } else if self.cfg.entry(c.filtered, mp) {
                let since = *c.since.get_or_insert(t_ms);
                if t_ms - since >= ttt {
                    c.in_list = true;
                }
            } else {
                c.since = None;
            }
        }

        let count = self.cells.values().filter(|c| c.in_list).count();
        let x = self.cfg.cell_count_x;
        let qualified = match self.cfg.ttt_mode {
            TttMode::PerCell => count >= x,
            TttMode::Shared => {
                if count >= x {
                    let since = *self.count_since.get_or_insert(t_ms);
                    t_ms - since >= self.cfg.ttt
                } else {
                    self.count_since = None;
                    false
                }
            }
        };
        let mut report = None;
        if qualified && self.armed {
            self.armed = false;
            report = Some(MeasReport::new(t_ms, ReportKind::MultiCell, self.report_cells(), self.kinematics));
        }
        if count < x {
            self.armed = true;
        }
        Ok(report)
    }

    fn report_cells(&self) -> Vec<CellMeas> {
        let total = db_to_lin_sum(self.cells.values().map(|c| c.filtered).chain(self.serving));
        let mut cells: Vec<CellMeas> = self
            .cells
            .iter()
            .filter(|(_, c)| c.in_list)
            .map(|(&cell_id, c)| CellMeas {
                cell_id,
                rsrp: c.filtered,
                rsrq: rsrq(c.filtered, total),
            })
            .collect();
        cells.sort_by(|a, b| b.rsrp.total_cmp(&a.rsrp).then(a.cell_id.cmp(&b.cell_id)));
        cells
    }
}

fn db_to_lin_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().map(db_to_lin).sum()
}

/// RSRQ proxy: RSRP over the per-RB received power of all measured cells
/// (12 subcarriers per RB, full load, noise ignored).
pub fn rsrq(rsrp_dbm: f64, total_rsrp_lin: f64) -> f64 {
    rsrp_dbm - lin_to_db(12.0 * total_rsrp_lin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightReportConfig {
    pub height_threshold: f64,
    #[serde(default = "default_height_hysteresis")]
    pub hysteresis_h: f64,
}

fn default_height_hysteresis() -> f64 {
    5.0
}

impl HeightReportConfig {
    pub fn new(height_threshold: f64) -> Self {
        Self {
            height_threshold,
            hysteresis_h: default_height_hysteresis(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.height_threshold > 0.0 && self.height_threshold.is_finite()) {
            return Err(ConfigError::new("height_threshold", "must be positive"));
        }
        if !(self.hysteresis_h >= 0.0 && self.hysteresis_h.is_finite()) {
            return Err(ConfigError::new("hysteresis_h", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeightBand {
    Unknown,
    Below,
    Above,
}

/// Reports when the UE moves from below `threshold - hys` to above
/// `threshold + hys` or back. Samples inside the band change nothing.
#[derive(Debug, Clone)]
pub struct HeightReporter {
    cfg: HeightReportConfig,
    band: HeightBand,
    last_t: Option<u64>,
}

impl HeightReporter {
    pub fn new(cfg: HeightReportConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            band: HeightBand::Unknown,
            last_t: None,
        })
    }

    pub fn band(&self) -> HeightBand {
        self.band
    }

    pub fn step(&mut self, t_ms: u64, kin: Kinematics) -> Result<Option<MeasReport>, MeasError> {
        if let Some(prev) = self.last_t {
            if t_ms <= prev {
                return Err(MeasError::NonMonotonic { prev, t: t_ms });
            }
        }
        self.last_t = Some(t_ms);
        let h = kin.position.z;
        let next = if h > self.cfg.height_threshold + self.cfg.hysteresis_h {
            HeightBand::Above
        } else if h < self.cfg.height_threshold - self.cfg.hysteresis_h {
            HeightBand::Below
        } else {
            return Ok(None);
        };
        let prev = std::mem::replace(&mut self.band, next);
        let kind = match (prev, next) {
            (HeightBand::Below, HeightBand::Above) => ReportKind::HeightAbove,
            (HeightBand::Above, HeightBand::Below) => ReportKind::HeightBelow,
            _ => return Ok(None),
        };
        Ok(Some(MeasReport::new(t_ms, kind, Vec::new(), Some(kin))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_examples() {
        assert_eq!(l3_filter(-90.0, -70.0, 0), -70.0);
        assert_eq!(l3_filter(-80.0, -80.0, 8), -80.0);
        assert!((l3_filter(-80.0, -70.0, 4) - (-75.0)).abs() < 1e-12);
    }

    #[test]
    fn entry_examples() {
        let a4 = MeasConfig::a4(-76.0, 0.0, 0, 1);
        assert!(evaluate_entry(&a4, -75.0, 0.0));
        let a3 = MeasConfig::a3(0.0, 0.0, 0, 1);
        assert!(!evaluate_entry(&a3, -80.0, -80.0));
        let a5 = MeasConfig::a5(-90.0, -80.0, 1.0, 0, 1);
        assert!(evaluate_entry(&a5, -70.0, -100.0));
        assert!(!evaluate_entry(&a5, -70.0, -89.5));
    }

    #[test]
    fn missing_threshold_names_the_field() {
        let mut c = MeasConfig::a4(-76.0, 0.0, 0, 1);
        c.a4_threshold = None;
        assert_eq!(c.validate().unwrap_err().field, "a4_threshold");
        let mut c = MeasConfig::a4(-76.0, 0.0, 0, 1);
        c.cell_count_x = 0;
        assert_eq!(c.validate().unwrap_err().field, "cell_count_x");
    }

    fn run(cfg: MeasConfig, trace: &[(u64, Vec<(CellId, f64)>)]) -> Vec<u64> {
        let mut e = MeasEngine::new(cfg).unwrap();
        trace
            .iter()
            .filter_map(|(t, s)| e.step(*t, s).unwrap().map(|r| r.t_ms))
            .collect()
    }

    /// Cells 1, 2, 3 rise above -76 dBm at 0, 200 and 400 ms and stay there.
    fn staircase() -> Vec<(u64, Vec<(CellId, f64)>)> {
        (0..20u64)
            .map(|i| {
                let t = i * 40;
                let s = [(1, 0), (2, 200), (3, 400)]
                    .iter()
                    .map(|&(c, start)| (c, if t >= start { -70.0 } else { -90.0 }))
                    .collect();
                (t, s)
            })
            .collect()
    }

    #[test]
    fn second_cell_triggers_x2_and_third_is_silent() {
        assert_eq!(run(MeasConfig::a4(-76.0, 1.0, 160, 2), &staircase()), vec![360]);
    }

    #[test]
    fn x1_without_leaves_reports_once() {
        assert_eq!(run(MeasConfig::a4(-76.0, 1.0, 160, 1), &staircase()), vec![160]);
    }

    #[test]
    fn short_blip_never_joins() {
        let trace: Vec<_> = (0..10u64)
            .map(|i| (i * 40, vec![(1, if (2..4).contains(&i) { -70.0 } else { -90.0 })]))
            .collect();
        assert!(run(MeasConfig::a4(-76.0, 0.0, 160, 1), &trace).is_empty());
    }

    #[test]
    fn leaving_rearms() {
        let level = |i: u64| if (5..10).contains(&i) { -90.0 } else { -70.0 };
        let trace: Vec<_> = (0..20u64).map(|i| (i * 40, vec![(1, level(i))])).collect();
        assert_eq!(run(MeasConfig::a4(-76.0, 0.0, 80, 1), &trace), vec![80, 480]);
    }

    #[test]
    fn hysteresis_band_keeps_cell_listed() {
        // joins at -70, then drifts to -77.4, just above the leave boundary -76 - hys
        let trace: Vec<_> = (0..20u64)
            .map(|i| (i * 40, vec![(1, if i < 5 { -70.0 } else { -77.4 })]))
            .collect();
        let mut e = MeasEngine::new(MeasConfig::a4(-76.0, 1.5, 0, 1)).unwrap();
        for (t, s) in &trace {
            e.step(*t, s).unwrap();
            assert_eq!(e.triggered(), vec![1]);
        }
    }

    #[test]
    fn serving_cell_is_excluded() {
        let mut cfg = MeasConfig::a4(-76.0, 0.0, 0, 1);
        cfg.serving_cell = Some(9);
        let mut e = MeasEngine::new(cfg).unwrap();
        assert!(e.step(0, &[(9, -50.0)]).unwrap().is_none());
        assert!(e.triggered().is_empty());
    }

    #[test]
    fn a3_uses_serving_measurement() {
        let mut cfg = MeasConfig::a3(3.0, 0.0, 0, 1);
        cfg.serving_cell = Some(0);
        let mut e = MeasEngine::new(cfg).unwrap();
        assert!(e.step(0, &[(0, -80.0), (1, -78.0)]).unwrap().is_none());
        let r = e.step(40, &[(0, -80.0), (1, -76.0)]).unwrap().unwrap();
        assert_eq!(r.cells[0].cell_id, 1);
    }

    #[test]
    fn non_monotonic_time_is_rejected() {
        let mut e = MeasEngine::new(MeasConfig::a4(-76.0, 0.0, 0, 1)).unwrap();
        e.step(40, &[]).unwrap();
        assert_eq!(e.step(40, &[]), Err(MeasError::NonMonotonic { prev: 40, t: 40 }));
    }

    #[test]
    fn shared_ttt_waits_for_the_list() {
        let mut cfg = MeasConfig::a4(-76.0, 1.0, 160, 2);
        cfg.ttt_mode = TttMode::Shared;
        // both cells listed at 200 ms, held for 160 ms
        assert_eq!(run(cfg, &staircase()), vec![360]);
    }

    #[test]
    fn report_carries_kinematics_and_rsrq() {
        let mut e = MeasEngine::new(MeasConfig::a4(-76.0, 0.0, 0, 2)).unwrap();
        e.set_kinematics(Kinematics {
            position: Point3::new(10.0, 20.0, 200.0),
            velocity: Point3::new(3.0, 4.0, -1.0),
        });
        let r = e.step(0, &[(1, -70.0), (2, -70.0)]).unwrap().unwrap();
        assert_eq!(r.height, Some(200.0));
        assert_eq!(r.location, Some(Point2::new(10.0, 20.0)));
        assert_eq!(r.horizontal_speed, Some(5.0));
        assert_eq!(r.vertical_speed, Some(-1.0));
        // two equal cells: RSRQ = -10log10(2*12)
        assert!((r.cells[0].rsrq + 10.0 * 24f64.log10()).abs() < 1e-9);
    }

    fn kin(h: f64) -> Kinematics {
        Kinematics {
            position: Point3::new(0.0, 0.0, h),
            velocity: Point3::default(),
        }
    }

    fn height_reports(heights: &[f64]) -> Vec<ReportKind> {
        let mut r = HeightReporter::new(HeightReportConfig::new(100.0)).unwrap();
        heights
            .iter()
            .enumerate()
            .filter_map(|(i, &h)| r.step(i as u64 * 100, kin(h)).unwrap().map(|x| x.kind))
            .collect()
    }

    #[test]
    fn height_crossings() {
        let up: Vec<f64> = (0..30).map(|i| 50.0 + 4.0 * f64::from(i)).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(height_reports(&up), vec![ReportKind::HeightAbove]);
        assert_eq!(height_reports(&down), vec![ReportKind::HeightBelow]);
        assert!(height_reports(&[60.0; 30]).is_empty());
        assert!(height_reports(&[90.0, 104.0, 96.0, 103.0, 97.0]).is_empty());
    }
}
