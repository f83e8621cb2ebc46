//! Multi-cell report scenario: search for a deterministic straight flight
//! over the layout along which several neighbour cells qualify one after
//! another, then replay the resulting trace through the event engine.

use std::collections::BTreeMap;

use rand::Rng;
use skysim_core::channel::{evaluate_link, AerialChannel, LinkDraws};
use skysim_core::deploy::{build_layout, Layout, ScenarioConfig, UeKind};
use skysim_core::geometry::Point3;
use skysim_core::meas::{Kinematics, MeasConfig, MeasEngine, MeasReport};
use skysim_core::mobility::FlightPath;
use skysim_core::rng::{self, Domain};
use skysim_core::units::lin_to_db;
use skysim_core::{CellId, ConfigError};

use crate::error::CliError;
use crate::output::{Artifacts, Csv};
use crate::replay::{replay, report_log_csv, trace_csv, ReplayConfig, TraceRow};
use crate::spec::{CampaignSpec, MulticellSection};

/// A neighbour's entry into the triggered list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qualification {
    pub cell_id: CellId,
    /// First instant of the entry-condition run that led to the join.
    pub entry_t_ms: u64,
    pub join_t_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedTrace {
    pub attempt: u64,
    pub path: FlightPath,
    pub rows: Vec<TraceRow>,
    pub meas: MeasConfig,
    pub qualifications: Vec<Qualification>,
    pub reports: Vec<MeasReport>,
}

/// Round-trip a value through the CSV float format so the in-memory trace
/// and its file replay see identical inputs.
fn as_written(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// Per-cell links along a flight, one set of shadowing draws per attempt.
struct Sampler<'a> {
    cfg: &'a ScenarioConfig,
    layout: &'a Layout,
    model: &'a AerialChannel,
    draws: Vec<LinkDraws>,
    per_re: f64,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a ScenarioConfig, layout: &'a Layout, model: &'a AerialChannel, attempt: u64) -> Self {
        let draws = layout
            .cells
            .iter()
            .map(|c| LinkDraws::new(cfg.rng_seed, attempt as u32, c, 0.0))
            .collect();
        Self {
            cfg,
            layout,
            model,
            draws,
            per_re: lin_to_db(12.0 * f64::from(cfg.bandwidth_rbs)),
        }
    }

    /// Kinematics row followed by one RSRP row per cell.
    fn rows_at(&self, path: &FlightPath, t: u64) -> Vec<TraceRow> {
        let tf = t as f64;
        let p = path.position_at(tf).expect("inside path");
        let v = path.velocity_at(tf).expect("inside path");
        let round = |q: Point3| Point3::new(as_written(q.x), as_written(q.y), as_written(q.z));
        let mut rows = vec![TraceRow::Kin {
            t_ms: t,
            kin: Kinematics {
                position: round(p),
                velocity: round(v),
            },
        }];
        for (cell, &d) in self.layout.cells.iter().zip(&self.draws) {
            let offset = self.layout.displacement(cell.site_position, p.xy());
            let link = evaluate_link(self.model, self.cfg, cell, (0, UeKind::Aerial, p.z), offset, d);
            rows.push(TraceRow::Rsrp {
                t_ms: t,
                cell_id: cell.cell_id,
                rsrp_dbm: as_written(cell.tx_power - self.per_re + link.coupling_gain),
            });
        }
        rows
    }
}

fn rsrp_samples(rows: &[TraceRow]) -> Vec<(CellId, f64)> {
    rows.iter()
        .filter_map(|r| match *r {
            TraceRow::Rsrp { cell_id, rsrp_dbm, .. } => Some((cell_id, rsrp_dbm)),
            TraceRow::Kin { .. } => None,
        })
        .collect()
}

/// Tracks list joins and leaves while stepping the engine.
struct Walker {
    meas: MeasConfig,
    engine: MeasEngine,
    since: BTreeMap<CellId, u64>,
    listed: Vec<CellId>,
    joins: Vec<Qualification>,
    first_leave: Option<u64>,
    entry_at_start: bool,
    reports: Vec<u64>,
}

impl Walker {
    fn new(meas: MeasConfig) -> Self {
        Self {
            engine: MeasEngine::new(meas.clone()).expect("validated"),
            meas,
            since: BTreeMap::new(),
            listed: Vec::new(),
            joins: Vec::new(),
            first_leave: None,
            entry_at_start: false,
            reports: Vec::new(),
        }
    }

    fn step(&mut self, t: u64, first: bool, samples: &[(CellId, f64)]) {
        if let Some(r) = self.engine.step(t, samples).expect("increasing time") {
            self.reports.push(r.t_ms);
        }
        let serving = self.meas.serving_cell;
        let mp = serving.and_then(|s| self.engine.filtered(s));
        for &(c, _) in samples {
            if Some(c) == serving {
                continue;
            }
            let f = self.engine.filtered(c).expect("measured");
            if self.meas.entry(f, mp) {
                self.since.entry(c).or_insert(t);
                self.entry_at_start |= first;
            } else if !self.listed.contains(&c) {
                self.since.remove(&c);
            }
        }
        let now = self.engine.triggered();
        if self.first_leave.is_none() && self.listed.iter().any(|c| !now.contains(c)) {
            self.first_leave = Some(t);
        }
        for &c in &now {
            if !self.listed.contains(&c) {
                self.joins.push(Qualification {
                    cell_id: c,
                    entry_t_ms: self.since.get(&c).copied().unwrap_or(t),
                    join_t_ms: t,
                });
            }
        }
        self.listed = now;
    }

    /// No event so far rules the trace out.
    fn viable(&self, needed: usize) -> bool {
        let k = self.joins.len().min(needed);
        !self.entry_at_start
            && self.first_leave.is_none()
            && self.reports.len() <= 1
            && self.joins[..k].windows(2).all(|w| w[0].join_t_ms < w[1].join_t_ms)
    }
}

/// Start point and heading of attempt `k`: the flight heads roughly at a
/// random site from one to three inter-site distances away, so cells of that
/// site and its neighbours come into range one after another.
fn draw_flight(scenario: &ScenarioConfig, layout: &Layout, altitude: f64, attempt: u64) -> (Point3, f64) {
    let mut r = rng::stream(scenario.rng_seed, Domain::Trajectory, attempt);
    let isd = scenario.inter_site_distance;
    let target = layout.sites[r.random_range(0..layout.sites.len())];
    let range = r.random_range(isd..3.0 * isd);
    let bearing = r.random_range(0.0..std::f64::consts::TAU);
    let start = Point3::new(target.x + range * bearing.cos(), target.y + range * bearing.sin(), altitude);
    let jitter: f64 = r.random_range(-20.0..20.0);
    let heading = (bearing.to_degrees() + 180.0 + jitter).rem_euclid(360.0);
    (start, heading)
}

/// Samples kept after the last required join so the trace shows that the
/// extra cells do not re-trigger.
const TAIL_MS: u64 = 400;

/// Deterministic search: attempt `k` draws a start point, heading and
/// shadowing from the seed; the first attempt whose trace has `X + extra`
/// cells joining at distinct instants, no cell leaving, and exactly one
/// report at the X-th join wins.
pub fn synthesize(scenario: &ScenarioConfig, m: &MulticellSection) -> Result<SynthesizedTrace, ConfigError> {
    let layout = build_layout(scenario)?;
    let model = AerialChannel::new(scenario.scenario_kind);
    let speed = m.speed_kmh / 3.6;
    let period = m.sample_period_ms;
    let duration = ((m.path_length / speed * 1000.0) as u64 / period) * period;
    let x = m.meas.cell_count_x;
    let needed = x + m.extra_cells;
    for attempt in 0..m.search_attempts {
        let (start, heading) = draw_flight(scenario, &layout, m.altitude, attempt);
        let path = FlightPath::straight(start, heading, speed, duration)?;
        let sampler = Sampler::new(scenario, &layout, &model, attempt);
        let first = sampler.rows_at(&path, 0);
        let serving = rsrp_samples(&first)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c);
        let meas = MeasConfig {
            serving_cell: serving,
            ..m.meas.clone()
        };
        let mut walker = Walker::new(meas.clone());
        let mut rows = Vec::new();
        let mut end = None;
        let mut t = 0;
        while t <= duration && end.is_none_or(|e| t <= e) {
            let tick = if t == 0 { first.clone() } else { sampler.rows_at(&path, t) };
            walker.step(t, t == 0, &rsrp_samples(&tick));
            rows.extend(tick);
            if !walker.viable(needed) {
                break;
            }
            if end.is_none() && walker.joins.len() >= needed {
                end = Some(walker.joins[needed - 1].join_t_ms + TAIL_MS);
            }
            t += period;
        }
        let accepted = walker.viable(needed)
            && walker.joins.len() >= needed
            && walker.reports.len() == 1
            && walker.reports[0] == walker.joins[x - 1].join_t_ms;
        if !accepted {
            continue;
        }
        let last = rows.last().map_or(0, TraceRow::t_ms);
        let path = FlightPath::straight(start, heading, speed, last)?;
        let cfg = ReplayConfig {
            schema_version: crate::spec::SCHEMA_VERSION,
            event: Some(meas.clone()),
            height: None,
        };
        let reports = replay(&rows, &cfg).expect("synthesized trace is monotone");
        return Ok(SynthesizedTrace {
            attempt,
            path,
            rows,
            meas,
            qualifications: walker.joins,
            reports,
        });
    }
    Err(ConfigError::new(
        "multicell.search_attempts",
        format!("no qualifying flight found in {} attempts", m.search_attempts),
    ))
}

pub fn run(spec: &CampaignSpec) -> Result<Artifacts, CliError> {
    let m = spec.multicell.as_ref().expect("validated multicell section");
    let scenario = ScenarioConfig {
        rng_seed: spec.seed,
        ..spec.scenario.clone().unwrap_or_default().resolve()
    };
    let s = synthesize(&scenario, m)?;
    let mut out = Artifacts::default();
    out.add("trace.csv", trace_csv(&s.rows));
    out.add(
        "meas_config.toml",
        ReplayConfig {
            schema_version: crate::spec::SCHEMA_VERSION,
            event: Some(s.meas.clone()),
            height: None,
        }
        .to_toml(),
    );
    out.add("report_log.csv", report_log_csv(&s.reports));
    let mut q = Csv::new(&["order", "cell_id", "entry_t_ms", "join_t_ms"]);
    for (i, j) in s.qualifications.iter().enumerate() {
        q.row([
            (i + 1).to_string(),
            j.cell_id.to_string(),
            j.entry_t_ms.to_string(),
            j.join_t_ms.to_string(),
        ]);
    }
    out.add("qualifications.csv", q.finish());
    let mut metrics = Csv::new(&["setting", "metric", "stat", "value"]);
    let label = spec.label();
    metrics.row([label, "search_attempt", "value", &s.attempt.to_string()]);
    metrics.row([
        label,
        "serving_cell",
        "value",
        &s.meas.serving_cell.map(|c| c.to_string()).unwrap_or_default(),
    ]);
    metrics.row([label, "reports", "n", &s.reports.len().to_string()]);
    metrics.row([label, "qualified_cells", "n", &s.qualifications.len().to_string()]);
    out.add("metrics.csv", metrics.finish());
    Ok(out)
}
