//! Flight paths and a simplified handover / radio-link-failure model driven
//! in fixed ticks along a trajectory.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{evaluate_link, AerialChannel, ChannelModel, LinkDraws};
use crate::deploy::{build_layout, Layout, ScenarioConfig, UeKind, MAX_AERIAL_HEIGHT, OUTDOOR_UE_HEIGHT};
use crate::error::ConfigError;
use crate::geometry::{Point2, Point3};
use crate::meas::l3_filter;
use crate::rng::{self, Domain};
use crate::units::{db_to_lin, lin_to_db, noise_power_dbm};
use crate::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point3,
    pub t_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("time {t} ms outside flight path [{start}, {end}] ms")]
    OutOfRange { t: f64, start: u64, end: u64 },
}

/// Timestamped waypoints; positions between them are linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Waypoint>", into = "Vec<Waypoint>")]
pub struct FlightPath {
    waypoints: Vec<Waypoint>,
}

impl TryFrom<Vec<Waypoint>> for FlightPath {
    type Error = ConfigError;

    fn try_from(w: Vec<Waypoint>) -> Result<Self, ConfigError> {
        Self::new(w)
    }
}

impl From<FlightPath> for Vec<Waypoint> {
    fn from(p: FlightPath) -> Self {
        p.waypoints
    }
}

impl FlightPath {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, ConfigError> {
        if waypoints.is_empty() {
            return Err(ConfigError::new("waypoints", "need at least one waypoint"));
        }
        if waypoints.windows(2).any(|w| w[1].t_ms <= w[0].t_ms) {
            return Err(ConfigError::new("waypoints", "timestamps must strictly increase"));
        }
        if let Some(w) = waypoints
            .iter()
            .find(|w| !(0.0..=MAX_AERIAL_HEIGHT).contains(&w.position.z))
        {
            return Err(ConfigError::new(
                "waypoints",
                format!("height {} m outside [0, {MAX_AERIAL_HEIGHT}] m", w.position.z),
            ));
        }
        Ok(Self { waypoints })
    }

    /// Constant-velocity path from `start` along `heading_deg` (0 = +x axis).
    pub fn straight(start: Point3, heading_deg: f64, speed_mps: f64, duration_ms: u64) -> Result<Self, ConfigError> {
        let (s, c) = heading_deg.to_radians().sin_cos();
        let d = speed_mps * duration_ms as f64 / 1000.0;
        let end = Point3::new(start.x + c * d, start.y + s * d, start.z);
        let mut w = vec![Waypoint { position: start, t_ms: 0 }];
        if duration_ms > 0 {
            w.push(Waypoint {
                position: end,
                t_ms: duration_ms,
            });
        }
        Self::new(w)
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn start_ms(&self) -> u64 {
        self.waypoints[0].t_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.waypoints[self.waypoints.len() - 1].t_ms
    }

    fn segment(&self, t: f64) -> Result<usize, PathError> {
        let (start, end) = (self.start_ms(), self.end_ms());
        if !(t >= start as f64 && t <= end as f64) {
            return Err(PathError::OutOfRange { t, start, end });
        }
        Ok(self
            .waypoints
            .partition_point(|w| (w.t_ms as f64) <= t)
            .clamp(1, self.waypoints.len().max(2) - 1))
    }

    pub fn position_at(&self, t_ms: f64) -> Result<Point3, PathError> {
        let i = self.segment(t_ms)?;
        if self.waypoints.len() == 1 {
            return Ok(self.waypoints[0].position);
        }
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        if t_ms == a.t_ms as f64 {
            return Ok(a.position);
        }
        if t_ms == b.t_ms as f64 {
            return Ok(b.position);
        }
        let frac = (t_ms - a.t_ms as f64) / (b.t_ms - a.t_ms) as f64;
        Ok(a.position.lerp(b.position, frac))
    }

    /// Velocity in m/s on the segment containing `t_ms` (the later one at a waypoint).
    pub fn velocity_at(&self, t_ms: f64) -> Result<Point3, PathError> {
        let i = self.segment(t_ms)?;
        if self.waypoints.len() == 1 {
            return Ok(Point3::default());
        }
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        let dt = (b.t_ms - a.t_ms) as f64 / 1000.0;
        Ok(Point3::new(
            (b.position.x - a.position.x) / dt,
            (b.position.y - a.position.y) / dt,
            (b.position.z - a.position.z) / dt,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverConfig {
    pub a3_offset: f64,
    pub ttt: u64,
    pub prep_delay: u64,
    pub exec_time: u64,
    pub qout: f64,
    pub qin: f64,
    pub t310: u64,
    pub l3_filter_k: u32,
    pub ping_pong_window: u64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            a3_offset: 3.0,
            ttt: 160,
            prep_delay: 50,
            exec_time: 40,
            qout: -8.0,
            qin: -6.0,
            t310: 1000,
            l3_filter_k: 4,
            ping_pong_window: 1000,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.qout < self.qin) {
            return Err(ConfigError::new("qout", "must be below qin"));
        }
        if !self.a3_offset.is_finite() {
            return Err(ConfigError::new("a3_offset", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MobilityStats {
    pub attempts: u32,
    pub handovers: u32,
    pub handover_failures: u32,
    pub radio_link_failures: u32,
    pub ping_pongs: u32,
    pub outage_ms: u64,
    pub duration_ms: u64,
}

impl MobilityStats {
    pub fn failures(&self) -> u32 {
        self.handover_failures + self.radio_link_failures
    }

    /// HOF + RLF per minute of simulated time.
    pub fn failure_rate_per_min(&self) -> f64 {
        if self.duration_ms == 0 {
            return 0.0;
        }
        f64::from(self.failures()) * 60_000.0 / self.duration_ms as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Connected,
    Preparing { target: usize, until: u64 },
    Executing { target: usize, until: u64 },
}

/// Handover state machine for one UE. Each tick takes the received downlink
/// power from every cell; RSRP differs from it by a constant per-RE offset,
/// so A3 comparisons run on the filtered received power directly.
#[derive(Debug, Clone)]
pub struct HandoverEngine {
    cfg: HandoverConfig,
    noise_dbm: f64,
    serving: usize,
    filtered: Vec<f64>,
    a3_since: Vec<Option<u64>>,
    t310_start: Option<u64>,
    phase: Phase,
    last_ho: Option<(u64, usize)>,
    last_t: Option<u64>,
    stats: MobilityStats,
}

impl HandoverEngine {
    pub fn new(cfg: HandoverConfig, noise_dbm: f64) -> Self {
        Self {
            cfg,
            noise_dbm,
            serving: 0,
            filtered: Vec::new(),
            a3_since: Vec::new(),
            t310_start: None,
            phase: Phase::Connected,
            last_ho: None,
            last_t: None,
            stats: MobilityStats::default(),
        }
    }

    pub fn serving(&self) -> usize {
        self.serving
    }

    pub fn stats(&self) -> MobilityStats {
        self.stats
    }

    /// Downlink SINR toward `cell` with every other cell at full load.
    pub fn sinr(rx_dbm: &[f64], cell: usize, noise_dbm: f64) -> f64 {
        let other: f64 = rx_dbm
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != cell)
            .map(|(_, &p)| db_to_lin(p))
            .sum();
        rx_dbm[cell] - lin_to_db(other + db_to_lin(noise_dbm))
    }

    fn strongest(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.filtered.iter().enumerate() {
            if f > self.filtered[best] {
                best = i;
            }
        }
        best
    }

    fn reestablish(&mut self) {
        self.serving = self.strongest();
        self.phase = Phase::Connected;
        self.t310_start = None;
        self.a3_since.iter_mut().for_each(|s| *s = None);
    }

    pub fn step(&mut self, t_ms: u64, rx_dbm: &[f64]) {
        let dt = self.last_t.map_or(0, |p| t_ms - p);
        self.last_t = Some(t_ms);
        self.stats.duration_ms += dt;
        if self.filtered.is_empty() {
            self.filtered = rx_dbm.to_vec();
            self.a3_since = vec![None; rx_dbm.len()];
            self.serving = self.strongest();
        } else {
            for (f, &x) in self.filtered.iter_mut().zip(rx_dbm) {
                *f = l3_filter(*f, x, self.cfg.l3_filter_k);
            }
        }
        let serving_sinr = Self::sinr(rx_dbm, self.serving, self.noise_dbm);

        match self.phase {
            Phase::Preparing { target, until } => {
                if serving_sinr < self.cfg.qout {
                    self.stats.handover_failures += 1;
                    self.stats.outage_ms += dt;
                    self.reestablish();
                } else if t_ms >= until {
                    self.phase = Phase::Executing {
                        target,
                        until: t_ms + self.cfg.exec_time,
                    };
                }
                return;
            }
            Phase::Executing { target, until } => {
                self.stats.outage_ms += dt;
                if Self::sinr(rx_dbm, target, self.noise_dbm) < self.cfg.qout {
                    self.stats.handover_failures += 1;
                    self.reestablish();
                } else if t_ms >= until {
                    self.complete_handover(t_ms, target);
                }
                return;
            }
            Phase::Connected => {}
        }

        if serving_sinr < self.cfg.qout {
            self.stats.outage_ms += dt;
            let start = *self.t310_start.get_or_insert(t_ms);
            if t_ms - start >= self.cfg.t310 {
                self.stats.radio_link_failures += 1;
                self.reestablish();
                return;
            }
        } else if serving_sinr > self.cfg.qin {
            self.t310_start = None;
        }

        let mp = self.filtered[self.serving];
        let mut target: Option<usize> = None;
        for c in 0..self.filtered.len() {
            if c == self.serving || self.filtered[c] <= mp + self.cfg.a3_offset {
                self.a3_since[c] = None;
                continue;
            }
            let since = *self.a3_since[c].get_or_insert(t_ms);
            if t_ms - since >= self.cfg.ttt && target.is_none_or(|b| self.filtered[c] > self.filtered[b]) {
                target = Some(c);
            }
        }
        if let Some(target) = target {
            self.stats.attempts += 1;
            self.phase = Phase::Preparing {
                target,
                until: t_ms + self.cfg.prep_delay,
            };
        }
    }

    fn complete_handover(&mut self, t_ms: u64, target: usize) {
        let source = self.serving;
        self.stats.handovers += 1;
        if let Some((t_prev, from)) = self.last_ho {
            if from == target && t_ms - t_prev <= self.cfg.ping_pong_window {
                self.stats.ping_pongs += 1;
            }
        }
        self.last_ho = Some((t_ms, source));
        self.serving = target;
        self.phase = Phase::Connected;
        self.t310_start = None;
        self.a3_since.iter_mut().for_each(|s| *s = None);
    }

    /// Statistics with any attempt still in flight resolved as a success, so
    /// attempts always equal handovers plus failures.
    pub fn finish(mut self) -> MobilityStats {
        if let Phase::Preparing { .. } | Phase::Executing { .. } = self.phase {
            self.stats.handovers += 1;
        }
        self.stats
    }
}

/// Drive the handover engine over `[0, duration_ms]` in `tick_ms` steps;
/// `rx_at(t)` returns the received power from every cell at time `t`.
pub fn simulate_track(
    cfg: &HandoverConfig,
    noise_dbm: f64,
    duration_ms: u64,
    tick_ms: u64,
    mut rx_at: impl FnMut(u64) -> Vec<f64>,
) -> Result<MobilityStats, ConfigError> {
    cfg.validate()?;
    if tick_ms == 0 || !duration_ms.is_multiple_of(tick_ms) {
        return Err(ConfigError::new("tick_ms", "must be positive and divide duration_ms"));
    }
    let mut engine = HandoverEngine::new(*cfg, noise_dbm);
    for t in (0..=duration_ms).step_by(tick_ms as usize) {
        engine.step(t, &rx_at(t));
    }
    Ok(engine.finish())
}

/// Height and speed of the UEs in a mobility run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityUeSpec {
    pub kind: UeKind,
    pub height: f64,
    pub speed_kmh: f64,
}

impl MobilityUeSpec {
    pub fn terrestrial() -> Self {
        Self {
            kind: UeKind::TerrestrialOutdoor,
            height: OUTDOOR_UE_HEIGHT,
            speed_kmh: 30.0,
        }
    }

    pub fn aerial() -> Self {
        Self {
            kind: UeKind::Aerial,
            height: 100.0,
            speed_kmh: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    pub scenario: ScenarioConfig,
    pub handover: HandoverConfig,
    pub ue: MobilityUeSpec,
    pub n_ues: usize,
    pub duration_ms: u64,
    pub tick_ms: u64,
}

impl MobilityConfig {
    pub fn new(scenario: ScenarioConfig, ue: MobilityUeSpec) -> Self {
        Self {
            scenario,
            handover: HandoverConfig::default(),
            ue,
            n_ues: 10,
            duration_ms: 30_000,
            tick_ms: 10,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        self.handover.validate()?;
        if self.n_ues == 0 {
            return Err(ConfigError::new("n_ues", "must be at least 1"));
        }
        if !(0.0..=MAX_AERIAL_HEIGHT).contains(&self.ue.height) {
            return Err(ConfigError::new("ue.height", format!("must lie in [0, {MAX_AERIAL_HEIGHT}] m")));
        }
        if !(self.ue.speed_kmh >= 0.0 && self.ue.speed_kmh.is_finite()) {
            return Err(ConfigError::new("ue.speed_kmh", "must be finite and >= 0"));
        }
        if self.tick_ms == 0 || !self.duration_ms.is_multiple_of(self.tick_ms) {
            return Err(ConfigError::new("tick_ms", "must be positive and divide duration_ms"));
        }
        Ok(())
    }
}

/// Random start inside the layout's site hexagons and a uniform heading.
fn random_path(layout: &Layout, spec: &MobilityUeSpec, duration_ms: u64, rng: &mut impl Rng) -> FlightPath {
    let isd = layout.inter_site_distance;
    let site = layout.sites[rng.random_range(0..layout.sites.len())];
    let r = isd / 3f64.sqrt();
    let start = loop {
        let p = Point2::new(rng.random_range(-r..r), rng.random_range(-r..r));
        if p.x.abs() <= r * 3f64.sqrt() / 2.0 && p.x.abs() * 0.5 + p.y.abs() * 3f64.sqrt() / 2.0 <= r * 3f64.sqrt() / 2.0 {
            break site + p;
        }
    };
    let heading = rng.random_range(0.0..360.0);
    FlightPath::straight(
        Point3::new(start.x, start.y, spec.height),
        heading,
        spec.speed_kmh / 3.6,
        duration_ms,
    )
    .expect("height validated")
}

/// Move one UE along `path` through the layout and run the handover model.
/// Link LOS and shadowing draws are fixed per (UE, cell) for the whole run.
#[allow(clippy::too_many_arguments)]
pub fn simulate_mobility(
    cfg: &ScenarioConfig,
    layout: &Layout,
    model: &dyn ChannelModel,
    ue: (UeId, UeKind),
    path: &FlightPath,
    ho: &HandoverConfig,
    duration_ms: u64,
    tick_ms: u64,
) -> Result<MobilityStats, ConfigError> {
    let (ue_id, kind) = ue;
    let draws: Vec<LinkDraws> = layout
        .cells
        .iter()
        .map(|c| LinkDraws::new(cfg.rng_seed, ue_id, c, 0.0))
        .collect();
    let noise = noise_power_dbm(cfg.thermal_noise_density, cfg.bandwidth_rbs, cfg.ue_noise_figure);
    simulate_track(ho, noise, duration_ms, tick_ms, |t| {
        let p = path
            .position_at((path.start_ms() + t) as f64)
            .expect("duration within path");
        layout
            .cells
            .iter()
            .zip(&draws)
            .map(|(cell, &d)| {
                let offset = layout.displacement(cell.site_position, p.xy());
                cell.tx_power + evaluate_link(model, cfg, cell, (ue_id, kind, p.z), offset, d).coupling_gain
            })
            .collect()
    })
}

/// Run `n_ues` independent UEs on random straight paths for one seed.
pub fn run_mobility(cfg: &MobilityConfig, seed: u64) -> Result<Vec<MobilityStats>, ConfigError> {
    cfg.validate()?;
    let scenario = ScenarioConfig {
        rng_seed: seed,
        ..cfg.scenario.clone()
    };
    let layout = build_layout(&scenario)?;
    let model = AerialChannel::new(scenario.scenario_kind);
    (0..cfg.n_ues)
        .into_par_iter()
        .map(|i| {
            let ue_id = i as UeId;
            let mut r = rng::stream(seed, Domain::Trajectory, u64::from(ue_id));
            let path = random_path(&layout, &cfg.ue, cfg.duration_ms, &mut r);
            simulate_mobility(
                &scenario,
                &layout,
                &model,
                (ue_id, cfg.ue.kind),
                &path,
                &cfg.handover,
                cfg.duration_ms,
                cfg.tick_ms,
            )
        })
        .collect()
}
