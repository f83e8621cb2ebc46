//! Multi-site deployment: hexagonal site grid, sector cells, antenna pattern
//! and terrestrial/aerial UE drops.
//!
//! Sites sit on a hexagonal lattice whose basis vectors point at 30° and 90°,
//! so a sector with bearing 0° looks between its two nearest neighbours.
//! Angles are in degrees, counter-clockwise from +x.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{wrap_deg, Point2, Point3};
use crate::rng::{self, Domain};
use crate::{CellId, UeId};

/// Heights of the indoor floors terrestrial indoor UEs are placed on.
pub const INDOOR_FLOOR_HEIGHTS: [f64; 8] = [1.5, 4.5, 7.5, 10.5, 13.5, 16.5, 19.5, 22.5];
/// Height of outdoor terrestrial UEs.
pub const OUTDOOR_UE_HEIGHT: f64 = 1.5;
pub const MIN_AERIAL_HEIGHT: f64 = 1.5;
pub const MAX_AERIAL_HEIGHT: f64 = 300.0;

/// Aerial ratios used by the preset campaigns.
pub const PRESET_AERIAL_RATIOS: [f64; 5] = [0.0, 0.0067, 0.071, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "UMa-AV")]
    UmaAv,
    #[serde(rename = "UMi-AV")]
    UmiAv,
    #[serde(rename = "RMa-AV")]
    RmaAv,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::UmaAv, ScenarioKind::UmiAv, ScenarioKind::RmaAv];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::UmaAv => "UMa-AV",
            ScenarioKind::UmiAv => "UMi-AV",
            ScenarioKind::RmaAv => "RMa-AV",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::new("scenario", format!("unknown scenario {s:?}")))
    }
}

/// Sector antenna pattern (parabolic in both planes, combined and clamped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaPattern {
    pub horizontal_hpbw: f64,
    pub vertical_hpbw: f64,
    /// Front-to-back ratio `Am`.
    pub front_back_ratio: f64,
    /// Vertical side-lobe floor `SLAv`.
    pub sidelobe_floor: f64,
    pub max_gain: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            horizontal_hpbw: 65.0,
            vertical_hpbw: 10.0,
            front_back_ratio: 25.0,
            sidelobe_floor: 20.0,
            max_gain: 14.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_kind: ScenarioKind,
    pub inter_site_distance: f64,
    pub enb_height: f64,
    pub carrier_freq: f64,
    pub bandwidth_rbs: u32,
    pub ues_per_cell: u32,
    pub aerial_ratio: f64,
    pub aerial_height_range: [f64; 2],
    pub n_sites: u32,
    pub sectors_per_site: u32,
    pub rng_seed: u64,
    /// eNodeB receiver noise figure.
    pub noise_figure: f64,
    pub ue_noise_figure: f64,
    pub thermal_noise_density: f64,
    pub enb_tx_power: f64,
    pub downtilt: f64,
    pub antenna: AntennaPattern,
    pub ue_antenna_gain: f64,
    pub indoor_fraction: f64,
    pub indoor_penetration_loss: f64,
    /// Minimum 2D distance between a UE and any site.
    pub min_ue_distance: f64,
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        let (isd, h, tilt, tx, min_d) = match kind {
            ScenarioKind::UmaAv => (500.0, 25.0, 6.0, 46.0, 35.0),
            ScenarioKind::UmiAv => (200.0, 10.0, 10.0, 41.0, 10.0),
            ScenarioKind::RmaAv => (1732.0, 35.0, 6.0, 46.0, 35.0),
        };
        Self {
            scenario_kind: kind,
            inter_site_distance: isd,
            enb_height: h,
            carrier_freq: 2.0,
            bandwidth_rbs: 50,
            ues_per_cell: 15,
            aerial_ratio: 0.0,
            aerial_height_range: [MIN_AERIAL_HEIGHT, MAX_AERIAL_HEIGHT],
            n_sites: 19,
            sectors_per_site: 3,
            rng_seed: 1,
            noise_figure: 5.0,
            ue_noise_figure: 9.0,
            thermal_noise_density: crate::units::THERMAL_NOISE_DBM_PER_HZ,
            enb_tx_power: tx,
            downtilt: tilt,
            antenna: AntennaPattern::default(),
            ue_antenna_gain: 0.0,
            indoor_fraction: 0.8,
            indoor_penetration_loss: 20.0,
            min_ue_distance: min_d,
        }
    }

    pub fn n_cells(&self) -> usize {
        (self.n_sites * self.sectors_per_site) as usize
    }

    /// Number of aerial UEs in a drop: `ratio × total`, rounded half-up.
    pub fn aerial_count(&self) -> usize {
        let total = self.ues_per_cell as usize * self.n_cells();
        round_half_up(self.aerial_ratio * total as f64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be positive, got {v}")))
            }
        };
        hex_rings(self.n_sites)?;
        if self.sectors_per_site == 0 {
            return Err(ConfigError::new("sectors_per_site", "must be at least 1"));
        }
        if self.ues_per_cell == 0 {
            return Err(ConfigError::new("ues_per_cell", "must be at least 1"));
        }
        if self.bandwidth_rbs == 0 {
            return Err(ConfigError::new("bandwidth_rbs", "must be at least 1"));
        }
        positive("inter_site_distance", self.inter_site_distance)?;
        positive("enb_height", self.enb_height)?;
        positive("carrier_freq", self.carrier_freq)?;
        if !(0.0..=1.0).contains(&self.aerial_ratio) {
            return Err(ConfigError::new(
                "aerial_ratio",
                format!("must lie in [0, 1], got {}", self.aerial_ratio),
            ));
        }
        let [lo, hi] = self.aerial_height_range;
        if !(lo >= MIN_AERIAL_HEIGHT && hi <= MAX_AERIAL_HEIGHT && lo <= hi) {
            return Err(ConfigError::new(
                "aerial_height_range",
                format!("need {MIN_AERIAL_HEIGHT} <= min <= max <= {MAX_AERIAL_HEIGHT}, got [{lo}, {hi}]"),
            ));
        }
        if !(0.0..=1.0).contains(&self.indoor_fraction) {
            return Err(ConfigError::new("indoor_fraction", "must lie in [0, 1]"));
        }
        if !(self.downtilt >= 0.0 && self.downtilt < 90.0) {
            return Err(ConfigError::new("downtilt", "must lie in [0, 90)"));
        }
        if self.min_ue_distance < 0.0 || self.min_ue_distance >= self.inter_site_distance / 2.0 {
            return Err(ConfigError::new(
                "min_ue_distance",
                "must be non-negative and below half the inter-site distance",
            ));
        }
        let a = &self.antenna;
        positive("antenna.horizontal_hpbw", a.horizontal_hpbw)?;
        positive("antenna.vertical_hpbw", a.vertical_hpbw)?;
        if a.front_back_ratio < 0.0 {
            return Err(ConfigError::new("antenna.front_back_ratio", "must be non-negative"));
        }
        if a.sidelobe_floor < 0.0 {
            return Err(ConfigError::new("antenna.sidelobe_floor", "must be non-negative"));
        }
        Ok(())
    }
}

pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub cell_id: CellId,
    pub site_id: u32,
    pub site_position: Point2,
    pub antenna_bearing: f64,
    pub antenna_height: f64,
    pub downtilt: f64,
    pub tx_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UeKind {
    TerrestrialOutdoor,
    TerrestrialIndoor,
    Aerial,
}

impl UeKind {
    pub fn is_aerial(self) -> bool {
        self == UeKind::Aerial
    }

    pub fn name(self) -> &'static str {
        match self {
            UeKind::TerrestrialOutdoor => "terrestrial_outdoor",
            UeKind::TerrestrialIndoor => "terrestrial_indoor",
            UeKind::Aerial => "aerial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UEntity {
    pub ue_id: UeId,
    pub kind: UeKind,
    pub position: Point2,
    pub height: f64,
    pub velocity: Point3,
}

impl UEntity {
    pub fn position3(&self) -> Point3 {
        Point3::new(self.position.x, self.position.y, self.height)
    }
}

/// Torus-like wraparound for a hexagonal cluster, via its six mirror translations.
#[derive(Debug, Clone, PartialEq)]
pub struct Wraparound {
    translations: [Point2; 6],
}

impl Wraparound {
    fn for_rings(rings: u32, isd: f64) -> Self {
        let r = rings as i64;
        let mut t = [Point2::ORIGIN; 6];
        let (mut q, mut s) = (2 * r + 1, -r);
        for slot in &mut t {
            *slot = axial_to_xy(q, s, isd);
            // 60° rotation in axial coordinates
            (q, s) = (-s, q + s);
        }
        Self { translations: t }
    }

    pub fn translations(&self) -> &[Point2; 6] {
        &self.translations
    }

    /// Shortest displacement from `from` to any mirror image of `to`.
    ///
    /// Greedy descent over the six mirror translations; they are the
    /// Voronoi-relevant vectors of the cluster lattice, so the descent ends at
    /// the nearest image even for points far outside the cluster.
    pub fn vector(&self, from: Point2, to: Point2) -> Point2 {
        let mut d = to - from;
        loop {
            let mut best = d;
            let mut best_norm = d.norm();
            for &t in &self.translations {
                let cand = d + t;
                let n = cand.norm();
                if n < best_norm - 1e-9 {
                    best = cand;
                    best_norm = n;
                }
            }
            if best == d {
                return d;
            }
            d = best;
        }
    }
}

/// Sites, sector cells and (for 19-site layouts) the wraparound map.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub inter_site_distance: f64,
    pub sites: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub wrap: Option<Wraparound>,
}

impl Layout {
    /// Displacement from `from` to `to`, wrapped when the layout wraps.
    pub fn displacement(&self, from: Point2, to: Point2) -> Point2 {
        match &self.wrap {
            Some(w) => w.vector(from, to),
            None => to - from,
        }
    }
}

fn hex_rings(n_sites: u32) -> Result<u32, ConfigError> {
    match n_sites {
        1 => Ok(0),
        7 => Ok(1),
        19 => Ok(2),
        n => Err(ConfigError::new("n_sites", format!("must be 1, 7 or 19, got {n}"))),
    }
}

fn axial_to_xy(q: i64, r: i64, isd: f64) -> Point2 {
    let (q, r) = (q as f64, r as f64);
    Point2::new(isd * q * 3f64.sqrt() / 2.0, isd * (q / 2.0 + r))
}

/// Place `n_sites` sites (1, 7 or 19) on a hexagonal grid and split each into
/// evenly spaced sectors.
pub fn build_layout(cfg: &ScenarioConfig) -> Result<Layout, ConfigError> {
    let rings = hex_rings(cfg.n_sites)?;
    if cfg.sectors_per_site == 0 {
        return Err(ConfigError::new("sectors_per_site", "must be at least 1"));
    }
    let isd = cfg.inter_site_distance;
    let r = rings as i64;
    let mut axial = Vec::new();
    for q in -r..=r {
        for s in -r..=r {
            let ring = q.abs().max(s.abs()).max((q + s).abs());
            if ring <= r {
                axial.push((ring, q, s));
            }
        }
    }
    // Ring by ring, counter-clockwise from +x.
    axial.sort_by(|a, b| {
        let ang = |&(_, q, s): &(i64, i64, i64)| {
            let p = axial_to_xy(q, s, 1.0);
            p.azimuth_deg().rem_euclid(360.0)
        };
        a.0.cmp(&b.0).then(ang(a).total_cmp(&ang(b)))
    });
    let sites: Vec<Point2> = axial.iter().map(|&(_, q, s)| axial_to_xy(q, s, isd)).collect();

    let step = 360.0 / f64::from(cfg.sectors_per_site);
    let mut cells = Vec::with_capacity(cfg.n_cells());
    for (site_id, &pos) in sites.iter().enumerate() {
        for sector in 0..cfg.sectors_per_site {
            cells.push(Cell {
                cell_id: cells.len() as CellId,
                site_id: site_id as u32,
                site_position: pos,
                antenna_bearing: f64::from(sector) * step,
                antenna_height: cfg.enb_height,
                downtilt: cfg.downtilt,
                tx_power: cfg.enb_tx_power,
            });
        }
    }
    let wrap = (rings == 2).then(|| Wraparound::for_rings(rings, isd));
    Ok(Layout {
        inter_site_distance: isd,
        sites,
        cells,
        wrap,
    })
}

/// Shortest displacement between two points under the layout's wraparound.
pub fn wraparound_vector(layout: &Layout, from: Point2, to: Point2) -> Point2 {
    layout.displacement(from, to)
}

/// Whether `p` (relative to a site) lies inside that site's hexagonal area.
fn in_site_hexagon(p: Point2, isd: f64) -> bool {
    (0..6).all(|k| {
        let a = (30.0 + 60.0 * f64::from(k)).to_radians();
        p.x * a.cos() + p.y * a.sin() <= isd / 2.0
    })
}

/// Drop `ues_per_cell` UEs per cell uniformly over each site's hexagon.
///
/// Placement, aerial heights and indoor/outdoor attributes are drawn from
/// per-UE streams and the aerial subset is a prefix of a fixed permutation,
/// so changing `aerial_ratio` only converts UEs and leaves the rest of the
/// drop untouched.
pub fn drop_ues(cfg: &ScenarioConfig, layout: &Layout) -> Vec<UEntity> {
    let per_site = cfg.ues_per_cell * cfg.sectors_per_site;
    let isd = layout.inter_site_distance;
    let circum = isd / 3f64.sqrt();
    let total = per_site as usize * layout.sites.len();

    let mut ues = Vec::with_capacity(total);
    for (site_idx, &site) in layout.sites.iter().enumerate() {
        for j in 0..per_site {
            let ue_id = site_idx as u32 * per_site + j;
            let mut rng = rng::stream(cfg.rng_seed, Domain::UePlacement, u64::from(ue_id));
            let offset = loop {
                let p = Point2::new(
                    rng.random_range(-circum..=circum),
                    rng.random_range(-isd / 2.0..=isd / 2.0),
                );
                if in_site_hexagon(p, isd) && p.norm() >= cfg.min_ue_distance {
                    break p;
                }
            };
            ues.push(UEntity {
                ue_id,
                kind: UeKind::TerrestrialOutdoor,
                position: site + offset,
                height: OUTDOOR_UE_HEIGHT,
                velocity: Point3::default(),
            });
        }
    }

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng::stream(cfg.rng_seed, Domain::UeAttributes, u64::MAX));
    let n_aerial = cfg.aerial_count().min(total);
    let mut aerial = vec![false; total];
    for &i in &order[..n_aerial] {
        aerial[i] = true;
    }

    let [h_lo, h_hi] = cfg.aerial_height_range;
    for (ue, is_aerial) in ues.iter_mut().zip(aerial) {
        let mut rng = rng::stream(cfg.rng_seed, Domain::UeAttributes, u64::from(ue.ue_id));
        let aerial_h: f64 = if h_hi > h_lo { rng.random_range(h_lo..=h_hi) } else { h_lo };
        let indoor = rng.random::<f64>() < cfg.indoor_fraction;
        let floor = INDOOR_FLOOR_HEIGHTS[rng.random_range(0..INDOOR_FLOOR_HEIGHTS.len())];
        (ue.kind, ue.height) = if is_aerial {
            (UeKind::Aerial, aerial_h)
        } else if indoor {
            (UeKind::TerrestrialIndoor, floor)
        } else {
            (UeKind::TerrestrialOutdoor, OUTDOOR_UE_HEIGHT)
        };
    }
    ues
}

/// A complete deployment: layout plus dropped UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub layout: Layout,
    pub ues: Vec<UEntity>,
}

impl Drop {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let layout = build_layout(cfg)?;
        let ues = drop_ues(cfg, &layout);
        Ok(Self { layout, ues })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.layout.cells
    }
}

/// Antenna gain toward a target at horizontal offset `offset` from the site
/// and absolute height `target_height`.
pub fn antenna_gain_toward(pattern: &AntennaPattern, cell: &Cell, offset: Point2, target_height: f64) -> f64 {
    let d2d = offset.norm();
    let phi = if d2d > 0.0 {
        wrap_deg(offset.azimuth_deg() - cell.antenna_bearing)
    } else {
        0.0
    };
    // depression angle below the horizon, positive downwards
    let theta = (cell.antenna_height - target_height).atan2(d2d).to_degrees();
    let a_h = -(12.0 * (phi / pattern.horizontal_hpbw).powi(2)).min(pattern.front_back_ratio);
    let a_v = -(12.0 * ((theta - cell.downtilt) / pattern.vertical_hpbw).powi(2)).min(pattern.sidelobe_floor);
    pattern.max_gain - (-(a_h + a_v)).min(pattern.front_back_ratio)
}

/// Antenna gain toward an absolute target position (no wraparound).
pub fn antenna_gain(pattern: &AntennaPattern, cell: &Cell, target: Point3) -> f64 {
    antenna_gain_toward(pattern, cell, target.xy() - cell.site_position, target.z)
}
