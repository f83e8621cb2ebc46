//! Height-dependent LOS probability, pathloss and shadow fading, and the
//! per-link coupling gain built from them.
//!
//! Each scenario has a lower height threshold below which the ground
//! (terrestrial) models apply unchanged. UMa-AV and RMa-AV also have an upper
//! threshold above which every link is LOS. Between the two, LOS probability
//! rises linearly in `log10(h)` from the ground value to 1 unless a table is
//! supplied. UMi-AV has no upper threshold; above 22.5 m it uses a
//! height-parameterised `d1/d + exp(-d/p1)(1 - d1/d)` fit.

use std::io::Read;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::{antenna_gain_toward, Cell, Drop, ScenarioConfig, ScenarioKind, UeKind};
use crate::geometry::Point2;
use crate::rng::{self, Domain, SimRng};
use crate::{CellId, UeId};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("3D distance {0} m is below the 1 m model validity limit")]
    TooClose(f64),
    #[error("LOS table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightThresholds {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl HeightThresholds {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::UmaAv => Self { lower: 22.5, upper: Some(100.0) },
            ScenarioKind::UmiAv => Self { lower: 22.5, upper: None },
            ScenarioKind::RmaAv => Self { lower: 10.0, upper: Some(40.0) },
        }
    }
}

/// Geometry of one UE–cell link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub d2d: f64,
    pub d3d: f64,
    pub h_ut: f64,
    pub h_bs: f64,
    /// Carrier frequency in GHz.
    pub fc: f64,
}

impl LinkGeometry {
    pub fn new(d2d: f64, h_ut: f64, h_bs: f64, fc: f64) -> Self {
        Self {
            d2d,
            d3d: d2d.hypot(h_bs - h_ut),
            h_ut,
            h_bs,
            fc,
        }
    }
}

/// Pluggable propagation model for one scenario.
pub trait ChannelModel: Send + Sync {
    fn los_probability(&self, h_ut: f64, d2d: f64) -> f64;
    fn pathloss_los(&self, g: &LinkGeometry) -> f64;
    /// NLOS pathloss before flooring at the LOS value.
    fn pathloss_nlos(&self, g: &LinkGeometry) -> f64;
    fn shadow_sigma(&self, is_los: bool, h_ut: f64) -> f64;
}

/// Free-space pathloss in dB (`fc` in GHz, `d` in meters).
pub fn free_space_pathloss(d3d: f64, fc: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d3d * fc * 1e9 / SPEED_OF_LIGHT).log10()
}

/// Terrestrial LOS probability and pathloss models for heights up to the
/// lower threshold.
pub mod ground {
    use super::{LinkGeometry, SPEED_OF_LIGHT};
    use crate::deploy::ScenarioKind;

    /// Effective environment height for the urban breakpoint distance.
    const H_E: f64 = 1.0;
    /// Average building height and street width for RMa.
    const RMA_BUILDING_H: f64 = 5.0;
    const RMA_STREET_W: f64 = 20.0;

    pub fn los_probability(kind: ScenarioKind, h_ut: f64, d2d: f64) -> f64 {
        match kind {
            ScenarioKind::UmaAv => {
                if d2d <= 18.0 {
                    return 1.0;
                }
                let c = if h_ut <= 13.0 { 0.0 } else { ((h_ut - 13.0) / 10.0).powf(1.5) };
                let base = 18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d);
                base * (1.0 + c * 1.25 * (d2d / 100.0).powi(3) * (-d2d / 150.0).exp())
            }
            ScenarioKind::UmiAv => {
                if d2d <= 18.0 {
                    return 1.0;
                }
                18.0 / d2d + (-d2d / 36.0).exp() * (1.0 - 18.0 / d2d)
            }
            ScenarioKind::RmaAv => {
                if d2d <= 10.0 {
                    return 1.0;
                }
                (-(d2d - 10.0) / 1000.0).exp()
            }
        }
    }

    pub fn pathloss_los(kind: ScenarioKind, g: &LinkGeometry) -> f64 {
        let fc_hz = g.fc * 1e9;
        match kind {
            ScenarioKind::UmaAv | ScenarioKind::UmiAv => {
                let (a, b_far, c_far) = match kind {
                    ScenarioKind::UmaAv => (28.0, 22.0, 9.0),
                    _ => (32.4, 21.0, 9.5),
                };
                let d_bp = 4.0 * (g.h_bs - H_E) * (g.h_ut - H_E).max(0.0) * fc_hz / SPEED_OF_LIGHT;
                if g.d2d <= d_bp {
                    a + b_far * g.d3d.log10() + 20.0 * g.fc.log10()
                } else {
                    a + 40.0 * g.d3d.log10() + 20.0 * g.fc.log10()
                        - c_far * (d_bp * d_bp + (g.h_bs - g.h_ut).powi(2)).log10()
                }
            }
            ScenarioKind::RmaAv => {
                let h = RMA_BUILDING_H;
                let pl1 = |d: f64| {
                    20.0 * (40.0 * std::f64::consts::PI * d * g.fc / 3.0).log10()
                        + (0.03 * h.powf(1.72)).min(10.0) * d.log10()
                        - (0.044 * h.powf(1.72)).min(14.77)
                        + 0.002 * h.log10() * d
                };
                let d_bp = 2.0 * std::f64::consts::PI * g.h_bs * g.h_ut * fc_hz / SPEED_OF_LIGHT;
                if g.d2d <= d_bp {
                    pl1(g.d3d)
                } else {
                    pl1(d_bp) + 40.0 * (g.d3d / d_bp).log10()
                }
            }
        }
    }

    /// NLOS pathloss without the LOS floor.
    pub fn pathloss_nlos(kind: ScenarioKind, g: &LinkGeometry) -> f64 {
        match kind {
            ScenarioKind::UmaAv => 13.54 + 39.08 * g.d3d.log10() + 20.0 * g.fc.log10() - 0.6 * (g.h_ut - 1.5),
            ScenarioKind::UmiAv => 22.4 + 35.3 * g.d3d.log10() + 21.3 * g.fc.log10() - 0.3 * (g.h_ut - 1.5),
            ScenarioKind::RmaAv => {
                let (w, h, hb) = (RMA_STREET_W, RMA_BUILDING_H, g.h_bs);
                161.04 - 7.1 * w.log10() + 7.5 * h.log10() - (24.37 - 3.7 * (h / hb).powi(2)) * hb.log10()
                    + (43.42 - 3.1 * hb.log10()) * (g.d3d.log10() - 3.0)
                    + 20.0 * g.fc.log10()
                    - (3.2 * (11.75 * g.h_ut).log10().powi(2) - 4.97)
            }
        }
    }
}

/// Shadow-fading standard deviations in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowParams {
    pub ground_los: f64,
    pub ground_nlos: f64,
    pub aerial_nlos: f64,
    /// Aerial LOS sigma is `max(amplitude · exp(-decay · h), floor)`.
    pub aerial_los_amplitude: f64,
    pub aerial_los_decay: f64,
    pub aerial_los_floor: f64,
}

impl Default for ShadowParams {
    fn default() -> Self {
        Self {
            ground_los: 4.0,
            ground_nlos: 8.0,
            aerial_nlos: 6.0,
            aerial_los_amplitude: 5.0,
            aerial_los_decay: 0.01,
            aerial_los_floor: 2.0,
        }
    }
}

impl ShadowParams {
    /// All sigmas zero: shadowing disabled.
    pub fn disabled() -> Self {
        Self {
            ground_los: 0.0,
            ground_nlos: 0.0,
            aerial_nlos: 0.0,
            aerial_los_amplitude: 0.0,
            aerial_los_decay: 0.0,
            aerial_los_floor: 0.0,
        }
    }
}

/// LOS probability on a (height, distance) grid, bilinearly interpolated and
/// clamped at the grid edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LosTable {
    heights: Vec<f64>,
    distances: Vec<f64>,
    /// Row-major: `values[h * distances.len() + d]`.
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct LosRow {
    h_ut: f64,
    d_2d: f64,
    p_los: f64,
}

impl LosTable {
    /// Parse a CSV with header `h_ut,d_2d,p_los` covering a full grid.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ChannelError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<LosRow>() {
            let row = rec.map_err(|e| ChannelError::Table(e.to_string()))?;
            rows.push(row);
        }
        Self::from_points(rows.into_iter().map(|r| (r.h_ut, r.d_2d, r.p_los)))
    }

    pub fn from_points<I: IntoIterator<Item = (f64, f64, f64)>>(points: I) -> Result<Self, ChannelError> {
        let points: Vec<_> = points.into_iter().collect();
        if points.is_empty() {
            return Err(ChannelError::Table("no rows".into()));
        }
        let uniq = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let heights = uniq(points.iter().map(|p| p.0).collect());
        let distances = uniq(points.iter().map(|p| p.1).collect());
        let mut values = vec![f64::NAN; heights.len() * distances.len()];
        for &(h, d, p) in &points {
            if !(0.0..=1.0).contains(&p) {
                return Err(ChannelError::Table(format!("p_los {p} outside [0, 1]")));
            }
            let hi = heights.binary_search_by(|x| x.total_cmp(&h)).unwrap();
            let di = distances.binary_search_by(|x| x.total_cmp(&d)).unwrap();
            values[hi * distances.len() + di] = p;
        }
        if values.iter().any(|v| v.is_nan()) || points.len() != values.len() {
            return Err(ChannelError::Table(format!(
                "expected a full {}x{} grid with one row per point, got {} rows",
                heights.len(),
                distances.len(),
                points.len()
            )));
        }
        Ok(Self {
            heights,
            distances,
            values,
        })
    }

    pub fn lookup(&self, h: f64, d: f64) -> f64 {
        let (h0, h1, th) = bracket(&self.heights, h);
        let (d0, d1, td) = bracket(&self.distances, d);
        let v = |hi: usize, di: usize| self.values[hi * self.distances.len() + di];
        let lo = v(h0, d0) * (1.0 - td) + v(h0, d1) * td;
        let hi = v(h1, d0) * (1.0 - td) + v(h1, d1) * td;
        lo * (1.0 - th) + hi * th
    }
}

/// Indices bracketing `x` in a sorted grid and the interpolation weight.
fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return (0, 0, 0.0);
    }
    if x >= grid[last] {
        return (last, last, 0.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, i + 1, t)
}

/// Default aerial-extended channel model.
#[derive(Debug, Clone, PartialEq)]
pub struct AerialChannel {
    pub scenario: ScenarioKind,
    pub thresholds: HeightThresholds,
    pub shadow: ShadowParams,
    /// Replaces the model between the thresholds (above the lower one for UMi-AV).
    pub intermediate_los: Option<LosTable>,
}

impl AerialChannel {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            thresholds: HeightThresholds::for_scenario(scenario),
            shadow: ShadowParams::default(),
            intermediate_los: None,
        }
    }

    pub fn with_shadow(mut self, shadow: ShadowParams) -> Self {
        self.shadow = shadow;
        self
    }

    pub fn with_los_table(mut self, table: LosTable) -> Self {
        self.intermediate_los = Some(table);
        self
    }

    fn is_aerial_region(&self, h_ut: f64) -> bool {
        h_ut > self.thresholds.lower
    }
}

/// UMi-AV LOS probability above the lower threshold.
fn umi_aerial_los(h_ut: f64, d2d: f64) -> f64 {
    let lg = h_ut.log10();
    let p1 = 233.98 * lg - 0.95;
    let d1 = (294.05 * lg - 432.94).max(18.0);
    if d2d <= d1 {
        1.0
    } else {
        d1 / d2d + (-d2d / p1).exp() * (1.0 - d1 / d2d)
    }
}

impl ChannelModel for AerialChannel {
    fn los_probability(&self, h_ut: f64, d2d: f64) -> f64 {
        let HeightThresholds { lower, upper } = self.thresholds;
        if h_ut <= lower {
            return ground::los_probability(self.scenario, h_ut, d2d);
        }
        if let Some(t) = &self.intermediate_los {
            if upper.is_none_or(|u| h_ut < u) {
                return t.lookup(h_ut, d2d).clamp(0.0, 1.0);
            }
        }
        match upper {
            Some(u) if h_ut >= u => 1.0,
            Some(u) => {
                let p_low = ground::los_probability(self.scenario, lower, d2d);
                let frac = (h_ut.log10() - lower.log10()) / (u.log10() - lower.log10());
                (p_low + (1.0 - p_low) * frac).clamp(0.0, 1.0)
            }
            None => umi_aerial_los(h_ut, d2d),
        }
    }

    fn pathloss_los(&self, g: &LinkGeometry) -> f64 {
        if self.is_aerial_region(g.h_ut) {
            28.0 + 22.0 * g.d3d.log10() + 20.0 * g.fc.log10()
        } else {
            ground::pathloss_los(self.scenario, g)
        }
    }

    fn pathloss_nlos(&self, g: &LinkGeometry) -> f64 {
        ground::pathloss_nlos(self.scenario, g)
    }

    fn shadow_sigma(&self, is_los: bool, h_ut: f64) -> f64 {
        let s = &self.shadow;
        match (self.is_aerial_region(h_ut), is_los) {
            (false, true) => s.ground_los,
            (false, false) => s.ground_nlos,
            (true, true) => (s.aerial_los_amplitude * (-s.aerial_los_decay * h_ut).exp()).max(s.aerial_los_floor),
            (true, false) => s.aerial_nlos,
        }
    }
}

pub fn los_probability(model: &dyn ChannelModel, h_ut: f64, d2d: f64) -> f64 {
    model.los_probability(h_ut, d2d)
}

/// Bernoulli draw with success probability `p`.
pub fn sample_los(p: f64, rng: &mut impl Rng) -> bool {
    rng.random::<f64>() < p
}

/// Pathloss in dB. NLOS is floored at LOS, and both at free space.
pub fn pathloss(model: &dyn ChannelModel, is_los: bool, g: &LinkGeometry) -> Result<f64, ChannelError> {
    if !(g.d3d >= 1.0) {
        return Err(ChannelError::TooClose(g.d3d));
    }
    let los = model.pathloss_los(g);
    let pl = if is_los { los } else { los.max(model.pathloss_nlos(g)) };
    Ok(pl.max(free_space_pathloss(g.d3d, g.fc)))
}

/// Zero-mean Gaussian shadowing in dB.
pub fn shadow_sample(model: &dyn ChannelModel, is_los: bool, h_ut: f64, rng: &mut impl Rng) -> f64 {
    let sigma = model.shadow_sigma(is_los, h_ut);
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkState {
    pub ue_id: UeId,
    pub cell_id: CellId,
    pub is_los: bool,
    pub pathloss: f64,
    pub shadow: f64,
    pub antenna_gain: f64,
    pub ue_gain: f64,
    pub penetration_loss: f64,
    pub coupling_gain: f64,
}

impl LinkState {
    /// Assemble a link: `coupling = -PL - SF - penetration + G_enb + G_ue`.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        ue_id: UeId,
        cell_id: CellId,
        is_los: bool,
        pathloss: f64,
        shadow: f64,
        antenna_gain: f64,
        ue_gain: f64,
        penetration_loss: f64,
    ) -> Self {
        Self {
            ue_id,
            cell_id,
            is_los,
            pathloss,
            shadow,
            antenna_gain,
            ue_gain,
            penetration_loss,
            coupling_gain: -pathloss - shadow - penetration_loss + antenna_gain + ue_gain,
        }
    }
}

/// Fixed random draws behind one link: a uniform for the LOS decision and a
/// standard normal for shadowing. Holding them fixed while the geometry moves
/// gives consistent LOS/shadow evolution along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraws {
    pub los_uniform: f64,
    pub shadow_normal: f64,
}

impl LinkDraws {
    /// Draws for the (UE, cell) link; `site_correlation` is the shadowing
    /// correlation between sectors of the same site.
    pub fn new(seed: u64, ue: UeId, cell: &Cell, site_correlation: f64) -> Self {
        let mut rng: SimRng = rng::stream(seed, Domain::Link, rng::pair_key(ue, cell.cell_id));
        let los_uniform = rng.random::<f64>();
        let own: f64 = rng.sample(StandardNormal);
        let shadow_normal = if site_correlation > 0.0 {
            let mut site_rng = rng::stream(seed, Domain::SiteShadow, rng::pair_key(ue, cell.site_id));
            let common: f64 = site_rng.sample(StandardNormal);
            site_correlation.sqrt() * common + (1.0 - site_correlation).sqrt() * own
        } else {
            own
        };
        Self {
            los_uniform,
            shadow_normal,
        }
    }
}

/// Build the link state for a UE at horizontal `offset` from the cell's site.
pub fn evaluate_link(
    model: &dyn ChannelModel,
    cfg: &ScenarioConfig,
    cell: &Cell,
    ue: (UeId, UeKind, f64),
    offset: Point2,
    draws: LinkDraws,
) -> LinkState {
    let (ue_id, kind, h_ut) = ue;
    let mut g = LinkGeometry::new(offset.norm(), h_ut, cell.antenna_height, cfg.carrier_freq);
    g.d3d = g.d3d.max(1.0);
    let is_los = draws.los_uniform < model.los_probability(h_ut, g.d2d);
    let pl = pathloss(model, is_los, &g).expect("d3d clamped to validity range");
    let shadow = model.shadow_sigma(is_los, h_ut) * draws.shadow_normal;
    let ag = antenna_gain_toward(&cfg.antenna, cell, offset, h_ut);
    let pen = if kind == UeKind::TerrestrialIndoor {
        cfg.indoor_penetration_loss
    } else {
        0.0
    };
    LinkState::assemble(ue_id, cell.cell_id, is_los, pl, shadow, ag, cfg.ue_antenna_gain, pen)
}

/// Link states for every (UE, cell) pair of a drop, row-major by UE.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMatrix {
    n_cells: usize,
    links: Vec<LinkState>,
}

impl LinkMatrix {
    pub fn compute(drop: &Drop, cfg: &ScenarioConfig, model: &dyn ChannelModel, site_correlation: f64) -> Self {
        let cells = drop.cells();
        let mut links = Vec::with_capacity(drop.ues.len() * cells.len());
        for ue in &drop.ues {
            for cell in cells {
                let offset = drop.layout.displacement(cell.site_position, ue.position);
                let draws = LinkDraws::new(cfg.rng_seed, ue.ue_id, cell, site_correlation);
                links.push(evaluate_link(model, cfg, cell, (ue.ue_id, ue.kind, ue.height), offset, draws));
            }
        }
        Self {
            n_cells: cells.len(),
            links,
        }
    }

    /// Build directly from coupling gains (`gains[ue][cell]`), mainly for tests.
    pub fn from_coupling(gains: &[Vec<f64>]) -> Self {
        let n_cells = gains.first().map_or(0, Vec::len);
        let links = gains
            .iter()
            .enumerate()
            .flat_map(|(u, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(c, &g)| LinkState::assemble(u as UeId, c as CellId, true, -g, 0.0, 0.0, 0.0, 0.0))
            })
            .collect();
        Self { n_cells, links }
    }

    pub fn n_ues(&self) -> usize {
        self.links.len().checked_div(self.n_cells).unwrap_or(0)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn row(&self, ue_idx: usize) -> &[LinkState] {
        &self.links[ue_idx * self.n_cells..(ue_idx + 1) * self.n_cells]
    }

    pub fn get(&self, ue_idx: usize, cell_idx: usize) -> &LinkState {
        &self.links[ue_idx * self.n_cells + cell_idx]
    }

    /// Index of the highest-coupling cell for a UE (lowest index on ties).
    pub fn serving(&self, ue_idx: usize) -> usize {
        let row = self.row(ue_idx);
        let mut best = 0;
        for (i, l) in row.iter().enumerate().skip(1) {
            if l.coupling_gain > row[best].coupling_gain {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::ScenarioConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn uma() -> AerialChannel {
        AerialChannel::new(ScenarioKind::UmaAv)
    }

    #[test]
    fn thresholds_per_scenario() {
        assert_eq!(HeightThresholds::for_scenario(ScenarioKind::UmaAv).upper, Some(100.0));
        assert_eq!(HeightThresholds::for_scenario(ScenarioKind::UmiAv).upper, None);
        let r = HeightThresholds::for_scenario(ScenarioKind::RmaAv);
        assert_eq!((r.lower, r.upper), (10.0, Some(40.0)));
    }

    #[test]
    fn los_saturates_above_upper_threshold() {
        assert_eq!(uma().los_probability(150.0, 5000.0), 1.0);
        assert_eq!(uma().los_probability(100.0, 5000.0), 1.0);
        let rma = AerialChannel::new(ScenarioKind::RmaAv);
        for d in [0.0, 100.0, 10_000.0] {
            assert_eq!(rma.los_probability(45.0, d), 1.0);
        }
    }

    #[test]
    fn ground_los_is_certain_at_short_range() {
        // d2d = 10 m is inside the 18 m certainty radius of the urban ground model
        assert_eq!(uma().los_probability(1.5, 10.0), 1.0);
    }

    #[test]
    fn ground_los_reference_values() {
        // hand evaluation: 18/100 + exp(-100/63)(1 - 18/100)
        let expected = 0.18 + (-100.0f64 / 63.0).exp() * 0.82;
        assert!((uma().los_probability(1.5, 100.0) - expected).abs() < 1e-12);
        let rma = AerialChannel::new(ScenarioKind::RmaAv);
        assert!((rma.los_probability(1.5, 1010.0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn intermediate_region_is_continuous_at_both_ends() {
        for d in [20.0, 150.0, 800.0, 3000.0] {
            let below = uma().los_probability(22.5, d);
            let just_above = uma().los_probability(22.5 + 1e-9, d);
            assert!((below - just_above).abs() < 1e-6);
            let near_top = uma().los_probability(100.0 - 1e-9, d);
            assert!((near_top - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn umi_has_no_saturation() {
        let umi = AerialChannel::new(ScenarioKind::UmiAv);
        assert!(umi.los_probability(300.0, 3000.0) < 1.0);
        assert!(umi.los_probability(300.0, 3000.0) > umi.los_probability(1.5, 3000.0));
    }

    #[test]
    fn aerial_los_pathloss_reference() {
        let g = LinkGeometry { d2d: 1000.0, d3d: 1000.0, h_ut: 150.0, h_bs: 25.0, fc: 2.0 };
        let pl = pathloss(&uma(), true, &g).unwrap();
        let expected = 28.0 + 22.0 * 3.0 + 20.0 * 2f64.log10();
        assert!((pl - expected).abs() < 1e-12);
        assert!((pl - 100.02).abs() < 0.01);
        let g2 = LinkGeometry { d3d: 2000.0, ..g };
        let pl2 = pathloss(&uma(), true, &g2).unwrap();
        assert!((pl2 - pl - 22.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn nlos_below_los_is_floored() {
        // aerial NLOS from the UMa ground formula at 300 m height is far below LOS
        let g = LinkGeometry { d2d: 500.0, d3d: 550.0, h_ut: 300.0, h_bs: 25.0, fc: 2.0 };
        let m = uma();
        assert!(m.pathloss_nlos(&g) < m.pathloss_los(&g));
        assert_eq!(pathloss(&m, false, &g).unwrap(), pathloss(&m, true, &g).unwrap());
    }

    #[test]
    fn too_close_is_an_error() {
        let g = LinkGeometry { d2d: 0.5, d3d: 0.5, h_ut: 25.0, h_bs: 25.0, fc: 2.0 };
        assert_eq!(pathloss(&uma(), true, &g), Err(ChannelError::TooClose(0.5)));
    }

    #[test]
    fn sample_los_extremes_and_rate() {
        let mut rng = SimRng::seed_from_u64(3);
        assert!((0..1000).all(|_| sample_los(1.0, &mut rng)));
        assert!((0..1000).all(|_| !sample_los(0.0, &mut rng)));
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_los(0.5, &mut rng)).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn shadow_zero_sigma_and_std() {
        let mut rng = SimRng::seed_from_u64(9);
        let off = uma().with_shadow(ShadowParams::disabled());
        assert!((0..100).all(|_| shadow_sample(&off, true, 1.5, &mut rng) == 0.0));

        let six = uma().with_shadow(ShadowParams { aerial_nlos: 6.0, ..ShadowParams::default() });
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| shadow_sample(&six, false, 200.0, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.1);
        assert!((var.sqrt() - 6.0).abs() < 0.1, "{}", var.sqrt());
    }

    #[test]
    fn aerial_los_sigma_decays_with_height() {
        let m = uma();
        let s300 = m.shadow_sigma(true, 300.0);
        let s30 = m.shadow_sigma(true, 30.0);
        assert!(s300 < s30);
        assert!((s30 - 5.0 * (-0.3f64).exp()).abs() < 1e-12);
        assert_eq!(s300, 2.0);
    }

    #[test]
    fn coupling_arithmetic() {
        let l = LinkState::assemble(0, 0, true, 100.0, 0.0, 15.0, 0.0, 0.0);
        assert_eq!(l.coupling_gain, -85.0);
    }

    #[test]
    fn overhead_aerial_loses_to_boresight_terrestrial_at_equal_pathloss() {
        let cfg = ScenarioConfig::preset(ScenarioKind::UmaAv);
        let cell = crate::deploy::Cell {
            cell_id: 0,
            site_id: 0,
            site_position: Point2::ORIGIN,
            antenna_bearing: 0.0,
            antenna_height: 25.0,
            downtilt: 6.0,
            tx_power: 46.0,
        };
        let boresight = antenna_gain_toward(&cfg.antenna, &cell, Point2::new(224.0, 0.0), 1.5);
        let overhead = antenna_gain_toward(&cfg.antenna, &cell, Point2::new(1.0, 0.0), 200.0);
        let a = LinkState::assemble(0, 0, true, 100.0, 0.0, overhead, 0.0, 0.0);
        let t = LinkState::assemble(1, 0, true, 100.0, 0.0, boresight, 0.0, 0.0);
        assert!(a.coupling_gain < t.coupling_gain);
        assert!((t.coupling_gain - a.coupling_gain - (boresight - overhead)).abs() < 1e-12);
    }

    #[test]
    fn full_drop_has_every_link() {
        let cfg = ScenarioConfig::preset(ScenarioKind::UmaAv);
        let drop = Drop::generate(&cfg).unwrap();
        let links = LinkMatrix::compute(&drop, &cfg, &uma(), 0.0);
        assert_eq!(links.len(), drop.ues.len() * 57);
        for u in 0..links.n_ues() {
            for (c, l) in links.row(u).iter().enumerate() {
                assert_eq!(l.cell_id as usize, c);
                assert_eq!(l.ue_id, drop.ues[u].ue_id);
                let rebuilt = -l.pathloss - l.shadow - l.penetration_loss + l.antenna_gain + l.ue_gain;
                assert!((rebuilt - l.coupling_gain).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn site_correlation_couples_sectors() {
        let cfg = ScenarioConfig::preset(ScenarioKind::UmaAv);
        let layout = crate::deploy::build_layout(&cfg).unwrap();
        let (c0, c1) = (&layout.cells[0], &layout.cells[1]);
        let n = 20_000;
        let mut sxy = 0.0;
        for ue in 0..n {
            let a = LinkDraws::new(5, ue, c0, 0.5).shadow_normal;
            let b = LinkDraws::new(5, ue, c1, 0.5).shadow_normal;
            sxy += a * b;
        }
        let rho = sxy / f64::from(n);
        assert!((rho - 0.5).abs() < 0.03, "{rho}");
    }

    #[test]
    fn los_table_bilinear_and_errors() {
        let t = LosTable::from_csv("h_ut,d_2d,p_los\n30,0,1\n30,100,0.5\n60,0,1\n60,100,0.9\n".as_bytes()).unwrap();
        assert!((t.lookup(45.0, 50.0) - 0.85).abs() < 1e-12);
        assert_eq!(t.lookup(10.0, 1e6), 0.5);
        let m = uma().with_los_table(t);
        assert!((m.los_probability(45.0, 50.0) - 0.85).abs() < 1e-12);
        // the table never overrides the saturated region
        assert_eq!(m.los_probability(150.0, 50.0), 1.0);
        assert!(LosTable::from_csv("h_ut,d_2d,p_los\n30,0,1\n30,100,0.5\n60,0,1\n".as_bytes()).is_err());
        assert!(LosTable::from_csv("h_ut,d_2d,p_los\n30,0,1.5\n".as_bytes()).is_err());
    }

    #[test]
    fn aerial_ues_see_more_los_cells() {
        // Expected LOS cell count over uniform positions: aerial at 100 m vs ground at 1.5 m.
        let cfg = ScenarioConfig::preset(ScenarioKind::UmaAv);
        let layout = crate::deploy::build_layout(&cfg).unwrap();
        let m = uma();
        let mut rng = SimRng::seed_from_u64(1);
        let (mut aerial, mut ground) = (0.0, 0.0);
        for _ in 0..2000 {
            let p = Point2::new(rng.random_range(-800.0..800.0), rng.random_range(-800.0..800.0));
            for c in &layout.cells {
                let d = layout.displacement(c.site_position, p).norm();
                aerial += m.los_probability(100.0, d);
                ground += m.los_probability(1.5, d);
            }
        }
        assert!(aerial > ground);
    }

    proptest! {
        #[test]
        fn los_monotone_in_height(d in 0.0..5000.0f64, h1 in 1.5..300.0f64, h2 in 1.5..300.0f64) {
            for kind in [ScenarioKind::UmaAv, ScenarioKind::RmaAv] {
                let m = AerialChannel::new(kind);
                let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
                let (plo, phi) = (m.los_probability(lo, d), m.los_probability(hi, d));
                prop_assert!((0.0..=1.0).contains(&plo));
                prop_assert!(plo <= phi + 1e-12, "{:?} h {} -> {}, h {} -> {}", kind, lo, plo, hi, phi);
            }
        }

        #[test]
        fn los_pathloss_never_exceeds_nlos(d2d in 10.0..5000.0f64, h in 1.5..300.0f64) {
            for kind in ScenarioKind::ALL {
                let m = AerialChannel::new(kind);
                let cfg = ScenarioConfig::preset(kind);
                let g = LinkGeometry::new(d2d, h, cfg.enb_height, 2.0);
                let los = pathloss(&m, true, &g).unwrap();
                let nlos = pathloss(&m, false, &g).unwrap();
                prop_assert!(los <= nlos);
                prop_assert!(los >= free_space_pathloss(g.d3d, g.fc) - 1e-9);
            }
        }

        #[test]
        fn pathloss_monotone_in_distance(d_a in 10.0..8000.0f64, d_b in 10.0..8000.0f64, h in 1.5..300.0f64, los in any::<bool>()) {
            let (lo, hi) = if d_a <= d_b { (d_a, d_b) } else { (d_b, d_a) };
            for kind in ScenarioKind::ALL {
                let m = AerialChannel::new(kind);
                let hb = ScenarioConfig::preset(kind).enb_height;
                let p_lo = pathloss(&m, los, &LinkGeometry::new(lo, h, hb, 2.0)).unwrap();
                let p_hi = pathloss(&m, los, &LinkGeometry::new(hi, h, hb, 2.0)).unwrap();
                prop_assert!(p_lo <= p_hi + 1e-9, "{:?} los={} h={} {}->{} {}->{}", kind, los, h, lo, p_lo, hi, p_hi);
            }
        }
    }
}
