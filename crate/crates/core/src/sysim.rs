//! Monte-Carlo snapshot engine: uplink IoT and SINR, downlink geometry and
//! throughput over drops, and campaign aggregation into CDFs.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{AerialChannel, ChannelModel, LinkMatrix, LosTable, ShadowParams};
use crate::deploy::{Drop, ScenarioConfig, UeKind};
use crate::error::ConfigError;
use crate::power::{pusch_power, PowerControlConfig};
use crate::rng::{self, Domain};
use crate::units::{db_to_lin, lin_to_db, noise_power_dbm};
use crate::{CellId, UeId};

/// Truncated Shannon mapping from SINR to spectral efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputMap {
    pub efficiency: f64,
    pub cap: f64,
    pub floor_db: f64,
}

impl Default for ThroughputMap {
    fn default() -> Self {
        Self {
            efficiency: 0.6,
            cap: 4.8,
            floor_db: -10.0,
        }
    }
}

impl ThroughputMap {
    pub fn map(&self, sinr_db: f64) -> f64 {
        if sinr_db < self.floor_db {
            return 0.0;
        }
        (self.efficiency * (1.0 + db_to_lin(sinr_db)).log2()).min(self.cap)
    }
}

/// Spectral efficiency in bps/Hz with the default mapping.
pub fn throughput_map(sinr_db: f64) -> f64 {
    ThroughputMap::default().map(sinr_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SysimConfig {
    /// Probability that a cell schedules an uplink UE in a snapshot.
    pub activity_factor: f64,
    pub throughput: ThroughputMap,
    /// Shadowing correlation between sectors of one site.
    pub site_shadow_correlation: f64,
}

impl Default for SysimConfig {
    fn default() -> Self {
        Self {
            activity_factor: 1.0,
            throughput: ThroughputMap::default(),
            site_shadow_correlation: 0.0,
        }
    }
}

impl SysimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.activity_factor > 0.0 && self.activity_factor <= 1.0) {
            return Err(ConfigError::new("activity_factor", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.site_shadow_correlation) {
            return Err(ConfigError::new("site_shadow_correlation", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Serving cell per UE (max coupling gain) and the UEs attached to each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub serving: Vec<usize>,
    pub per_cell: Vec<Vec<usize>>,
}

impl Attachment {
    pub fn by_max_coupling(links: &LinkMatrix) -> Self {
        let serving: Vec<usize> = (0..links.n_ues()).map(|u| links.serving(u)).collect();
        let mut per_cell = vec![Vec::new(); links.n_cells()];
        for (u, &c) in serving.iter().enumerate() {
            per_cell[c].push(u);
        }
        Self { serving, per_cell }
    }
}

/// One scheduled uplink transmission in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkGrant {
    pub ue_idx: usize,
    pub cell_idx: usize,
    pub tx_power: f64,
    /// Power received at the serving cell.
    pub rx_power: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkSnapshot {
    /// IoT at every cell, dB.
    pub cell_iot_db: Vec<f64>,
    pub grants: Vec<UplinkGrant>,
}

/// Radio parameters shared by the uplink and downlink computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub n_rbs: u32,
    pub ul_noise_dbm: f64,
    pub dl_noise_dbm: f64,
}

impl RadioParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            n_rbs: cfg.bandwidth_rbs,
            ul_noise_dbm: noise_power_dbm(cfg.thermal_noise_density, cfg.bandwidth_rbs, cfg.noise_figure),
            dl_noise_dbm: noise_power_dbm(cfg.thermal_noise_density, cfg.bandwidth_rbs, cfg.ue_noise_figure),
        }
    }
}

/// One uplink snapshot: each active cell grants the full band to the next UE
/// in round-robin order; every cell then measures IoT and each scheduled UE's
/// SINR is taken at its serving cell.
#[allow(clippy::too_many_arguments)]
pub fn uplink_snapshot(
    kinds: &[UeKind],
    links: &LinkMatrix,
    attach: &Attachment,
    pc: &PowerControlConfig,
    radio: &RadioParams,
    activity_factor: f64,
    snapshot: usize,
    rng: &mut impl Rng,
) -> UplinkSnapshot {
    let n_cells = links.n_cells();
    let mut grants = Vec::new();
    for (c, ues) in attach.per_cell.iter().enumerate() {
        let active = rng.random::<f64>() < activity_factor;
        if ues.is_empty() || !active {
            continue;
        }
        let u = ues[snapshot % ues.len()];
        let pl = -links.get(u, c).coupling_gain;
        let tx = pusch_power(&pc.params_for(kinds[u]), radio.n_rbs, pl.max(0.0), 0.0);
        grants.push(UplinkGrant {
            ue_idx: u,
            cell_idx: c,
            tx_power: tx,
            rx_power: tx - pl,
            sinr_db: f64::NAN,
        });
    }

    let noise = db_to_lin(radio.ul_noise_dbm);
    let mut interference = vec![0.0; n_cells];
    for g in &grants {
        for (c, acc) in interference.iter_mut().enumerate() {
            if c != g.cell_idx {
                *acc += db_to_lin(g.tx_power + links.get(g.ue_idx, c).coupling_gain);
            }
        }
    }
    for g in &mut grants {
        g.sinr_db = g.rx_power - lin_to_db(interference[g.cell_idx] + noise);
    }
    let cell_iot_db = interference.iter().map(|i| lin_to_db(1.0 + i / noise)).collect();
    UplinkSnapshot { cell_iot_db, grants }
}

/// Downlink geometry per UE: serving power over the sum of all other cells'
/// power plus noise, with every cell transmitting at full power.
pub fn downlink_geometry(tx_power: &[f64], links: &LinkMatrix, dl_noise_dbm: f64) -> Vec<f64> {
    let noise = db_to_lin(dl_noise_dbm);
    (0..links.n_ues())
        .map(|u| {
            let s = links.serving(u);
            let row = links.row(u);
            let other: f64 = row
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != s)
                .map(|(c, l)| db_to_lin(tx_power[c] + l.coupling_gain))
                .sum();
            tx_power[s] + row[s].coupling_gain - lin_to_db(other + noise)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeRecord {
    pub ue_id: UeId,
    pub kind: UeKind,
    pub height: f64,
    pub serving_cell: CellId,
    pub dl_geometry_db: f64,
    pub dl_snr_db: f64,
    /// Mean SINR (dB) over the snapshots the UE was scheduled in.
    pub ul_sinr_db: Option<f64>,
    /// Mean spectral efficiency over the scheduled snapshots, bps/Hz.
    pub ul_throughput: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub cell_id: CellId,
    pub n_terrestrial: usize,
    pub n_aerial: usize,
    /// IoT per snapshot, dB.
    pub iot_db: Vec<f64>,
}

/// Everything one drop produces: per-cell IoT series and one record per UE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotResult {
    pub cells: Vec<CellRecord>,
    pub ues: Vec<UeRecord>,
}

/// Generate a drop from `cfg` (its `rng_seed` is the drop seed) and run
/// `n_snapshots` uplink snapshots on it.
pub fn run_drop(
    cfg: &ScenarioConfig,
    pc: &PowerControlConfig,
    sys: &SysimConfig,
    model: &dyn ChannelModel,
    n_snapshots: usize,
) -> Result<SnapshotResult, ConfigError> {
    let drop = Drop::generate(cfg)?;
    let links = LinkMatrix::compute(&drop, cfg, model, sys.site_shadow_correlation);
    Ok(simulate_drop(&drop, &links, cfg, pc, sys, n_snapshots))
}

pub fn simulate_drop(
    drop: &Drop,
    links: &LinkMatrix,
    cfg: &ScenarioConfig,
    pc: &PowerControlConfig,
    sys: &SysimConfig,
    n_snapshots: usize,
) -> SnapshotResult {
    let radio = RadioParams::from_config(cfg);
    let attach = Attachment::by_max_coupling(links);
    let kinds: Vec<UeKind> = drop.ues.iter().map(|u| u.kind).collect();

    let mut cells: Vec<CellRecord> = drop
        .cells()
        .iter()
        .zip(&attach.per_cell)
        .map(|(c, ues)| {
            let n_aerial = ues.iter().filter(|&&u| kinds[u].is_aerial()).count();
            CellRecord {
                cell_id: c.cell_id,
                n_terrestrial: ues.len() - n_aerial,
                n_aerial,
                iot_db: Vec::with_capacity(n_snapshots),
            }
        })
        .collect();
    let mut sinr_sum = vec![0.0; kinds.len()];
    let mut tput_sum = vec![0.0; kinds.len()];
    let mut n_sched = vec![0usize; kinds.len()];
    let mut rng = rng::stream(cfg.rng_seed, Domain::Activity, 0);
    for s in 0..n_snapshots {
        let snap = uplink_snapshot(&kinds, links, &attach, pc, &radio, sys.activity_factor, s, &mut rng);
        for (rec, iot) in cells.iter_mut().zip(snap.cell_iot_db) {
            rec.iot_db.push(iot);
        }
        for g in snap.grants {
            sinr_sum[g.ue_idx] += g.sinr_db;
            tput_sum[g.ue_idx] += sys.throughput.map(g.sinr_db);
            n_sched[g.ue_idx] += 1;
        }
    }

    let tx: Vec<f64> = drop.cells().iter().map(|c| c.tx_power).collect();
    let geometry = downlink_geometry(&tx, links, radio.dl_noise_dbm);
    let ues = drop
        .ues
        .iter()
        .enumerate()
        .map(|(u, ue)| {
            let s = attach.serving[u];
            let n = n_sched[u];
            UeRecord {
                ue_id: ue.ue_id,
                kind: ue.kind,
                height: ue.height,
                serving_cell: s as CellId,
                dl_geometry_db: geometry[u],
                dl_snr_db: tx[s] + links.get(u, s).coupling_gain - radio.dl_noise_dbm,
                ul_sinr_db: (n > 0).then(|| sinr_sum[u] / n as f64),
                ul_throughput: (n > 0).then(|| tput_sum[u] / n as f64),
            }
        })
        .collect();
    SnapshotResult { cells, ues }
}

/// Sorted sample set with percentile and mean accessors.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricsCdf {
    samples: Vec<f64>,
}

impl MetricsCdf {
    /// Non-finite samples are dropped.
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut samples: Vec<f64> = samples.into_iter().filter(|x| x.is_finite()).collect();
        samples.sort_by(f64::total_cmp);
        Self { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear-interpolated percentile, `p` in [0, 100]. `None` when empty.
    pub fn percentile(&self, p: f64) -> Option<f64> {
        let n = self.samples.len();
        if n == 0 {
            return None;
        }
        let rank = p.clamp(0.0, 100.0) / 100.0 * (n - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let t = rank - lo as f64;
        Some(self.samples[lo] + (self.samples[hi] - self.samples[lo]) * t)
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }

    /// (value, cumulative probability) points for plotting.
    pub fn plot_points(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len() as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, (i + 1) as f64 / n))
            .collect()
    }
}

/// Metrics emitted per setting, in output order.
pub const METRICS: [&str; 7] = [
    "ul_iot_terrestrial_cells",
    "ul_sinr_terrestrial",
    "ul_sinr_aerial",
    "ul_throughput_terrestrial",
    "ul_throughput_aerial",
    "dl_geometry_terrestrial",
    "dl_geometry_aerial",
];

/// Per-drop sample extraction for one metric.
pub fn metric_samples(drop: &SnapshotResult, metric: &str) -> Vec<f64> {
    let by_kind = |aerial: bool, f: &dyn Fn(&UeRecord) -> Option<f64>| -> Vec<f64> {
        drop.ues
            .iter()
            .filter(|u| u.kind.is_aerial() == aerial)
            .filter_map(f)
            .collect()
    };
    match metric {
        "ul_iot_terrestrial_cells" => drop
            .cells
            .iter()
            .filter(|c| c.n_terrestrial > 0)
            .flat_map(|c| c.iot_db.iter().copied())
            .collect(),
        "ul_sinr_terrestrial" => by_kind(false, &|u| u.ul_sinr_db),
        "ul_sinr_aerial" => by_kind(true, &|u| u.ul_sinr_db),
        "ul_throughput_terrestrial" => by_kind(false, &|u| u.ul_throughput),
        "ul_throughput_aerial" => by_kind(true, &|u| u.ul_throughput),
        "dl_geometry_terrestrial" => by_kind(false, &|u| Some(u.dl_geometry_db)),
        "dl_geometry_aerial" => by_kind(true, &|u| Some(u.dl_geometry_db)),
        other => panic!("unknown metric {other}"),
    }
}

/// One point of a campaign sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub label: String,
    pub scenario: ScenarioConfig,
    pub power: PowerControlConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub settings: Vec<Setting>,
    pub n_drops: usize,
    pub n_snapshots: usize,
    pub master_seed: u64,
    pub sysim: SysimConfig,
    pub shadow: ShadowParams,
    pub los_table: Option<LosTable>,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_drops == 0 {
            return Err(ConfigError::new("n_drops", "must be at least 1"));
        }
        if self.n_snapshots == 0 {
            return Err(ConfigError::new("n_snapshots", "must be at least 1"));
        }
        if self.settings.is_empty() {
            return Err(ConfigError::new("sweep", "no settings to run"));
        }
        self.sysim.validate()?;
        for s in &self.settings {
            s.scenario.validate()?;
            s.power.validate().map(|_| ())?;
        }
        Ok(())
    }

    fn model_for(&self, s: &Setting) -> AerialChannel {
        let m = AerialChannel::new(s.scenario.scenario_kind).with_shadow(self.shadow);
        match &self.los_table {
            Some(t) => m.with_los_table(t.clone()),
            None => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingResult {
    pub label: String,
    pub drops: Vec<SnapshotResult>,
}

impl SettingResult {
    pub fn cdf(&self, metric: &str) -> MetricsCdf {
        MetricsCdf::from_samples(self.drops.iter().flat_map(|d| metric_samples(d, metric)))
    }

    pub fn cdfs(&self) -> BTreeMap<&'static str, MetricsCdf> {
        METRICS.iter().map(|&m| (m, self.cdf(m))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub settings: Vec<SettingResult>,
}

/// Run every setting over `n_drops` drops. Drop `d` of every setting uses the
/// same derived seed, so settings are compared on common drops. Work is spread
/// over `jobs` threads (all cores when `None`); results do not depend on it.
pub fn run_campaign(cfg: &CampaignConfig, jobs: Option<usize>) -> Result<CampaignResult, ConfigError> {
    cfg.validate()?;
    let work: Vec<(usize, usize)> = (0..cfg.settings.len())
        .flat_map(|s| (0..cfg.n_drops).map(move |d| (s, d)))
        .collect();
    let models: Vec<AerialChannel> = cfg.settings.iter().map(|s| cfg.model_for(s)).collect();
    let run = || -> Result<Vec<SnapshotResult>, ConfigError> {
        work.par_iter()
            .map(|&(s, d)| {
                let setting = &cfg.settings[s];
                let scenario = ScenarioConfig {
                    rng_seed: rng::drop_seed(cfg.master_seed, d as u64),
                    ..setting.scenario.clone()
                };
                run_drop(&scenario, &setting.power, &cfg.sysim, &models[s], cfg.n_snapshots)
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run)?,
        None => run()?,
    };
    let mut it = results.into_iter();
    let settings = cfg
        .settings
        .iter()
        .map(|s| SettingResult {
            label: s.label.clone(),
            drops: it.by_ref().take(cfg.n_drops).collect(),
        })
        .collect();
    Ok(CampaignResult { settings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::ScenarioKind;
    use crate::power::PowerClass;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    const NOISE: f64 = -100.0;

    fn radio() -> RadioParams {
        RadioParams {
            n_rbs: 1,
            ul_noise_dbm: NOISE,
            dl_noise_dbm: NOISE,
        }
    }

    /// Power control that makes every UE transmit exactly `p_cmax`.
    fn fixed_power(p: f64) -> PowerControlConfig {
        PowerControlConfig {
            p0_nominal: 1000.0,
            p_cmax: p,
            default_class: PowerClass { alpha: 0.0, p0_ue_specific: 0 },
            ..PowerControlConfig::default()
        }
    }

    fn snapshot(gains: &[Vec<f64>], pc: &PowerControlConfig) -> UplinkSnapshot {
        let links = LinkMatrix::from_coupling(gains);
        let attach = Attachment::by_max_coupling(&links);
        let kinds = vec![UeKind::TerrestrialOutdoor; gains.len()];
        uplink_snapshot(&kinds, &links, &attach, pc, &radio(), 1.0, 0, &mut SimRng::seed_from_u64(0))
    }

    #[test]
    fn lone_ue_sees_no_interference() {
        let s = snapshot(&[vec![-80.0]], &fixed_power(0.0));
        assert_eq!(s.cell_iot_db, vec![0.0]);
        assert!((s.grants[0].sinr_db - 20.0).abs() < 1e-12);
    }

    #[test]
    fn one_interferer_at_noise_gives_3db() {
        // UE1 served by cell 1 lands at cell 0 at exactly noise power (0 dBm - 100 dB).
        let s = snapshot(&[vec![-80.0, -150.0], vec![-100.0, -70.0]], &fixed_power(0.0));
        assert!((s.cell_iot_db[0] - 10.0 * 2f64.log10()).abs() < 1e-9);
        assert!((s.cell_iot_db[0] - 3.01).abs() < 0.005);
    }

    #[test]
    fn two_interferers_at_noise_give_4_77db() {
        let gains = [
            vec![-80.0, -150.0, -150.0],
            vec![-100.0, -70.0, -150.0],
            vec![-100.0, -150.0, -70.0],
        ];
        let s = snapshot(&gains, &fixed_power(0.0));
        assert!((s.cell_iot_db[0] - 10.0 * 3f64.log10()).abs() < 1e-9);
        assert!((s.cell_iot_db[0] - 4.77).abs() < 0.005);
    }

    #[test]
    fn empty_cell_is_skipped() {
        // Cell 1 has no UE; it still measures IoT from UE 0.
        let s = snapshot(&[vec![-80.0, -100.0]], &fixed_power(0.0));
        assert_eq!(s.grants.len(), 1);
        assert!((s.cell_iot_db[1] - 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn full_compensation_lands_on_p0() {
        // symmetric couplings, one UE per cell, alpha = 1
        let gains = [vec![-90.0, -120.0], vec![-120.0, -90.0]];
        let pc = PowerControlConfig {
            p0_nominal: -100.0,
            default_class: PowerClass { alpha: 1.0, p0_ue_specific: 3 },
            ..PowerControlConfig::default()
        };
        let links = LinkMatrix::from_coupling(&gains);
        let attach = Attachment::by_max_coupling(&links);
        let kinds = vec![UeKind::TerrestrialOutdoor; 2];
        let r = RadioParams { n_rbs: 10, ..radio() };
        let s = uplink_snapshot(&kinds, &links, &attach, &pc, &r, 1.0, 0, &mut SimRng::seed_from_u64(0));
        for g in s.grants {
            assert!((g.rx_power - (-97.0 + 10.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn round_robin_cycles_attached_ues() {
        let gains = [vec![-80.0], vec![-81.0], vec![-82.0]];
        let links = LinkMatrix::from_coupling(&gains);
        let attach = Attachment::by_max_coupling(&links);
        let kinds = vec![UeKind::TerrestrialOutdoor; 3];
        let pc = fixed_power(0.0);
        let mut rng = SimRng::seed_from_u64(0);
        let order: Vec<usize> = (0..6)
            .map(|s| uplink_snapshot(&kinds, &links, &attach, &pc, &radio(), 1.0, s, &mut rng).grants[0].ue_idx)
            .collect();
        assert_eq!(order, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn geometry_without_interference_is_snr() {
        let links = LinkMatrix::from_coupling(&[vec![-100.0, f64::NEG_INFINITY]]);
        let g = downlink_geometry(&[46.0, 46.0], &links, NOISE);
        assert!((g[0] - (46.0 - 100.0 - NOISE)).abs() < 1e-9);
    }

    #[test]
    fn equal_serving_and_interferer_is_zero_db() {
        let links = LinkMatrix::from_coupling(&[vec![-100.0, -100.0 - 1e-12]]);
        let g = downlink_geometry(&[46.0, 46.0], &links, -300.0);
        assert!(g[0].abs() < 1e-9);
    }

    #[test]
    fn throughput_reference_points() {
        assert_eq!(throughput_map(-20.0), 0.0);
        assert!((throughput_map(0.0) - 0.6).abs() < 1e-12);
        assert_eq!(throughput_map(30.0), 4.8);
        assert!(0.6 * 1001f64.log2() > 4.8);
        let mut prev = 0.0;
        for i in -300..400 {
            let t = throughput_map(f64::from(i) / 10.0);
            assert!(t >= prev && (0.0..=4.8).contains(&t));
            prev = t;
        }
    }

    #[test]
    fn cdf_percentiles() {
        let c = MetricsCdf::from_samples([3.0, 1.0, 2.0, f64::NAN, 4.0]);
        assert_eq!(c.len(), 4);
        assert_eq!(c.percentile(0.0), Some(1.0));
        assert_eq!(c.percentile(100.0), Some(4.0));
        assert_eq!(c.percentile(50.0), Some(2.5));
        assert_eq!(c.mean(), Some(2.5));
        assert_eq!(MetricsCdf::default().percentile(5.0), None);
    }

    fn small_campaign(ratios: &[f64]) -> CampaignConfig {
        let base = ScenarioConfig {
            n_sites: 7,
            ..ScenarioConfig::preset(ScenarioKind::UmaAv)
        };
        CampaignConfig {
            settings: ratios
                .iter()
                .map(|&r| Setting {
                    label: format!("ratio={r}"),
                    scenario: ScenarioConfig { aerial_ratio: r, ..base.clone() },
                    power: PowerControlConfig::default(),
                })
                .collect(),
            n_drops: 2,
            n_snapshots: 4,
            master_seed: 11,
            sysim: SysimConfig::default(),
            shadow: ShadowParams::default(),
            los_table: None,
        }
    }

    #[test]
    fn drop_invariants() {
        let cfg = small_campaign(&[0.25]);
        let r = run_campaign(&cfg, Some(1)).unwrap();
        for d in &r.settings[0].drops {
            assert_eq!(d.ues.len(), 315);
            let mut ids: Vec<_> = d.ues.iter().map(|u| u.ue_id).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 315);
            for c in &d.cells {
                assert!(c.iot_db.iter().all(|&x| x >= 0.0));
            }
            for u in &d.ues {
                assert!(u.dl_geometry_db <= u.dl_snr_db + 1e-9);
            }
        }
    }

    #[test]
    fn zero_ratio_leaves_aerial_cdfs_empty() {
        let r = run_campaign(&small_campaign(&[0.0]), None).unwrap();
        let cdfs = r.settings[0].cdfs();
        assert!(cdfs["dl_geometry_aerial"].is_empty());
        assert!(cdfs["ul_sinr_aerial"].is_empty());
        assert!(!cdfs["dl_geometry_terrestrial"].is_empty());
        assert!(!cdfs["ul_iot_terrestrial_cells"].is_empty());
    }

    #[test]
    fn campaign_is_deterministic_across_job_counts() {
        let cfg = small_campaign(&[0.0, 0.5]);
        let a = run_campaign(&cfg, Some(1)).unwrap();
        let b = run_campaign(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_campaign_fails_before_running() {
        let mut cfg = small_campaign(&[0.0]);
        cfg.n_drops = 0;
        assert_eq!(run_campaign(&cfg, None).unwrap_err().field, "n_drops");
    }
}
