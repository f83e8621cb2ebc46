use skysim_core::mobility::{run_mobility, MobilityStats};
use skysim_core::rng::drop_seed;

use crate::error::CliError;
use crate::output::{fmt_f64, Artifacts, Csv};
use crate::spec::{mobility_config, CampaignSpec};

/// Per-group stats: `stats[group][seed][ue]`.
pub fn simulate(spec: &CampaignSpec) -> Result<Vec<Vec<Vec<MobilityStats>>>, CliError> {
    let m = spec.mobility.as_ref().expect("validated mobility section");
    let scenario = spec.scenario.clone().unwrap_or_default();
    m.groups
        .iter()
        .map(|g| {
            let cfg = mobility_config(m, g, &scenario);
            (0..m.n_seeds)
                .map(|i| run_mobility(&cfg, drop_seed(spec.seed, i as u64)).map_err(CliError::from))
                .collect()
        })
        .collect()
}

pub fn run(spec: &CampaignSpec) -> Result<Artifacts, CliError> {
    let m = spec.mobility.as_ref().expect("validated mobility section");
    let stats = simulate(spec)?;
    let mut per_ue = Csv::new(&[
        "setting",
        "seed",
        "ue",
        "attempts",
        "handovers",
        "handover_failures",
        "radio_link_failures",
        "ping_pongs",
        "outage_ms",
        "duration_ms",
    ]);
    let mut metrics = Csv::new(&["setting", "metric", "stat", "value"]);
    for (g, by_seed) in m.groups.iter().zip(&stats) {
        let all: Vec<&MobilityStats> = by_seed.iter().flatten().collect();
        for (seed, ues) in by_seed.iter().enumerate() {
            for (ue, s) in ues.iter().enumerate() {
                per_ue.row([
                    g.label.clone(),
                    seed.to_string(),
                    ue.to_string(),
                    s.attempts.to_string(),
                    s.handovers.to_string(),
                    s.handover_failures.to_string(),
                    s.radio_link_failures.to_string(),
                    s.ping_pongs.to_string(),
                    s.outage_ms.to_string(),
                    s.duration_ms.to_string(),
                ]);
            }
        }
        let n = all.len() as f64;
        let mean = |f: &dyn Fn(&MobilityStats) -> f64| all.iter().map(|s| f(s)).sum::<f64>() / n;
        let rows: [(&str, f64); 7] = [
            ("attempts", mean(&|s| f64::from(s.attempts))),
            ("handovers", mean(&|s| f64::from(s.handovers))),
            ("handover_failures", mean(&|s| f64::from(s.handover_failures))),
            ("radio_link_failures", mean(&|s| f64::from(s.radio_link_failures))),
            ("ping_pongs", mean(&|s| f64::from(s.ping_pongs))),
            ("outage_ms", mean(&|s| s.outage_ms as f64)),
            ("failure_rate_per_min", mean(&|s| s.failure_rate_per_min())),
        ];
        metrics.row([g.label.as_str(), "ues", "n", &all.len().to_string()]);
        for (name, v) in rows {
            metrics.row([g.label.as_str(), name, "mean", &fmt_f64(v)]);
        }
    }
    let mut out = Artifacts::default();
    out.add("mobility_stats.csv", per_ue.finish());
    out.add("metrics.csv", metrics.finish());
    Ok(out)
}
