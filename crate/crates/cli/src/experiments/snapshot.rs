use skysim_core::channel::ShadowParams;
use skysim_core::sysim::{
    metric_samples, run_campaign, CampaignConfig, CampaignResult, MetricsCdf, Setting, SysimConfig, METRICS,
};
use skysim_core::ScenarioConfig;

use crate::error::CliError;
use crate::output::{fmt_f64, slug, Artifacts, Csv};
use crate::spec::{CampaignSpec, PowerSection, SweepVariable};

/// Percentile grid used for plot files.
const PLOT_STEP: f64 = 0.5;

pub fn settings(spec: &CampaignSpec) -> Vec<Setting> {
    let scenario = spec.scenario.clone().unwrap_or_default().resolve();
    let power = spec.power.clone().unwrap_or_default();
    let Some(sweep) = &spec.sweep else {
        return vec![Setting {
            label: spec.label().to_string(),
            scenario,
            power: power.resolve(),
        }];
    };
    match sweep.variable {
        SweepVariable::AerialRatio => sweep
            .values
            .iter()
            .flatten()
            .map(|&r| Setting {
                label: format!("aerial_ratio={r}"),
                scenario: ScenarioConfig {
                    aerial_ratio: r,
                    ..scenario.clone()
                },
                power: power.resolve(),
            })
            .collect(),
        SweepVariable::PowerClasses => sweep
            .classes
            .iter()
            .flatten()
            .map(|c| Setting {
                label: c.label.clone(),
                scenario: scenario.clone(),
                power: PowerSection {
                    terrestrial: Some(c.terrestrial),
                    aerial: Some(c.aerial),
                    ..power.clone()
                }
                .resolve(),
            })
            .collect(),
        SweepVariable::HeightThreshold => unreachable!("rejected by validation"),
    }
}

pub fn campaign(spec: &CampaignSpec) -> CampaignConfig {
    let s = spec.snapshot.as_ref().expect("validated snapshot section");
    CampaignConfig {
        settings: settings(spec),
        n_drops: s.n_drops,
        n_snapshots: s.n_snapshots,
        master_seed: spec.seed,
        sysim: SysimConfig {
            activity_factor: s.activity_factor,
            site_shadow_correlation: s.site_shadow_correlation,
            ..SysimConfig::default()
        },
        shadow: ShadowParams::default(),
        los_table: None,
    }
}

pub fn run(spec: &CampaignSpec) -> Result<Artifacts, CliError> {
    let cfg = campaign(spec);
    let result = run_campaign(&cfg, None)?;
    Ok(render(spec, &result))
}

fn stat_rows(csv: &mut Csv, setting: &str, metric: &str, cdf: &MetricsCdf) {
    csv.row([setting, metric, "n", &cdf.len().to_string()]);
    if cdf.is_empty() {
        return;
    }
    let stats = [
        ("mean", cdf.mean()),
        ("p5", cdf.percentile(5.0)),
        ("p50", cdf.percentile(50.0)),
        ("p95", cdf.percentile(95.0)),
    ];
    for (name, v) in stats {
        csv.row([setting, metric, name, &fmt_f64(v.expect("non-empty"))]);
    }
}

pub fn render(spec: &CampaignSpec, result: &CampaignResult) -> Artifacts {
    let mut out = Artifacts::default();
    let mut metrics = Csv::new(&["setting", "metric", "stat", "value"]);
    let mut per_drop = Csv::new(&["setting", "drop", "metric", "n", "mean", "p5"]);
    for (i, s) in result.settings.iter().enumerate() {
        let cdfs = s.cdfs();
        for m in METRICS {
            let cdf = &cdfs[m];
            stat_rows(&mut metrics, &s.label, m, cdf);
            if !cdf.is_empty() {
                let mut plot = Csv::new(&["x", "y"]);
                let steps = (100.0 / PLOT_STEP) as usize;
                for k in 0..=steps {
                    let p = k as f64 * PLOT_STEP;
                    plot.row([fmt_f64(cdf.percentile(p).expect("non-empty")), fmt_f64(p / 100.0)]);
                }
                out.add(format!("plots/{i:02}_{}/{m}.csv", slug(&s.label)), plot.finish());
            }
        }
        for (d, drop) in s.drops.iter().enumerate() {
            for m in METRICS {
                let cdf = MetricsCdf::from_samples(metric_samples(drop, m));
                if let (Some(mean), Some(p5)) = (cdf.mean(), cdf.percentile(5.0)) {
                    per_drop.row([
                        s.label.clone(),
                        d.to_string(),
                        m.to_string(),
                        cdf.len().to_string(),
                        fmt_f64(mean),
                        fmt_f64(p5),
                    ]);
                }
            }
        }
    }
    out.add("metrics.csv", metrics.finish());
    out.add("drop_metrics.csv", per_drop.finish());

    match spec.sweep.as_ref().map(|s| s.variable) {
        Some(SweepVariable::AerialRatio) => {
            let mut csv = Csv::new(&["aerial_ratio", "n_samples", "iot_mean_db", "iot_p5_db", "iot_p50_db", "iot_p95_db"]);
            for (s, &r) in result.settings.iter().zip(spec.sweep.as_ref().and_then(|s| s.values.as_ref()).into_iter().flatten()) {
                let cdf = s.cdf("ul_iot_terrestrial_cells");
                let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
                csv.row([
                    r.to_string(),
                    cdf.len().to_string(),
                    f(cdf.mean()),
                    f(cdf.percentile(5.0)),
                    f(cdf.percentile(50.0)),
                    f(cdf.percentile(95.0)),
                ]);
            }
            out.add("iot_vs_ratio.csv", csv.finish());
        }
        Some(SweepVariable::PowerClasses) => {
            let mut csv = Csv::new(&[
                "setting",
                "terrestrial_p5",
                "terrestrial_mean",
                "p5_change_pct",
                "mean_change_pct",
            ]);
            let tput = |i: usize| {
                let c = result.settings[i].cdf("ul_throughput_terrestrial");
                (c.percentile(5.0).unwrap_or(0.0), c.mean().unwrap_or(0.0))
            };
            let (b5, bm) = tput(0);
            let pct = |v: f64, base: f64| if base > 0.0 { fmt_f64(100.0 * (v - base) / base) } else { String::new() };
            for (i, s) in result.settings.iter().enumerate() {
                let (p5, mean) = tput(i);
                csv.row([s.label.clone(), fmt_f64(p5), fmt_f64(mean), pct(p5, b5), pct(mean, bm)]);
            }
            out.add("power_vs_baseline.csv", csv.finish());
        }
        _ => {}
    }
    out
}
