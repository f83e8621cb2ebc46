use skysim_core::geometry::Point3;
use skysim_core::meas::{HeightReportConfig, HeightReporter, Kinematics, MeasReport};
use skysim_core::mobility::{FlightPath, Waypoint};

use crate::error::CliError;
use crate::output::{fmt_f64, Artifacts, Csv};
use crate::replay::report_fields;
use crate::spec::{CampaignSpec, HeightSection, HeightUe};

fn path_of(ue: &HeightUe, duration_ms: u64) -> Result<FlightPath, CliError> {
    let p = |a: [f64; 3]| Point3::new(a[0], a[1], a[2]);
    Ok(FlightPath::new(vec![
        Waypoint {
            position: p(ue.start),
            t_ms: 0,
        },
        Waypoint {
            position: p(ue.end),
            t_ms: duration_ms,
        },
    ])?)
}

/// Height reports of one UE flying `ue` with the given threshold.
pub fn reports_for(h: &HeightSection, ue: &HeightUe, threshold: f64) -> Result<Vec<MeasReport>, CliError> {
    let path = path_of(ue, h.duration_ms)?;
    let mut reporter = HeightReporter::new(HeightReportConfig {
        height_threshold: threshold,
        hysteresis_h: h.hysteresis_h,
    })?;
    let mut out = Vec::new();
    for t in (0..=h.duration_ms).step_by(h.sample_period_ms as usize) {
        let tf = t as f64;
        let kin = Kinematics {
            position: path.position_at(tf).expect("inside path"),
            velocity: path.velocity_at(tf).expect("inside path"),
        };
        out.extend(reporter.step(t, kin).expect("increasing time"));
    }
    Ok(out)
}

pub fn run(spec: &CampaignSpec) -> Result<Artifacts, CliError> {
    let h = spec.height.as_ref().expect("validated height section");
    let thresholds: Vec<f64> = match spec.sweep.as_ref().and_then(|s| s.values.clone()) {
        Some(v) => v,
        None => vec![h.height_threshold],
    };
    let mut log = Csv::new(&[
        "setting",
        "ue",
        "t_ms",
        "report_kind",
        "height_m",
        "x_m",
        "y_m",
        "h_speed_mps",
        "v_speed_mps",
    ]);
    let mut metrics = Csv::new(&["setting", "metric", "stat", "value"]);
    for &thr in &thresholds {
        let setting = format!("height_threshold={thr}");
        for ue in &h.ues {
            let reports = reports_for(h, ue, thr)?;
            for r in &reports {
                let f = report_fields(r);
                log.row(
                    [setting.clone(), ue.label.clone(), f[0].clone(), f[1].clone()]
                        .into_iter()
                        .chain(f[4..].iter().cloned()),
                );
            }
            metrics.row([
                setting.clone(),
                "reports".into(),
                ue.label.clone(),
                reports.len().to_string(),
            ]);
        }
        metrics.row([setting.clone(), "threshold_m".into(), "value".into(), fmt_f64(thr)]);
    }
    let mut out = Artifacts::default();
    out.add("height_reports.csv", log.finish());
    out.add("metrics.csv", metrics.finish());
    Ok(out)
}
