// Brute-force reference for the measurement engine: every tick re-derives
// filtered values, list membership and reports from the whole prefix.

use rand::Rng;
use skysim_core::meas::{l3_filter, MeasConfig, TttMode};
use skysim_core::CellId;

#[derive(Debug, Clone)]
pub struct Trace {
    pub ticks: Vec<(u64, Vec<(CellId, f64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub t_ms: u64,
    /// (cell, filtered RSRP) in ascending cell order.
    pub cells: Vec<(CellId, f64)>,
}

pub fn random_config<R: Rng>(r: &mut R, n_cells: u32) -> MeasConfig {
    let hys = [0.0, 0.5, 1.0, 2.0, 3.0][r.random_range(0..5)];
    let ttt = [0, 40, 80, 160, 320, 640][r.random_range(0..6)];
    let x = r.random_range(1..=4);
    let mut cfg = match r.random_range(0..3) {
        0 => MeasConfig::a3(r.random_range(-3..=6) as f64, hys, ttt, x),
        1 => MeasConfig::a4(r.random_range(-80..=-66) as f64, hys, ttt, x),
        _ => MeasConfig::a5(r.random_range(-80..=-68) as f64, r.random_range(-80..=-66) as f64, hys, ttt, x),
    };
    cfg.l3_filter_k = [0, 1, 4][r.random_range(0..3)];
    cfg.ttt_mode = if r.random_bool(0.5) { TttMode::PerCell } else { TttMode::Shared };
    cfg.serving_cell = if r.random_bool(0.8) { Some(r.random_range(0..n_cells)) } else { None };
    cfg
}

/// Up to 200 ticks on the 40 ms grid (with occasional gaps) over up to 8
/// cells; samples are quantised to 0.5 dB so threshold ties occur.
pub fn random_trace<R: Rng>(r: &mut R, n_cells: u32) -> Trace {
    let n_ticks = r.random_range(1..=200);
    let mut t = 0;
    let mut level: Vec<f64> = (0..n_cells).map(|_| r.random_range(-85.0..-65.0)).collect();
    let mut ticks = Vec::with_capacity(n_ticks);
    for _ in 0..n_ticks {
        let mut samples = Vec::new();
        for (c, l) in level.iter_mut().enumerate() {
            *l = (*l + r.random_range(-2.0..2.0)).clamp(-95.0, -55.0);
            if r.random_bool(0.85) {
                samples.push((c as CellId, (*l * 2.0).round() / 2.0));
            }
        }
        ticks.push((t, samples));
        t += 40 * r.random_range(1..=2);
    }
    Trace { ticks }
}

fn filtered_at(trace: &Trace, cell: CellId, i: usize, k: u32) -> Option<f64> {
    let mut f: Option<f64> = None;
    for (_, samples) in &trace.ticks[..=i] {
        for &(c, x) in samples {
            if c == cell {
                f = Some(match f {
                    None => x,
                    Some(p) => l3_filter(p, x, k),
                });
            }
        }
    }
    f
}

pub fn reports(trace: &Trace, cfg: &MeasConfig) -> Vec<OracleReport> {
    let n = trace.ticks.len();
    let mut ids: Vec<CellId> = trace
        .ticks
        .iter()
        .flat_map(|(_, s)| s.iter().map(|&(c, _)| c))
        .filter(|&c| Some(c) != cfg.serving_cell)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let k = cfg.l3_filter_k;
    let mp: Vec<Option<f64>> = (0..n)
        .map(|i| cfg.serving_cell.and_then(|s| filtered_at(trace, s, i, k)))
        .collect();
    let f: Vec<Vec<Option<f64>>> = ids
        .iter()
        .map(|&c| (0..n).map(|i| filtered_at(trace, c, i, k)).collect())
        .collect();
    let per_cell_ttt = match cfg.ttt_mode {
        TttMode::PerCell => cfg.ttt,
        TttMode::Shared => 0,
    };
    let t = |i: usize| trace.ticks[i].0;

    // in_list[c][i]: membership after tick i.
    let mut in_list = vec![vec![false; n]; ids.len()];
    for c in 0..ids.len() {
        for i in 0..n {
            let Some(v) = f[c][i] else { continue };
            let was = i > 0 && in_list[c][i - 1];
            in_list[c][i] = if was {
                !cfg.leave(v, mp[i])
            } else {
                // the current run of entry ticks outside the list
                let mut s = i;
                let holds = |l: usize| f[c][l].is_some_and(|v| cfg.entry(v, mp[l]));
                if !holds(i) {
                    false
                } else {
                    while s > 0 && holds(s - 1) && !(s >= 2 && in_list[c][s - 2]) && !in_list[c][s - 1] {
                        s -= 1;
                    }
                    t(i) - t(s) >= per_cell_ttt
                }
            };
        }
    }
    let count: Vec<usize> = (0..n).map(|i| (0..ids.len()).filter(|&c| in_list[c][i]).count()).collect();
    let x = cfg.cell_count_x;
    let qualified = |i: usize| match cfg.ttt_mode {
        TttMode::PerCell => count[i] >= x,
        TttMode::Shared => {
            if count[i] < x {
                return false;
            }
            let mut s = i;
            while s > 0 && count[s - 1] >= x {
                s -= 1;
            }
            t(i) - t(s) >= cfg.ttt
        }
    };
    let mut out: Vec<OracleReport> = Vec::new();
    let mut last_report: Option<usize> = None;
    for i in 0..n {
        let armed = match last_report {
            None => true,
            Some(r) => (r..i).any(|l| count[l] < x),
        };
        if armed && qualified(i) {
            last_report = Some(i);
            out.push(OracleReport {
                t_ms: t(i),
                cells: (0..ids.len())
                    .filter(|&c| in_list[c][i])
                    .map(|c| (ids[c], f[c][i].expect("listed cells are measured")))
                    .collect(),
            });
        }
    }
    out
}
