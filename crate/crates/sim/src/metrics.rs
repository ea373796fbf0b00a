//! Run summaries computed from telemetry.

use crate::harness::TelemetryRecord;

/// Fraction of the run, counted from the end, treated as steady state.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub steps: usize,
    pub rms_ex: f64,
    pub max_ex: f64,
    pub rms_ex_tail: f64,
    pub max_ex_tail: f64,
    pub rms_er: f64,
    pub max_er: f64,
    pub rms_er_tail: f64,
    pub max_er_tail: f64,
    pub final_ex: f64,
    /// First time after which `‖e_x‖` stays within the band; `None` if the
    /// last record is outside it.
    pub settling_time: Option<f64>,
    /// `[‖W̄1‖, ‖V̄1‖, ‖W̄2‖, ‖V̄2‖]` maxima.
    pub max_weight_norms: [f64; 4],
    pub final_v: f64,
    pub max_set_d_tail: f64,
    pub max_psi: f64,
    pub min_alignment: f64,
    /// Steps with each rotor clipped at its floor.
    pub saturation_counts: [usize; 4],
}

/// Index of the first record of the steady-state tail.
pub fn tail_start(n: usize) -> usize {
    ((n as f64) * (1.0 - TAIL_FRACTION)).floor() as usize
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn max(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

pub fn summarize(records: &[TelemetryRecord], band: f64) -> Metrics {
    let n = records.len();
    if n == 0 {
        return Metrics::default();
    }
    let tail = &records[tail_start(n)..];
    let ex = |r: &TelemetryRecord| r.e_x.norm();
    let er = |r: &TelemetryRecord| r.e_r.norm();

    let settling_time = match records.iter().rposition(|r| ex(r) > band) {
        None => Some(records[0].t),
        Some(i) if i + 1 < n => Some(records[i + 1].t),
        Some(_) => None,
    };
    let mut max_weight_norms = [0.0; 4];
    let mut saturation_counts = [0; 4];
    for r in records {
        for i in 0..4 {
            max_weight_norms[i] = f64::max(max_weight_norms[i], r.weight_norms[i]);
            saturation_counts[i] += usize::from(r.saturated[i]);
        }
    }
    let last = &records[n - 1];
    Metrics {
        steps: n,
        rms_ex: rms(records.iter().map(ex)),
        max_ex: max(records.iter().map(ex)),
        rms_ex_tail: rms(tail.iter().map(ex)),
        max_ex_tail: max(tail.iter().map(ex)),
        rms_er: rms(records.iter().map(er)),
        max_er: max(records.iter().map(er)),
        rms_er_tail: rms(tail.iter().map(er)),
        max_er_tail: max(tail.iter().map(er)),
        final_ex: ex(last),
        settling_time,
        max_weight_norms,
        final_v: last.lyap_v,
        max_set_d_tail: max(tail.iter().map(|r| r.set_d)),
        max_psi: max(records.iter().map(|r| r.psi)),
        min_alignment: records.iter().map(|r| r.alignment).fold(f64::INFINITY, f64::min),
        saturation_counts,
    }
}

impl Metrics {
    pub fn key_values(&self) -> Vec<(String, String)> {
        let num = |v: f64| format!("{v:.12e}");
        let mut out = vec![
            ("steps".to_string(), self.steps.to_string()),
            ("rms_ex".into(), num(self.rms_ex)),
            ("max_ex".into(), num(self.max_ex)),
            ("rms_ex_tail".into(), num(self.rms_ex_tail)),
            ("max_ex_tail".into(), num(self.max_ex_tail)),
            ("rms_er".into(), num(self.rms_er)),
            ("max_er".into(), num(self.max_er)),
            ("rms_er_tail".into(), num(self.rms_er_tail)),
            ("max_er_tail".into(), num(self.max_er_tail)),
            ("final_ex".into(), num(self.final_ex)),
            ("settling_time".into(), self.settling_time.map_or_else(|| "none".to_string(), num)),
        ];
        for (i, name) in ["w1", "v1", "w2", "v2"].iter().enumerate() {
            out.push((format!("max_norm_{name}"), num(self.max_weight_norms[i])));
        }
        out.push(("final_lyapunov".into(), num(self.final_v)));
        out.push(("max_set_d_tail".into(), num(self.max_set_d_tail)));
        out.push(("max_psi".into(), num(self.max_psi)));
        out.push(("min_alignment".into(), num(self.min_alignment)));
        for (i, c) in self.saturation_counts.iter().enumerate() {
            out.push((format!("saturated_steps_rotor{}", i + 1), c.to_string()));
        }
        out
    }
}
