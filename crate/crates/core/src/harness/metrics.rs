//! Error statistics, envelope audit and sliding-bound audit of a trace.

use serde::{Deserialize, Serialize};

use super::trial::{col, TrialRecord};
use crate::so3::Vec3;

/// Streaming count, mean, sum of squared deviations and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        RunningStats { n: 0, mean: 0.0, m2: 0.0, max: f64::NEG_INFINITY }
    }
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.max = self.max.max(x);
    }

    /// Pooled statistics of two disjoint samples.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        RunningStats {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
            max: self.max.max(other.max),
        }
    }

    /// Population standard deviation.
    pub fn sd(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(xs: I) -> RunningStats {
        let mut s = RunningStats::default();
        xs.into_iter().for_each(|x| s.push(x));
        s
    }
}

/// Absolute per-axis errors and the error norm, in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub axes: [RunningStats; 3],
    pub norm: RunningStats,
}

impl ErrorStats {
    fn push(&mut self, err_m: &Vec3) {
        for i in 0..3 {
            self.axes[i].push(err_m[i].abs() * 100.0);
        }
        self.norm.push(err_m.norm() * 100.0);
    }

    pub fn merge(&self, other: &ErrorStats) -> ErrorStats {
        ErrorStats {
            axes: std::array::from_fn(|i| self.axes[i].merge(&other.axes[i])),
            norm: self.norm.merge(&other.norm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loop {
    Position,
    Attitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub row: usize,
    pub t: f64,
    pub which: Loop,
    pub axis: usize,
    pub error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub position_count: usize,
    pub attitude_count: usize,
    pub violations: Vec<EnvelopeViolation>,
}

impl EnvelopeReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every sample where `|p̃_i| ≥ ρ_p,i` or `|q̃_v,i| ≥ ρ_q,i`, from `start_row` on.
pub fn check_envelope_from(data: &[f64], start_row: usize) -> EnvelopeReport {
    let mut rep = EnvelopeReport::default();
    for (row, r) in data.chunks_exact(col::COUNT).enumerate().skip(start_row) {
        for (which, err, rho) in [(Loop::Position, col::P_ERR, col::RHO_P), (Loop::Attitude, col::QV, col::RHO_Q)] {
            for axis in 0..3 {
                let (e, b) = (r[err + axis], r[rho + axis]);
                if !(e.abs() < b) {
                    match which {
                        Loop::Position => rep.position_count += 1,
                        Loop::Attitude => rep.attitude_count += 1,
                    }
                    rep.violations.push(EnvelopeViolation { row, t: r[col::T], which, axis, error: e, bound: b });
                }
            }
        }
    }
    rep
}

pub fn check_envelope(record: &TrialRecord) -> EnvelopeReport {
    check_envelope_from(&record.data, 0)
}

fn vec3_at(r: &[f64], c: usize) -> Vec3 {
    Vec3::new(r[c], r[c + 1], r[c + 2])
}

/// First row where every axis of the error lies strictly inside its band.
pub fn band_entry_row(data: &[f64], err_col: usize, band: &[f64; 3]) -> Option<usize> {
    data.chunks_exact(col::COUNT)
        .position(|r| (0..3).all(|i| r[err_col + i].abs() < band[i]))
}

/// Sliding-vector audit for one loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingAudit {
    /// Entry into the steady band; the audit window starts here.
    pub t_f: f64,
    /// `sup ‖Δ̃‖` over the whole trial.
    pub delta_all: f64,
    /// `sup ‖Δ̃‖` from `t_f` on.
    pub delta_f: f64,
    pub k_min: f64,
    /// `‖s‖ ≤ δ_all/k_min + 1e-3` on every tick.
    pub uniform_ok: bool,
    pub uniform_worst_excess: f64,
    /// `‖s(t)‖ ≤ e^{−k_min(t−t_f)}‖s(t_f)‖ + δ_f/k_min + 1e-3` for `t ≥ t_f`.
    pub after_t_f_ok: bool,
    pub after_t_f_worst_excess: f64,
    /// `max ‖s‖` from `t_f` on, against `δ_f/k_min`.
    pub sup_s_after_t_f: f64,
}

pub const SLIDING_MARGIN: f64 = 1e-3;

/// Audits `ṡ = −K s + Δ̃` through its comparison bounds.
///
/// `Δ̃` is the error of the estimate the law actually used: the logged
/// observer output, or zero when the variant runs without it. Returns `None`
/// when the error never enters the band.
pub fn sliding_audit(record: &TrialRecord, which: Loop) -> Option<SlidingAudit> {
    let m = &record.meta;
    let (err_col, band, s_col, truth_col, hat_col, k_min) = match which {
        Loop::Position => (col::P_ERR, m.rho_inf_p, col::S_P, col::DV_EFF, col::DV_HAT, m.k_min_p),
        Loop::Attitude => (col::QV, m.rho_inf_q, col::S_Q, col::DW_TRUE, col::DW_HAT, m.k_min_q),
    };
    let entry = band_entry_row(&record.data, err_col, &band)?;
    let rows: Vec<&[f64]> = record.data.chunks_exact(col::COUNT).collect();
    let dtilde = |r: &[f64]| {
        let hat = if m.uses_eso { vec3_at(r, hat_col) } else { Vec3::zeros() };
        (vec3_at(r, truth_col) - hat).norm()
    };
    let delta_all = rows.iter().map(|r| dtilde(r)).fold(0.0, f64::max);
    let delta_f = rows[entry..].iter().map(|r| dtilde(r)).fold(0.0, f64::max);
    let t_f = rows[entry][col::T];
    let s_f = vec3_at(rows[entry], s_col).norm();

    let mut uniform_worst = f64::NEG_INFINITY;
    for r in &rows {
        uniform_worst = uniform_worst.max(vec3_at(r, s_col).norm() - (delta_all / k_min + SLIDING_MARGIN));
    }
    let mut after_worst = f64::NEG_INFINITY;
    let mut sup_s = 0.0f64;
    for r in &rows[entry..] {
        let s = vec3_at(r, s_col).norm();
        sup_s = sup_s.max(s);
        let bound = (-k_min * (r[col::T] - t_f)).exp() * s_f + delta_f / k_min + SLIDING_MARGIN;
        after_worst = after_worst.max(s - bound);
    }
    Some(SlidingAudit {
        t_f,
        delta_all,
        delta_f,
        k_min,
        uniform_ok: uniform_worst <= 0.0,
        uniform_worst_excess: uniform_worst,
        after_t_f_ok: after_worst <= 0.0,
        after_t_f_worst_excess: after_worst,
        sup_s_after_t_f: sup_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    /// First time every axis is inside the final position band.
    pub steady_entry_s: Option<f64>,
    /// Statistics from band entry on; the whole trial when the band is never entered.
    pub steady: ErrorStats,
    pub steady_fallback_to_full: bool,
    pub full: ErrorStats,
    pub terminal_error_m: f64,
    pub position_violations: usize,
    pub attitude_violations: usize,
    /// Violations from the position band entry on.
    pub position_violations_after_entry: usize,
    pub attitude_violations_after_entry: usize,
    pub peak_arm_delta_v_m_per_s2: f64,
    pub sliding_position: Option<SlidingAudit>,
    pub sliding_attitude: Option<SlidingAudit>,
}

pub fn summarize(record: &TrialRecord) -> SummaryMetrics {
    let data = &record.data;
    let entry = band_entry_row(data, col::P_ERR, &record.meta.rho_inf_p);
    let mut full = ErrorStats::default();
    let mut steady = ErrorStats::default();
    let start = entry.unwrap_or(0);
    let mut peak_dv = 0.0f64;
    for (i, r) in data.chunks_exact(col::COUNT).enumerate() {
        let e = vec3_at(r, col::P_ERR);
        full.push(&e);
        if i >= start {
            steady.push(&e);
        }
        peak_dv = peak_dv.max(vec3_at(r, col::DV_TRUE).norm());
    }
    let all = check_envelope_from(data, 0);
    let after = check_envelope_from(data, start);
    let last = data.len() / col::COUNT - 1;
    let is_ppc = record.meta.variant != crate::control::ControllerVariant::BaselinePid;
    SummaryMetrics {
        steady_entry_s: entry.map(|i| data[i * col::COUNT + col::T]),
        steady,
        steady_fallback_to_full: entry.is_none(),
        full,
        terminal_error_m: record.vec3(last, col::P_ERR).norm(),
        position_violations: all.position_count,
        attitude_violations: all.attitude_count,
        position_violations_after_entry: if entry.is_some() { after.position_count } else { all.position_count },
        attitude_violations_after_entry: if entry.is_some() { after.attitude_count } else { all.attitude_count },
        peak_arm_delta_v_m_per_s2: peak_dv,
        sliding_position: if is_ppc { sliding_audit(record, Loop::Position) } else { None },
        sliding_attitude: if is_ppc { sliding_audit(record, Loop::Attitude) } else { None },
    }
}
