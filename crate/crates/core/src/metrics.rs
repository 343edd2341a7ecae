//! Tracking statistics and step-response figures computed from a trace.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::{LogRecord, RunTrace};
use crate::scenario::ReferenceProfile;

/// Fraction of the jump amplitude defining the settling band.
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorSource {
    /// v_true − v_ref
    #[default]
    Truth,
    /// v_meas − v_ref
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    /// population standard deviation
    pub std_dev: f64,
    pub rms: f64,
}

pub fn stats(values: &[f64]) -> Result<ErrorStats> {
    if values.is_empty() {
        return Err(Error::Metrics("empty trace".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    Ok(ErrorStats {
        mean,
        std_dev: var.sqrt(),
        rms,
    })
}

fn error_of(r: &LogRecord, source: ErrorSource) -> f64 {
    match source {
        ErrorSource::Truth => r.true_error(),
        ErrorSource::Measured => r.error,
    }
}

pub fn error_stats(trace: &RunTrace, source: ErrorSource) -> Result<ErrorStats> {
    let errors: Vec<f64> = trace.records.iter().map(|r| error_of(r, source)).collect();
    stats(&errors)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// abscissa of the jump, m
    pub jump_at: f64,
    /// signed jump amplitude, m/s
    pub amplitude: f64,
    pub overshoot_pct: f64,
    /// distance past the jump after which the error stays inside the band;
    /// `None` if it never settles within the segment
    pub settling_distance: Option<f64>,
}

/// Overshoot as a percentage of the jump amplitude.
pub fn overshoot_pct(amplitude: f64, target: f64, peak: f64) -> f64 {
    let excursion = (peak - target) * amplitude.signum();
    100.0 * excursion.max(0.0) / amplitude.abs()
}

/// One entry per jump of a step profile, from the ground-truth speed.
pub fn step_metrics(trace: &RunTrace, profile: &ReferenceProfile) -> Result<Vec<StepMetrics>> {
    let levels = match profile {
        ReferenceProfile::Step { levels } => levels,
        _ => return Err(Error::Metrics("step metrics need a step profile".into())),
    };
    if levels.len() < 2 {
        return Err(Error::Metrics("step profile has no jump".into()));
    }
    let mut out = Vec::with_capacity(levels.len() - 1);
    for (j, w) in levels.windows(2).enumerate() {
        let (jump_at, target) = w[1];
        let amplitude = target - w[0].1;
        let seg_end = levels.get(j + 2).map_or(f64::INFINITY, |l| l.0);
        let seg: Vec<&LogRecord> = trace
            .records
            .iter()
            .filter(|r| r.s >= jump_at && r.s < seg_end)
            .collect();
        if seg.is_empty() || amplitude == 0.0 {
            out.push(StepMetrics {
                jump_at,
                amplitude,
                overshoot_pct: 0.0,
                settling_distance: None,
            });
            continue;
        }
        let dir = amplitude.signum();
        let peak = seg
            .iter()
            .map(|r| r.v_true)
            .fold(f64::NEG_INFINITY, |acc, v| if dir * v > dir * acc || acc.is_infinite() { v } else { acc });
        let band = SETTLING_BAND * amplitude.abs();
        let last_outside = seg.iter().rposition(|r| (r.v_true - target).abs() >= band);
        let settling_distance = match last_outside {
            None => Some(0.0),
            Some(i) if i + 1 < seg.len() => Some(seg[i + 1].s - jump_at),
            Some(_) => None,
        };
        out.push(StepMetrics {
            jump_at,
            amplitude,
            overshoot_pct: overshoot_pct(amplitude, target, peak),
            settling_distance,
        });
    }
    Ok(out)
}

/// Summary for one run, as a row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub delay_ms: f64,
    pub stats: ErrorStats,
    pub steps: Vec<StepMetrics>,
}

impl RunSummary {
    pub fn from_trace(label: impl Into<String>, trace: &RunTrace, profile: &ReferenceProfile) -> Result<Self> {
        let steps = match profile {
            ReferenceProfile::Step { levels } if levels.len() > 1 => step_metrics(trace, profile)?,
            _ => Vec::new(),
        };
        Ok(Self {
            label: label.into(),
            delay_ms: trace.config.actuation_delay * 1000.0,
            stats: error_stats(trace, ErrorSource::Truth)?,
            steps,
        })
    }
}

pub const METRICS_HEADER: &str = "mfc,delay_ms,average,std_dev,rms,step_overshoot_pct,step_settling_m";

/// Renders summaries as CSV. Per-step columns hold `;`-separated values in
/// jump order, empty when the scenario has no steps.
pub fn metrics_csv(rows: &[RunSummary]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let overshoots: Vec<String> = r.steps.iter().map(|s| format!("{:.3}", s.overshoot_pct)).collect();
        let settling: Vec<String> = r
            .steps
            .iter()
            .map(|s| s.settling_distance.map_or_else(|| "inf".to_string(), |d| format!("{d:.3}")))
            .collect();
        let _ = writeln!(
            out,
            "{},{:.0},{:.4},{:.4},{:.4},{},{}",
            r.label,
            r.delay_ms,
            r.stats.mean,
            r.stats.std_dev,
            r.stats.rms,
            overshoots.join(";"),
            settling.join(";")
        );
    }
    out
}
