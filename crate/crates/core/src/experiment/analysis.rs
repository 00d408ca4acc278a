use serde::{Deserialize, Serialize};

use super::MetricsRow;
use crate::autodiff::{JetField, PointSet, Tracking};
use crate::error::{Error, Result};
use crate::pde::{Problem, T, X};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    /// Data loss at the switch epoch.
    pub pre: f64,
    /// Largest data loss logged in `(switch, switch + window]`.
    pub post_max: f64,
    pub post_max_epoch: usize,
    pub ratio: f64,
    /// The table ended before the window did.
    pub truncated: bool,
}

/// Size of the data-loss (relative L2) excursion after a switch.
pub fn measure_jump(metrics: &[MetricsRow], switch_epoch: usize, window: usize) -> Result<JumpReport> {
    if window == 0 {
        return Err(Error::config("jump window must be >= 1"));
    }
    let pre = metrics
        .iter()
        .find(|r| r.epoch == switch_epoch)
        .ok_or_else(|| Error::config(format!("epoch {switch_epoch} is not in the metrics table")))?
        .rel_l2;
    let end = switch_epoch + window;
    let (post_max, post_max_epoch) = metrics
        .iter()
        .filter(|r| r.epoch > switch_epoch && r.epoch <= end)
        .fold((f64::NEG_INFINITY, switch_epoch), |(m, e), r| {
            if r.rel_l2 > m {
                (r.rel_l2, r.epoch)
            } else {
                (m, e)
            }
        });
    if post_max == f64::NEG_INFINITY {
        return Err(Error::config(format!("no rows logged after epoch {switch_epoch}")));
    }
    let last = metrics.last().map_or(0, |r| r.epoch);
    Ok(JumpReport {
        pre,
        post_max,
        post_max_epoch,
        ratio: post_max / pre,
        truncated: last < end,
    })
}

/// Centered moving average over `2w + 1` values; the result is `2w` shorter.
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    if values.len() <= 2 * w {
        return Vec::new();
    }
    let span = (2 * w + 1) as f64;
    let mut sum: f64 = values[..2 * w + 1].iter().sum();
    let mut out = Vec::with_capacity(values.len() - 2 * w);
    out.push(sum / span);
    for i in 2 * w + 1..values.len() {
        sum += values[i] - values[i - 2 * w - 1];
        out.push(sum / span);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub epoch: usize,
    pub kind: ExtremumKind,
    /// Smoothed value at the extremum.
    pub value: f64,
}

/// Interior local extrema of the smoothed series `(epoch, value)`.
///
/// Kinds alternate by construction; flat stretches are skipped.
pub fn detect_extrema(series: &[(usize, f64)], smoothing_window: usize) -> Result<Vec<Extremum>> {
    if series.len() <= 2 * smoothing_window {
        return Err(Error::config(format!(
            "{} values cannot be smoothed over a window of {smoothing_window}",
            series.len()
        )));
    }
    let values: Vec<f64> = series.iter().map(|&(_, v)| v).collect();
    let s = moving_average(&values, smoothing_window);
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for i in 0..s.len().saturating_sub(1) {
        let d = s[i + 1] - s[i];
        if d == 0.0 {
            continue;
        }
        let sign = d.signum();
        if let Some((at, prev)) = last {
            if sign != prev {
                out.push(Extremum {
                    epoch: series[at + smoothing_window].0,
                    kind: if prev > 0.0 { ExtremumKind::Max } else { ExtremumKind::Min },
                    value: s[at],
                });
            }
        }
        if last.is_none_or(|(_, p)| p != sign) {
            last = Some((i + 1, sign));
        } else if let Some(l) = last.as_mut() {
            l.0 = i + 1;
        }
    }
    Ok(out)
}

/// Centered running median over `2w + 1` values; the result is `2w` shorter.
pub fn running_median(values: &[f64], w: usize) -> Vec<f64> {
    if values.len() <= 2 * w {
        return Vec::new();
    }
    let mut buf = Vec::with_capacity(2 * w + 1);
    (w..values.len() - w)
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&values[i - w..=i + w]);
            buf.sort_by(f64::total_cmp);
            buf[w]
        })
        .collect()
}

/// Stage extrema of a positive series: running median of `log10(value)`,
/// then extrema that differ from the previous one by at least `min_decades`.
///
/// Short optimizer spikes do not survive the median, and the hysteresis drops
/// wiggles smaller than `min_decades`. Kinds alternate; an extremum at either
/// end of the smoothed series is not reported.
pub fn detect_stages(series: &[(usize, f64)], half_window: usize, min_decades: f64) -> Result<Vec<Extremum>> {
    if series.len() <= 2 * half_window + 2 {
        return Err(Error::config(format!(
            "{} values cannot be smoothed over a half window of {half_window}",
            series.len()
        )));
    }
    if !(min_decades > 0.0) {
        return Err(Error::config("stage prominence must be positive"));
    }
    if let Some(&(_, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Numeric {
            op: "stage detection of a non-positive value".into(),
            value: v,
        });
    }
    let logs: Vec<f64> = series.iter().map(|&(_, v)| v.log10()).collect();
    let s = running_median(&logs, half_window);
    let epoch = |i: usize| series[i + half_window].0;
    let mut out = Vec::new();
    let (mut hi, mut lo) = ((0usize, s[0]), (0usize, s[0]));
    let mut seeking: Option<ExtremumKind> = None;
    for (i, &v) in s.iter().enumerate().skip(1) {
        if v > hi.1 {
            hi = (i, v);
        }
        if v < lo.1 {
            lo = (i, v);
        }
        let found = match seeking {
            None | Some(ExtremumKind::Max) if v < hi.1 - min_decades => Some((ExtremumKind::Max, hi)),
            None | Some(ExtremumKind::Min) if v > lo.1 + min_decades => Some((ExtremumKind::Min, lo)),
            _ => None,
        };
        if let Some((kind, (at, val))) = found {
            if at > 0 {
                out.push(Extremum {
                    epoch: epoch(at),
                    kind,
                    value: 10f64.powf(val),
                });
            }
            seeking = Some(match kind {
                ExtremumKind::Max => ExtremumKind::Min,
                ExtremumKind::Min => ExtremumKind::Max,
            });
            hi = (i, v);
            lo = (i, v);
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln(value)` against epoch.
pub fn log_trend_slope(series: &[(usize, f64)]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::config("trend needs at least two values"));
    }
    if let Some(&(_, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Numeric {
            op: "log trend of a non-positive value".into(),
            value: v,
        });
    }
    let n = series.len() as f64;
    let mx = series.iter().map(|&(e, _)| e as f64).sum::<f64>() / n;
    let my = series.iter().map(|&(_, v)| v.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(e, v) in series {
        let dx = e as f64 - mx;
        sxy += dx * (v.ln() - my);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub x: f64,
    pub t: Option<f64>,
    pub prediction: f64,
    pub exact: f64,
    /// `prediction - exact`.
    pub error: f64,
}

/// Prediction, reference and error at every grid point.
pub fn snapshot_prediction(field: &dyn JetField, problem: &Problem, grid: &PointSet) -> Result<Vec<SnapshotRow>> {
    let exact = problem.targets(grid)?;
    let jets = field.jets(grid, &Tracking::none())?;
    Ok(grid
        .iter()
        .zip(exact)
        .enumerate()
        .map(|(i, (p, u))| {
            let pred = jets.value(i);
            SnapshotRow {
                x: p[X],
                t: (p.len() > 1).then(|| p[T]),
                prediction: pred,
                exact: u,
                error: pred - u,
            }
        })
        .collect())
}
