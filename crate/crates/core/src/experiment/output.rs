use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricsRow, RunOutput, SnapshotRow, SwitchEvent, TrainSchedule};
use crate::error::{Error, Result};
use crate::spectral::SpectrumReport;

const METRICS_HEADER: &str = "epoch,phase,mse_data,rel_l2,model_total,term_residual,term_initial,term_boundary,term_supervised,lr";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut s = String::new();
    s.push_str(
        "# epoch = optimizer steps taken before the row; mse_data and rel_l2 on the test grid; \
         model_total weighted, term_* unweighted means (blank if absent); lr of the next step\n",
    );
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.phase,
            r.mse_data,
            r.rel_l2,
            r.model_total,
            opt(r.term_residual),
            opt(r.term_initial),
            opt(r.term_boundary),
            opt(r.term_supervised),
            r.lr
        )
        .expect("write to string");
    }
    write(path, &s)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, detail: String| Error::Format {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        Some((i, h)) => return Err(bad(i + 1, format!("unexpected header `{h}`"))),
        None => return Err(bad(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(i + 1, format!("expected 10 fields, got {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse().map_err(|_| bad(i + 1, format!("field {k} `{}`", f[k])))
        };
        let optn = |k: usize| -> Result<Option<f64>> {
            if f[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let int = |k: usize| -> Result<usize> {
            f[k].parse().map_err(|_| bad(i + 1, format!("field {k} `{}`", f[k])))
        };
        rows.push(MetricsRow {
            epoch: int(0)?,
            phase: int(1)?,
            mse_data: num(2)?,
            rel_l2: num(3)?,
            model_total: num(4)?,
            term_residual: optn(5)?,
            term_initial: optn(6)?,
            term_boundary: optn(7)?,
            term_supervised: optn(8)?,
            lr: num(9)?,
            wall_time: 0.0,
        });
    }
    Ok(rows)
}

/// One row per (epoch, time slice, k).
pub fn write_spectrum_csv(path: &Path, spectra: &[SpectrumReport]) -> Result<()> {
    let mut s = String::new();
    s.push_str("# amplitude of the test-grid error at integer frequency k per period (A_0 = |X_0|/N, A_k = 2|X_k|/N); t blank when stationary\n");
    s.push_str("epoch,t,k,amplitude\n");
    for r in spectra {
        for (k, a) in r.amplitudes.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{}",
                r.epoch.map_or_else(String::new, |e| e.to_string()),
                opt(r.time_slice),
                k,
                a
            )
            .expect("write to string");
        }
    }
    write(path, &s)
}

pub fn write_snapshot_csv(path: &Path, snapshots: &[(usize, Vec<SnapshotRow>)]) -> Result<()> {
    let mut s = String::new();
    s.push_str("# network prediction, reference solution and error = prediction - exact on the test grid; t blank when stationary\n");
    s.push_str("epoch,x,t,prediction,exact,error\n");
    for (epoch, rows) in snapshots {
        for r in rows {
            writeln!(s, "{epoch},{},{},{},{},{}", r.x, opt(r.t), r.prediction, r.exact, r.error)
                .expect("write to string");
        }
    }
    write(path, &s)
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<(usize, Vec<SnapshotRow>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, detail: &str| Error::Format {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut out: Vec<(usize, Vec<SnapshotRow>)> = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            continue;
        }
        if !header {
            if line != "epoch,x,t,prediction,exact,error" {
                return Err(bad(i + 1, "unexpected header"));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(i + 1, "expected 6 fields"));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        let epoch: usize = f[0].parse().map_err(|_| bad(i + 1, "bad epoch"))?;
        let row = SnapshotRow {
            x: num(1)?,
            t: if f[2].is_empty() { None } else { Some(num(2)?) },
            prediction: num(3)?,
            exact: num(4)?,
            error: num(5)?,
        };
        match out.last_mut() {
            Some((e, rows)) if *e == epoch => rows.push(row),
            _ => out.push((epoch, vec![row])),
        }
    }
    if !header {
        return Err(bad(1, "empty file"));
    }
    Ok(out)
}

/// Everything needed to rerun and audit a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub code_version: String,
    pub seed: u64,
    /// Effective configuration after defaults.
    pub config: serde_json::Value,
    pub schedule: TrainSchedule,
    pub total_epochs: usize,
    pub wall_time_s: f64,
    pub switch_events: Vec<SwitchEvent>,
    pub discrepancies: Vec<String>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(schedule: &TrainSchedule, config: serde_json::Value, out: &RunOutput) -> Self {
        Self {
            format: "lossjump-manifest".into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed: schedule.seed,
            config,
            schedule: schedule.clone(),
            total_epochs: schedule.total_epochs(),
            wall_time_s: out.wall_time,
            switch_events: out.switches.clone(),
            discrepancies: schedule.problem.discrepancies(),
            files: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        write(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip() {
        let rows = vec![MetricsRow {
            epoch: 3,
            phase: 1,
            mse_data: 0.1 + 0.2,
            rel_l2: 1e-300,
            model_total: 12.5,
            term_residual: Some(1.0 / 3.0),
            term_initial: None,
            term_boundary: Some(0.0),
            term_supervised: None,
            lr: 9.2e-4,
            wall_time: 0.0,
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics_csv(&p, &rows).unwrap();
        assert_eq!(read_metrics_csv(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with('#'));
    }

    #[test]
    fn snapshot_round_trip() {
        let snaps = vec![
            (0, vec![SnapshotRow { x: 0.5, t: Some(0.25), prediction: 1.0, exact: 0.75, error: 0.25 }]),
            (7, vec![SnapshotRow { x: 0.1, t: None, prediction: -2.0, exact: 1e-17, error: -2.0 }]),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_snapshot_csv(&p, &snaps).unwrap();
        assert_eq!(read_snapshot_csv(&p).unwrap(), snaps);
    }
}
