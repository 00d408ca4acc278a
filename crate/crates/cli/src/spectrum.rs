use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use lossjump::experiment::{read_snapshot_csv, write_spectrum_csv, Manifest};
use lossjump::spectral::{error_spectrum, SpectrumReport};

use crate::CliError;

#[derive(Args)]
pub struct SpectrumArgs {
    /// Run directory holding manifest.json and snapshots.csv.
    pub run_dir: PathBuf,
    /// Output file; defaults to `<run_dir>/spectrum_snapshots.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn spectrum(args: SpectrumArgs) -> Result<ExitCode, CliError> {
    let manifest = Manifest::load(&args.run_dir.join("manifest.json")).map_err(CliError::from_core)?;
    let snapshots = read_snapshot_csv(&args.run_dir.join("snapshots.csv")).map_err(CliError::from_core)?;
    let (lo, hi) = manifest.schedule.problem.space_domain();
    let mut reports = Vec::new();
    for (epoch, rows) in &snapshots {
        let mut start = 0;
        while start < rows.len() {
            let t = rows[start].t;
            let end = rows[start..].iter().position(|r| r.t != t).map_or(rows.len(), |p| start + p);
            let xs: Vec<f64> = rows[start..end].iter().map(|r| r.x).collect();
            let err: Vec<f64> = rows[start..end].iter().map(|r| r.error).collect();
            let mut s: SpectrumReport = error_spectrum(&xs, &err, hi - lo).map_err(CliError::from_core)?;
            s.epoch = Some(*epoch);
            s.time_slice = t;
            reports.push(s);
            start = end;
        }
    }
    let out = args.out.unwrap_or_else(|| args.run_dir.join("spectrum_snapshots.csv"));
    write_spectrum_csv(&out, &reports).map_err(CliError::from_core)?;
    println!("wrote {} ({} spectra from {} snapshots)", out.display(), reports.len(), snapshots.len());
    Ok(ExitCode::SUCCESS)
}
