use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::Args;
use lossjump::experiment::{
    checkpoint_path, run_schedule_with, write_metrics_csv, write_snapshot_csv, write_spectrum_csv, Manifest,
    RunOptions,
};
use lossjump::network::Checkpoint;

use crate::config::{resolve, RunConfig, OUTPUT_ROOT_VAR};
use crate::CliError;

#[derive(Args)]
pub struct RunArgs {
    /// TOML run config, or a manifest.json from an earlier run.
    pub config: PathBuf,
    /// Override `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `run.output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint of the same schedule.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this global epoch.
    #[arg(long)]
    pub stop_at: Option<usize>,
    /// Comma-separated seeds, each run in its own process under `<out>/seed_<s>`.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    pub sweep: Vec<u64>,
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from)
}

pub fn run(args: RunArgs) -> Result<ExitCode, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    let root = output_root();
    let out = match &args.out {
        Some(d) => resolve(d, root.as_deref()),
        None => cfg.output_dir(&args.config, root.as_deref()),
    };
    if !args.sweep.is_empty() {
        return sweep(&args, &out);
    }
    let schedule = cfg.schedule()?;
    let ckdir = out.join("checkpoints");
    std::fs::create_dir_all(&ckdir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", ckdir.display())))?;
    let resume = args
        .resume
        .as_deref()
        .map(Checkpoint::load)
        .transpose()
        .map_err(CliError::from_core)?;
    let opts = RunOptions {
        resume,
        checkpoint_dir: Some(ckdir.clone()),
        stop_at: args.stop_at,
    };
    let result = match run_schedule_with(&schedule, &opts) {
        Ok(r) => r,
        Err(lossjump::Error::Aborted {
            epoch,
            reason,
            last_checkpoint,
        }) => {
            let checkpoint = last_checkpoint.and_then(|c| c.epoch).map(|e| checkpoint_path(&ckdir, e));
            return Err(CliError::Aborted {
                message: format!("training aborted at epoch {epoch}: {reason}"),
                checkpoint,
            });
        }
        Err(e) => return Err(CliError::from_core(e)),
    };

    let write = |name: &str, f: &dyn Fn(&Path) -> lossjump::Result<()>| {
        f(&out.join(name)).map_err(CliError::from_core).map(|_| name.to_string())
    };
    let mut files = vec![
        write("metrics.csv", &|p| write_metrics_csv(p, &result.metrics))?,
        write("spectrum.csv", &|p| write_spectrum_csv(p, &result.spectra))?,
        write("snapshots.csv", &|p| write_snapshot_csv(p, &result.snapshots))?,
    ];
    files.extend(result.checkpoints.iter().filter_map(|p| {
        p.strip_prefix(&out).ok().map(|r| r.display().to_string())
    }));
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut manifest = Manifest::new(&schedule, config, &result);
    manifest.files = files;
    manifest.save(&out.join("manifest.json")).map_err(CliError::from_core)?;

    let last = result.metrics.last();
    println!(
        "wrote {} ({} rows, final rel L2 {}, {:.1} s)",
        out.display(),
        result.metrics.len(),
        last.map_or("n/a".into(), |r| format!("{:.4e}", r.rel_l2)),
        result.wall_time
    );
    for s in &result.switches {
        println!(
            "switch at epoch {}: {} -> {}, rel L2 {:.4e}",
            s.epoch, s.from_loss, s.to_loss, s.pre_rel_l2
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &RunArgs, out: &Path) -> Result<ExitCode, CliError> {
    let exe = std::env::current_exe().map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut children = Vec::new();
    for &seed in &args.sweep {
        let dir = out.join(format!("seed_{seed}"));
        let mut cmd = Command::new(&exe);
        cmd.arg("run")
            .arg(&args.config)
            .arg("--seed")
            .arg(seed.to_string())
            .arg("--out")
            .arg(&dir);
        if let Some(n) = args.stop_at {
            cmd.arg("--stop-at").arg(n.to_string());
        }
        let child = cmd
            .spawn()
            .map_err(|e| CliError::Runtime(format!("cannot start run for seed {seed}: {e}")))?;
        children.push((seed, child));
    }
    let mut worst = 0u8;
    for (seed, mut child) in children {
        let status = child.wait().map_err(|e| CliError::Runtime(e.to_string()))?;
        let code = status.code().unwrap_or(1).clamp(0, 255) as u8;
        if code != 0 {
            eprintln!("seed {seed} exited with {code}");
        }
        worst = worst.max(code);
    }
    Ok(ExitCode::from(worst))
}
