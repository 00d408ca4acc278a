//! Phase-based training with loss switching, metric logging and jump analysis.

mod analysis;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use analysis::{
    detect_extrema, detect_stages, log_trend_slope, measure_jump, moving_average, running_median,
    snapshot_prediction, Extremum,
    ExtremumKind, JumpReport, SnapshotRow,
};
pub use output::{
    read_metrics_csv, read_snapshot_csv, write_metrics_csv, write_snapshot_csv, write_spectrum_csv, Manifest,
};

use crate::autodiff::{PointSet, Tracking};
use crate::error::{Error, Result};
use crate::losses::{
    evaluate, value_and_grad, DataLoss, DerivativeSupervisionLoss, LossReport, LossSpec, ModelLoss,
    ModelSets, ModelWeights, Objective, OrderData, PoissonGammaLoss, PointData, RitzLoss,
};
use crate::network::{eval_many, init_glorot_normal, Checkpoint, MlpParams, MlpSpec};
use crate::optimizer::{AdamState, LrSchedule};
use crate::pde::{linspace, Problem, Region, Sampling, X};
use crate::rng::{streams, Rng};
use crate::spectral::{error_spectrum, SpectrumReport};

fn default_boundary() -> Sampling {
    Sampling::Equidistant { n_x: 2, n_t: 50 }
}

fn default_initial() -> Sampling {
    Sampling::Equidistant { n_x: 100, n_t: 1 }
}

/// Point sets used by one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSampling {
    /// Data-loss training points, and residual/Ritz collocation points.
    pub interior: Sampling,
    #[serde(default = "default_boundary")]
    pub boundary: Sampling,
    #[serde(default = "default_initial")]
    pub initial: Sampling,
    /// Redraw all Monte Carlo sets every epoch.
    #[serde(default)]
    pub resample: bool,
    /// Extra points supervised with the reference solution.
    #[serde(default)]
    pub supervised: Vec<Vec<f64>>,
}

impl PhaseSampling {
    pub fn new(interior: Sampling) -> Self {
        Self {
            interior,
            boundary: default_boundary(),
            initial: default_initial(),
            resample: false,
            supervised: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPhase {
    pub loss: LossSpec,
    pub epochs: usize,
    pub lr: LrSchedule,
    pub sampling: PhaseSampling,
}

/// Equidistant evaluation grid over the whole domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestGrid {
    pub n_x: usize,
    #[serde(default = "one")]
    pub n_t: usize,
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

fn five_hundred() -> usize {
    500
}

fn thousand() -> usize {
    1000
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Row every `cadence` epochs.
    #[serde(default = "ten")]
    pub cadence: usize,
    /// Every epoch within this distance of a phase boundary is logged.
    #[serde(default = "five_hundred")]
    pub dense_window: usize,
    /// Error spectra on the test grid every this many epochs (and at every
    /// phase boundary and at the end); `None` disables them.
    #[serde(default)]
    pub spectrum_every: Option<usize>,
    /// Weights of the monitored model loss; defaults to those of the first
    /// model phase, else all ones.
    #[serde(default)]
    pub monitor_weights: Option<ModelWeights>,
    /// Sampling of the monitored model loss; defaults to the first model
    /// phase's sampling (first draw), else the first phase's.
    #[serde(default)]
    pub monitor_sampling: Option<PhaseSampling>,
    /// Epochs at which test-grid predictions are kept.
    #[serde(default)]
    pub snapshot_epochs: Vec<usize>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            cadence: 10,
            dense_window: 500,
            spectrum_every: None,
            monitor_weights: None,
            monitor_sampling: None,
            snapshot_epochs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub problem: Problem,
    pub network: MlpSpec,
    pub seed: u64,
    pub phases: Vec<TrainPhase>,
    pub test_grid: TestGrid,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Fresh Adam moments at every phase start.
    #[serde(default = "yes")]
    pub reset_optimizer: bool,
    #[serde(default = "thousand")]
    pub checkpoint_every: usize,
}

impl TrainSchedule {
    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }

    /// Global epoch at which each phase starts.
    pub fn phase_starts(&self) -> Vec<usize> {
        let mut acc = 0;
        self.phases
            .iter()
            .map(|p| {
                let s = acc;
                acc += p.epochs;
                s
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("schedule needs at least one phase"));
        }
        self.network.validate()?;
        if self.network.input_dim != self.problem.input_dim() {
            return Err(Error::config(format!(
                "network takes {} inputs but {} has {}",
                self.network.input_dim,
                self.problem.kind,
                self.problem.input_dim()
            )));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.epochs == 0 {
                return Err(Error::config(format!("phase {i} has zero epochs")));
            }
            p.loss.validate(&self.problem)?;
            p.lr.validate()?;
            validate_sampling(&self.problem, &p.sampling)?;
        }
        if let Some(s) = &self.metrics.monitor_sampling {
            validate_sampling(&self.problem, s)?;
        }
        if let Some(w) = &self.metrics.monitor_weights {
            w.validate()?;
        }
        if self.metrics.cadence == 0 || self.checkpoint_every == 0 {
            return Err(Error::config("metric cadence and checkpoint interval must be >= 1"));
        }
        if self.metrics.spectrum_every == Some(0) {
            return Err(Error::config("spectrum interval must be >= 1"));
        }
        if self.test_grid.n_x < 5 || self.test_grid.n_t == 0 {
            return Err(Error::config("test grid needs n_x >= 5 and n_t >= 1"));
        }
        Ok(())
    }

    fn monitor_weights(&self) -> ModelWeights {
        self.metrics.monitor_weights.unwrap_or_else(|| {
            self.phases
                .iter()
                .find_map(|p| match &p.loss {
                    LossSpec::Model { weights } => Some(*weights),
                    _ => None,
                })
                .unwrap_or_default()
        })
    }

    fn monitor_sampling(&self) -> PhaseSampling {
        self.metrics.monitor_sampling.clone().unwrap_or_else(|| {
            self.phases
                .iter()
                .find(|p| matches!(p.loss, LossSpec::Model { .. }))
                .unwrap_or(&self.phases[0])
                .sampling
                .clone()
        })
    }
}

fn validate_sampling(problem: &Problem, s: &PhaseSampling) -> Result<()> {
    let dim = problem.input_dim();
    for p in &s.supervised {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    if s.resample && !matches!(s.interior, Sampling::MonteCarlo { .. }) {
        return Err(Error::config("per-epoch resampling needs a monte_carlo interior scheme"));
    }
    Ok(())
}

/// Sets and targets of one phase at one epoch.
struct PhaseData {
    interior: PointSet,
    data: PointData,
    sets: ModelSets,
    orders: Vec<OrderData>,
}

fn draw(problem: &Problem, s: Sampling, region: Region, rng: Option<&mut Rng>) -> Result<PointSet> {
    match (s, rng) {
        (Sampling::MonteCarlo { n, .. }, Some(rng)) => problem.sample_random(n, region, rng),
        _ => problem.sample_points(s, region),
    }
}

fn boundary_data(problem: &Problem, points: PointSet) -> PointData {
    let tdim = problem.input_dim() > 1;
    PointData::from_fn(points, |p| problem.boundary(p[X], if tdim { p[1] } else { 0.0 }))
}

fn build_phase_data(
    problem: &Problem,
    loss: &LossSpec,
    s: &PhaseSampling,
    mut rng: Option<&mut Rng>,
) -> Result<PhaseData> {
    let interior = draw(problem, s.interior, Region::Interior, rng.as_deref_mut())?;
    let needs_targets = matches!(loss, LossSpec::Data);
    let data = if needs_targets {
        PointData::new(interior.clone(), problem.targets(&interior)?)?
    } else {
        PointData::new(PointSet::new(interior.dim()), Vec::new())?
    };
    let boundary = draw(problem, s.boundary, Region::Boundary, rng.as_deref_mut())?;
    let initial = if problem.is_stationary() {
        None
    } else {
        let pts = draw(problem, s.initial, Region::Initial, rng.as_deref_mut())?;
        Some(PointData::from_fn(pts, |p| problem.initial(p[X]).unwrap_or(f64::NAN)))
    };
    let supervised = if s.supervised.is_empty() {
        None
    } else {
        let pts = PointSet::from_points(problem.input_dim(), &s.supervised)?;
        let t = problem.targets(&pts)?;
        Some(PointData::new(pts, t)?)
    };
    let mut orders = Vec::new();
    if let LossSpec::DerivativeSupervision { lambdas } = loss {
        let tracking = Tracking::new(&[X], &[(X, X)]);
        for (order, &lambda) in lambdas.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let mut targets = Vec::with_capacity(interior.len());
            for p in interior.iter() {
                let j = problem.exact_jet(p, &tracking)?;
                targets.push(match order {
                    0 => j.value,
                    1 => j.require_d1(X)?,
                    _ => j.require_d2(X, X)?,
                });
            }
            orders.push(OrderData {
                order,
                lambda,
                data: PointData::new(interior.clone(), targets)?,
            });
        }
    }
    Ok(PhaseData {
        interior,
        data,
        sets: ModelSets {
            interior: None,
            initial,
            boundary: Some(boundary_data(problem, boundary)),
            supervised,
        },
        orders,
    })
}

fn with_objective<R>(
    problem: &Problem,
    loss: &LossSpec,
    d: &PhaseData,
    f: impl FnOnce(&dyn Objective) -> Result<R>,
) -> Result<R> {
    match loss {
        LossSpec::Data => f(&DataLoss::new(&d.data)?),
        LossSpec::DerivativeSupervision { .. } => f(&DerivativeSupervisionLoss::new(&d.orders)?),
        LossSpec::Model { weights } => {
            let sets = ModelSets {
                interior: Some(d.interior.clone()),
                ..d.sets.clone()
            };
            f(&ModelLoss::new(problem, *weights, &sets)?)
        }
        LossSpec::Ritz => f(&RitzLoss::for_problem(problem, &d.interior)?),
        LossSpec::PoissonGamma { gamma } => f(&PoissonGammaLoss::new(
            problem,
            &d.interior,
            d.sets.boundary.as_ref(),
            *gamma,
        )?),
    }
}

/// One logged epoch, recording the state before that epoch's update.
///
/// Equality ignores `wall_time`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub phase: usize,
    /// Mean squared error on the test grid.
    pub mse_data: f64,
    /// Relative L2 error on the test grid, the reported data loss.
    pub rel_l2: f64,
    pub model_total: f64,
    pub term_residual: Option<f64>,
    pub term_initial: Option<f64>,
    pub term_boundary: Option<f64>,
    pub term_supervised: Option<f64>,
    pub lr: f64,
    /// Seconds since the run started; not written to CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

impl PartialEq for MetricsRow {
    fn eq(&self, o: &Self) -> bool {
        (self.epoch, self.phase) == (o.epoch, o.phase)
            && self.mse_data.to_bits() == o.mse_data.to_bits()
            && self.rel_l2.to_bits() == o.rel_l2.to_bits()
            && self.model_total.to_bits() == o.model_total.to_bits()
            && self.term_residual.map(f64::to_bits) == o.term_residual.map(f64::to_bits)
            && self.term_initial.map(f64::to_bits) == o.term_initial.map(f64::to_bits)
            && self.term_boundary.map(f64::to_bits) == o.term_boundary.map(f64::to_bits)
            && self.term_supervised.map(f64::to_bits) == o.term_supervised.map(f64::to_bits)
            && self.lr.to_bits() == o.lr.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub epoch: usize,
    pub from_phase: usize,
    pub to_phase: usize,
    pub from_loss: String,
    pub to_loss: String,
    pub pre_rel_l2: f64,
    /// Data loss after the first update of the new phase.
    pub post_rel_l2: Option<f64>,
}

/// Test-grid reference used for data metrics and spectra.
pub struct TestSet {
    pub points: PointSet,
    pub targets: Vec<f64>,
    pub n_x: usize,
    pub n_t: usize,
}

impl TestSet {
    pub fn new(problem: &Problem, grid: TestGrid) -> Result<Self> {
        let n_t = if problem.is_stationary() { 1 } else { grid.n_t };
        let points = problem.sample_points(
            Sampling::Equidistant {
                n_x: grid.n_x,
                n_t,
            },
            Region::Interior,
        )?;
        let targets = problem.targets(&points)?;
        if let Some(bad) = targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                op: "reference solution on the test grid".into(),
                value: *bad,
            });
        }
        Ok(Self {
            points,
            targets,
            n_x: grid.n_x,
            n_t,
        })
    }

    /// `(mse, relative L2)` of a network against the reference.
    pub fn errors(&self, params: &MlpParams) -> Result<(f64, f64, Vec<f64>)> {
        let pred = eval_many(params, &self.points)?;
        let err: Vec<f64> = pred.iter().zip(&self.targets).map(|(p, u)| p - u).collect();
        let sq: f64 = err.iter().map(|e| e * e).sum();
        let norm: f64 = self.targets.iter().map(|u| u * u).sum();
        let mse = sq / err.len() as f64;
        let rel = if norm > 0.0 { (sq / norm).sqrt() } else { sq.sqrt() };
        Ok((mse, rel, err))
    }

    /// Error spectra along x, one per time level.
    pub fn spectra(&self, problem: &Problem, errors: &[f64], epoch: usize) -> Result<Vec<SpectrumReport>> {
        let (lo, hi) = problem.space_domain();
        let xs: Vec<f64> = linspace(lo, hi, self.n_x).collect();
        let times: Vec<Option<f64>> = match problem.time_domain() {
            None => vec![None],
            Some((t0, t1)) => linspace(t0, t1, self.n_t).map(Some).collect(),
        };
        let mut out = Vec::with_capacity(times.len());
        for (j, t) in times.into_iter().enumerate() {
            let slice = &errors[j * self.n_x..(j + 1) * self.n_x];
            let mut s = error_spectrum(&xs, slice, hi - lo)?;
            s.epoch = Some(epoch);
            s.time_slice = t;
            out.push(s);
        }
        Ok(out)
    }
}

/// Model-loss monitor evaluated on fixed sets.
struct Monitor {
    weights: ModelWeights,
    sets: ModelSets,
}

impl Monitor {
    fn new(schedule: &TrainSchedule) -> Result<Self> {
        let weights = schedule.monitor_weights();
        let sampling = schedule.monitor_sampling();
        let d = build_phase_data(
            &schedule.problem,
            &LossSpec::Model { weights },
            &sampling,
            None,
        )?;
        Ok(Self {
            weights,
            sets: ModelSets {
                interior: Some(d.interior),
                ..d.sets
            },
        })
    }

    fn report(&self, problem: &Problem, params: &MlpParams) -> Result<LossReport> {
        let loss = ModelLoss::new(problem, self.weights, &self.sets)?;
        evaluate(&loss, params)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Continue from a checkpoint taken by an earlier run of the same schedule.
    pub resume: Option<Checkpoint>,
    /// Directory for periodic checkpoint files.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop after this global epoch (exclusive), leaving a checkpoint.
    pub stop_at: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub params: MlpParams,
    pub optimizer: AdamState,
    pub metrics: Vec<MetricsRow>,
    pub spectra: Vec<SpectrumReport>,
    pub switches: Vec<SwitchEvent>,
    pub snapshots: Vec<(usize, Vec<SnapshotRow>)>,
    pub checkpoints: Vec<PathBuf>,
    pub last_checkpoint: Checkpoint,
    pub wall_time: f64,
}

pub fn checkpoint_path(dir: &std::path::Path, epoch: usize) -> PathBuf {
    dir.join(format!("checkpoint_{epoch:07}.json"))
}

/// Trains phase by phase.
pub fn run_schedule(schedule: &TrainSchedule) -> Result<RunOutput> {
    run_schedule_with(schedule, &RunOptions::default())
}

pub fn run_schedule_with(schedule: &TrainSchedule, opts: &RunOptions) -> Result<RunOutput> {
    schedule.validate()?;
    let started = Instant::now();
    let problem = &schedule.problem;
    let starts = schedule.phase_starts();
    let total = schedule.total_epochs();
    let end = opts.stop_at.map_or(total, |s| s.min(total));

    let (mut params, mut adam, first_epoch) = match &opts.resume {
        Some(c) => {
            if c.spec != schedule.network || c.seed != schedule.seed {
                return Err(Error::config("checkpoint does not belong to this schedule"));
            }
            let p = c.to_params()?;
            let n = p.param_count();
            let adam = c.optimizer.clone().unwrap_or_else(|| AdamState::new(n));
            (p, adam, c.epoch.unwrap_or(0))
        }
        None => {
            let p = init_glorot_normal(&schedule.network, schedule.seed)?;
            let n = p.param_count();
            (p, AdamState::new(n), 0)
        }
    };
    if first_epoch > total {
        return Err(Error::config("checkpoint epoch lies beyond the schedule"));
    }

    let test = TestSet::new(problem, schedule.test_grid)?;
    let monitor = Monitor::new(schedule)?;
    let cfg = &schedule.metrics;
    let near_boundary = |e: usize| {
        starts[1..]
            .iter()
            .any(|&b| e.abs_diff(b) <= cfg.dense_window)
    };
    let phase_of = |e: usize| starts.iter().rposition(|&s| s <= e).unwrap_or(0);

    let mut metrics = Vec::new();
    let mut spectra = Vec::new();
    let mut switches: Vec<SwitchEvent> = Vec::new();
    let mut checkpoints = Vec::new();
    let mut snapshots = Vec::new();
    let mut fixed: Option<(usize, PhaseData)> = None;
    let mut last_checkpoint = make_checkpoint(&params, &adam, first_epoch, phase_of(first_epoch));

    let log_row = |epoch: usize, phase: usize, lr: f64, params: &MlpParams| -> Result<(MetricsRow, Vec<f64>)> {
        let (mse, rel, err) = test.errors(params)?;
        let m = monitor.report(problem, params)?;
        let row = MetricsRow {
            epoch,
            phase,
            mse_data: mse,
            rel_l2: rel,
            model_total: m.total,
            term_residual: m.term("residual"),
            term_initial: m.term("initial"),
            term_boundary: m.term("boundary"),
            term_supervised: m.term("supervised"),
            lr,
            wall_time: started.elapsed().as_secs_f64(),
        };
        for (name, v) in [("mse", mse), ("model loss", m.total)] {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    op: format!("{name} at epoch {epoch}"),
                    value: v,
                });
            }
        }
        Ok((row, err))
    };

    for epoch in first_epoch..end {
        let p = phase_of(epoch);
        let phase = &schedule.phases[p];
        let local = epoch - starts[p];
        if local == 0 && (schedule.reset_optimizer || p == 0) {
            adam.reset();
        }
        let lr = phase.lr.lr_at(local);

        let boundary = local == 0 && p > 0;
        if cfg.snapshot_epochs.contains(&epoch) {
            snapshots.push((epoch, snapshot_prediction(&params, problem, &test.points)?));
        }
        if epoch % cfg.cadence == 0 || near_boundary(epoch) || epoch == first_epoch {
            let (row, err) = log_row(epoch, p, lr, &params).map_err(|e| abort(epoch, e, &last_checkpoint))?;
            if boundary && !switches.iter().any(|s| s.epoch == epoch) {
                switches.push(SwitchEvent {
                    epoch,
                    from_phase: p - 1,
                    to_phase: p,
                    from_loss: schedule.phases[p - 1].loss.name().to_string(),
                    to_loss: phase.loss.name().to_string(),
                    pre_rel_l2: row.rel_l2,
                    post_rel_l2: None,
                });
            }
            if let Some(s) = switches.last_mut() {
                if s.epoch + 1 == epoch {
                    s.post_rel_l2 = Some(row.rel_l2);
                }
            }
            let spectrum_due = cfg
                .spectrum_every
                .is_some_and(|every| epoch % every == 0 || local == 0);
            if spectrum_due {
                spectra.extend(test.spectra(problem, &err, epoch)?);
            }
            metrics.push(row);
        }

        if epoch % schedule.checkpoint_every == 0 || local == 0 {
            last_checkpoint = make_checkpoint(&params, &adam, epoch, p);
            if let Some(dir) = &opts.checkpoint_dir {
                let path = checkpoint_path(dir, epoch);
                last_checkpoint.save(&path)?;
                checkpoints.push(path);
            }
        }

        let step = (|| -> Result<()> {
            if phase.sampling.resample {
                let mut rng = Rng::with_stream(schedule.seed, streams::EPOCH_BASE + epoch as u64);
                let d = build_phase_data(problem, &phase.loss, &phase.sampling, Some(&mut rng))?;
                fixed = Some((p, d));
            } else if fixed.as_ref().map(|(fp, _)| *fp) != Some(p) {
                fixed = Some((p, build_phase_data(problem, &phase.loss, &phase.sampling, None)?));
            }
            let data = &fixed.as_ref().expect("phase data").1;
            let (report, grad) = with_objective(problem, &phase.loss, data, |obj| value_and_grad(obj, &params))?;
            if !report.total.is_finite() {
                return Err(Error::Numeric {
                    op: format!("{} loss", phase.loss.name()),
                    value: report.total,
                });
            }
            let mut flat = params.to_flat();
            adam.step(&mut flat, &grad.0, lr)?;
            params.set_flat(&flat)
        })();
        step.map_err(|e| abort(epoch, e, &last_checkpoint))?;
    }

    let last_phase = phase_of(end.saturating_sub(1).max(first_epoch));
    if end == total && cfg.snapshot_epochs.contains(&end) {
        snapshots.push((end, snapshot_prediction(&params, problem, &test.points)?));
    }
    if end == total {
        let lr = {
            let ph = &schedule.phases[last_phase];
            ph.lr.lr_at(end - starts[last_phase])
        };
        let (row, err) = log_row(end, last_phase, lr, &params).map_err(|e| abort(end, e, &last_checkpoint))?;
        if let Some(s) = switches.last_mut() {
            if s.epoch + 1 == end {
                s.post_rel_l2 = Some(row.rel_l2);
            }
        }
        if cfg.spectrum_every.is_some() {
            spectra.extend(test.spectra(problem, &err, end)?);
        }
        metrics.push(row);
    }
    last_checkpoint = make_checkpoint(&params, &adam, end, phase_of(end.min(total.saturating_sub(1))));
    if let Some(dir) = &opts.checkpoint_dir {
        let path = checkpoint_path(dir, end);
        last_checkpoint.save(&path)?;
        checkpoints.push(path);
    }
    Ok(RunOutput {
        params,
        optimizer: adam,
        metrics,
        spectra,
        switches,
        snapshots,
        checkpoints,
        last_checkpoint,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn make_checkpoint(params: &MlpParams, adam: &AdamState, epoch: usize, phase: usize) -> Checkpoint {
    let mut c = Checkpoint::new(params);
    c.epoch = Some(epoch);
    c.phase = Some(phase);
    c.optimizer = Some(adam.clone());
    c
}

fn abort(epoch: usize, e: Error, last: &Checkpoint) -> Error {
    match e {
        Error::Numeric { .. } => Error::Aborted {
            epoch,
            reason: e.to_string(),
            last_checkpoint: Some(Box::new(last.clone())),
        },
        other => other,
    }
}

/// Model-loss report of the monitor used by `run_schedule`, for checks
/// against logged values.
pub fn monitor_report(schedule: &TrainSchedule, params: &MlpParams) -> Result<LossReport> {
    Monitor::new(schedule)?.report(&schedule.problem, params)
}
