//! Fast self-checks: derivative oracles, exact residuals, DFT identities and
//! kernel positivity.

use std::f64::consts::PI;

use serde::Serialize;

use crate::autodiff::{finite_diff_oracle, forward_batch, forward_jet, PointSet, Tracking};
use crate::error::Result;
use crate::losses::{
    evaluate, value_and_grad, DataLoss, DerivativeSupervisionLoss, ModelLoss, ModelSets, ModelWeights,
    Objective, OrderData, PoissonGammaLoss, PointData, RitzLoss,
};
use crate::network::{eval, init_glorot_normal, Activation, MlpParams, MlpSpec};
use crate::pde::{linspace, Problem, ProblemKind, Region, Sampling};
use crate::rng::{streams, Rng};
use crate::spectral::{amplitude_spectrum, dft};
use crate::theory::{DiagonalKernel, KernelMethod, ParamDistribution};

/// Central-difference step for the jet comparisons.
pub const FD_STEP: f64 = 1e-5;

/// Step of the Richardson-extrapolated central differences used for
/// parameter gradients.
pub const PARAM_FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    Data,
    DerivativeSupervision,
    Model,
    Ritz,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleDraw {
    pub family: LossFamily,
    pub loss: &'static str,
    pub problem: ProblemKind,
    pub hidden: Vec<usize>,
    pub points: usize,
    /// Largest relative deviation of the parameter gradient from central differences.
    pub param_err: f64,
    /// Largest relative deviation of first and second input derivatives.
    pub jet_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub draws: Vec<OracleDraw>,
}

impl OracleReport {
    pub fn max_param_err(&self) -> f64 {
        self.draws.iter().map(|d| d.param_err).fold(0.0, f64::max)
    }

    pub fn max_jet_err(&self) -> f64 {
        self.draws.iter().map(|d| d.jet_err).fold(0.0, f64::max)
    }

    pub fn families(&self) -> Vec<LossFamily> {
        let mut f: Vec<LossFamily> = Vec::new();
        for d in &self.draws {
            if !f.contains(&d.family) {
                f.push(d.family);
            }
        }
        f
    }
}

/// `max_i |a_i - b_i| / max(|b_i|, 1e-3 max_j |b_j|)`.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-3 * scale))
        .fold(0.0, f64::max)
}

fn param_error(obj: &dyn Objective, params: &MlpParams, step: f64) -> Result<f64> {
    let (_, g) = value_and_grad(obj, params)?;
    let mut probe = params.clone();
    let mut central = |h: f64| {
        finite_diff_oracle(
            |x| {
                probe.set_flat(x).expect("same length");
                evaluate(obj, &probe).map(|r| r.total).unwrap_or(f64::NAN)
            },
            &params.to_flat(),
            h,
        )
    };
    let (fine, coarse) = (central(step), central(2.0 * step));
    let fd: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
    Ok(relative_error(&g.0, &fd))
}

/// Compares first derivatives with differences of the value and second
/// derivatives with differences of the first.
pub fn jet_error(params: &MlpParams, points: &PointSet) -> Result<f64> {
    let dim = points.dim();
    let full = Tracking::full(dim);
    let jets = forward_batch(params, points, &full)?;
    let first = Tracking::new(&(0..dim).collect::<Vec<_>>(), &[]);
    let (mut an1, mut fd1, mut an2, mut fd2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, p) in points.iter().enumerate() {
        let jet = jets.jet(i);
        for a in 0..dim {
            an1.push(jet.require_d1(a)?);
            fd1.push(finite_diff_oracle(|x| eval(params, x).unwrap_or(f64::NAN), p, FD_STEP)[a]);
            let d1a = finite_diff_oracle(
                |x| {
                    forward_jet(params, x, &first)
                        .and_then(|j| j.require_d1(a))
                        .unwrap_or(f64::NAN)
                },
                p,
                FD_STEP,
            );
            for (b, v) in d1a.into_iter().enumerate() {
                an2.push(jet.require_d2(a, b)?);
                fd2.push(v);
            }
        }
    }
    Ok(relative_error(&an1, &fd1).max(relative_error(&an2, &fd2)))
}

fn random_data(problem: &Problem, n: usize, region: Region, rng: &mut Rng) -> Result<PointData> {
    let pts = problem.sample_random(n, region, rng)?;
    let targets = (0..n).map(|_| rng.normal()).collect();
    PointData::new(pts, targets)
}

/// Random (network, points, loss) draws cycling through the four loss
/// families, each checked against central differences.
///
/// With `fault` the networks use a tanh whose second derivative is
/// deliberately wrong by a relative `1e-3`.
pub fn gradient_oracle(draws: usize, seed: u64, fault: bool) -> Result<OracleReport> {
    gradient_oracle_with_step(draws, seed, fault, PARAM_FD_STEP)
}

/// [`gradient_oracle`] with a different central-difference step for the
/// parameter gradients.
pub fn gradient_oracle_with_step(draws: usize, seed: u64, fault: bool, step: f64) -> Result<OracleReport> {
    let mut rng = Rng::with_stream(seed, streams::CHECKS);
    let mut out = Vec::with_capacity(draws);
    for i in 0..draws {
        let family = [
            LossFamily::Data,
            LossFamily::DerivativeSupervision,
            LossFamily::Model,
            LossFamily::Ritz,
        ][i % 4];
        let pick = |rng: &mut Rng, kinds: &[ProblemKind]| {
            kinds[((rng.uniform() * kinds.len() as f64) as usize).min(kinds.len() - 1)]
        };
        let closed = [
            ProblemKind::PoissonToy,
            ProblemKind::Heat,
            ProblemKind::Diffusion,
            ProblemKind::Wave,
        ];
        let kind = match family {
            LossFamily::Data => pick(&mut rng, &ProblemKind::ALL),
            LossFamily::DerivativeSupervision => pick(&mut rng, &closed),
            LossFamily::Model => pick(&mut rng, &ProblemKind::ALL),
            LossFamily::Ritz => ProblemKind::PoissonToy,
        };
        let problem = Problem::new(kind);
        let activation = if fault {
            Activation::FaultyTanh
        } else if family == LossFamily::Data && rng.uniform() < 0.5 {
            Activation::Cubic
        } else {
            Activation::Tanh
        };
        let layers = 1 + (rng.uniform() < 0.5) as usize;
        let hidden: Vec<usize> = (0..layers).map(|_| 3 + (rng.uniform() * 6.0) as usize).collect();
        let spec = MlpSpec::new(problem.input_dim(), hidden.clone(), activation);
        let mut params = init_glorot_normal(&spec, seed.wrapping_add(i as u64))?;
        for l in &mut params.layers {
            for b in &mut l.bias {
                *b = 0.5 * rng.normal();
            }
        }
        let n = 3 + (rng.uniform() * 4.0) as usize;
        let interior = problem.sample_random(n, Region::Interior, &mut rng)?;

        let (loss, param_err) = match family {
            LossFamily::Data => {
                let d = PointData::new(interior.clone(), (0..n).map(|_| rng.normal()).collect())?;
                ("data", param_error(&DataLoss::new(&d)?, &params, step)?)
            }
            LossFamily::DerivativeSupervision => {
                let orders: Vec<OrderData> = (0..3)
                    .map(|order| {
                        Ok(OrderData {
                            order,
                            lambda: 0.5 + rng.uniform(),
                            data: PointData::new(interior.clone(), (0..n).map(|_| rng.normal()).collect())?,
                        })
                    })
                    .collect::<Result<_>>()?;
                (
                    "derivative_supervision",
                    param_error(&DerivativeSupervisionLoss::new(&orders)?, &params, step)?,
                )
            }
            LossFamily::Model if i % 8 == 6 && problem.is_stationary() => {
                let b = random_data(&problem, 2, Region::Boundary, &mut rng)?;
                (
                    "poisson_gamma",
                    param_error(&PoissonGammaLoss::new(&problem, &interior, Some(&b), 5.0)?, &params, step)?,
                )
            }
            LossFamily::Model => {
                let w = ModelWeights::new(
                    0.5 + rng.uniform(),
                    0.5 + rng.uniform(),
                    0.5 + rng.uniform(),
                    0.5 + rng.uniform(),
                );
                let sets = ModelSets {
                    interior: Some(interior.clone()),
                    initial: if problem.is_stationary() {
                        None
                    } else {
                        Some(random_data(&problem, 3, Region::Initial, &mut rng)?)
                    },
                    boundary: Some(random_data(&problem, 2, Region::Boundary, &mut rng)?),
                    supervised: Some(random_data(&problem, 2, Region::Interior, &mut rng)?),
                };
                ("model", param_error(&ModelLoss::new(&problem, w, &sets)?, &params, step)?)
            }
            LossFamily::Ritz => ("ritz", param_error(&RitzLoss::for_problem(&problem, &interior)?, &params, step)?),
        };
        let jet_err = jet_error(&params, &interior)?;
        out.push(OracleDraw {
            family,
            loss,
            problem: kind,
            hidden,
            points: n,
            param_err,
            jet_err,
        });
    }
    Ok(OracleReport { draws: out })
}

/// Largest `|residual|` of the closed-form solution on 200 grid points
/// (200 in space, or 20 × 10 in space-time).
pub fn exact_residual_max(problem: &Problem) -> Result<f64> {
    let sampling = if problem.is_stationary() {
        Sampling::Equidistant { n_x: 200, n_t: 1 }
    } else {
        Sampling::Equidistant { n_x: 20, n_t: 10 }
    };
    let pts = problem.sample_points(sampling, Region::Interior)?;
    let tracking = problem.residual_tracking();
    let mut worst = 0.0f64;
    for p in pts.iter() {
        let jet = problem.exact_jet(p, &tracking)?;
        worst = worst.max(problem.residual_at(&jet, p)?.abs());
    }
    Ok(worst)
}

/// Relative violation of `Σ|x|² = (1/N) Σ|X_k|²` for a random signal.
pub fn parseval_error(n: usize, seed: u64) -> f64 {
    let mut rng = Rng::with_stream(seed, streams::CHECKS);
    let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let time: f64 = x.iter().map(|v| v * v).sum();
    let freq: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    (time - freq).abs() / time
}

/// Largest deviation of the amplitude spectrum of `c sin(kx + φ)` from `c δ_k`.
pub fn single_mode_error(n: usize, k: usize, amplitude: f64, phase: f64) -> Result<f64> {
    let x: Vec<f64> = linspace(0.0, 2.0 * PI, n + 1)
        .take(n)
        .map(|x| amplitude * (k as f64 * x + phase).sin())
        .collect();
    let a = amplitude_spectrum(&x)?;
    Ok(a.iter()
        .enumerate()
        .map(|(j, v)| (v - if j == k { amplitude } else { 0.0 }).abs())
        .fold(0.0, f64::max))
}

/// Smallest solution-kernel value on `ξ = k / 2π`, `k = 1..=20`, at `γ = 1`.
pub fn min_solution_kernel() -> Result<f64> {
    let xi: Vec<f64> = (1..=20).map(|k| k as f64 / (2.0 * PI)).collect();
    let k = DiagonalKernel::compute(
        &xi,
        1.0,
        &ParamDistribution::default(),
        KernelMethod::Quadrature { nodes: 256 },
    )?;
    Ok(k.solution.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// The fast invariant suite.
pub fn run_fast_checks(fault: bool) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(result(
        "gradient_oracle",
        gradient_oracle(40, 17, fault).map(|r| {
            let (p, j) = (r.max_param_err(), r.max_jet_err());
            (
                p < 1e-5 && j < 1e-5,
                format!("{} draws, max param err {p:.2e}, max jet err {j:.2e}", r.draws.len()),
            )
        }),
    ));
    out.push(result(
        "exact_residuals",
        (|| {
            let mut worst = 0.0f64;
            for kind in [
                ProblemKind::PoissonToy,
                ProblemKind::Heat,
                ProblemKind::Diffusion,
                ProblemKind::Wave,
            ] {
                worst = worst.max(exact_residual_max(&Problem::new(kind))?);
            }
            Ok((worst < 1e-8, format!("max |residual| {worst:.2e}")))
        })(),
    ));
    out.push(result(
        "dft_oracles",
        (|| {
            let p = [64, 100, 257].iter().map(|&n| parseval_error(n, n as u64)).fold(0.0, f64::max);
            let s = single_mode_error(128, 7, 1.3, 0.4)?.max(single_mode_error(64, 1, 1.0, 0.0)?);
            Ok((
                p < 1e-9 && s < 1e-10,
                format!("parseval {p:.2e}, single mode {s:.2e}"),
            ))
        })(),
    ));
    out.push(result(
        "kernel_positivity",
        min_solution_kernel().map(|m| (m > 0.0, format!("min solution kernel {m:.3e}"))),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((relative_error(&[1.0, 1e-3], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_oracle_run_passes_and_fault_is_caught() {
        let ok = gradient_oracle(8, 5, false).unwrap();
        assert!(ok.max_param_err() < 1e-5 && ok.max_jet_err() < 1e-5);
        assert_eq!(ok.families().len(), 4);
        let bad = gradient_oracle(8, 5, true).unwrap();
        assert!(bad.max_jet_err() > 1e-5);
    }
}
