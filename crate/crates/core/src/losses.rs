//! Loss families composed on the reverse tape from network jets.
//!
//! Each loss is an [`Objective`]: it names the point sets and jets it needs and
//! records weighted terms on a tape. [`evaluate`] returns the [`LossReport`] for
//! any [`JetField`]; [`value_and_grad`] also returns the exact parameter gradient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{
    evaluate_objective, grad_params, JetField, JetQuery, JetVars, ParamGradient, PointSet, Tape,
    Tracking, Var,
};
use crate::error::{Error, Result};
use crate::network::MlpParams;
use crate::pde::{Problem, X};

/// Points paired with target values.
#[derive(Clone, Debug, PartialEq)]
pub struct PointData {
    pub points: PointSet,
    pub targets: Vec<f64>,
}

impl PointData {
    pub fn new(points: PointSet, targets: Vec<f64>) -> Result<Self> {
        if points.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} targets",
                points.len(),
                targets.len()
            )));
        }
        Ok(Self { points, targets })
    }

    /// Targets from a function of the point.
    pub fn from_fn(points: PointSet, f: impl Fn(&[f64]) -> f64) -> Self {
        let targets = points.iter().map(f).collect();
        Self { points, targets }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Loss value with its named, unweighted terms and their weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
}

impl LossReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }

    /// `Σ weight · term`, which equals `total` up to rounding.
    pub fn weighted_sum(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| self.weights.get(k).copied().unwrap_or(0.0) * v)
            .sum()
    }

    pub fn with_epoch(mut self, epoch: usize) -> Self {
        self.epoch = Some(epoch);
        self
    }
}

/// Recorded terms of a loss under construction.
pub struct Terms<'t> {
    entries: Vec<(String, f64, Var<'t>)>,
}

impl<'t> Terms<'t> {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, weight: f64, term: Var<'t>) {
        self.entries.push((name.into(), weight, term));
    }
}

/// A scalar loss built from network jets on a fixed list of point sets.
pub trait Objective {
    /// Point sets and the jets required on each, in the order `build` reads them.
    fn queries(&self) -> Vec<JetQuery<'_>>;

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()>;
}

fn run_build<'t>(
    obj: &(impl Objective + ?Sized),
    tape: &'t Tape,
    jets: &[JetVars<'t>],
    out: &mut (BTreeMap<String, f64>, BTreeMap<String, f64>),
) -> Result<Var<'t>> {
    let mut terms = Terms::new();
    obj.build(tape, jets, &mut terms)?;
    for (name, w, v) in &terms.entries {
        out.0.insert(name.clone(), v.value());
        out.1.insert(name.clone(), *w);
    }
    Ok(tape.linear_combination(terms.entries.iter().map(|(_, w, v)| (*w, *v))))
}

/// Loss report of `obj` for an arbitrary field, e.g. a closed-form solution.
pub fn evaluate(obj: &(impl Objective + ?Sized), field: &dyn JetField) -> Result<LossReport> {
    let mut out = (BTreeMap::new(), BTreeMap::new());
    let total = evaluate_objective(field, &obj.queries(), |tape, jets| {
        run_build(obj, tape, jets, &mut out)
    })?;
    Ok(LossReport {
        total,
        terms: out.0,
        weights: out.1,
        epoch: None,
    })
}

/// Loss report and parameter gradient of `obj` for a network.
pub fn value_and_grad(
    obj: &(impl Objective + ?Sized),
    params: &MlpParams,
) -> Result<(LossReport, ParamGradient)> {
    let mut out = (BTreeMap::new(), BTreeMap::new());
    let (total, grad) = grad_params(params, &obj.queries(), |tape, jets| {
        run_build(obj, tape, jets, &mut out)
    })?;
    Ok((
        LossReport {
            total,
            terms: out.0,
            weights: out.1,
            epoch: None,
        },
        grad,
    ))
}

fn sum_sq<'t>(tape: &'t Tape, it: impl IntoIterator<Item = Var<'t>>) -> Var<'t> {
    tape.sum(it.into_iter().map(|v| v.square()))
}

fn mean_sq<'t>(tape: &'t Tape, n: usize, it: impl IntoIterator<Item = Var<'t>>) -> Var<'t> {
    sum_sq(tape, it).scale(1.0 / n as f64)
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("weight {name} must be finite and >= 0, got {w}")))
    }
}

/// Mean squared error against targets: `(1/N) Σ (u_θ(x_i) - u_i)²`.
pub struct DataLoss<'a> {
    data: &'a PointData,
    tracking: Tracking,
}

impl<'a> DataLoss<'a> {
    pub fn new(data: &'a PointData) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::config("data loss needs at least one point"));
        }
        Ok(Self {
            data,
            tracking: Tracking::none(),
        })
    }
}

impl Objective for DataLoss<'_> {
    fn queries(&self) -> Vec<JetQuery<'_>> {
        vec![JetQuery::new(&self.data.points, &self.tracking)]
    }

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()> {
        let j = &jets[0];
        let n = j.len();
        let t = mean_sq(tape, n, (0..n).map(|i| j.value(i) - self.data.targets[i]));
        terms.push("data", 1.0, t);
        Ok(())
    }
}

/// One derivative order of a supervision loss, taken along the first coordinate.
#[derive(Clone, Debug)]
pub struct OrderData {
    pub order: usize,
    pub lambda: f64,
    pub data: PointData,
}

/// `Σ_k (λ_k/N_k) Σ_i (∂ₓᵏu_θ(x_i) - ∂ₓᵏu(x_i))²` for orders `k ≤ 2`.
pub struct DerivativeSupervisionLoss<'a> {
    orders: Vec<(&'a OrderData, Tracking)>,
}

impl<'a> DerivativeSupervisionLoss<'a> {
    pub fn new(orders: &'a [OrderData]) -> Result<Self> {
        let mut out = Vec::new();
        for o in orders {
            check_weight(&format!("lambda_{}", o.order), o.lambda)?;
            let tracking = match o.order {
                0 => Tracking::none(),
                1 => Tracking::new(&[X], &[]),
                2 => Tracking::new(&[], &[(X, X)]),
                k => return Err(Error::UnsupportedOrder(k)),
            };
            if o.lambda > 0.0 && o.data.is_empty() {
                return Err(Error::config(format!(
                    "order {} has weight {} but no points",
                    o.order, o.lambda
                )));
            }
            if o.lambda > 0.0 {
                out.push((o, tracking));
            }
        }
        if out.is_empty() {
            return Err(Error::config("derivative supervision needs a positively weighted order"));
        }
        Ok(Self { orders: out })
    }
}

impl Objective for DerivativeSupervisionLoss<'_> {
    fn queries(&self) -> Vec<JetQuery<'_>> {
        self.orders
            .iter()
            .map(|(o, tr)| JetQuery::new(&o.data.points, tr))
            .collect()
    }

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()> {
        for ((o, _), j) in self.orders.iter().zip(jets) {
            let n = j.len();
            let mut diffs = Vec::with_capacity(n);
            for i in 0..n {
                let d = match o.order {
                    0 => j.value(i),
                    1 => j.d1(i, X)?,
                    _ => j.d2(i, X, X)?,
                };
                diffs.push(d - o.data.targets[i]);
            }
            terms.push(format!("order_{}", o.order), o.lambda, mean_sq(tape, n, diffs));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelWeights {
    #[serde(default = "one")]
    pub lambda_f: f64,
    #[serde(default = "one")]
    pub lambda_h: f64,
    #[serde(default = "one")]
    pub lambda_g: f64,
    #[serde(default)]
    pub lambda_s: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.0)
    }
}

impl ModelWeights {
    pub fn new(lambda_f: f64, lambda_h: f64, lambda_g: f64, lambda_s: f64) -> Self {
        Self {
            lambda_f,
            lambda_h,
            lambda_g,
            lambda_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_weight("lambda_f", self.lambda_f)?;
        check_weight("lambda_h", self.lambda_h)?;
        check_weight("lambda_g", self.lambda_g)?;
        check_weight("lambda_s", self.lambda_s)
    }
}

/// Point sets for the model loss.
#[derive(Clone, Debug, Default)]
pub struct ModelSets {
    pub interior: Option<PointSet>,
    pub initial: Option<PointData>,
    pub boundary: Option<PointData>,
    pub supervised: Option<PointData>,
}

/// Mean-squared residual, initial, boundary and supervised terms:
///
/// ```text
/// λ_f/N_f Σ (L u_θ - f)² + λ_h/N_h Σ (u_θ - h)² + λ_g/N_g Σ (u_θ - g)² + λ_s/N_s Σ (u_θ - u)²
/// ```
///
/// Stationary problems have no initial term; `λ_h` is ignored for them.
pub struct ModelLoss<'a> {
    problem: &'a Problem,
    weights: ModelWeights,
    residual_tracking: Tracking,
    none: Tracking,
    interior: Option<&'a PointSet>,
    data_terms: Vec<(&'static str, f64, &'a PointData)>,
}

impl<'a> ModelLoss<'a> {
    pub fn new(problem: &'a Problem, weights: ModelWeights, sets: &'a ModelSets) -> Result<Self> {
        weights.validate()?;
        let required = |name: &str, w: f64, present: bool| -> Result<()> {
            if w > 0.0 && !present {
                Err(Error::config(format!(
                    "model loss term `{name}` has weight {w} but no point set"
                )))
            } else {
                Ok(())
            }
        };
        let nonempty = |s: Option<&PointData>| s.is_some_and(|d| !d.is_empty());
        required(
            "residual",
            weights.lambda_f,
            sets.interior.as_ref().is_some_and(|p| !p.is_empty()),
        )?;
        if !problem.is_stationary() {
            required("initial", weights.lambda_h, nonempty(sets.initial.as_ref()))?;
        }
        required("boundary", weights.lambda_g, nonempty(sets.boundary.as_ref()))?;
        required("supervised", weights.lambda_s, nonempty(sets.supervised.as_ref()))?;

        let mut data_terms = Vec::new();
        let slots: [(&'static str, f64, Option<&'a PointData>); 3] = [
            (
                "initial",
                if problem.is_stationary() { 0.0 } else { weights.lambda_h },
                sets.initial.as_ref(),
            ),
            ("boundary", weights.lambda_g, sets.boundary.as_ref()),
            ("supervised", weights.lambda_s, sets.supervised.as_ref()),
        ];
        for (name, w, set) in slots {
            if let Some(d) = set.filter(|d| w > 0.0 && !d.is_empty()) {
                data_terms.push((name, w, d));
            }
        }
        let interior = sets.interior.as_ref().filter(|p| weights.lambda_f > 0.0 && !p.is_empty());
        if interior.is_none() && data_terms.is_empty() {
            return Err(Error::config("model loss has no weighted term"));
        }
        Ok(Self {
            problem,
            weights,
            residual_tracking: problem.residual_tracking(),
            none: Tracking::none(),
            interior,
            data_terms,
        })
    }
}

impl Objective for ModelLoss<'_> {
    fn queries(&self) -> Vec<JetQuery<'_>> {
        let mut q = Vec::new();
        if let Some(p) = self.interior {
            q.push(JetQuery::new(p, &self.residual_tracking));
        }
        for (_, _, d) in &self.data_terms {
            q.push(JetQuery::new(&d.points, &self.none));
        }
        q
    }

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()> {
        let mut k = 0;
        if let Some(p) = self.interior {
            let j = &jets[0];
            let mut res = Vec::with_capacity(j.len());
            for (i, pt) in p.iter().enumerate() {
                res.push(self.problem.residual_var(tape, j, i, pt)?);
            }
            terms.push("residual", self.weights.lambda_f, mean_sq(tape, j.len(), res));
            k = 1;
        }
        for ((name, w, d), j) in self.data_terms.iter().zip(&jets[k..]) {
            let n = j.len();
            let t = mean_sq(tape, n, (0..n).map(|i| j.value(i) - d.targets[i]));
            terms.push(*name, *w, t);
        }
        Ok(())
    }
}

/// Deep Ritz energy `(1/N) Σ (½|∇u_θ|² - f u_θ)` over interior points.
///
/// `f` is the right-hand side of `-Δu = f`; for a problem `Δu = s` it is
/// `-s`, so the exact solution is a stationary point.
pub struct RitzLoss<'a> {
    points: &'a PointSet,
    f: Vec<f64>,
    tracking: Tracking,
}

impl<'a> RitzLoss<'a> {
    /// Ritz loss of a stationary problem.
    pub fn for_problem(problem: &Problem, points: &'a PointSet) -> Result<Self> {
        if !problem.is_stationary() {
            return Err(Error::config(format!(
                "ritz loss needs a stationary problem, {} is time dependent",
                problem.kind
            )));
        }
        let f = points
            .iter()
            .map(|p| problem.source_at(p).map(|s| -s))
            .collect::<Result<Vec<_>>>()?;
        Self::with_source(points, f)
    }

    /// Ritz loss with explicit values of `f` at each point.
    pub fn with_source(points: &'a PointSet, f: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("ritz loss needs at least one point"));
        }
        if f.len() != points.len() {
            return Err(Error::ShapeMismatch("one source value per point".into()));
        }
        let dirs: Vec<usize> = (0..points.dim()).collect();
        Ok(Self {
            points,
            f,
            tracking: Tracking::new(&dirs, &[]),
        })
    }
}

impl Objective for RitzLoss<'_> {
    fn queries(&self) -> Vec<JetQuery<'_>> {
        vec![JetQuery::new(self.points, &self.tracking)]
    }

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()> {
        let j = &jets[0];
        let n = j.len();
        let mut energy = Vec::with_capacity(n);
        for i in 0..n {
            let mut grad_sq = Vec::with_capacity(self.points.dim());
            for d in 0..self.points.dim() {
                grad_sq.push(j.d1(i, d)?.square());
            }
            let g = tape.sum(grad_sq);
            energy.push(tape.linear_combination([(0.5, g), (-self.f[i], j.value(i))]));
        }
        terms.push("ritz", 1.0, tape.sum(energy).scale(1.0 / n as f64));
        Ok(())
    }
}

/// Unnormalized balance loss
/// `½ Σ_{S₁} (L u_θ - f)² + γ · ½ Σ_{S₂} (u_θ - u₀)²`.
pub struct PoissonGammaLoss<'a> {
    problem: &'a Problem,
    s1: &'a PointSet,
    s2: Option<&'a PointData>,
    gamma: f64,
    residual_tracking: Tracking,
    none: Tracking,
}

impl<'a> PoissonGammaLoss<'a> {
    pub fn new(problem: &'a Problem, s1: &'a PointSet, s2: Option<&'a PointData>, gamma: f64) -> Result<Self> {
        check_weight("gamma", gamma)?;
        if s1.is_empty() {
            return Err(Error::config("S1 must be non-empty"));
        }
        if gamma > 0.0 && s2.is_none_or(|d| d.is_empty()) {
            return Err(Error::config("gamma > 0 needs S2 points"));
        }
        Ok(Self {
            problem,
            s1,
            s2: s2.filter(|d| !d.is_empty()),
            gamma,
            residual_tracking: problem.residual_tracking(),
            none: Tracking::none(),
        })
    }
}

impl Objective for PoissonGammaLoss<'_> {
    fn queries(&self) -> Vec<JetQuery<'_>> {
        let mut q = vec![JetQuery::new(self.s1, &self.residual_tracking)];
        if let Some(d) = self.s2 {
            q.push(JetQuery::new(&d.points, &self.none));
        }
        q
    }

    fn build<'t>(&self, tape: &'t Tape, jets: &[JetVars<'t>], terms: &mut Terms<'t>) -> Result<()> {
        let mut res = Vec::with_capacity(self.s1.len());
        for (i, pt) in self.s1.iter().enumerate() {
            res.push(self.problem.residual_var(tape, &jets[0], i, pt)?);
        }
        terms.push("residual", 0.5, sum_sq(tape, res));
        if let Some(d) = self.s2 {
            let j = &jets[1];
            let t = sum_sq(tape, (0..j.len()).map(|i| j.value(i) - d.targets[i]));
            terms.push("boundary", 0.5 * self.gamma, t);
        }
        Ok(())
    }
}

/// Loss selection as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Data,
    DerivativeSupervision {
        /// `λ_0, λ_1, λ_2`.
        lambdas: Vec<f64>,
    },
    Model {
        #[serde(flatten)]
        weights: ModelWeights,
    },
    Ritz,
    PoissonGamma {
        gamma: f64,
    },
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Data => "data",
            LossSpec::DerivativeSupervision { .. } => "derivative_supervision",
            LossSpec::Model { .. } => "model",
            LossSpec::Ritz => "ritz",
            LossSpec::PoissonGamma { .. } => "poisson_gamma",
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        match self {
            LossSpec::Data => Ok(()),
            LossSpec::DerivativeSupervision { lambdas } => {
                if lambdas.len() > 3 {
                    return Err(Error::UnsupportedOrder(lambdas.len() - 1));
                }
                for (k, &l) in lambdas.iter().enumerate() {
                    check_weight(&format!("lambda_{k}"), l)?;
                }
                if !lambdas.iter().any(|&l| l > 0.0) {
                    return Err(Error::config("derivative supervision needs a positive lambda"));
                }
                if !problem.has_closed_form() {
                    return Err(Error::config("derivative targets need a closed-form solution"));
                }
                Ok(())
            }
            LossSpec::Model { weights } => weights.validate(),
            LossSpec::Ritz | LossSpec::PoissonGamma { .. } => {
                if let LossSpec::PoissonGamma { gamma } = self {
                    check_weight("gamma", *gamma)?;
                }
                if problem.is_stationary() {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "{} loss needs a stationary problem",
                        self.name()
                    )))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::autodiff::{finite_diff_oracle, FnField};
    use crate::network::{init_glorot_normal, Activation, MlpSpec};
    use crate::pde::{ProblemKind, Region, Sampling};

    fn zero_field(dim: usize) -> FnField<impl Fn(&[f64]) -> (f64, Vec<f64>, Vec<f64>)> {
        FnField {
            dim,
            f: move |_: &[f64]| (0.0, vec![0.0; dim], vec![0.0; dim * dim]),
        }
    }

    fn exact_field(problem: &Problem) -> FnField<impl Fn(&[f64]) -> (f64, Vec<f64>, Vec<f64>) + '_> {
        let dim = problem.input_dim();
        FnField {
            dim,
            f: move |p: &[f64]| {
                let j = problem.exact_jet(p, &Tracking::full(dim)).unwrap();
                let d1: Vec<f64> = (0..dim).map(|i| j.d1(i).unwrap()).collect();
                let mut d2 = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        d2[a * dim + b] = j.d2(a, b).unwrap();
                    }
                }
                (j.value, d1, d2)
            },
        }
    }

    fn period_grid(n: usize) -> PointSet {
        PointSet::from_flat(1, (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn data_loss_of_zero_against_sine() {
        let d = PointData::from_fn(period_grid(64), |p| p[0].sin());
        let r = evaluate(&DataLoss::new(&d).unwrap(), &zero_field(1)).unwrap();
        assert!((r.total - 0.5).abs() < 1e-14);
        let d2 = PointData::from_fn(period_grid(64), |p| 3.0 * p[0].sin());
        let r2 = evaluate(&DataLoss::new(&d2).unwrap(), &zero_field(1)).unwrap();
        assert!((r2.total - 9.0 * r.total).abs() < 1e-12);
    }

    #[test]
    fn empty_data_is_rejected() {
        let d = PointData::new(PointSet::new(1), vec![]).unwrap();
        assert!(matches!(DataLoss::new(&d), Err(Error::Config(_))));
    }

    #[test]
    fn derivative_supervision_cases() {
        let g = period_grid(64);
        let orders = vec![
            OrderData {
                order: 0,
                lambda: 0.0,
                data: PointData::from_fn(g.clone(), |p| p[0].sin()),
            },
            OrderData {
                order: 1,
                lambda: 1.0,
                data: PointData::from_fn(g.clone(), |p| p[0].cos()),
            },
        ];
        let r = evaluate(&DerivativeSupervisionLoss::new(&orders).unwrap(), &zero_field(1)).unwrap();
        assert!((r.total - 0.5).abs() < 1e-14);

        let mut both = orders.clone();
        both[0].lambda = 1.0;
        let r = evaluate(&DerivativeSupervisionLoss::new(&both).unwrap(), &zero_field(1)).unwrap();
        let data = evaluate(&DataLoss::new(&both[0].data).unwrap(), &zero_field(1)).unwrap();
        assert!((r.total - (data.total + 0.5)).abs() < 1e-12);

        let bad = vec![OrderData {
            order: 3,
            lambda: 1.0,
            data: PointData::from_fn(g, |_| 0.0),
        }];
        assert!(matches!(
            DerivativeSupervisionLoss::new(&bad),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    fn heat_sets(problem: &Problem) -> ModelSets {
        let interior = problem
            .sample_points(Sampling::Equidistant { n_x: 20, n_t: 6 }, Region::Interior)
            .unwrap();
        let init = problem
            .sample_points(Sampling::Equidistant { n_x: 20, n_t: 1 }, Region::Initial)
            .unwrap();
        let bnd = problem
            .sample_points(Sampling::Equidistant { n_x: 1, n_t: 10 }, Region::Boundary)
            .unwrap();
        ModelSets {
            interior: Some(interior.clone()),
            initial: Some(PointData::from_fn(init, |p| problem.initial(p[0]).unwrap())),
            boundary: Some(PointData::from_fn(bnd, |p| problem.boundary(p[0], p[1]))),
            supervised: Some(PointData::from_fn(interior, |p| problem.exact_at(p).unwrap())),
        }
    }

    #[test]
    fn model_loss_vanishes_at_exact_heat() {
        let heat = Problem::new(ProblemKind::Heat);
        let sets = heat_sets(&heat);
        let loss = ModelLoss::new(&heat, ModelWeights::new(1.0, 1.0, 1.0, 1.0), &sets).unwrap();
        let r = evaluate(&loss, &exact_field(&heat)).unwrap();
        for (k, v) in &r.terms {
            assert!(*v < 1e-15, "{k} = {v}");
        }
        assert_eq!(r.terms.len(), 4);
    }

    #[test]
    fn zero_network_poisson_residual() {
        let p = Problem::new(ProblemKind::PoissonToy);
        let sets = ModelSets {
            interior: Some(period_grid(512)),
            ..Default::default()
        };
        let loss = ModelLoss::new(&p, ModelWeights::new(1.0, 0.0, 0.0, 0.0), &sets).unwrap();
        let r = evaluate(&loss, &zero_field(1)).unwrap();
        assert!((r.total - 5000.5).abs() < 1e-8, "{}", r.total);
    }

    #[test]
    fn missing_weighted_set_is_rejected() {
        let p = Problem::new(ProblemKind::PoissonToy);
        let sets = ModelSets {
            interior: Some(period_grid(8)),
            ..Default::default()
        };
        let err = ModelLoss::new(&p, ModelWeights::new(1.0, 10.0, 10.0, 0.0), &sets);
        assert!(matches!(err, Err(Error::Config(_))));
        let heat = Problem::new(ProblemKind::Heat);
        let sets = ModelSets {
            interior: Some(PointSet::from_flat(2, vec![0.5, 0.5]).unwrap()),
            ..Default::default()
        };
        assert!(ModelLoss::new(&heat, ModelWeights::new(1.0, 1.0, 0.0, 0.0), &sets).is_err());
    }

    #[test]
    fn term_additivity() {
        let heat = Problem::new(ProblemKind::Heat);
        let sets = heat_sets(&heat);
        let spec = MlpSpec::new(2, vec![6, 6], Activation::Tanh);
        let params = init_glorot_normal(&spec, 11).unwrap();
        let loss = ModelLoss::new(&heat, ModelWeights::new(1.0, 10.0, 10.0, 3.0), &sets).unwrap();
        let (r, _) = value_and_grad(&loss, &params).unwrap();
        assert!((r.total - r.weighted_sum()).abs() < 1e-12 * r.total.max(1.0));
        assert!(r.total > 0.0);
    }

    #[test]
    fn ritz_simple_cases() {
        let pts = PointSet::from_flat(1, (0..11).map(|k| k as f64 / 10.0).collect()).unwrap();
        let r = evaluate(&RitzLoss::with_source(&pts, vec![0.0; 11]).unwrap(), &zero_field(1)).unwrap();
        assert_eq!(r.total, 0.0);
        let identity = FnField {
            dim: 1,
            f: |p: &[f64]| (p[0], vec![1.0], vec![0.0]),
        };
        let r = evaluate(&RitzLoss::with_source(&pts, vec![0.0; 11]).unwrap(), &identity).unwrap();
        assert!((r.total - 0.5).abs() < 1e-15);
        let heat = Problem::new(ProblemKind::Heat);
        assert!(RitzLoss::for_problem(&heat, &pts).is_err());
    }

    #[test]
    fn ritz_exact_poisson_is_stationary() {
        // Perturbation vanishing at both ends of [0, 2π].
        let p = Problem::new(ProblemKind::PoissonToy);
        let pts = p
            .sample_points(Sampling::Equidistant { n_x: 4001, n_t: 1 }, Region::Interior)
            .unwrap();
        let loss = RitzLoss::for_problem(&p, &pts).unwrap();
        let energy = |eps: f64| {
            let field = FnField {
                dim: 1,
                f: move |q: &[f64]| {
                    let x = q[0];
                    let u = x.sin() + (10.0 * x).sin() + eps * (x / 2.0).sin() * (3.0 * x).sin();
                    let du = x.cos()
                        + 10.0 * (10.0 * x).cos()
                        + eps
                            * (0.5 * (x / 2.0).cos() * (3.0 * x).sin()
                                + 3.0 * (x / 2.0).sin() * (3.0 * x).cos());
                    (u, vec![du], vec![0.0])
                },
            };
            evaluate(&loss, &field).unwrap().total
        };
        let h = 1e-3;
        let slope = (energy(h) - energy(-h)) / (2.0 * h);
        let curvature = (energy(h) - 2.0 * energy(0.0) + energy(-h)) / (h * h);
        assert!(slope.abs() < 1e-2 * curvature.abs(), "slope {slope}, curvature {curvature}");
    }

    #[test]
    fn poisson_gamma_matches_model_loss_mapping() {
        let p = Problem::new(ProblemKind::PoissonToy);
        let spec = MlpSpec::new(1, vec![5, 5], Activation::Tanh);
        let params = init_glorot_normal(&spec, 2).unwrap();
        let s1 = p
            .sample_points(Sampling::Equidistant { n_x: 33, n_t: 1 }, Region::Interior)
            .unwrap();
        let s2pts = p
            .sample_points(Sampling::Equidistant { n_x: 1, n_t: 1 }, Region::Boundary)
            .unwrap();
        let s2 = PointData::from_fn(s2pts, |q| p.exact_at(q).unwrap());
        let gamma = 3.5;
        let pg = PoissonGammaLoss::new(&p, &s1, Some(&s2), gamma).unwrap();
        let (a, ga) = value_and_grad(&pg, &params).unwrap();
        let sets = ModelSets {
            interior: Some(s1.clone()),
            boundary: Some(s2.clone()),
            ..Default::default()
        };
        let w = ModelWeights::new(s1.len() as f64 / 2.0, 0.0, gamma * s2.len() as f64 / 2.0, 0.0);
        let (b, gb) = value_and_grad(&ModelLoss::new(&p, w, &sets).unwrap(), &params).unwrap();
        assert!((a.total - b.total).abs() < 1e-10 * a.total);
        for (x, y) in ga.as_slice().iter().zip(gb.as_slice()) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        let zero_gamma = PoissonGammaLoss::new(&p, &s1, None, 0.0).unwrap();
        let r = evaluate(&zero_gamma, &exact_field(&p)).unwrap();
        assert!(r.total < 1e-20);
    }

    #[test]
    fn model_loss_gradient_matches_finite_differences() {
        let p = Problem::new(ProblemKind::PoissonToy);
        let spec = MlpSpec::new(1, vec![20, 20, 20], Activation::Tanh);
        let params = init_glorot_normal(&spec, 5).unwrap();
        let interior = p
            .sample_points(Sampling::MonteCarlo { n: 16, seed: 1 }, Region::Interior)
            .unwrap();
        let bnd = p
            .sample_points(Sampling::Equidistant { n_x: 1, n_t: 1 }, Region::Boundary)
            .unwrap();
        let sets = ModelSets {
            interior: Some(interior),
            boundary: Some(PointData::from_fn(bnd, |_| 0.0)),
            ..Default::default()
        };
        let loss = ModelLoss::new(&p, ModelWeights::new(1.0, 10.0, 10.0, 0.0), &sets).unwrap();
        let (_, g) = value_and_grad(&loss, &params).unwrap();
        let flat = params.to_flat();
        let fd = finite_diff_oracle(
            |x| {
                let q = MlpParams::from_flat(&spec, 0, x).unwrap();
                evaluate(&loss, &q).unwrap().total
            },
            &flat,
            1e-5,
        );
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, (a, b)) in g.as_slice().iter().zip(&fd).enumerate() {
            let err = (a - b).abs() / b.abs().max(1e-3 * scale);
            assert!(err < 1e-5, "component {i}: {a} vs {b}");
        }
    }

    #[test]
    fn spec_validation() {
        let p = Problem::new(ProblemKind::PoissonToy);
        let heat = Problem::new(ProblemKind::Heat);
        assert!(LossSpec::DerivativeSupervision { lambdas: vec![1.0; 4] }.validate(&p).is_err());
        assert!(LossSpec::Ritz.validate(&heat).is_err());
        assert!(LossSpec::Ritz.validate(&p).is_ok());
        assert!(LossSpec::Model {
            weights: ModelWeights::new(1.0, -1.0, 0.0, 0.0)
        }
        .validate(&p)
        .is_err());
        let parsed: LossSpec =
            serde_json::from_str(r#"{"kind":"model","lambda_f":1,"lambda_h":10,"lambda_g":10,"lambda_s":0}"#)
                .unwrap();
        assert_eq!(
            parsed,
            LossSpec::Model {
                weights: ModelWeights::new(1.0, 10.0, 10.0, 0.0)
            }
        );
    }
}
