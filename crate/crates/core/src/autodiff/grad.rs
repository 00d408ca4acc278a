use crate::autodiff::jet::{forward_traced, JetBatch, JetField, PointSet, Tracking};
use crate::autodiff::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::network::MlpParams;

/// Gradient of a scalar loss with respect to every network parameter, in
/// canonical parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

impl ParamGradient {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// A point set together with the jets the loss needs there.
#[derive(Clone, Copy, Debug)]
pub struct JetQuery<'a> {
    pub points: &'a PointSet,
    pub tracking: &'a Tracking,
}

impl<'a> JetQuery<'a> {
    pub fn new(points: &'a PointSet, tracking: &'a Tracking) -> Self {
        Self { points, tracking }
    }
}

/// Tape variables holding the jets of one query.
pub struct JetVars<'t> {
    n: usize,
    tracking: Tracking,
    vars: Vec<Var<'t>>,
}

impl<'t> JetVars<'t> {
    fn from_batch(tape: &'t Tape, batch: &JetBatch) -> Self {
        let channels = batch.tracking().channels();
        let mut vars = Vec::with_capacity(channels * batch.len());
        for c in 0..channels {
            vars.extend(batch.channel(c).iter().map(|&v| tape.leaf(v)));
        }
        Self {
            n: batch.len(),
            tracking: batch.tracking().clone(),
            vars,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn value(&self, i: usize) -> Var<'t> {
        self.vars[i]
    }

    pub fn d1(&self, i: usize, coord: usize) -> Result<Var<'t>> {
        let c = self.tracking.dir_channel(coord).ok_or_else(|| {
            Error::config(format!("first derivative along coordinate {coord} was not tracked"))
        })?;
        Ok(self.vars[c * self.n + i])
    }

    pub fn d2(&self, i: usize, a: usize, b: usize) -> Result<Var<'t>> {
        let c = self.tracking.pair_channel(a, b).ok_or_else(|| {
            Error::config(format!("second derivative ({a},{b}) was not tracked"))
        })?;
        Ok(self.vars[c * self.n + i])
    }

    fn leaf_range(&self) -> (usize, usize) {
        match (self.vars.first(), self.vars.last()) {
            (Some(f), Some(l)) => (f.index(), l.index() + 1),
            _ => (0, 0),
        }
    }
}

/// Evaluates a loss composed on a tape from the jets of `field`.
pub fn evaluate_objective<F>(field: &dyn JetField, queries: &[JetQuery<'_>], build: F) -> Result<f64>
where
    F: for<'t> FnOnce(&'t Tape, &[JetVars<'t>]) -> Result<Var<'t>>,
{
    let batches = queries
        .iter()
        .map(|q| field.jets(q.points, q.tracking))
        .collect::<Result<Vec<_>>>()?;
    let tape = Tape::new();
    let jets: Vec<JetVars<'_>> = batches.iter().map(|b| JetVars::from_batch(&tape, b)).collect();
    let loss = build(&tape, &jets)?;
    tape.check_finite()?;
    Ok(loss.value())
}

/// Loss value and its exact gradient with respect to the network parameters.
///
/// The network's jets at each query are recorded as tape leaves, the loss is
/// composed on the tape by `build`, the tape is swept backwards to obtain jet
/// cotangents, and those are pulled back through the traced forward pass.
pub fn grad_params<F>(
    params: &MlpParams,
    queries: &[JetQuery<'_>],
    build: F,
) -> Result<(f64, ParamGradient)>
where
    F: for<'t> FnOnce(&'t Tape, &[JetVars<'t>]) -> Result<Var<'t>>,
{
    let mut traces = Vec::with_capacity(queries.len());
    for q in queries {
        traces.push(forward_traced(params, q.points, q.tracking)?);
    }
    let tape = Tape::new();
    let jets: Vec<JetVars<'_>> = traces
        .iter()
        .map(|(batch, _)| JetVars::from_batch(&tape, batch))
        .collect();
    let loss = build(&tape, &jets)?;
    tape.check_finite()?;
    let value = loss.value();

    let mut grad = ParamGradient::zeros(params.param_count());
    let adj = tape.gradient(loss);
    for ((batch, trace), vars) in traces.iter().zip(&jets) {
        let (lo, hi) = vars.leaf_range();
        if lo == hi {
            continue;
        }
        let mut cot = JetBatch::zeros(batch.len(), params.spec.input_dim, batch.tracking());
        let n = batch.len();
        for (k, &a) in adj[lo..hi].iter().enumerate() {
            cot.channel_mut(k / n)[k % n] = a;
        }
        trace.backward(&cot, &mut grad.0);
    }
    Ok((value, grad))
}

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_oracle(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let plus = f(&probe);
            probe[i] = x[i] - step;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_glorot_normal, Activation, MlpSpec};

    #[test]
    fn oracle_quadratic() {
        let g = finite_diff_oracle(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn oracle_constant() {
        let g = finite_diff_oracle(|_| 4.2, &[1.0, -3.0, 0.5], 1e-5);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_sine() {
        let g = finite_diff_oracle(|x| x[0].sin(), &[0.0], 1e-4);
        assert!((g[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn empty_batch_gives_zero_gradient() {
        let spec = MlpSpec::new(1, vec![4], Activation::Tanh);
        let p = init_glorot_normal(&spec, 1).unwrap();
        let empty = PointSet::new(1);
        let tracking = Tracking::none();
        let (v, g) = grad_params(&p, &[JetQuery::new(&empty, &tracking)], |tape, _| {
            Ok(tape.constant(0.0))
        })
        .unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.len(), p.param_count());
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_neuron_output_weight_gradient() {
        let spec = MlpSpec::new(1, vec![1], Activation::Tanh);
        let mut p = MlpParams::zeros(&spec);
        p.layers[0].weights[0] = 1.0;
        p.layers[1].weights[0] = 1.0;
        let pts = PointSet::from_flat(1, vec![0.0]).unwrap();
        let tracking = Tracking::none();
        let (_, g) = grad_params(&p, &[JetQuery::new(&pts, &tracking)], |_, jets| {
            Ok(jets[0].value(0).square())
        })
        .unwrap();
        // Canonical order: w1, b1, a, b_out.
        assert_eq!(g.0[2], 0.0);
    }

    #[test]
    fn loss_equal_to_a_leaf() {
        let spec = MlpSpec::new(1, vec![3], Activation::Tanh);
        let p = init_glorot_normal(&spec, 4).unwrap();
        let pts = PointSet::from_flat(1, vec![0.4]).unwrap();
        let tracking = Tracking::none();
        let (v, g) =
            grad_params(&p, &[JetQuery::new(&pts, &tracking)], |_, jets| Ok(jets[0].value(0)))
                .unwrap();
        let flat = p.to_flat();
        let fd = finite_diff_oracle(
            |x| {
                let q = MlpParams::from_flat(&spec, 0, x).unwrap();
                crate::network::eval(&q, &[0.4]).unwrap()
            },
            &flat,
            1e-6,
        );
        assert_eq!(v, crate::network::eval(&p, &[0.4]).unwrap());
        for (a, b) in g.0.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
