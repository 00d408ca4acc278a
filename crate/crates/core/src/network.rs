//! Fully-connected networks: architecture, Glorot-normal initialization,
//! plain evaluation and versioned checkpoints.
//!
//! Parameters are stored layer by layer; within a layer the weight matrix is
//! `n_out × n_in` row-major followed by the bias vector. That is also the
//! canonical flat order used by gradients, the optimizer and checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{forward_batch, PointSet, Tracking};
use crate::error::{Error, Result};
use crate::optimizer::AdamState;
use crate::rng::{streams, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// `max(z, 0)^3 / 6`.
    Cubic,
    /// Test hook: tanh whose second derivative is scaled by `1 + 1e-3` while the
    /// third derivative is left intact. Used only for fault injection.
    #[doc(hidden)]
    #[serde(skip)]
    FaultyTanh,
}

/// Activation value and its first three derivatives at `z`.
#[derive(Clone, Copy, Debug)]
pub struct ActivationDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Activation {
    #[inline]
    pub fn derivs(self, z: f64) -> ActivationDerivs {
        match self {
            Activation::Tanh | Activation::FaultyTanh => {
                let s = z.tanh();
                let d1 = 1.0 - s * s;
                let d2 = -2.0 * s * d1;
                let d3 = -2.0 * d1 * d1 + 4.0 * s * s * d1;
                let d2 = if self == Activation::FaultyTanh {
                    d2 * (1.0 + 1e-3)
                } else {
                    d2
                };
                ActivationDerivs {
                    value: s,
                    d1,
                    d2,
                    d3,
                }
            }
            Activation::Cubic => {
                if z > 0.0 {
                    ActivationDerivs {
                        value: z * z * z / 6.0,
                        d1: 0.5 * z * z,
                        d2: z,
                        d3: 1.0,
                    }
                } else {
                    // The kink at 0 takes the left-hand (zero) branch; σ'' is
                    // continuous there so the choice only affects σ'''.
                    ActivationDerivs {
                        value: 0.0,
                        d1: 0.0,
                        d2: 0.0,
                        d3: 0.0,
                    }
                }
            }
        }
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh | Activation::FaultyTanh => z.tanh(),
            Activation::Cubic => {
                if z > 0.0 {
                    z * z * z / 6.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    #[serde(default = "one")]
    pub output_dim: usize,
}

fn one() -> usize {
    1
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden_layers,
            activation,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.input_dim) {
            return Err(Error::config(format!(
                "input_dim must be 1 or 2, got {}",
                self.input_dim
            )));
        }
        if self.output_dim != 1 {
            return Err(Error::config(format!(
                "output_dim must be 1, got {}",
                self.output_dim
            )));
        }
        if self.hidden_layers.is_empty() {
            return Err(Error::config("at least one hidden layer is required"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden layer widths must be >= 1"));
        }
        Ok(())
    }

    /// `(n_in, n_out)` for every affine layer, output layer included.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(n_in, n_out)| n_out * n_in + n_out)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out × n_in`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.n_in + inp]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub seed: u64,
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(n_in, n_out)| Layer::zeros(n_in, n_out))
            .collect();
        Self {
            spec: spec.clone(),
            seed: 0,
            layers,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    /// Flat parameter vector in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has {} entries, network has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn from_flat(spec: &MlpSpec, seed: u64, flat: &[f64]) -> Result<Self> {
        spec.validate()?;
        let mut params = Self::zeros(spec);
        params.seed = seed;
        params.set_flat(flat)?;
        Ok(params)
    }

    /// Applies `f(param, index)` to every parameter in canonical order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64, usize)) {
        let mut idx = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                f(w, idx);
                idx += 1;
            }
        }
    }
}

/// Glorot-normal weights, `N(0, 2 / (fan_in + fan_out))`, and zero biases.
///
/// Weights are drawn layer by layer in canonical order from the
/// initialization stream of [`Rng`], so a seed fully determines the network.
pub fn init_glorot_normal(spec: &MlpSpec, seed: u64) -> Result<MlpParams> {
    spec.validate()?;
    let mut rng = Rng::with_stream(seed, streams::INIT);
    let mut params = MlpParams::zeros(spec);
    params.seed = seed;
    for layer in &mut params.layers {
        let std = glorot_std(layer.n_in, layer.n_out);
        for w in &mut layer.weights {
            *w = std * rng.normal();
        }
    }
    Ok(params)
}

pub fn glorot_std(fan_in: usize, fan_out: usize) -> f64 {
    (2.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Plain forward evaluation. Shares the batched kernel with the jet forward
/// pass, so the result is bit-identical to `forward_jet(..).value`.
pub fn eval(params: &MlpParams, point: &[f64]) -> Result<f64> {
    if point.len() != params.spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.spec.input_dim,
            got: point.len(),
        });
    }
    let set = PointSet::from_flat(point.len(), point.to_vec())?;
    let out = forward_batch(params, &set, &Tracking::none())?;
    Ok(out.value(0))
}

/// Evaluates the network at every point of a set.
pub fn eval_many(params: &MlpParams, points: &PointSet) -> Result<Vec<f64>> {
    let out = forward_batch(params, points, &Tracking::none())?;
    Ok((0..points.len()).map(|i| out.value(i)).collect())
}

pub const CHECKPOINT_FORMAT: &str = "lossjump-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk training state. JSON with an explicit format tag and version;
/// floats are written in shortest round-trip form so reloads are bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: MlpSpec,
    pub seed: u64,
    /// Global epoch count at which the parameters were captured.
    #[serde(default)]
    pub epoch: Option<usize>,
    #[serde(default)]
    pub phase: Option<usize>,
    pub params: Vec<f64>,
    #[serde(default)]
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            spec: params.spec.clone(),
            seed: params.seed,
            epoch: None,
            phase: None,
            params: params.to_flat(),
            optimizer: None,
        }
    }

    pub fn to_params(&self) -> Result<MlpParams> {
        if self.params.len() != self.spec.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint declares {} parameters for its spec but stores {}",
                self.spec.param_count(),
                self.params.len()
            )));
        }
        MlpParams::from_flat(&self.spec, self.seed, &self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("unexpected format tag `{}`", ckpt.format),
            });
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("unsupported checkpoint version {}", ckpt.version),
            });
        }
        Ok(ckpt)
    }
}

pub fn save_params(params: &MlpParams, path: &Path) -> Result<()> {
    Checkpoint::new(params).save(path)
}

/// Loads parameters; when `expected` is given the stored spec must match it.
pub fn load_params(path: &Path, expected: Option<&MlpSpec>) -> Result<MlpParams> {
    let ckpt = Checkpoint::load(path)?;
    if let Some(spec) = expected {
        if &ckpt.spec != spec {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint spec {:?} does not match expected {:?}",
                ckpt.spec, spec
            )));
        }
    }
    ckpt.to_params()
}
