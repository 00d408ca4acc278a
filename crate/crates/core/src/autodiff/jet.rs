//! Batched forward propagation of input jets through an MLP, and the matching
//! reverse sweep that turns jet cotangents into parameter gradients.
//!
//! A batch is processed in fixed-size chunks. Inside a chunk every quantity is
//! a row-major matrix whose rows are grouped by channel: channel 0 carries
//! values, then one channel per tracked input direction (first derivatives),
//! then one channel per tracked pair (second derivatives). For a hidden layer
//! with pre-activation `z` (and its input derivatives `z_i`, `z_ij`):
//!
//! ```text
//! h    = σ(z)
//! h_i  = σ'(z) z_i
//! h_ij = σ''(z) z_i z_j + σ'(z) z_ij
//! ```
//!
//! Rows never interact, so the value channel of a point is computed by the
//! same arithmetic whether or not derivatives are tracked.

use crate::error::{Error, Result};
use crate::network::{ActivationDerivs, MlpParams};

/// Points per chunk. Gradients are reduced chunk by chunk in this order.
pub const CHUNK: usize = 128;

/// Which input derivatives to propagate.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Tracking {
    dirs: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl Tracking {
    pub fn none() -> Self {
        Self::default()
    }

    /// First derivatives along `first`, second derivatives for `pairs`.
    /// Directions used by a pair are tracked automatically.
    pub fn new(first: &[usize], pairs: &[(usize, usize)]) -> Self {
        let mut dirs: Vec<usize> = first.to_vec();
        let mut norm_pairs = Vec::new();
        for &(a, b) in pairs {
            let p = (a.min(b), a.max(b));
            if !norm_pairs.contains(&p) {
                norm_pairs.push(p);
            }
            dirs.push(a);
            dirs.push(b);
        }
        dirs.sort_unstable();
        dirs.dedup();
        norm_pairs.sort_unstable();
        Self {
            dirs,
            pairs: norm_pairs,
        }
    }

    /// First and second derivatives along coordinates `0..dim`, all pairs.
    pub fn full(dim: usize) -> Self {
        let first: Vec<usize> = (0..dim).collect();
        let mut pairs = Vec::new();
        for a in 0..dim {
            for b in a..dim {
                pairs.push((a, b));
            }
        }
        Self::new(&first, &pairs)
    }

    /// Union of two trackings.
    pub fn union(&self, other: &Tracking) -> Tracking {
        let mut first = self.dirs.clone();
        first.extend_from_slice(&other.dirs);
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        Tracking::new(&first, &pairs)
    }

    pub fn dirs(&self) -> &[usize] {
        &self.dirs
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn channels(&self) -> usize {
        1 + self.dirs.len() + self.pairs.len()
    }

    pub fn dir_channel(&self, coord: usize) -> Option<usize> {
        self.dirs.iter().position(|&d| d == coord).map(|s| 1 + s)
    }

    pub fn pair_channel(&self, a: usize, b: usize) -> Option<usize> {
        let p = (a.min(b), a.max(b));
        self.pairs
            .iter()
            .position(|&q| q == p)
            .map(|s| 1 + self.dirs.len() + s)
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if let Some(&d) = self.dirs.iter().find(|&&d| d >= input_dim) {
            return Err(Error::config(format!(
                "tracked coordinate {d} out of range for input dimension {input_dim}"
            )));
        }
        Ok(())
    }

    /// Slot indices (within `dirs`) of both members of each pair.
    fn pair_slots(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                let sa = self.dirs.iter().position(|&d| d == a).unwrap();
                let sb = self.dirs.iter().position(|&d| d == b).unwrap();
                (sa, sb)
            })
            .collect()
    }
}

/// A set of input points stored contiguously with stride `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut set = Self::new(dim);
        for p in points {
            set.push(p)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    fn chunk(&self, start: usize, end: usize) -> &[f64] {
        &self.coords[start * self.dim..end * self.dim]
    }
}

/// Network value together with tracked input derivatives at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    dim: usize,
    tracking: Tracking,
}

impl Jet2 {
    /// Builds a jet from dense derivative arrays; entries outside `tracking`
    /// are ignored.
    pub fn from_dense(value: f64, d1: &[f64], d2: &[f64], tracking: &Tracking) -> Self {
        let dim = d1.len();
        let mut jet = Self {
            value,
            d1: vec![0.0; dim],
            d2: vec![0.0; dim * dim],
            dim,
            tracking: tracking.clone(),
        };
        for &d in tracking.dirs() {
            jet.d1[d] = d1[d];
        }
        for &(a, b) in tracking.pairs() {
            let v = d2[a * dim + b];
            jet.d2[a * dim + b] = v;
            jet.d2[b * dim + a] = v;
        }
        jet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tracking(&self) -> &Tracking {
        &self.tracking
    }

    /// `∂u/∂x_i` if tracked.
    pub fn d1(&self, i: usize) -> Option<f64> {
        self.tracking.dir_channel(i).map(|_| self.d1[i])
    }

    /// `∂²u/∂x_i∂x_j` if tracked.
    pub fn d2(&self, i: usize, j: usize) -> Option<f64> {
        self.tracking
            .pair_channel(i, j)
            .map(|_| self.d2[i * self.dim + j])
    }

    pub fn require_d1(&self, i: usize) -> Result<f64> {
        self.d1(i).ok_or_else(|| {
            Error::config(format!("first derivative along coordinate {i} was not tracked"))
        })
    }

    pub fn require_d2(&self, i: usize, j: usize) -> Result<f64> {
        self.d2(i, j).ok_or_else(|| {
            Error::config(format!("second derivative ({i},{j}) was not tracked"))
        })
    }
}

/// Jets for a whole point set, stored channel-major.
#[derive(Clone, Debug)]
pub struct JetBatch {
    n: usize,
    dim: usize,
    tracking: Tracking,
    data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(n: usize, dim: usize, tracking: &Tracking) -> Self {
        Self {
            n,
            dim,
            tracking: tracking.clone(),
            data: vec![0.0; n * tracking.channels()],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tracking(&self) -> &Tracking {
        &self.tracking
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n..(c + 1) * self.n]
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn jet(&self, i: usize) -> Jet2 {
        let mut d1 = vec![0.0; self.dim];
        let mut d2 = vec![0.0; self.dim * self.dim];
        for &d in self.tracking.dirs() {
            d1[d] = self.channel(self.tracking.dir_channel(d).unwrap())[i];
        }
        for &(a, b) in self.tracking.pairs() {
            let v = self.channel(self.tracking.pair_channel(a, b).unwrap())[i];
            d2[a * self.dim + b] = v;
            d2[b * self.dim + a] = v;
        }
        Jet2::from_dense(self.value(i), &d1, &d2, &self.tracking)
    }
}

/// Anything that can produce jets at a set of points: networks, closed-form
/// solutions, test functions.
pub trait JetField {
    fn input_dim(&self) -> usize;
    fn jets(&self, points: &PointSet, tracking: &Tracking) -> Result<JetBatch>;
}

impl JetField for MlpParams {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn jets(&self, points: &PointSet, tracking: &Tracking) -> Result<JetBatch> {
        forward_batch(self, points, tracking)
    }
}

/// Jets of an arbitrary function given through a closure returning
/// `(value, d1, d2)` with dense `dim` and `dim × dim` arrays.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> JetField for FnField<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>, Vec<f64>),
{
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn jets(&self, points: &PointSet, tracking: &Tracking) -> Result<JetBatch> {
        check_inputs(self.dim, points, tracking)?;
        let mut batch = JetBatch::zeros(points.len(), self.dim, tracking);
        for (i, p) in points.iter().enumerate() {
            let (v, d1, d2) = (self.f)(p);
            batch.channel_mut(0)[i] = v;
            for &d in tracking.dirs() {
                let c = tracking.dir_channel(d).unwrap();
                batch.channel_mut(c)[i] = d1[d];
            }
            for &(a, b) in tracking.pairs() {
                let c = tracking.pair_channel(a, b).unwrap();
                batch.channel_mut(c)[i] = d2[a * self.dim + b];
            }
        }
        Ok(batch)
    }
}

fn check_inputs(input_dim: usize, points: &PointSet, tracking: &Tracking) -> Result<()> {
    if points.dim() != input_dim {
        return Err(Error::DimensionMismatch {
            expected: input_dim,
            got: points.dim(),
        });
    }
    tracking.validate(input_dim)
}

/// Jet of the network at a single point.
pub fn forward_jet(params: &MlpParams, point: &[f64], tracking: &Tracking) -> Result<Jet2> {
    let set = PointSet::from_flat(point.len(), point.to_vec())?;
    Ok(forward_batch(params, &set, tracking)?.jet(0))
}

/// Jets of the network at every point of a set.
pub fn forward_batch(params: &MlpParams, points: &PointSet, tracking: &Tracking) -> Result<JetBatch> {
    check_inputs(params.spec.input_dim, points, tracking)?;
    let plan = Plan::new(params, tracking);
    let mut out = JetBatch::zeros(points.len(), params.spec.input_dim, tracking);
    let mut start = 0;
    while start < points.len() {
        let end = (start + CHUNK).min(points.len());
        let cache = plan.forward_chunk(points.chunk(start, end), end - start, false);
        cache.write_output(&mut out, start);
        start = end;
    }
    Ok(out)
}

/// Forward pass that keeps every intermediate needed by [`backward`].
pub(crate) struct ForwardTrace<'p> {
    plan: Plan<'p>,
    chunks: Vec<(usize, ChunkCache)>,
}

pub(crate) fn forward_traced<'p>(
    params: &'p MlpParams,
    points: &PointSet,
    tracking: &Tracking,
) -> Result<(JetBatch, ForwardTrace<'p>)> {
    check_inputs(params.spec.input_dim, points, tracking)?;
    let plan = Plan::new(params, tracking);
    let mut out = JetBatch::zeros(points.len(), params.spec.input_dim, tracking);
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < points.len() {
        let end = (start + CHUNK).min(points.len());
        let cache = plan.forward_chunk(points.chunk(start, end), end - start, true);
        cache.write_output(&mut out, start);
        chunks.push((start, cache));
        start = end;
    }
    Ok((out, ForwardTrace { plan, chunks }))
}

impl ForwardTrace<'_> {
    /// Accumulates `∂L/∂θ` into `grad` (canonical order) given `∂L/∂jet`.
    pub(crate) fn backward(&self, cotangent: &JetBatch, grad: &mut [f64]) {
        for (start, cache) in &self.chunks {
            self.plan.backward_chunk(cache, cotangent, *start, grad);
        }
    }
}

struct Plan<'p> {
    params: &'p MlpParams,
    tracking: Tracking,
    pair_slots: Vec<(usize, usize)>,
    /// Transposed weights (`n_in × n_out`) per layer.
    transposed: Vec<Vec<f64>>,
    /// Offset of each layer's weights in the flat parameter vector.
    offsets: Vec<usize>,
}

struct ChunkCache {
    rows: usize,
    /// Layer inputs: `acts[0]` holds the input jets, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer (all channels).
    pre: Vec<Vec<f64>>,
    /// σ', σ'', σ''' on the value rows of each hidden layer.
    derivs: Vec<Vec<[f64; 3]>>,
    /// Network outputs, channel-major.
    output: Vec<f64>,
}

impl ChunkCache {
    fn write_output(&self, out: &mut JetBatch, start: usize) {
        let channels = out.tracking.channels();
        for c in 0..channels {
            let dst = &mut out.channel_mut(c)[start..start + self.rows];
            dst.copy_from_slice(&self.output[c * self.rows..(c + 1) * self.rows]);
        }
    }
}

/// `out[r, :] = Σ_k input[r, k] · wt[k, :]` for every row.
#[inline]
fn matmul_rows(input: &[f64], n_in: usize, wt: &[f64], n_out: usize, out: &mut [f64]) {
    for (row_in, row_out) in input.chunks_exact(n_in).zip(out.chunks_exact_mut(n_out)) {
        row_out.fill(0.0);
        for (k, &a) in row_in.iter().enumerate() {
            let w = &wt[k * n_out..(k + 1) * n_out];
            for (o, &wv) in row_out.iter_mut().zip(w) {
                *o += a * wv;
            }
        }
    }
}

impl<'p> Plan<'p> {
    fn new(params: &'p MlpParams, tracking: &Tracking) -> Self {
        let mut transposed = Vec::with_capacity(params.layers.len());
        let mut offsets = Vec::with_capacity(params.layers.len());
        let mut offset = 0;
        for layer in &params.layers {
            let mut wt = vec![0.0; layer.n_in * layer.n_out];
            for o in 0..layer.n_out {
                for i in 0..layer.n_in {
                    wt[i * layer.n_out + o] = layer.weights[o * layer.n_in + i];
                }
            }
            transposed.push(wt);
            offsets.push(offset);
            offset += layer.weights.len() + layer.bias.len();
        }
        Self {
            params,
            tracking: tracking.clone(),
            pair_slots: tracking.pair_slots(),
            transposed,
            offsets,
        }
    }

    fn forward_chunk(&self, coords: &[f64], b: usize, keep: bool) -> ChunkCache {
        let act = self.params.activation();
        let d_in = self.params.spec.input_dim;
        let channels = self.tracking.channels();
        let n_dirs = self.tracking.dirs().len();

        let mut input = vec![0.0; channels * b * d_in];
        input[..b * d_in].copy_from_slice(coords);
        for (s, &d) in self.tracking.dirs().iter().enumerate() {
            let base = (1 + s) * b * d_in;
            for r in 0..b {
                input[base + r * d_in + d] = 1.0;
            }
        }

        let n_layers = self.params.layers.len();
        let mut acts = Vec::with_capacity(n_layers);
        let mut pre = Vec::new();
        let mut derivs = Vec::new();
        let mut h = input;
        for (l, layer) in self.params.layers.iter().enumerate() {
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            let mut z = vec![0.0; channels * b * n_out];
            matmul_rows(&h, n_in, &self.transposed[l], n_out, &mut z);
            for row in z[..b * n_out].chunks_exact_mut(n_out) {
                for (zv, &bias) in row.iter_mut().zip(&layer.bias) {
                    *zv += bias;
                }
            }
            if l + 1 == n_layers {
                // Output layer is affine; n_out == 1.
                acts.push(h);
                let output = z;
                return ChunkCache {
                    rows: b,
                    acts: if keep { acts } else { Vec::new() },
                    pre,
                    derivs,
                    output,
                };
            }
            let mut next = vec![0.0; channels * b * n_out];
            let mut dv: Vec<[f64; 3]> = Vec::with_capacity(if keep { b * n_out } else { 0 });
            let plane = b * n_out;
            for idx in 0..plane {
                let ActivationDerivs { value, d1, d2, d3 } = act.derivs(z[idx]);
                next[idx] = value;
                for s in 0..n_dirs {
                    let o = (1 + s) * plane + idx;
                    next[o] = d1 * z[o];
                }
                for (p, &(sa, sb)) in self.pair_slots.iter().enumerate() {
                    let o = (1 + n_dirs + p) * plane + idx;
                    let za = z[(1 + sa) * plane + idx];
                    let zb = z[(1 + sb) * plane + idx];
                    next[o] = d2 * za * zb + d1 * z[o];
                }
                if keep {
                    dv.push([d1, d2, d3]);
                }
            }
            if keep {
                acts.push(h);
                pre.push(z);
                derivs.push(dv);
            }
            h = next;
        }
        unreachable!("network has an output layer")
    }

    fn backward_chunk(&self, cache: &ChunkCache, cot: &JetBatch, start: usize, grad: &mut [f64]) {
        let b = cache.rows;
        let channels = self.tracking.channels();
        let n_dirs = self.tracking.dirs().len();
        let n_layers = self.params.layers.len();

        // Cotangent of the output layer's pre-activation, channel-major, one column.
        let mut zbar: Vec<f64> = Vec::with_capacity(channels * b);
        for c in 0..channels {
            zbar.extend_from_slice(&cot.channel(c)[start..start + b]);
        }

        for l in (0..n_layers).rev() {
            let layer = &self.params.layers[l];
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            let h_prev = &cache.acts[l];
            let off = self.offsets[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (zrow, hrow) in zbar.chunks_exact(n_out).zip(h_prev.chunks_exact(n_in)) {
                    for (j, &zj) in zrow.iter().enumerate() {
                        let g = &mut gw[j * n_in..(j + 1) * n_in];
                        for (gv, &hv) in g.iter_mut().zip(hrow) {
                            *gv += zj * hv;
                        }
                    }
                }
                for zrow in zbar[..b * n_out].chunks_exact(n_out) {
                    for (gv, &zv) in gb.iter_mut().zip(zrow) {
                        *gv += zv;
                    }
                }
            }
            if l == 0 {
                break;
            }
            // hbar = zbar · W
            let mut hbar = vec![0.0; channels * b * n_in];
            for (zrow, hrow) in zbar.chunks_exact(n_out).zip(hbar.chunks_exact_mut(n_in)) {
                for (j, &zj) in zrow.iter().enumerate() {
                    let w = &layer.weights[j * n_in..(j + 1) * n_in];
                    for (hv, &wv) in hrow.iter_mut().zip(w) {
                        *hv += zj * wv;
                    }
                }
            }
            // Through the activation of hidden layer l-1 (which has width n_in).
            let z = &cache.pre[l - 1];
            let dv = &cache.derivs[l - 1];
            let plane = b * n_in;
            let mut next = vec![0.0; channels * plane];
            for idx in 0..plane {
                let [d1, d2, d3] = dv[idx];
                let mut zv_bar = hbar[idx] * d1;
                for s in 0..n_dirs {
                    let o = (1 + s) * plane + idx;
                    zv_bar += hbar[o] * d2 * z[o];
                    next[o] += hbar[o] * d1;
                }
                for (p, &(sa, sb)) in self.pair_slots.iter().enumerate() {
                    let o = (1 + n_dirs + p) * plane + idx;
                    let hp = hbar[o];
                    let oa = (1 + sa) * plane + idx;
                    let ob = (1 + sb) * plane + idx;
                    let (za, zb) = (z[oa], z[ob]);
                    zv_bar += hp * (d3 * za * zb + d2 * z[o]);
                    next[oa] += hp * d2 * zb;
                    next[ob] += hp * d2 * za;
                    next[o] = hp * d1;
                }
                next[idx] = zv_bar;
            }
            zbar = next;
        }
    }
}
