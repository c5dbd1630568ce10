//! ACR graph convolution with max readout and an MLP head.
//!
//! Each layer computes
//! `H' = act(H W_self + (A H) W_neigh + 1 (mean(H) W_read + b))`
//! where `A` is the (unnormalized) adjacency. After the last layer the
//! node states are max-pooled per coordinate and passed through
//! `d -> d -> 32 -> 2` affine maps, ELU between them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{gemm, mat_vec, vec_mat, Matrix, Op};
use crate::error::{Error, Result};
use crate::graph::TypedGraph;
use crate::rni::{random_columns, FeatureMatrix, InitScheme};

pub const HEAD_HIDDEN: usize = 32;
pub const NUM_CLASSES: usize = 2;
/// The head's hidden layers use ELU whatever the message-passing activation.
pub const HEAD_ACTIVATION: Activation = Activation::Elu;
pub const DEFAULT_INIT_GAIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the output `y = apply(x)`.
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Elu => {
                if y > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elu" => Ok(Activation::Elu),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(Error::Config(format!("unknown activation {s:?} (expected elu or tanh)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub d: usize,
    pub activation: Activation,
    pub rni_fraction: f64,
    pub scheme: InitScheme,
    /// `None` selects the default for the RNI fraction and dataset.
    pub lr: Option<f64>,
    pub epochs: usize,
    pub folds: usize,
    /// Train only the first `k` folds of the split.
    pub fold_limit: Option<usize>,
    pub seed: u64,
    /// Multiplier on the Glorot bound of the message-passing weights.
    #[serde(default = "default_init_gain")]
    pub init_gain: f64,
}

fn default_init_gain() -> f64 {
    DEFAULT_INIT_GAIN
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 8,
            d: 64,
            activation: Activation::Elu,
            rni_fraction: 0.0,
            scheme: InitScheme::Normal01,
            lr: None,
            epochs: 500,
            folds: 10,
            fold_limit: None,
            seed: 0,
            init_gain: DEFAULT_INIT_GAIN,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rni_fraction) {
            return Err(Error::Config(format!("rni_fraction {} outside [0, 1]", self.rni_fraction)));
        }
        if let Some(lr) = self.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be positive")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return Err(Error::Config(format!("init gain {} must be positive", self.init_gain)));
        }
        if self.fold_limit == Some(0) {
            return Err(Error::Config("fold limit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn random_cols(&self) -> usize {
        random_columns(self.d, self.rni_fraction)
    }

    pub fn d_det(&self) -> usize {
        self.d - self.random_cols()
    }

    /// Learning rate used when none is configured.
    pub fn default_lr(&self, has_corrupt: bool) -> f64 {
        let f = self.rni_fraction;
        if f == 0.0 {
            1e-4
        } else if f == 1.0 || (has_corrupt && f >= 0.875) {
            5e-4
        } else {
            2e-4
        }
    }

    pub fn resolved_lr(&self, has_corrupt: bool) -> f64 {
        self.lr.unwrap_or_else(|| self.default_lr(has_corrupt))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Affine {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Matrix::zeros(fan_in, fan_out), b: vec![0.0; fan_out] }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec_mat(x, &self.w);
        y.iter_mut().zip(&self.b).for_each(|(a, b)| *a += b);
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w_self: Matrix,
    pub w_neigh: Matrix,
    pub w_read: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    /// Row 0 for literal nodes, row 1 for disjunction nodes.
    pub type_embedding: Matrix,
    /// `d -> d`, `d -> 32`, `32 -> 2`.
    pub head: Vec<Affine>,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Matrix {
    let bound = gain * (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d;
        let layer = LayerParams {
            w_self: Matrix::zeros(d, d),
            w_neigh: Matrix::zeros(d, d),
            w_read: Matrix::zeros(d, d),
            bias: vec![0.0; d],
        };
        Self {
            layers: vec![layer; config.layers],
            type_embedding: Matrix::zeros(2, config.d_det()),
            head: vec![Affine::zeros(d, d), Affine::zeros(d, HEAD_HIDDEN), Affine::zeros(HEAD_HIDDEN, NUM_CLASSES)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(config);
        let d = config.d;
        for layer in &mut p.layers {
            layer.w_self = glorot(d, d, config.init_gain, rng);
            layer.w_neigh = glorot(d, d, config.init_gain, rng);
            layer.w_read = glorot(d, d, config.init_gain, rng);
        }
        p.type_embedding = glorot(2, config.d_det(), 1.0, rng);
        for a in &mut p.head {
            a.w = glorot(a.w.rows(), a.w.cols(), 1.0, rng);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    pub fn d(&self) -> usize {
        self.head[0].w.rows()
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(4 * self.layers.len() + 7);
        for l in &self.layers {
            out.extend([l.w_self.as_slice(), l.w_neigh.as_slice(), l.w_read.as_slice(), &l.bias[..]]);
        }
        out.push(self.type_embedding.as_slice());
        for a in &self.head {
            out.extend([a.w.as_slice(), &a.b[..]]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.layers.len() + 7);
        for l in &mut self.layers {
            out.push(l.w_self.as_mut_slice());
            out.push(l.w_neigh.as_mut_slice());
            out.push(l.w_read.as_mut_slice());
            out.push(&mut l.bias[..]);
        }
        out.push(self.type_embedding.as_mut_slice());
        for a in &mut self.head {
            out.push(a.w.as_mut_slice());
            out.push(&mut a.b[..]);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Intermediate values kept for the backward pass.
struct Tape {
    /// `states[t]` is the input of layer `t`; the last entry is the output.
    states: Vec<Matrix>,
    aggregated: Vec<Matrix>,
    means: Vec<Vec<f64>>,
    readout: Vec<f64>,
    argmax: Vec<usize>,
    hidden: [Vec<f64>; 2],
    logits: [f64; 2],
}

fn check_inputs(g: &TypedGraph, features: &FeatureMatrix, params: &ModelParams) -> Result<()> {
    if g.num_nodes() == 0 {
        return Err(Error::Graph("cannot run the model on an empty graph".into()));
    }
    if features.num_nodes() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "{} feature rows for a graph with {} nodes",
            features.num_nodes(),
            g.num_nodes()
        )));
    }
    if features.dim() != params.d() {
        return Err(Error::Shape(format!("feature width {} but model width {}", features.dim(), params.d())));
    }
    Ok(())
}

fn neighbor_sum(g: &TypedGraph, h: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for v in 0..g.num_nodes() {
        let row = out.row_mut(v);
        for &u in g.neighbors(v) {
            row.iter_mut().zip(h.row(u)).for_each(|(a, b)| *a += b);
        }
    }
    out
}

fn run(g: &TypedGraph, features: &FeatureMatrix, params: &ModelParams, act: Activation) -> Result<Tape> {
    check_inputs(g, features, params)?;
    let n = g.num_nodes();
    let d = params.d();
    let mut states = Vec::with_capacity(params.layers.len() + 1);
    let mut aggregated = Vec::with_capacity(params.layers.len());
    let mut means = Vec::with_capacity(params.layers.len());
    states.push(features.values.clone());
    for (t, layer) in params.layers.iter().enumerate() {
        let h = &states[t];
        let s = neighbor_sum(g, h);
        let mean: Vec<f64> = h.col_sums().into_iter().map(|x| x / n as f64).collect();
        let mut shift = vec_mat(&mean, &layer.w_read);
        shift.iter_mut().zip(&layer.bias).for_each(|(a, b)| *a += b);
        let mut z = Matrix::zeros(n, d);
        for v in 0..n {
            z.row_mut(v).copy_from_slice(&shift);
        }
        gemm(1.0, h, Op::N, &layer.w_self, Op::N, 1.0, &mut z);
        gemm(1.0, &s, Op::N, &layer.w_neigh, Op::N, 1.0, &mut z);
        z.as_mut_slice().iter_mut().for_each(|x| *x = act.apply(*x));
        if !z.is_finite() {
            return Err(Error::NonFinite { stage: "forward", layer: t });
        }
        aggregated.push(s);
        means.push(mean);
        states.push(z);
    }
    let last = states.last().expect("at least the input state");
    let mut readout = last.row(0).to_vec();
    let mut argmax = vec![0; d];
    for v in 1..n {
        for (j, &x) in last.row(v).iter().enumerate() {
            if x > readout[j] {
                readout[j] = x;
                argmax[j] = v;
            }
        }
    }
    let mut h1 = params.head[0].forward(&readout);
    h1.iter_mut().for_each(|x| *x = HEAD_ACTIVATION.apply(*x));
    let mut h2 = params.head[1].forward(&h1);
    h2.iter_mut().for_each(|x| *x = HEAD_ACTIVATION.apply(*x));
    let out = params.head[2].forward(&h2);
    let logits = [out[0], out[1]];
    if !logits.iter().chain(&h1).chain(&h2).all(|x| x.is_finite()) {
        return Err(Error::NonFinite { stage: "head", layer: params.layers.len() });
    }
    Ok(Tape { states, aggregated, means, readout, argmax, hidden: [h1, h2], logits })
}

/// Raw class scores for one graph.
pub fn forward(g: &TypedGraph, features: &FeatureMatrix, params: &ModelParams, activation: Activation) -> Result<[f64; 2]> {
    Ok(run(g, features, params, activation)?.logits)
}

/// Index of the larger logit; ties go to class 0.
pub fn predict(logits: [f64; 2]) -> usize {
    usize::from(logits[1] > logits[0])
}

/// `(-log softmax(logits)[label], softmax - onehot)`.
pub fn cross_entropy(logits: [f64; 2], label: usize) -> (f64, [f64; 2]) {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    let loss = m + z.ln() - logits[label];
    let mut grad = [e[0] / z, e[1] / z];
    grad[label] -= 1.0;
    (loss, grad)
}

fn add_outer(w: &mut Matrix, x: &[f64], y: &[f64], scale: f64) {
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let xi = xi * scale;
            w.row_mut(i).iter_mut().zip(y).for_each(|(a, b)| *a += xi * b);
        }
    }
}

fn axpy(y: &mut [f64], x: &[f64], scale: f64) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += scale * b);
}

/// Accumulates `scale * d loss / d params` into `grads` for one example and
/// returns the loss and the logits.
pub(crate) fn accumulate_example(
    g: &TypedGraph,
    features: &FeatureMatrix,
    label: usize,
    params: &ModelParams,
    act: Activation,
    scale: f64,
    grads: &mut ModelParams,
) -> Result<(f64, [f64; 2])> {
    if label >= NUM_CLASSES {
        return Err(Error::Config(format!("label {label} out of range")));
    }
    let tape = run(g, features, params, act)?;
    let (loss, dlogits) = cross_entropy(tape.logits, label);
    let n = g.num_nodes();
    let d = params.d();

    // Head.
    let [h1, h2] = &tape.hidden;
    let [g1, g2, g3] = &mut grads.head[..] else { unreachable!("three head maps") };
    add_outer(&mut g3.w, h2, &dlogits, scale);
    axpy(&mut g3.b, &dlogits, scale);
    let mut da2 = mat_vec(&params.head[2].w, &dlogits);
    da2.iter_mut().zip(h2).for_each(|(a, &y)| *a *= HEAD_ACTIVATION.grad_from_output(y));
    add_outer(&mut g2.w, h1, &da2, scale);
    axpy(&mut g2.b, &da2, scale);
    let mut da1 = mat_vec(&params.head[1].w, &da2);
    da1.iter_mut().zip(h1).for_each(|(a, &y)| *a *= HEAD_ACTIVATION.grad_from_output(y));
    add_outer(&mut g1.w, &tape.readout, &da1, scale);
    axpy(&mut g1.b, &da1, scale);
    let dr = mat_vec(&params.head[0].w, &da1);

    // Max readout: each coordinate flows back to its first argmax node.
    let mut dh = Matrix::zeros(n, d);
    for (j, (&v, &x)) in tape.argmax.iter().zip(&dr).enumerate() {
        dh.set(v, j, x);
    }

    for t in (0..params.layers.len()).rev() {
        let layer = &params.layers[t];
        let lg = &mut grads.layers[t];
        let y = &tape.states[t + 1];
        let x = &tape.states[t];
        let mut dz = dh;
        dz.as_mut_slice().iter_mut().zip(y.as_slice()).for_each(|(a, &yv)| *a *= act.grad_from_output(yv));
        gemm(scale, x, Op::T, &dz, Op::N, 1.0, &mut lg.w_self);
        gemm(scale, &tape.aggregated[t], Op::T, &dz, Op::N, 1.0, &mut lg.w_neigh);
        let colsum = dz.col_sums();
        axpy(&mut lg.bias, &colsum, scale);
        add_outer(&mut lg.w_read, &tape.means[t], &colsum, scale);
        if t == 0 && features.random_cols == d {
            break;
        }
        let mut dx = Matrix::zeros(n, d);
        gemm(1.0, &dz, Op::N, &layer.w_self, Op::T, 0.0, &mut dx);
        let mut p = Matrix::zeros(n, d);
        gemm(1.0, &dz, Op::N, &layer.w_neigh, Op::T, 0.0, &mut p);
        let mut spread = mat_vec(&layer.w_read, &colsum);
        spread.iter_mut().for_each(|a| *a /= n as f64);
        for v in 0..n {
            let row = dx.row_mut(v);
            for &u in g.neighbors(v) {
                row.iter_mut().zip(p.row(u)).for_each(|(a, b)| *a += b);
            }
            row.iter_mut().zip(&spread).for_each(|(a, b)| *a += b);
        }
        if !dx.is_finite() {
            return Err(Error::NonFinite { stage: "backward", layer: t });
        }
        if t == 0 {
            let rc = features.random_cols;
            for v in 0..n {
                let ty = g.node_type(v).index();
                axpy(grads.type_embedding.row_mut(ty), &dx.row(v)[rc..], scale);
            }
            break;
        }
        dh = dx;
    }
    Ok((loss, tape.logits))
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn loss_and_grad(
    batch: &[(&TypedGraph, &FeatureMatrix, usize)],
    params: &ModelParams,
    activation: Activation,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for &(g, f, label) in batch {
        total += accumulate_example(g, f, label, params, activation, scale, &mut grads)?.0;
    }
    Ok((total * scale, grads))
}

/// Deterministic-only features: the type embedding broadcast to every node.
pub fn type_features(g: &TypedGraph, params: &ModelParams) -> FeatureMatrix {
    let d = params.d();
    let det = params.type_embedding.cols();
    let mut values = Matrix::zeros(g.num_nodes(), d);
    for v in 0..g.num_nodes() {
        values.row_mut(v)[d - det..].copy_from_slice(params.type_embedding.row(g.node_type(v).index()));
    }
    FeatureMatrix { values, random_cols: d - det }
}

/// Features for `g` under `config`, with fresh random columns.
pub fn sample_features<R: Rng + ?Sized>(
    g: &TypedGraph,
    config: &ModelConfig,
    params: &ModelParams,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    crate::rni::init_features(g, config.d, config.rni_fraction, config.scheme, &params.type_embedding, rng)
}
