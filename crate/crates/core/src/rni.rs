//! Random node initialization and the individualization check.
//!
//! A feature matrix has `d` columns; the leading `floor(d * fraction)` are
//! drawn fresh from the chosen distribution, the rest are copied from the
//! node-type embedding.
//!
//! The individualization check draws `r_1..r_n` uniformly from `[0, 1]`,
//! applies threshold units `s_ij = k r_i - (j - 1) k / (c n^2)` through the
//! linearized sigmoid, and succeeds when every unit is saturated and all `n`
//! resulting bit vectors differ. With `c = ceil(2 / delta)` and
//! `k = c^2 n^3` this happens with probability above `1 - delta`.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TypedGraph;
use crate::nn::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitScheme {
    /// Standard normal.
    Normal01,
    /// Uniform on `[-1, 1]`.
    UniformPM1,
    /// Glorot normal with fan-in = fan-out = d: variance `1/d`.
    XavierNormal,
    /// Glorot uniform with fan-in = fan-out = d: bound `sqrt(3/d)`.
    XavierUniform,
}

impl InitScheme {
    pub fn short_name(self) -> &'static str {
        match self {
            InitScheme::Normal01 => "N",
            InitScheme::UniformPM1 => "U",
            InitScheme::XavierNormal => "XN",
            InitScheme::XavierUniform => "XU",
        }
    }

    fn sampler(self, d: usize) -> Sampler {
        let d = d.max(1) as f64;
        match self {
            InitScheme::Normal01 => Sampler::Normal(Normal::new(0.0, 1.0).expect("valid")),
            InitScheme::XavierNormal => Sampler::Normal(Normal::new(0.0, (1.0 / d).sqrt()).expect("valid")),
            InitScheme::UniformPM1 => Sampler::Uniform(Uniform::new_inclusive(-1.0, 1.0).expect("valid")),
            InitScheme::XavierUniform => {
                let b = (3.0 / d).sqrt();
                Sampler::Uniform(Uniform::new_inclusive(-b, b).expect("valid"))
            }
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "N" | "NORMAL" => Ok(InitScheme::Normal01),
            "U" | "UNIFORM" => Ok(InitScheme::UniformPM1),
            "XN" | "XAVIER-NORMAL" => Ok(InitScheme::XavierNormal),
            "XU" | "XAVIER-UNIFORM" => Ok(InitScheme::XavierUniform),
            _ => Err(Error::Config(format!("unknown init scheme {s:?} (expected N, U, XN or XU)"))),
        }
    }
}

enum Sampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }
}

/// Number of randomized columns out of `d`.
pub fn random_columns(d: usize, rni_fraction: f64) -> usize {
    ((d as f64 * rni_fraction).floor() as usize).min(d)
}

/// Node features: `random_cols` leading random columns, then the type
/// embedding row of each node.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub random_cols: usize,
}

impl FeatureMatrix {
    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self { values: self.values.permute_rows(perm), random_cols: self.random_cols }
    }
}

pub fn init_features<R: Rng + ?Sized>(
    g: &TypedGraph,
    d: usize,
    rni_fraction: f64,
    scheme: InitScheme,
    type_embedding: &Matrix,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    if !(0.0..=1.0).contains(&rni_fraction) {
        return Err(Error::Config(format!("rni_fraction {rni_fraction} outside [0, 1]")));
    }
    let random_cols = random_columns(d, rni_fraction);
    let det = d - random_cols;
    if type_embedding.shape() != (2, det) {
        return Err(Error::Shape(format!(
            "type embedding is {:?}, expected (2, {det}) for d={d}, fraction={rni_fraction}",
            type_embedding.shape()
        )));
    }
    let sampler = scheme.sampler(d);
    let mut values = Matrix::zeros(g.num_nodes(), d);
    for v in 0..g.num_nodes() {
        let row = values.row_mut(v);
        for x in &mut row[..random_cols] {
            *x = sampler.sample(rng);
        }
        row[random_cols..].copy_from_slice(type_embedding.row(g.node_type(v).index()));
    }
    Ok(FeatureMatrix { values, random_cols })
}

/// Linearized sigmoid: clamp to `[0, 1]`.
pub fn linearized_sigmoid(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaParams {
    pub n: usize,
    pub delta: f64,
    /// `ceil(2 / delta)`.
    pub c: u64,
    /// `c^2 n^3`.
    pub k: u64,
    /// Threshold units per node, `c n^2`.
    pub thresholds: u64,
}

impl LemmaParams {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("lemma needs n >= 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta {delta} outside (0, 1)")));
        }
        let c = (2.0 / delta).ceil() as u64;
        let n64 = n as u64;
        let k = c * c * n64 * n64 * n64;
        let thresholds = c * n64 * n64;
        debug_assert_eq!(k % thresholds, 0);
        Ok(Self { n, delta, c, k, thresholds })
    }

    /// Step between consecutive thresholds, `k / (c n^2) = c n`.
    pub fn step(&self) -> u64 {
        self.k / self.thresholds
    }
}

/// Evaluates both lemma conditions for given draws `r` (one per node).
pub fn individualization_holds(params: &LemmaParams, r: &[f64]) -> bool {
    let k = params.k as f64;
    let step = params.step() as f64;
    let mut vectors: Vec<Vec<bool>> = Vec::with_capacity(r.len());
    for &ri in r {
        let mut bits = Vec::with_capacity(params.thresholds as usize);
        for j in 0..params.thresholds {
            let s = k * ri - j as f64 * step;
            let sigma = linearized_sigmoid(s);
            if sigma != 0.0 && sigma != 1.0 {
                return false;
            }
            bits.push(sigma == 1.0);
        }
        vectors.push(bits);
    }
    vectors.iter().enumerate().all(|(i, a)| vectors[..i].iter().all(|b| a != b))
}

pub fn individualization_trial<R: Rng + ?Sized>(params: &LemmaParams, rng: &mut R) -> bool {
    let r: Vec<f64> = (0..params.n).map(|_| rng.random::<f64>()).collect();
    individualization_holds(params, &r)
}

/// Empirical success rate with a Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided 95% Wilson score interval.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Runs `trials` independent trials; trial `i` draws from stream `i` of
/// `seed`, so the estimate does not depend on thread scheduling.
pub fn individualization_rate(params: &LemmaParams, trials: usize, seed: u64) -> Result<RateEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let successes = (0..trials as u64)
        .into_par_iter()
        .filter(|&i| individualization_trial(params, &mut crate::datagen::pair_rng(seed, i)))
        .count();
    let (lower, upper) = wilson_interval(successes, trials);
    Ok(RateEstimate { successes, trials, rate: successes as f64 / trials as f64, lower, upper })
}
