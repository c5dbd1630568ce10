//! Fold training, cross-validation and metrics output.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::adam::{adam_step, AdamState};
use super::model::{accumulate_example, forward, predict, sample_features, ModelConfig, ModelParams};
use crate::datagen::{Dataset, GraphPair, Subset};
use crate::error::{Error, Result};
use crate::graph::TypedGraph;

/// Stream used for the fold assignment; fold `f` trains on stream `f + 1`.
const SPLIT_STREAM: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub test_acc_exp: Option<f64>,
    pub test_acc_corrupt: Option<f64>,
    /// Largest `|logits(sat) - logits(unsat)|` over held-out Exp pairs.
    pub max_exp_logit_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub seed: u64,
    pub lr: f64,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub epochs: Vec<EpochRecord>,
}

impl FoldRecord {
    pub fn final_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn final_test_acc(&self) -> f64 {
        self.final_epoch().map_or(f64::NAN, |e| e.test_acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; `None` for an empty sample.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: ModelConfig,
    pub lr: f64,
    pub seed: u64,
    pub folds: Vec<FoldRecord>,
    pub final_test_acc: Vec<f64>,
    pub summary: MeanStd,
    pub summary_exp: Option<MeanStd>,
    pub summary_corrupt: Option<MeanStd>,
    /// Mean and spread of test accuracy across folds, per epoch.
    pub per_epoch: Vec<MeanStd>,
    pub wall_clock_secs: f64,
}

impl TrainRecord {
    /// Metrics as JSON lines: one per fold epoch, one per epoch across
    /// folds, then a summary. `timestamps = false` omits wall-clock fields.
    pub fn write_metrics<W: Write>(&self, out: &mut W, timestamps: bool) -> Result<()> {
        for f in &self.folds {
            for e in &f.epochs {
                let line = json!({
                    "kind": "epoch",
                    "fold": f.fold,
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "train_acc": e.train_acc,
                    "test_acc": e.test_acc,
                    "test_acc_exp": e.test_acc_exp,
                    "test_acc_corrupt": e.test_acc_corrupt,
                    "max_exp_logit_gap": e.max_exp_logit_gap,
                });
                writeln!(out, "{line}")?;
            }
        }
        for (i, s) in self.per_epoch.iter().enumerate() {
            let line = json!({ "kind": "epoch_summary", "epoch": i + 1, "test_acc_mean": s.mean, "test_acc_std": s.std });
            writeln!(out, "{line}")?;
        }
        let mut summary = json!({
            "kind": "summary",
            "config": self.config,
            "lr": self.lr,
            "seed": self.seed,
            "folds": self.folds.len(),
            "final_test_acc": self.final_test_acc,
            "test_acc": self.summary,
            "test_acc_exp": self.summary_exp,
            "test_acc_corrupt": self.summary_corrupt,
        });
        if timestamps {
            summary["wall_clock_secs"] = json!(self.wall_clock_secs);
        }
        writeln!(out, "{summary}")?;
        Ok(())
    }

    /// Human-readable result block.
    pub fn summary_text(&self) -> String {
        let pct = |m: &MeanStd| format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std);
        let mut s = format!(
            "folds {}  epochs {}  lr {:e}  rni {}  scheme {}\ntest accuracy {}",
            self.folds.len(),
            self.config.epochs,
            self.lr,
            self.config.rni_fraction,
            self.config.scheme.short_name(),
            pct(&self.summary)
        );
        if let Some(m) = &self.summary_exp {
            s += &format!("\n  exp     {}", pct(m));
        }
        if let Some(m) = &self.summary_corrupt {
            s += &format!("\n  corrupt {}", pct(m));
        }
        s
    }
}

/// Pair indices per fold: a seeded shuffle cut into `folds` nearly equal runs.
pub fn fold_assignment(num_pairs: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    if num_pairs < folds {
        return Err(Error::Dataset(format!("{num_pairs} pairs cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..num_pairs).collect();
    order.shuffle(&mut crate::datagen::pair_rng(seed, SPLIT_STREAM));
    let (base, extra) = (num_pairs / folds, num_pairs % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

struct Example<'a> {
    graph: &'a TypedGraph,
    label: usize,
}

fn examples<'a>(pairs: &[&'a GraphPair]) -> Vec<Example<'a>> {
    pairs
        .iter()
        .flat_map(|p| [Example { graph: &p.sat_graph, label: 1 }, Example { graph: &p.unsat_graph, label: 0 }])
        .collect()
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Called after every epoch with the fold index and that epoch's record.
pub type EpochObserver<'a> = &'a (dyn Fn(usize, &EpochRecord) + Sync);

/// Trains one model on `train` and evaluates on `test` after every epoch.
pub fn train_fold(
    train: &[&GraphPair],
    test: &[&GraphPair],
    config: &ModelConfig,
    lr: f64,
    fold: usize,
) -> Result<FoldRecord> {
    train_fold_observed(train, test, config, lr, fold, &|_, _| {})
}

pub fn train_fold_observed(
    train: &[&GraphPair],
    test: &[&GraphPair],
    config: &ModelConfig,
    lr: f64,
    fold: usize,
    observer: EpochObserver<'_>,
) -> Result<FoldRecord> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Dataset("empty training split".into()));
    }
    if train.iter().any(|p| test.iter().any(|q| q.pair_id == p.pair_id)) {
        return Err(Error::Dataset("a pair appears in both training and test splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(fold as u64 + 1);
    let mut params = ModelParams::init(config, &mut rng);
    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let train_examples = examples(train);
    let mut order: Vec<usize> = (0..train_examples.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for &i in &order {
            let ex = &train_examples[i];
            let features = sample_features(ex.graph, config, &params, &mut rng)?;
            grads.fill(0.0);
            let (loss, logits) =
                accumulate_example(ex.graph, &features, ex.label, &params, config.activation, 1.0, &mut grads)?;
            loss_sum += loss;
            correct += usize::from(predict(logits) == ex.label);
            adam_step(&mut params, &grads, &mut adam, lr);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite { stage: "adam", layer: config.layers });
        }

        let mut hits = [[0usize; 2]; 2];
        let mut gap: Option<f64> = None;
        for p in test {
            let fs = sample_features(&p.sat_graph, config, &params, &mut rng)?;
            let ls = forward(&p.sat_graph, &fs, &params, config.activation)?;
            let fu = sample_features(&p.unsat_graph, config, &params, &mut rng)?;
            let lu = forward(&p.unsat_graph, &fu, &params, config.activation)?;
            let s = usize::from(p.subset == Subset::Corrupt);
            hits[s][0] += usize::from(predict(ls) == 1) + usize::from(predict(lu) == 0);
            hits[s][1] += 2;
            if p.subset == Subset::Exp {
                let d = (ls[0] - lu[0]).abs().max((ls[1] - lu[1]).abs());
                gap = Some(gap.map_or(d, |g: f64| g.max(d)));
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            test_acc: ratio(hits[0][0] + hits[1][0], hits[0][1] + hits[1][1]).unwrap_or(f64::NAN),
            test_acc_exp: ratio(hits[0][0], hits[0][1]),
            test_acc_corrupt: ratio(hits[1][0], hits[1][1]),
            max_exp_logit_gap: gap,
        };
        observer(fold, &record);
        epochs.push(record);
    }
    Ok(FoldRecord { fold, seed: config.seed, lr, train_pairs: train.len(), test_pairs: test.len(), epochs })
}

/// Pair-level k-fold cross-validation. Folds run on up to `jobs` threads;
/// results do not depend on `jobs`.
pub fn cross_validate(dataset: &Dataset, config: &ModelConfig, jobs: usize) -> Result<TrainRecord> {
    cross_validate_observed(dataset, config, jobs, &|_, _| {})
}

pub fn cross_validate_observed(
    dataset: &Dataset,
    config: &ModelConfig,
    jobs: usize,
    observer: EpochObserver<'_>,
) -> Result<TrainRecord> {
    config.validate()?;
    let start = Instant::now();
    let has_corrupt = dataset.pairs.iter().any(|p| p.subset == Subset::Corrupt);
    let lr = config.resolved_lr(has_corrupt);
    let assignment = fold_assignment(dataset.pairs.len(), config.folds, config.seed)?;
    let run = config.fold_limit.unwrap_or(config.folds).min(config.folds);

    let job = |f: usize| -> Result<FoldRecord> {
        let test: Vec<&GraphPair> = assignment[f].iter().map(|&i| &dataset.pairs[i]).collect();
        let train: Vec<&GraphPair> = assignment
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| &dataset.pairs[i]))
            .collect();
        train_fold_observed(&train, &test, config, lr, f, observer)
    };
    let folds: Vec<FoldRecord> = if jobs <= 1 {
        (0..run).map(job).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..run).into_par_iter().map(job).collect::<Result<_>>())?
    };

    let final_test_acc: Vec<f64> = folds.iter().map(FoldRecord::final_test_acc).collect();
    let finals = |pick: fn(&EpochRecord) -> Option<f64>| -> Vec<f64> {
        folds.iter().filter_map(|f| f.final_epoch().and_then(pick)).collect()
    };
    let per_epoch = (0..config.epochs)
        .map(|e| {
            let xs: Vec<f64> = folds.iter().map(|f| f.epochs[e].test_acc).collect();
            MeanStd::of(&xs).expect("at least one fold")
        })
        .collect();
    Ok(TrainRecord {
        config: config.clone(),
        lr,
        seed: config.seed,
        summary: MeanStd::of(&final_test_acc).unwrap_or(MeanStd { mean: f64::NAN, std: f64::NAN }),
        summary_exp: MeanStd::of(&finals(|e| e.test_acc_exp)),
        summary_corrupt: MeanStd::of(&finals(|e| e.test_acc_corrupt)),
        final_test_acc,
        per_epoch,
        folds,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
