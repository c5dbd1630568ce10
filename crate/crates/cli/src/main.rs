use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wlrni::datagen::{self, BaseSource, Dataset, GeneratorConfig, Manifest};
use wlrni::nn::{self, Activation, ModelConfig};
use wlrni::rni::{self, InitScheme, LemmaParams};

/// Generate, certify and learn on EXP/CEXP graph-pair datasets.
#[derive(Parser, Debug)]
#[command(name = "wlrni", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of SAT/UNSAT graph pairs as JSON lines plus a manifest.
    Gen(GenArgs),
    /// Re-check every pair of a dataset: labels, non-isomorphism and WL verdicts.
    Verify(VerifyArgs),
    /// Cross-validate a graph network on a dataset and write per-epoch metrics.
    Train(TrainArgs),
    /// Estimate how often random thresholds individualize n nodes.
    Lemma(LemmaArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Number of graph pairs.
    #[arg(long, default_value_t = 600)]
    pairs: usize,
    /// Fraction of pairs to corrupt (0 gives EXP, 0.5 gives CEXP).
    #[arg(long, default_value_t = 0.0)]
    corrupt_fraction: f64,
    /// Master seed.
    #[arg(long, env = "WLRNI_SEED", default_value_t = 0)]
    seed: u64,
    /// Output path for graph records (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: OUT with extension .manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Smallest core size n.
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    /// Largest core size n.
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    /// Planar base size and relative weight as SIZE:WEIGHT; repeatable
    /// [default: 12:5 15:1].
    #[arg(long = "planar", value_parser = parse_size_weight)]
    planar: Vec<(usize, usize)>,
    /// Widest clause cut from a planar base.
    #[arg(long, default_value_t = 5)]
    max_clause_width: usize,
    /// Planar base graph file ("V E" then one edge per line); repeatable.
    /// Replaces random quadrangulations; --planar sizes are then ignored.
    #[arg(long = "base-graph")]
    base_graphs: Vec<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Dataset file written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Manifest to check the checksum against [default: DATA with extension .manifest.json, if present].
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset file written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Metrics output (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Message-passing layers.
    #[arg(long, default_value_t = 8)]
    layers: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Message-passing activation: elu or tanh.
    #[arg(long, default_value = "elu")]
    activation: Activation,
    /// Fraction of embedding columns drawn at random per forward pass.
    #[arg(long, default_value_t = 0.0)]
    rni_fraction: f64,
    /// Random feature distribution: N, U, XN or XU.
    #[arg(long, default_value = "N")]
    scheme: InitScheme,
    /// Adam learning rate [default: 1e-4 without RNI, 5e-4 with full RNI, 2e-4 partial].
    #[arg(long)]
    lr: Option<f64>,
    /// Training epochs per fold.
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Train only the first K folds.
    #[arg(long)]
    fold_limit: Option<usize>,
    /// Seed for splits, initialization and random features.
    #[arg(long, env = "WLRNI_SEED", default_value_t = 0)]
    seed: u64,
    /// Leave wall-clock fields out of the metrics file.
    #[arg(long)]
    no_timestamps: bool,
    /// Folds trained in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Multiplier on the Glorot bound of the message-passing weights.
    #[arg(long, default_value_t = nn::model::DEFAULT_INIT_GAIN)]
    init_gain: f64,
    /// Print one line per fold epoch to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Failure probability bound, in (0, 1).
    #[arg(long)]
    delta: f64,
    /// Independent trials.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Seed.
    #[arg(long, env = "WLRNI_SEED", default_value_t = 0)]
    seed: u64,
}

fn parse_size_weight(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected SIZE:WEIGHT, got {s:?}"))?;
    let size = a.trim().parse().map_err(|e| format!("size {a:?}: {e}"))?;
    let weight = b.trim().parse().map_err(|e| format!("weight {b:?}: {e}"))?;
    Ok((size, weight))
}

fn manifest_path(data: &Path) -> PathBuf {
    data.with_extension("manifest.json")
}

fn check_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<bool> {
    check_jobs(args.jobs)?;
    let config = GeneratorConfig {
        num_pairs: args.pairs,
        n_min: args.n_min,
        n_max: args.n_max,
        planar_sizes: if args.planar.is_empty() { vec![(12, 5), (15, 1)] } else { args.planar },
        max_clause_width: args.max_clause_width,
        corrupt_fraction: args.corrupt_fraction,
        seed: args.seed,
    };
    let source = if args.base_graphs.is_empty() {
        BaseSource::Quadrangulation
    } else {
        let bases = args
            .base_graphs
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                datagen::parse_base_graph(&text).with_context(|| format!("base graph {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        BaseSource::Pool(bases)
    };
    let dataset = datagen::generate_dataset_with(&config, &source, args.jobs)?;
    let manifest_out = args.manifest.unwrap_or_else(|| manifest_path(&args.out));
    let mut records = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    let mut manifest =
        BufWriter::new(File::create(&manifest_out).with_context(|| format!("creating {}", manifest_out.display()))?);
    dataset.write(&mut records, &mut manifest)?;
    records.flush()?;
    manifest.flush()?;
    let counts = dataset.counts();
    println!("pairs      {}", dataset.pairs.len());
    println!("graphs     {}", 2 * dataset.pairs.len());
    println!("exp        {}", counts.exp);
    println!("corrupt    {}", counts.corrupt);
    println!("seed       {}", config.seed);
    println!("records    {}", args.out.display());
    println!("manifest   {}", manifest_out.display());
    Ok(true)
}

fn load_dataset(path: &Path) -> Result<(Dataset, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let dataset = Dataset::read_jsonl(BufReader::new(&bytes[..])).with_context(|| format!("parsing {}", path.display()))?;
    Ok((dataset, bytes))
}

fn verify(args: VerifyArgs) -> Result<bool> {
    check_jobs(args.jobs)?;
    let (dataset, bytes) = load_dataset(&args.data)?;
    let mut ok = true;
    let manifest_file = args.manifest.clone().or_else(|| Some(manifest_path(&args.data)).filter(|p| p.exists()));
    if let Some(mp) = &manifest_file {
        let text = fs::read_to_string(mp).with_context(|| format!("reading {}", mp.display()))?;
        let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", mp.display()))?;
        let actual = datagen::dataset::checksum(&bytes);
        let matches = manifest.checksum == actual && manifest.num_pairs == dataset.pairs.len();
        println!("manifest   {} ({})", mp.display(), if matches { "checksum ok" } else { "MISMATCH" });
        ok &= matches;
    }
    let report = datagen::validate_dataset(&dataset, args.jobs)?;
    let pct = 100.0 * report.num_valid as f64 / report.num_pairs.max(1) as f64;
    println!("pairs      {} (exp {}, corrupt {})", report.num_pairs, report.exp, report.corrupt);
    println!("valid      {} ({pct:.1}%)", report.num_valid);
    for r in report.failures() {
        println!(
            "FAIL pair {} [{}]: labels {} non-iso {} wl1-indist {:?} fwl2-dist {:?} wl1-dist {:?}",
            r.pair_id,
            r.subset.as_str(),
            r.sat_labels_ok,
            r.non_isomorphic,
            r.wl1_indistinguishable,
            r.fwl2_distinguishable,
            r.wl1_distinguishable
        );
    }
    Ok(ok && report.is_valid())
}

fn train(args: TrainArgs) -> Result<bool> {
    check_jobs(args.jobs)?;
    let config = ModelConfig {
        layers: args.layers,
        d: args.dim,
        activation: args.activation,
        rni_fraction: args.rni_fraction,
        scheme: args.scheme,
        lr: args.lr,
        epochs: args.epochs,
        folds: args.folds,
        fold_limit: args.fold_limit,
        seed: args.seed,
        init_gain: args.init_gain,
    };
    config.validate()?;
    let (dataset, _) = load_dataset(&args.data)?;
    let progress = |fold: usize, e: &nn::EpochRecord| {
        eprintln!(
            "fold {fold} epoch {} loss {:.4} train {:.3} test {:.3}",
            e.epoch, e.train_loss, e.train_acc, e.test_acc
        );
    };
    let quiet = |_: usize, _: &nn::EpochRecord| {};
    let observer: nn::EpochObserver<'_> = if args.progress { &progress } else { &quiet };
    let record = nn::cross_validate_observed(&dataset, &config, args.jobs, observer)?;
    let mut out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    record.write_metrics(&mut out, !args.no_timestamps)?;
    out.flush()?;
    println!("{}", record.summary_text());
    println!("metrics    {}", args.out.display());
    Ok(true)
}

fn lemma(args: LemmaArgs) -> Result<bool> {
    let params = LemmaParams::new(args.n, args.delta)?;
    let est = rni::individualization_rate(&params, args.trials, args.seed)?;
    println!("n {}  delta {}  c {}  k {}  thresholds {}", params.n, params.delta, params.c, params.k, params.thresholds);
    println!("successes  {}/{}", est.successes, est.trials);
    println!("rate       {:.4}", est.rate);
    println!("wilson95   [{:.4}, {:.4}]", est.lower, est.upper);
    println!("bound      {:.4}", 1.0 - params.delta);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Verify(a) => verify(a),
        Command::Train(a) => train(a),
        Command::Lemma(a) => lemma(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
