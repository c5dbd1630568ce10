//! Dataset generation and the line-delimited graph-record format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pair::{corrupt_pair_with, gen_exp_pair_with, validate_pair, GraphPair, PairOptions, PairReport, SeedTrace, Subset};
use super::planar::BaseSource;
use super::{pair_rng, CORRUPT_SELECTION_STREAM};
use crate::error::{Error, Result};
use crate::graph::{NodeType, TypedGraph};

pub const TOOL_NAME: &str = "wlrni";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_pairs: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// `(base node count, weight)`; weights are scaled to `num_pairs`.
    pub planar_sizes: Vec<(usize, usize)>,
    pub max_clause_width: usize,
    pub corrupt_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_pairs: 600,
            n_min: 2,
            n_max: 4,
            planar_sizes: vec![(12, 500), (15, 100)],
            max_clause_width: 5,
            corrupt_fraction: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 2 || self.n_min > self.n_max {
            return Err(Error::Config(format!("need 2 <= n_min <= n_max, got {}..{}", self.n_min, self.n_max)));
        }
        if self.max_clause_width < 2 {
            return Err(Error::Config("max_clause_width must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.corrupt_fraction) {
            return Err(Error::Config(format!("corrupt_fraction {} outside [0, 1]", self.corrupt_fraction)));
        }
        if self.planar_sizes.is_empty() || self.planar_sizes.iter().all(|&(_, w)| w == 0) {
            return Err(Error::Config("planar_sizes needs a positive weight".into()));
        }
        if let Some(&(s, _)) = self.planar_sizes.iter().find(|&&(s, _)| s < 4) {
            return Err(Error::Config(format!("planar base size {s} below 4")));
        }
        Ok(())
    }

    /// Base size for every pair id: weights scaled by largest remainder,
    /// sizes laid out in config order.
    pub fn planar_schedule(&self) -> Vec<usize> {
        let total: usize = self.planar_sizes.iter().map(|&(_, w)| w).sum();
        let exact: Vec<f64> =
            self.planar_sizes.iter().map(|&(_, w)| self.num_pairs as f64 * w as f64 / total as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut short = self.num_pairs - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            counts[i] += 1;
            short -= 1;
        }
        self.planar_sizes.iter().zip(counts).flat_map(|(&(s, _), c)| std::iter::repeat_n(s, c)).collect()
    }

    pub fn num_corrupt(&self) -> usize {
        (self.num_pairs as f64 * self.corrupt_fraction).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    pub exp: usize,
    pub corrupt: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: Option<GeneratorConfig>,
    pub seed: Option<u64>,
    pub num_pairs: usize,
    pub num_graphs: usize,
    pub subsets: SubsetCounts,
    /// SHA-256 of the record file, hex.
    pub checksum: String,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub pairs: Vec<GraphPair>,
    pub config: Option<GeneratorConfig>,
}

/// One line of the record file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub pair_id: usize,
    pub role: String,
    pub subset: Subset,
    pub n: usize,
    pub num_nodes: usize,
    pub node_types: Vec<String>,
    pub edges: Vec<[usize; 2]>,
    pub label: u8,
}

impl GraphRecord {
    fn new(pair: &GraphPair, sat: bool) -> Self {
        let g = if sat { &pair.sat_graph } else { &pair.unsat_graph };
        Self {
            pair_id: pair.pair_id,
            role: if sat { "sat" } else { "unsat" }.to_string(),
            subset: pair.subset,
            n: pair.n,
            num_nodes: g.num_nodes(),
            node_types: g.node_types().iter().map(|t| t.code().to_string()).collect(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            label: u8::from(sat),
        }
    }

    fn graph(&self) -> Result<TypedGraph> {
        if self.node_types.len() != self.num_nodes {
            return Err(Error::Dataset(format!(
                "pair {} {}: {} node types for {} nodes",
                self.pair_id,
                self.role,
                self.node_types.len(),
                self.num_nodes
            )));
        }
        let types = self
            .node_types
            .iter()
            .map(|c| NodeType::from_code(c).ok_or_else(|| Error::Dataset(format!("unknown node type {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(e) = self.edges.iter().find(|e| e[0] >= e[1]) {
            return Err(Error::Dataset(format!("edge {e:?} is not ordered u < v")));
        }
        TypedGraph::new(types, self.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl Dataset {
    pub fn counts(&self) -> SubsetCounts {
        let corrupt = self.pairs.iter().filter(|p| p.subset == Subset::Corrupt).count();
        SubsetCounts { exp: self.pairs.len() - corrupt, corrupt }
    }

    /// Serializes records, sat before unsat for each pair, in pair order.
    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for pair in &self.pairs {
            for sat in [true, false] {
                serde_json::to_writer(&mut out, &GraphRecord::new(pair, sat))?;
                out.push(b'\n');
            }
        }
        Ok(out)
    }

    pub fn manifest(&self, records: &[u8]) -> Manifest {
        Manifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config: self.config.clone(),
            seed: self.config.as_ref().map(|c| c.seed),
            num_pairs: self.pairs.len(),
            num_graphs: 2 * self.pairs.len(),
            subsets: self.counts(),
            checksum: checksum(records),
        }
    }

    pub fn write<W: Write, M: Write>(&self, records: &mut W, manifest: &mut M) -> Result<()> {
        let bytes = self.to_jsonl()?;
        records.write_all(&bytes)?;
        serde_json::to_writer_pretty(&mut *manifest, &self.manifest(&bytes))?;
        manifest.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a record file back into pairs; formulas are decoded from the
    /// graphs. Pair ids must be dense and each pair complete.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut by_id: BTreeMap<usize, (Option<GraphRecord>, Option<GraphRecord>)> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: GraphRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            let slot = by_id.entry(rec.pair_id).or_default();
            let target = match (rec.role.as_str(), rec.label) {
                ("sat", 1) => &mut slot.0,
                ("unsat", 0) => &mut slot.1,
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("role {:?} with label {}", rec.role, rec.label),
                    })
                }
            };
            if target.replace(rec).is_some() {
                return Err(Error::Parse { line: i + 1, msg: "duplicate record".into() });
            }
        }
        let mut pairs = Vec::with_capacity(by_id.len());
        for (expected, (id, slots)) in by_id.into_iter().enumerate() {
            if id != expected {
                return Err(Error::Dataset(format!("pair ids not dense: expected {expected}, found {id}")));
            }
            let (Some(sat), Some(unsat)) = slots else {
                return Err(Error::Dataset(format!("pair {id} is missing a graph")));
            };
            if sat.subset != unsat.subset || sat.n != unsat.n {
                return Err(Error::Dataset(format!("pair {id}: sat and unsat records disagree")));
            }
            pairs.push(GraphPair::from_graphs(id, sat.n, sat.subset, sat.graph()?, unsat.graph()?)?);
        }
        Ok(Self { pairs, config: None })
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Generates every pair from its own stream of `(seed, pair_id)`, so the
/// output does not depend on `jobs`.
pub fn generate_dataset(config: &GeneratorConfig, jobs: usize) -> Result<Dataset> {
    generate_dataset_with(config, &BaseSource::Quadrangulation, jobs)
}

pub fn generate_dataset_with(config: &GeneratorConfig, source: &BaseSource, jobs: usize) -> Result<Dataset> {
    config.validate()?;
    let schedule = config.planar_schedule();
    let mut ids: Vec<usize> = (0..config.num_pairs).collect();
    ids.shuffle(&mut pair_rng(config.seed, CORRUPT_SELECTION_STREAM));
    let mut corrupt = vec![false; config.num_pairs];
    for &i in &ids[..config.num_corrupt()] {
        corrupt[i] = true;
    }
    let opts = PairOptions {
        max_clause_width: config.max_clause_width,
        base_source: source.clone(),
        ..PairOptions::default()
    };

    let build = |pair_id: usize| -> Result<GraphPair> {
        let mut rng = pair_rng(config.seed, pair_id as u64);
        let n = rng.random_range(config.n_min..=config.n_max);
        let mut pair_attempts = 0;
        let mut planar_attempts = 0;
        loop {
            let mut pair = gen_exp_pair_with(n, schedule[pair_id], &opts, &mut rng)?;
            let trace = pair.seed_trace.take().unwrap_or_default();
            pair_attempts += trace.pair_attempts;
            planar_attempts += trace.planar_attempts;
            pair.pair_id = pair_id;
            pair.seed_trace =
                Some(SeedTrace { seed: config.seed, stream: pair_id as u64, pair_attempts, planar_attempts });
            if !corrupt[pair_id] {
                return Ok(pair);
            }
            // A pair that admits no legal literal addition is resampled.
            match corrupt_pair_with(&pair, config.max_clause_width, &mut rng) {
                Ok((bad, _)) if validate_pair(&bad)?.is_valid() => return Ok(bad),
                Ok(_) | Err(Error::Generation(_)) if pair_attempts < opts.pair_retries => continue,
                Ok(_) => return Err(Error::Generation(format!("pair {pair_id}: corruption kept failing"))),
                Err(e) => return Err(e),
            }
        }
    };

    let pairs = if jobs <= 1 {
        (0..config.num_pairs).map(build).collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.num_pairs).into_par_iter().map(build).collect::<Result<Vec<_>>>())?
    };
    Ok(Dataset { pairs, config: Some(config.clone()) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs: Vec<PairReport>,
    pub num_pairs: usize,
    pub num_valid: usize,
    pub exp: usize,
    pub corrupt: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.num_valid == self.num_pairs
    }

    pub fn failures(&self) -> impl Iterator<Item = &PairReport> {
        self.pairs.iter().filter(|r| !r.is_valid())
    }
}

pub fn validate_dataset(dataset: &Dataset, jobs: usize) -> Result<ValidationReport> {
    let run = || dataset.pairs.par_iter().map(validate_pair).collect::<Result<Vec<_>>>();
    let pairs = if jobs <= 1 {
        dataset.pairs.iter().map(validate_pair).collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?
    };
    let num_valid = pairs.iter().filter(|r| r.is_valid()).count();
    let corrupt = pairs.iter().filter(|r| r.subset == Subset::Corrupt).count();
    Ok(ValidationReport { num_pairs: pairs.len(), num_valid, exp: pairs.len() - corrupt, corrupt, pairs })
}
