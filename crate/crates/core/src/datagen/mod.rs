//! EXP and CEXP dataset generation.
//!
//! Every pair is built from a core pair of chain/bridge formulas (one
//! unsatisfiable, one satisfiable, with 1-WL indistinguishable encodings)
//! conjoined with a shared random satisfiable planar component. CEXP
//! additionally corrupts a fraction of pairs so that their two graphs become
//! 1-WL distinguishable.

pub mod dataset;
pub mod gadgets;
pub mod pair;
pub mod planar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dataset::{
    generate_dataset, generate_dataset_with, validate_dataset, Dataset, GeneratorConfig, GraphRecord, Manifest,
    SubsetCounts, ValidationReport,
};
pub use gadgets::{bridge, chain, make_core_pair, Direction};
pub use pair::{
    corrupt_pair, corrupt_pair_with, corruption_is_minimal, gen_exp_pair, gen_exp_pair_with, validate_pair,
    Corruption, GraphPair, PairOptions, PairReport, SeedTrace, Subset,
};
pub use planar::{gen_planar_component, parse_base_graph, random_quadrangulation, BaseSource, PlanarBase};

/// Stream reserved for choosing which pairs get corrupted.
pub const CORRUPT_SELECTION_STREAM: u64 = u64::MAX;

/// Independent ChaCha stream for `(seed, stream)`.
pub fn pair_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
