//! Certified (SAT, UNSAT) graph pairs: generation, corruption and validation.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gadgets::make_core_pair;
use super::planar::{gen_planar_component_from, BaseSource, DEFAULT_PLANAR_RETRIES};
use crate::error::{Error, Result};
use crate::graph::{are_isomorphic, decode_cnf, encode_cnf, TypedGraph};
use crate::logic::{is_satisfiable, CnfFormula, Literal};
use crate::wl::{wl_distinguishes, WlKind};

pub const DEFAULT_PAIR_RETRIES: usize = 100;
pub const DEFAULT_MAX_CLAUSE_WIDTH: usize = 5;
/// Literals the corruption step adds before it starts checking satisfiability.
pub const MIN_ADDED_LITERALS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Exp,
    Corrupt,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Exp => "exp",
            Subset::Corrupt => "corrupt",
        }
    }
}

/// How a pair's randomness was drawn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub stream: u64,
    pub pair_attempts: usize,
    pub planar_attempts: usize,
}

#[derive(Clone, Debug)]
pub struct GraphPair {
    pub pair_id: usize,
    pub n: usize,
    pub subset: Subset,
    pub sat_graph: TypedGraph,
    pub unsat_graph: TypedGraph,
    pub sat_formula: CnfFormula,
    pub unsat_formula: CnfFormula,
    pub seed_trace: Option<SeedTrace>,
}

impl GraphPair {
    /// Rebuilds a pair from its two graphs; formulas are recovered from the
    /// encodings up to variable renaming and polarity, which preserves
    /// satisfiability.
    pub fn from_graphs(
        pair_id: usize,
        n: usize,
        subset: Subset,
        sat_graph: TypedGraph,
        unsat_graph: TypedGraph,
    ) -> Result<Self> {
        let sat_formula = decode_cnf(&sat_graph)?;
        let unsat_formula = decode_cnf(&unsat_graph)?;
        Ok(Self { pair_id, n, subset, sat_graph, unsat_graph, sat_formula, unsat_formula, seed_trace: None })
    }
}

#[derive(Clone, Debug)]
pub struct PairOptions {
    pub max_clause_width: usize,
    pub pair_retries: usize,
    pub planar_retries: usize,
    pub base_source: BaseSource,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            max_clause_width: DEFAULT_MAX_CLAUSE_WIDTH,
            pair_retries: DEFAULT_PAIR_RETRIES,
            planar_retries: DEFAULT_PLANAR_RETRIES,
            base_source: BaseSource::Quadrangulation,
        }
    }
}

/// One EXP pair: a core pair for `n` conjoined with a single shared planar
/// component, retried until all four EXP properties hold.
pub fn gen_exp_pair<R: Rng + ?Sized>(n: usize, planar_base_nodes: usize, rng: &mut R) -> Result<GraphPair> {
    gen_exp_pair_with(n, planar_base_nodes, &PairOptions::default(), rng)
}

pub fn gen_exp_pair_with<R: Rng + ?Sized>(
    n: usize,
    planar_base_nodes: usize,
    opts: &PairOptions,
    rng: &mut R,
) -> Result<GraphPair> {
    let (core_unsat, core_sat) = make_core_pair(n)?;
    let mut planar_attempts = 0;
    for attempt in 1..=opts.pair_retries {
        let (planar, tries) = gen_planar_component_from(
            &opts.base_source,
            planar_base_nodes,
            opts.max_clause_width,
            opts.planar_retries,
            rng,
        )?;
        planar_attempts += tries;
        let sat_formula = planar.conjoin_disjoint(&core_sat);
        let unsat_formula = planar.conjoin_disjoint(&core_unsat);
        let pair = GraphPair {
            pair_id: 0,
            n,
            subset: Subset::Exp,
            sat_graph: encode_cnf(&sat_formula)?,
            unsat_graph: encode_cnf(&unsat_formula)?,
            sat_formula,
            unsat_formula,
            seed_trace: Some(SeedTrace { pair_attempts: attempt, planar_attempts, ..SeedTrace::default() }),
        };
        if validate_pair(&pair)?.is_valid() {
            return Ok(pair);
        }
    }
    Err(Error::Generation(format!("no valid EXP pair for n={n} after {} attempts", opts.pair_retries)))
}

/// Record of one corruption run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corruption {
    /// `(clause index, literal)` in insertion order.
    pub added: Vec<(usize, Literal)>,
    /// Entries of `added` kept after the minimisation scan.
    pub retained: Vec<(usize, Literal)>,
}

/// Replaces the satisfiable side of an EXP pair with a minimally corrupted
/// copy of the unsatisfiable side.
pub fn corrupt_pair<R: Rng + ?Sized>(pair: &GraphPair, rng: &mut R) -> Result<GraphPair> {
    corrupt_pair_with(pair, DEFAULT_MAX_CLAUSE_WIDTH, rng).map(|(p, _)| p)
}

pub fn corrupt_pair_with<R: Rng + ?Sized>(
    pair: &GraphPair,
    max_width: usize,
    rng: &mut R,
) -> Result<(GraphPair, Corruption)> {
    if pair.subset != Subset::Exp {
        return Err(Error::Generation(format!("pair {} is already corrupted", pair.pair_id)));
    }
    let mut formula = pair.unsat_formula.clone();
    let num_vars = formula.num_vars();
    let mut added: Vec<(usize, Literal)> = Vec::new();

    while added.len() < MIN_ADDED_LITERALS || !is_satisfiable(&formula) {
        let open: Vec<usize> = formula
            .clauses()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.width() < max_width && c.width() < num_vars)
            .map(|(i, _)| i)
            .collect();
        let Some(&ci) = open.choose(rng) else {
            return Err(Error::Generation(format!(
                "pair {}: no clause can take another literal",
                pair.pair_id
            )));
        };
        let clause = &formula.clauses()[ci];
        let options: Vec<Literal> = (0..num_vars)
            .filter(|&v| !clause.mentions(v))
            .flat_map(|v| [Literal::pos(v), Literal::neg(v)])
            .collect();
        let lit = *options.choose(rng).expect("clause narrower than the variable count");
        formula.clauses_mut()[ci].push(lit);
        added.push((ci, lit));
    }

    // Single pass in insertion order: drop an added literal whenever the
    // formula stays satisfiable without it.
    let mut retained = Vec::new();
    for &(ci, lit) in &added {
        formula.clauses_mut()[ci].remove(lit);
        if is_satisfiable(&formula) {
            continue;
        }
        formula.clauses_mut()[ci].push(lit);
        retained.push((ci, lit));
    }

    let sat_graph = encode_cnf(&formula)?;
    let out = GraphPair {
        pair_id: pair.pair_id,
        n: pair.n,
        subset: Subset::Corrupt,
        sat_graph,
        unsat_graph: pair.unsat_graph.clone(),
        sat_formula: formula,
        unsat_formula: pair.unsat_formula.clone(),
        seed_trace: pair.seed_trace.clone(),
    };
    Ok((out, Corruption { added, retained }))
}

/// Edges of `sat_graph` absent from `unsat_graph`, or `None` if the unsat
/// graph is not a subgraph on the same node set.
pub fn added_edges(pair: &GraphPair) -> Option<Vec<(usize, usize)>> {
    let (s, u) = (&pair.sat_graph, &pair.unsat_graph);
    if s.node_types() != u.node_types() || !u.edges().iter().all(|&(a, b)| s.has_edge(a, b)) {
        return None;
    }
    Some(s.edges().iter().copied().filter(|&(a, b)| !u.has_edge(a, b)).collect())
}

/// Post-hoc minimality oracle for a corrupted pair: the sat graph extends the
/// unsat graph by at least one edge, and deleting any single added edge
/// makes the decoded formula unsatisfiable again.
///
/// Deleting literals only strengthens a formula, so a literal that was
/// necessary at its scan position is still necessary after later deletions;
/// checking the final formula therefore covers every scan position.
pub fn corruption_is_minimal(pair: &GraphPair) -> Result<bool> {
    let Some(extra) = added_edges(pair) else {
        return Ok(false);
    };
    if extra.is_empty() {
        return Ok(false);
    }
    for &e in &extra {
        let reduced =
            TypedGraph::new(pair.sat_graph.node_types().to_vec(), pair.sat_graph.edges().iter().copied().filter(|&x| x != e))?;
        if is_satisfiable(&decode_cnf(&reduced)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-pair certificate flags. Flags that do not apply to the pair's subset
/// are `None`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair_id: usize,
    pub subset: Subset,
    pub sat_labels_ok: bool,
    pub non_isomorphic: bool,
    pub wl1_indistinguishable: Option<bool>,
    pub fwl2_distinguishable: Option<bool>,
    pub wl1_distinguishable: Option<bool>,
}

impl PairReport {
    pub fn is_valid(&self) -> bool {
        self.sat_labels_ok
            && self.non_isomorphic
            && self.wl1_indistinguishable.unwrap_or(true)
            && self.fwl2_distinguishable.unwrap_or(true)
            && self.wl1_distinguishable.unwrap_or(true)
    }
}

pub fn validate_pair(pair: &GraphPair) -> Result<PairReport> {
    let sat_labels_ok = is_satisfiable(&pair.sat_formula) && !is_satisfiable(&pair.unsat_formula);
    let non_isomorphic = !are_isomorphic(&pair.sat_graph, &pair.unsat_graph)?;
    let wl1 = wl_distinguishes(WlKind::Wl1, &pair.sat_graph, &pair.unsat_graph)?;
    let mut report = PairReport {
        pair_id: pair.pair_id,
        subset: pair.subset,
        sat_labels_ok,
        non_isomorphic,
        wl1_indistinguishable: None,
        fwl2_distinguishable: None,
        wl1_distinguishable: None,
    };
    match pair.subset {
        Subset::Exp => {
            report.wl1_indistinguishable = Some(!wl1);
            // Folklore 2-WL is only worth running when 1-WL is blind.
            report.fwl2_distinguishable = Some(wl1 || wl_distinguishes(WlKind::Fwl2, &pair.sat_graph, &pair.unsat_graph)?);
        }
        Subset::Corrupt => report.wl1_distinguishable = Some(wl1),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::disjoint_union;
    use crate::logic::{solve_sat, SatResult};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_pairs_are_certified_and_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=4 {
            for size in [12, 15] {
                let pair = gen_exp_pair(n, size, &mut rng).unwrap();
                let report = validate_pair(&pair).unwrap();
                assert!(report.is_valid(), "{report:?}");
                for f in [&pair.sat_formula, &pair.unsat_formula] {
                    assert!((10..=22).contains(&f.num_vars()), "{} vars", f.num_vars());
                    assert!((10..=30).contains(&f.num_clauses()), "{} clauses", f.num_clauses());
                }
                assert_eq!(pair.sat_graph.num_nodes(), pair.unsat_graph.num_nodes());
                assert_eq!(pair.sat_graph.typed_degree_sequence(), pair.unsat_graph.typed_degree_sequence());
            }
        }
    }

    #[test]
    fn identical_graphs_fail_non_isomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pair = gen_exp_pair(2, 12, &mut rng).unwrap();
        pair.sat_graph = pair.unsat_graph.clone();
        let report = validate_pair(&pair).unwrap();
        assert!(!report.non_isomorphic);
        assert!(!report.is_valid());
    }

    #[test]
    fn hand_built_n3_pair_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let planar = super::super::planar::gen_planar_component(12, &mut rng).unwrap();
        let (unsat, sat) = make_core_pair(3).unwrap();
        let gp = encode_cnf(&planar).unwrap();
        // Encode the parts separately and glue the graphs; the union is the
        // encoding of the conjunction up to node order.
        let pair = GraphPair {
            pair_id: 7,
            n: 3,
            subset: Subset::Exp,
            sat_graph: disjoint_union(&gp, &encode_cnf(&sat).unwrap()),
            unsat_graph: disjoint_union(&gp, &encode_cnf(&unsat).unwrap()),
            sat_formula: planar.conjoin_disjoint(&sat),
            unsat_formula: planar.conjoin_disjoint(&unsat),
            seed_trace: None,
        };
        let r = validate_pair(&pair).unwrap();
        assert_eq!(
            r,
            PairReport {
                pair_id: 7,
                subset: Subset::Exp,
                sat_labels_ok: true,
                non_isomorphic: true,
                wl1_indistinguishable: Some(true),
                fwl2_distinguishable: Some(true),
                wl1_distinguishable: None,
            }
        );
    }

    #[test]
    fn corruption_flips_label_minimally() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = rng.random_range(2..=4);
            let pair = gen_exp_pair(n, 12, &mut rng).unwrap();
            let (bad, log) = corrupt_pair_with(&pair, 5, &mut rng).unwrap();
            assert!(log.added.len() >= MIN_ADDED_LITERALS);
            assert!(!log.retained.is_empty());
            assert!(solve_sat(&bad.sat_formula).is_sat());
            assert_eq!(bad.unsat_formula, pair.unsat_formula);
            assert_eq!(solve_sat(&bad.unsat_formula), SatResult::Unsatisfiable);
            assert_eq!(bad.unsat_graph, pair.unsat_graph);
            assert_eq!(added_edges(&bad).unwrap().len(), log.retained.len());
            assert!(corruption_is_minimal(&bad).unwrap());
            let r = validate_pair(&bad).unwrap();
            assert!(r.is_valid() && r.wl1_distinguishable == Some(true), "{r:?}");
            assert!(corrupt_pair(&bad, &mut rng).is_err());
        }
    }

    #[test]
    fn minimality_oracle_rejects_redundant_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pair = gen_exp_pair(2, 12, &mut rng).unwrap();
        let (mut bad, _) = corrupt_pair_with(&pair, 5, &mut rng).unwrap();
        // Put back a literal into a clause that is already satisfied by a
        // witness: the extra edge is then unnecessary.
        let witness = solve_sat(&bad.sat_formula).witness().unwrap().clone();
        let mut f = bad.sat_formula.clone();
        let (ci, lit) = f
            .clauses()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.width() < 5)
            .find_map(|(i, c)| {
                (0..f.num_vars())
                    .filter(|&v| !c.mentions(v))
                    .map(|v| Literal { var: v, negated: witness.values[v] })
                    .next()
                    .map(|l| (i, l))
            })
            .unwrap();
        f.clauses_mut()[ci].push(lit);
        bad.sat_graph = encode_cnf(&f).unwrap();
        bad.sat_formula = f;
        assert!(!corruption_is_minimal(&bad).unwrap());
    }
}
