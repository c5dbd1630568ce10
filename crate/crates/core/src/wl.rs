//! Weisfeiler-Leman color refinement: 1-WL on nodes and folklore 2-WL on
//! ordered node pairs.
//!
//! Color ids are ranks of signatures in lexicographic order, so two graphs
//! refined together (as one disjoint union) share a color namespace and their
//! histograms can be compared exactly. No hashing is involved in naming
//! colors.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{disjoint_union, TypedGraph};

/// Default node cap for folklore 2-WL.
pub const FWL2_NODE_CAP: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WlKind {
    Wl1,
    Fwl2,
}

/// Stable 1-WL node coloring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<u32>,
    pub rounds: usize,
    pub histogram: Vec<(u32, usize)>,
}

impl Coloring {
    pub fn num_classes(&self) -> usize {
        self.histogram.len()
    }
}

/// Stable folklore 2-WL coloring of ordered pairs, `colors[u * n + v]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairColoring {
    pub num_nodes: usize,
    pub colors: Vec<u32>,
    pub rounds: usize,
    pub histogram: Vec<(u32, usize)>,
}

impl PairColoring {
    pub fn color(&self, u: usize, v: usize) -> u32 {
        self.colors[u * self.num_nodes + v]
    }

    pub fn num_classes(&self) -> usize {
        self.histogram.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refinement {
    Nodes(Coloring),
    Pairs(PairColoring),
}

impl Refinement {
    pub fn histogram(&self) -> &[(u32, usize)] {
        match self {
            Refinement::Nodes(c) => &c.histogram,
            Refinement::Pairs(c) => &c.histogram,
        }
    }

    pub fn rounds(&self) -> usize {
        match self {
            Refinement::Nodes(c) => c.rounds,
            Refinement::Pairs(c) => c.rounds,
        }
    }
}

/// `(color, count)` sorted by color.
pub fn histogram(colors: impl IntoIterator<Item = u32>) -> Vec<(u32, usize)> {
    let mut sorted: Vec<u32> = colors.into_iter().collect();
    sorted.sort_unstable();
    let mut out: Vec<(u32, usize)> = Vec::new();
    for c in sorted {
        match out.last_mut() {
            Some((last, count)) if *last == c => *count += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

/// Assigns each item the rank of its key among the distinct keys.
fn rank_keys<K: Ord>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ids = vec![0u32; keys.len()];
    let mut next = 0u32;
    for (pos, &i) in idx.iter().enumerate() {
        if pos > 0 && keys[idx[pos - 1]] != keys[i] {
            next += 1;
        }
        ids[i] = next;
    }
    let classes = if keys.is_empty() { 0 } else { next as usize + 1 };
    (ids, classes)
}

/// 1-WL to the fixpoint. The initial color is the node type; each round a
/// node's new color is named by (old color, sorted neighbour colors).
pub fn refine_nodes(g: &TypedGraph) -> Coloring {
    let n = g.num_nodes();
    let types: Vec<usize> = g.node_types().iter().map(|t| t.index()).collect();
    let (mut colors, mut classes) = rank_keys(&types);
    let mut rounds = 0;
    if n > 0 {
        loop {
            let sigs: Vec<(u32, Vec<u32>)> = (0..n)
                .map(|v| {
                    let mut nb: Vec<u32> = g.neighbors(v).iter().map(|&w| colors[w]).collect();
                    nb.sort_unstable();
                    (colors[v], nb)
                })
                .collect();
            let (next, next_classes) = rank_keys(&sigs);
            rounds += 1;
            colors = next;
            if next_classes == classes {
                break;
            }
            classes = next_classes;
        }
    }
    let histogram = histogram(colors.iter().copied());
    Coloring { colors, rounds, histogram }
}

/// Folklore 2-WL to the fixpoint.
///
/// Pair `(u, v)` starts as (type u, type v, equal/adjacent/non-adjacent) and
/// is renamed each round by (old color, multiset over w of
/// (color(u, w), color(w, v))).
pub fn refine_pairs(g: &TypedGraph) -> Result<PairColoring> {
    refine_pairs_capped(g, FWL2_NODE_CAP)
}

pub fn refine_pairs_capped(g: &TypedGraph, cap: usize) -> Result<PairColoring> {
    let n = g.num_nodes();
    if n > cap {
        return Err(Error::SizeCap { what: "folklore 2-WL", nodes: n, cap });
    }
    let mut init = Vec::with_capacity(n * n);
    for u in 0..n {
        for v in 0..n {
            let rel = if u == v {
                0u8
            } else if g.has_edge(u, v) {
                1
            } else {
                2
            };
            init.push((g.node_type(u), g.node_type(v), rel));
        }
    }
    let (mut colors, mut classes) = rank_keys(&init);
    let mut rounds = 0;
    if n > 0 {
        let mut transposed = vec![0u32; n * n];
        let mut buf: Vec<u64> = Vec::with_capacity(n + 1);
        loop {
            for u in 0..n {
                for v in 0..n {
                    transposed[v * n + u] = colors[u * n + v];
                }
            }
            // Signatures are interned first, then named by lexicographic rank.
            let mut table: HashMap<Vec<u64>, u32> = HashMap::new();
            let mut provisional = vec![0u32; n * n];
            for u in 0..n {
                let row = &colors[u * n..(u + 1) * n];
                for v in 0..n {
                    let col = &transposed[v * n..(v + 1) * n];
                    buf.clear();
                    buf.push(u64::from(row[v]));
                    let start = buf.len();
                    buf.extend(row.iter().zip(col).map(|(&a, &b)| u64::from(a) << 32 | u64::from(b)));
                    buf[start..].sort_unstable();
                    let id = match table.get(buf.as_slice()) {
                        Some(&id) => id,
                        None => {
                            let id = table.len() as u32;
                            table.insert(buf.clone(), id);
                            id
                        }
                    };
                    provisional[u * n + v] = id;
                }
            }
            let mut distinct: Vec<(Vec<u64>, u32)> = table.into_iter().collect();
            distinct.sort_unstable();
            let mut canonical = vec![0u32; distinct.len()];
            for (rank, (_, id)) in distinct.iter().enumerate() {
                canonical[*id as usize] = rank as u32;
            }
            let next_classes = distinct.len();
            colors = provisional.into_iter().map(|id| canonical[id as usize]).collect();
            rounds += 1;
            if next_classes == classes {
                break;
            }
            classes = next_classes;
        }
    }
    let histogram = histogram(colors.iter().copied());
    Ok(PairColoring { num_nodes: n, colors, rounds, histogram })
}

pub fn wl_refine(kind: WlKind, g: &TypedGraph) -> Result<Refinement> {
    match kind {
        WlKind::Wl1 => Ok(Refinement::Nodes(refine_nodes(g))),
        WlKind::Fwl2 => refine_pairs(g).map(Refinement::Pairs),
    }
}

/// Refines `g` and `h` jointly on their disjoint union and compares the
/// stable histograms of the two sides.
pub fn wl_distinguishes(kind: WlKind, g: &TypedGraph, h: &TypedGraph) -> Result<bool> {
    let ng = g.num_nodes();
    let union = disjoint_union(g, h);
    match kind {
        WlKind::Wl1 => {
            let c = refine_nodes(&union);
            let (cg, ch) = c.colors.split_at(ng);
            Ok(histogram(cg.iter().copied()) != histogram(ch.iter().copied()))
        }
        WlKind::Fwl2 => {
            let c = refine_pairs(&union)?;
            let n = union.num_nodes();
            let side = |range: std::ops::Range<usize>| {
                histogram(range.clone().flat_map(|u| {
                    let colors = &c.colors;
                    range.clone().map(move |v| colors[u * n + v])
                }))
            };
            Ok(side(0..ng) != side(ng..n))
        }
    }
}
