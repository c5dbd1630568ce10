//! Typed clause graphs, the CNF encoding, and exact isomorphism testing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Clause, CnfFormula, Literal};
use crate::wl;

/// Default node cap for [`are_isomorphic`].
pub const ISOMORPHISM_NODE_CAP: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    LiteralNode,
    DisjunctionNode,
}

impl NodeType {
    pub fn index(self) -> usize {
        match self {
            NodeType::LiteralNode => 0,
            NodeType::DisjunctionNode => 1,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            NodeType::LiteralNode => "L",
            NodeType::DisjunctionNode => "D",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "L" => Some(NodeType::LiteralNode),
            "D" => Some(NodeType::DisjunctionNode),
            _ => None,
        }
    }
}

/// Where an encoded node came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeSource {
    Literal(Literal),
    Clause(usize),
}

/// Undirected simple graph with typed nodes.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Provenance is
/// metadata only and does not take part in equality.
#[derive(Clone, Debug)]
pub struct TypedGraph {
    node_types: Vec<NodeType>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    provenance: Option<Vec<NodeSource>>,
}

impl PartialEq for TypedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.node_types == other.node_types && self.edges == other.edges
    }
}

impl Eq for TypedGraph {}

impl TypedGraph {
    /// Builds a graph, rejecting self-loops, out-of-range endpoints and
    /// duplicate edges. Edge orientation is irrelevant.
    pub fn new(node_types: Vec<NodeType>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = node_types.len();
        let mut norm = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::Graph(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Graph(format!("duplicate edge {:?}", w[0])));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &norm {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self { node_types, edges: norm, adjacency, provenance: None })
    }

    pub fn uniform(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(vec![NodeType::LiteralNode; num_nodes], edges)
    }

    pub fn empty() -> Self {
        Self { node_types: Vec::new(), edges: Vec::new(), adjacency: Vec::new(), provenance: None }
    }

    pub fn with_provenance(mut self, provenance: Vec<NodeSource>) -> Result<Self> {
        if provenance.len() != self.num_nodes() {
            return Err(Error::Graph(format!(
                "provenance has {} entries for {} nodes",
                provenance.len(),
                self.num_nodes()
            )));
        }
        self.provenance = Some(provenance);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn node_type(&self, v: usize) -> NodeType {
        self.node_types[v]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn provenance(&self) -> Option<&[NodeSource]> {
        self.provenance.as_deref()
    }

    /// Sorted `(type, degree)` sequence; equal for isomorphic graphs.
    pub fn typed_degree_sequence(&self) -> Vec<(NodeType, usize)> {
        let mut seq: Vec<_> = (0..self.num_nodes()).map(|v| (self.node_types[v], self.degree(v))).collect();
        seq.sort_unstable();
        seq
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Graph("not a permutation of the node set".into()));
        }
        let mut types = vec![NodeType::LiteralNode; n];
        for v in 0..n {
            types[perm[v]] = self.node_types[v];
        }
        let mut g = Self::new(types, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))?;
        if let Some(prov) = &self.provenance {
            let mut p = prov.clone();
            for v in 0..n {
                p[perm[v]] = prov[v];
            }
            g.provenance = Some(p);
        }
        Ok(g)
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        queue.push_back(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Checks the structure every CNF encoding has: each literal node has
    /// exactly one literal neighbour, disjunction nodes only touch literals.
    pub fn is_encoding_shaped(&self) -> bool {
        (0..self.num_nodes()).all(|v| match self.node_types[v] {
            NodeType::LiteralNode => {
                self.adjacency[v]
                    .iter()
                    .filter(|&&w| self.node_types[w] == NodeType::LiteralNode)
                    .count()
                    == 1
            }
            NodeType::DisjunctionNode => {
                self.adjacency[v].iter().all(|&w| self.node_types[w] == NodeType::LiteralNode)
            }
        })
    }
}

/// Literal node of `x_var` with the given polarity in an encoding.
pub fn literal_node(lit: Literal) -> usize {
    2 * lit.var + usize::from(lit.negated)
}

/// Encodes a formula: nodes `2i`/`2i+1` are the positive/negative literals of
/// `x_i`, followed by one disjunction node per clause.
pub fn encode_cnf(formula: &CnfFormula) -> Result<TypedGraph> {
    if let Some(c) = formula.clauses().iter().find(|c| c.is_tautology()) {
        return Err(Error::Formula(format!("cannot encode tautological clause {c}")));
    }
    let nv = formula.num_vars();
    let mut types = vec![NodeType::LiteralNode; 2 * nv];
    types.extend(std::iter::repeat_n(NodeType::DisjunctionNode, formula.num_clauses()));
    let mut edges: Vec<(usize, usize)> = (0..nv).map(|i| (2 * i, 2 * i + 1)).collect();
    for (j, c) in formula.clauses().iter().enumerate() {
        edges.extend(c.literals().iter().map(|&l| (literal_node(l), 2 * nv + j)));
    }
    let mut provenance: Vec<NodeSource> =
        (0..2 * nv).map(|v| NodeSource::Literal(Literal { var: v / 2, negated: v % 2 == 1 })).collect();
    provenance.extend((0..formula.num_clauses()).map(NodeSource::Clause));
    TypedGraph::new(types, edges)?.with_provenance(provenance)
}

/// Inverse of [`encode_cnf`] up to renaming variables and flipping their
/// polarity, both of which preserve satisfiability.
///
/// Literal pairs are numbered by their smaller node index; the smaller node
/// of each pair is taken as the positive literal.
pub fn decode_cnf(g: &TypedGraph) -> Result<CnfFormula> {
    if !g.is_encoding_shaped() {
        return Err(Error::Graph("graph is not a clause encoding".into()));
    }
    let n = g.num_nodes();
    let mut lit_of = vec![None; n];
    let mut num_vars = 0;
    for v in 0..n {
        if g.node_type(v) != NodeType::LiteralNode || lit_of[v].is_some() {
            continue;
        }
        let partner = g
            .neighbors(v)
            .iter()
            .copied()
            .find(|&w| g.node_type(w) == NodeType::LiteralNode)
            .expect("encoding-shaped graph");
        lit_of[v] = Some(Literal::pos(num_vars));
        lit_of[partner] = Some(Literal::neg(num_vars));
        num_vars += 1;
    }
    let mut clauses = Vec::new();
    for v in (0..n).filter(|&v| g.node_type(v) == NodeType::DisjunctionNode) {
        let lits = g.neighbors(v).iter().map(|&w| lit_of[w].expect("literal neighbour")).collect();
        let clause = Clause::new(lits).map_err(|e| Error::Graph(format!("disjunction node {v}: {e}")))?;
        if clause.is_tautology() {
            return Err(Error::Graph(format!("disjunction node {v} is tautological")));
        }
        clauses.push(clause);
    }
    CnfFormula::new(num_vars, clauses)
}

/// `h`'s nodes follow `g`'s; provenance is kept only if both sides carry it.
pub fn disjoint_union(g: &TypedGraph, h: &TypedGraph) -> TypedGraph {
    let shift = g.num_nodes();
    let mut types = g.node_types.clone();
    types.extend_from_slice(&h.node_types);
    let edges = g.edges.iter().copied().chain(h.edges.iter().map(|&(u, v)| (u + shift, v + shift)));
    let mut out = TypedGraph::new(types, edges).expect("union of simple graphs is simple");
    if let (Some(a), Some(b)) = (&g.provenance, &h.provenance) {
        let mut prov = a.clone();
        prov.extend_from_slice(b);
        out.provenance = Some(prov);
    }
    out
}

/// Exact test for a type- and edge-preserving bijection, refusing graphs
/// above [`ISOMORPHISM_NODE_CAP`] nodes.
pub fn are_isomorphic(g: &TypedGraph, h: &TypedGraph) -> Result<bool> {
    are_isomorphic_capped(g, h, ISOMORPHISM_NODE_CAP)
}

pub fn are_isomorphic_capped(g: &TypedGraph, h: &TypedGraph, cap: usize) -> Result<bool> {
    for x in [g, h] {
        if x.num_nodes() > cap {
            return Err(Error::SizeCap { what: "isomorphism search", nodes: x.num_nodes(), cap });
        }
    }
    if g.num_nodes() != h.num_nodes()
        || g.num_edges() != h.num_edges()
        || g.typed_degree_sequence() != h.typed_degree_sequence()
    {
        return Ok(false);
    }
    let n = g.num_nodes();
    if n == 0 {
        return Ok(true);
    }

    // Stable 1-WL colors on the union give a shared, type-aware invariant.
    let union = disjoint_union(g, h);
    let coloring = wl::refine_nodes(&union);
    let (cg, ch) = coloring.colors.split_at(n);
    let mut sg = cg.to_vec();
    let mut sh = ch.to_vec();
    sg.sort_unstable();
    sh.sort_unstable();
    if sg != sh {
        return Ok(false);
    }

    // Isomorphism is an equivalence relation, so matching components greedily
    // is exact.
    let comps_h = h.components();
    let mut used = vec![false; comps_h.len()];
    let key = |comp: &[usize], colors: &[u32]| {
        let mut k: Vec<u32> = comp.iter().map(|&v| colors[v]).collect();
        k.sort_unstable();
        k
    };
    let keys_h: Vec<Vec<u32>> = comps_h.iter().map(|c| key(c, ch)).collect();
    for comp_g in g.components() {
        let kg = key(&comp_g, cg);
        let found = (0..comps_h.len()).find(|&j| {
            !used[j]
                && keys_h[j] == kg
                && Matcher::new(g, h, cg, ch, &comp_g, &comps_h[j]).run()
        });
        match found {
            Some(j) => used[j] = true,
            None => return Ok(false),
        }
    }
    Ok(true)
}

/// Backtracking search for a color-preserving isomorphism between two
/// connected components.
struct Matcher<'a> {
    g: &'a TypedGraph,
    h: &'a TypedGraph,
    cg: &'a [u32],
    ch: &'a [u32],
    order: Vec<usize>,
    /// For each position in `order`, an earlier node adjacent to it, if any.
    anchor: Vec<Option<usize>>,
    targets: &'a [usize],
    map_g: Vec<usize>,
    map_h: Vec<usize>,
}

const UNMAPPED: usize = usize::MAX;

impl<'a> Matcher<'a> {
    fn new(
        g: &'a TypedGraph,
        h: &'a TypedGraph,
        cg: &'a [u32],
        ch: &'a [u32],
        comp_g: &[usize],
        comp_h: &'a [usize],
    ) -> Self {
        let mut class_size = std::collections::HashMap::new();
        for &v in comp_g {
            *class_size.entry(cg[v]).or_insert(0usize) += 1;
        }
        // Start from the rarest color; then always take the node with the
        // most already-ordered neighbours (rarest color, lowest index on ties).
        let mut in_order = vec![false; g.num_nodes()];
        let mut links = vec![0usize; g.num_nodes()];
        let mut order = Vec::with_capacity(comp_g.len());
        let mut anchor = Vec::with_capacity(comp_g.len());
        for _ in 0..comp_g.len() {
            let &next = comp_g
                .iter()
                .filter(|&&v| !in_order[v])
                .min_by_key(|&&v| (std::cmp::Reverse(links[v]), class_size[&cg[v]], v))
                .expect("non-empty remainder");
            anchor.push(g.neighbors(next).iter().copied().find(|&w| in_order[w]));
            in_order[next] = true;
            order.push(next);
            for &w in g.neighbors(next) {
                links[w] += 1;
            }
        }
        Self {
            g,
            h,
            cg,
            ch,
            order,
            anchor,
            targets: comp_h,
            map_g: vec![UNMAPPED; g.num_nodes()],
            map_h: vec![UNMAPPED; h.num_nodes()],
        }
    }

    fn run(&mut self) -> bool {
        self.targets.len() == self.order.len() && self.extend(0)
    }

    fn feasible(&self, u: usize, v: usize) -> bool {
        if self.cg[u] != self.ch[v] || self.map_h[v] != UNMAPPED {
            return false;
        }
        let mut mapped_nbrs = 0;
        for &w in self.g.neighbors(u) {
            let img = self.map_g[w];
            if img != UNMAPPED {
                if !self.h.has_edge(v, img) {
                    return false;
                }
                mapped_nbrs += 1;
            }
        }
        let mapped_nbrs_h = self.h.neighbors(v).iter().filter(|&&x| self.map_h[x] != UNMAPPED).count();
        mapped_nbrs == mapped_nbrs_h
    }

    fn extend(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let u = self.order[depth];
        let candidates: Vec<usize> = match self.anchor[depth] {
            Some(p) => self.h.neighbors(self.map_g[p]).to_vec(),
            None => self.targets.to_vec(),
        };
        for v in candidates {
            if !self.feasible(u, v) {
                continue;
            }
            self.map_g[u] = v;
            self.map_h[v] = u;
            if self.extend(depth + 1) {
                return true;
            }
            self.map_g[u] = UNMAPPED;
            self.map_h[v] = UNMAPPED;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> TypedGraph {
        TypedGraph::uniform(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn construction_rejects_non_simple() {
        assert!(TypedGraph::uniform(2, [(0, 0)]).is_err());
        assert!(TypedGraph::uniform(2, [(0, 1), (1, 0)]).is_err());
        assert!(TypedGraph::uniform(2, [(0, 2)]).is_err());
    }

    #[test]
    fn encode_single_clause() {
        let phi = CnfFormula::from_literals(2, vec![vec![Literal::pos(0), Literal::neg(1)]]).unwrap();
        let g = encode_cnf(&phi).unwrap();
        assert_eq!(g.num_nodes(), 5);
        use NodeType::*;
        assert_eq!(g.node_types(), &[LiteralNode, LiteralNode, LiteralNode, LiteralNode, DisjunctionNode]);
        assert_eq!(g.edges(), &[(0, 1), (0, 4), (2, 3), (3, 4)]);
        assert!(g.is_encoding_shaped());
        assert_eq!(g.provenance().unwrap()[3], NodeSource::Literal(Literal::neg(1)));
        assert_eq!(g.provenance().unwrap()[4], NodeSource::Clause(0));
    }

    #[test]
    fn encode_empty_and_tautology() {
        assert_eq!(encode_cnf(&CnfFormula::empty()).unwrap(), TypedGraph::empty());
        let taut = CnfFormula::from_literals(1, vec![vec![Literal::pos(0), Literal::neg(0)]]).unwrap();
        assert!(encode_cnf(&taut).is_err());
    }

    #[test]
    fn decode_inverts_encode_up_to_satisfiability() {
        let phi = CnfFormula::from_literals(
            3,
            vec![vec![Literal::pos(0), Literal::neg(1)], vec![Literal::pos(2)], vec![Literal::neg(0)]],
        )
        .unwrap();
        let back = decode_cnf(&encode_cnf(&phi).unwrap()).unwrap();
        assert_eq!(back, phi);
        assert!(decode_cnf(&cycle(3)).is_err());
    }

    #[test]
    fn union_shifts_indices() {
        let g = cycle(3);
        let h = cycle(4);
        let u = disjoint_union(&g, &h);
        assert_eq!(u.num_nodes(), 7);
        assert!(u.has_edge(3, 4) && u.has_edge(3, 6) && !u.has_edge(2, 3));
        assert_eq!(disjoint_union(&TypedGraph::empty(), &h), h);
    }

    #[test]
    fn isomorphism_examples() {
        let c7 = cycle(7);
        let perm = [3, 6, 0, 5, 1, 4, 2];
        assert!(are_isomorphic(&c7, &c7.permuted(&perm).unwrap()).unwrap());

        let tri_sq = TypedGraph::uniform(7, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 6), (6, 3)]).unwrap();
        assert!(!are_isomorphic(&tri_sq, &c7).unwrap());
    }

    #[test]
    fn isomorphism_respects_types() {
        let a = TypedGraph::new(vec![NodeType::LiteralNode, NodeType::DisjunctionNode], [(0, 1)]).unwrap();
        let b = TypedGraph::new(vec![NodeType::LiteralNode, NodeType::LiteralNode], [(0, 1)]).unwrap();
        assert!(!are_isomorphic(&a, &b).unwrap());
        assert!(are_isomorphic(&a, &a.permuted(&[1, 0]).unwrap()).unwrap());
    }

    #[test]
    fn isomorphism_cap() {
        let big = TypedGraph::uniform(300, []).unwrap();
        assert!(matches!(are_isomorphic(&big, &big), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn provenance_excluded_from_equality() {
        let phi = CnfFormula::from_literals(1, vec![vec![Literal::pos(0)]]).unwrap();
        let g = encode_cnf(&phi).unwrap();
        let bare = TypedGraph::new(g.node_types().to_vec(), g.edges().iter().copied()).unwrap();
        assert_eq!(g, bare);
    }
}
