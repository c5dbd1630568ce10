//! Satisfiable planar CNF components built from 2-connected bipartite planar
//! base graphs.
//!
//! Base graphs come from random quadrangulation growth: start from a 4-cycle
//! (two quadrilateral faces) and repeatedly pick a face and a diagonal of it,
//! then insert a new vertex joined to both diagonal ends. Every face stays a
//! quadrilateral, so the result is planar, bipartite and 2-connected, and the
//! face list doubles as a combinatorial embedding.

use std::collections::{HashSet, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::logic::{solve_sat, Clause, CnfFormula, Literal};

pub const DEFAULT_PLANAR_RETRIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanarBase {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    /// Cyclic neighbour order around each vertex. For imported graphs without
    /// an embedding this is the sorted adjacency list.
    pub rotation: Vec<Vec<usize>>,
}

impl PlanarBase {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Part of each vertex in a proper 2-coloring (vertex 0's part is `false`
    /// in its component), or `None` if the graph is not bipartite.
    pub fn bipartition(&self) -> Option<Vec<bool>> {
        let adj = self.adjacency();
        let mut side: Vec<Option<bool>> = vec![None; self.num_nodes];
        for s in 0..self.num_nodes {
            if side[s].is_some() {
                continue;
            }
            side[s] = Some(false);
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                let su = side[u].expect("visited");
                for &w in &adj[u] {
                    match side[w] {
                        None => {
                            side[w] = Some(!su);
                            queue.push_back(w);
                        }
                        Some(sw) if sw == su => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        side.into_iter().collect()
    }

    /// Connected with no cut vertex (and at least 3 vertices).
    pub fn is_biconnected(&self) -> bool {
        let n = self.num_nodes;
        if n < 3 {
            return false;
        }
        let adj = self.adjacency();
        let connected_without = |skip: Option<usize>| {
            let start = (0..n).find(|&v| Some(v) != skip).expect("n >= 3");
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut count = 1;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if Some(w) != skip && !seen[w] {
                        seen[w] = true;
                        count += 1;
                        stack.push(w);
                    }
                }
            }
            count == n - usize::from(skip.is_some())
        };
        connected_without(None) && (0..n).all(|v| connected_without(Some(v)))
    }
}

/// Random quadrangulation on `num_nodes >= 4` vertices.
pub fn random_quadrangulation<R: Rng + ?Sized>(num_nodes: usize, rng: &mut R) -> Result<PlanarBase> {
    if num_nodes < 4 {
        return Err(Error::Config(format!("quadrangulation needs at least 4 nodes, got {num_nodes}")));
    }
    // Faces are oriented consistently; the second one is the outer face.
    let mut faces: Vec<[usize; 4]> = vec![[0, 1, 2, 3], [0, 3, 2, 1]];
    let mut edges = vec![(0, 1), (1, 2), (2, 3), (0, 3)];
    for x in 4..num_nodes {
        let fi = rng.random_range(0..faces.len());
        let f = faces[fi];
        let [a, b, c, d] = if rng.random_bool(0.5) { f } else { [f[1], f[2], f[3], f[0]] };
        faces[fi] = [a, b, c, x];
        faces.push([c, d, a, x]);
        edges.push((a.min(x), a.max(x)));
        edges.push((c.min(x), c.max(x)));
    }
    edges.sort_unstable();
    let rotation = rotation_from_faces(num_nodes, &faces);
    Ok(PlanarBase { num_nodes, edges, rotation })
}

/// Neighbour cycles around each vertex, starting at the smallest neighbour.
fn rotation_from_faces(n: usize, faces: &[[usize; 4]]) -> Vec<Vec<usize>> {
    let mut succ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for f in faces {
        for i in 0..4 {
            let v = f[i];
            let prev = f[(i + 3) % 4];
            let next = f[(i + 1) % 4];
            succ[v].push((next, prev));
        }
    }
    succ.into_iter()
        .map(|pairs| {
            let start = pairs.iter().map(|p| p.0).min().expect("every vertex lies on a face");
            let mut order = vec![start];
            let mut cur = start;
            loop {
                let next = pairs.iter().find(|p| p.0 == cur).expect("rotation is a cycle").1;
                if next == start {
                    break;
                }
                order.push(next);
                cur = next;
            }
            order
        })
        .collect()
}

/// Reads `"V E"` followed by `E` lines `"u v"` (0-based). The graph must be
/// simple, bipartite and 2-connected; planarity is taken on trust.
pub fn parse_base_graph(text: &str) -> Result<PlanarBase> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let parse_pair = |line_no: usize, line: &str| -> Result<(usize, usize)> {
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("expected two integers, got {line:?}") })?;
        match nums.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::Parse { line: line_no, msg: format!("expected two integers, got {line:?}") }),
        }
    };
    let (idx, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty base graph".into() })?;
    let (num_nodes, num_edges) = parse_pair(idx + 1, header)?;
    let mut edges = Vec::with_capacity(num_edges);
    let mut seen = HashSet::new();
    for _ in 0..num_edges {
        let (idx, line) = lines.next().ok_or(Error::Parse {
            line: idx + 1,
            msg: format!("header declares {num_edges} edges, found {}", edges.len()),
        })?;
        let (u, v) = parse_pair(idx + 1, line)?;
        if u == v || u >= num_nodes || v >= num_nodes || !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::Parse { line: idx + 1, msg: format!("invalid edge {u} {v}") });
        }
        edges.push((u.min(v), u.max(v)));
    }
    if let Some((idx, _)) = lines.next() {
        return Err(Error::Parse { line: idx + 1, msg: "trailing data after edge list".into() });
    }
    edges.sort_unstable();
    let mut rotation = vec![Vec::new(); num_nodes];
    for &(u, v) in &edges {
        rotation[u].push(v);
        rotation[v].push(u);
    }
    rotation.iter_mut().for_each(|r| r.sort_unstable());
    let base = PlanarBase { num_nodes, edges, rotation };
    if base.bipartition().is_none() {
        return Err(Error::Graph("base graph is not bipartite".into()));
    }
    if !base.is_biconnected() {
        return Err(Error::Graph("base graph is not 2-connected".into()));
    }
    Ok(base)
}

/// Turns a base graph into a CNF formula without checking satisfiability.
///
/// The larger side of the bipartition becomes the variables (vertex 0's side
/// on a tie), the other side the disjunctions. A vertex of degree above
/// `max_width` is split into balanced runs that are consecutive in its
/// rotation. Polarities are drawn uniformly and repeated clauses dropped.
pub fn formula_from_base<R: Rng + ?Sized>(base: &PlanarBase, max_width: usize, rng: &mut R) -> Result<CnfFormula> {
    if max_width < 2 {
        return Err(Error::Config(format!("clause width cap must be >= 2, got {max_width}")));
    }
    let side = base.bipartition().ok_or_else(|| Error::Graph("base graph is not bipartite".into()))?;
    let first = side.iter().filter(|&&s| s == side[0]).count();
    let var_side = if first >= base.num_nodes - first { side[0] } else { !side[0] };
    let mut var_id = vec![usize::MAX; base.num_nodes];
    let mut num_vars = 0;
    for v in 0..base.num_nodes {
        if side[v] == var_side {
            var_id[v] = num_vars;
            num_vars += 1;
        }
    }

    let mut clauses: Vec<Clause> = Vec::new();
    let mut seen: HashSet<Vec<Literal>> = HashSet::new();
    for v in (0..base.num_nodes).filter(|&v| side[v] != var_side) {
        let ring = &base.rotation[v];
        if ring.is_empty() {
            continue;
        }
        let runs = ring.len().div_ceil(max_width);
        let (q, r) = (ring.len() / runs, ring.len() % runs);
        let mut start = 0;
        for run in 0..runs {
            let len = q + usize::from(run < r);
            let lits: Vec<Literal> = ring[start..start + len]
                .iter()
                .map(|&w| Literal { var: var_id[w], negated: rng.random_bool(0.5) })
                .collect();
            start += len;
            let clause = Clause::new(lits)?;
            if seen.insert(clause.sorted_key()) {
                clauses.push(clause);
            }
        }
    }
    CnfFormula::new(num_vars, clauses)
}

/// Where planar base graphs come from.
#[derive(Clone, Debug, Default)]
pub enum BaseSource {
    #[default]
    Quadrangulation,
    /// Imported graphs; one with the requested node count is drawn uniformly.
    Pool(Vec<PlanarBase>),
}

impl BaseSource {
    pub fn draw<R: Rng + ?Sized>(&self, num_nodes: usize, rng: &mut R) -> Result<PlanarBase> {
        match self {
            BaseSource::Quadrangulation => random_quadrangulation(num_nodes, rng),
            BaseSource::Pool(pool) => {
                let matching: Vec<&PlanarBase> = pool.iter().filter(|b| b.num_nodes == num_nodes).collect();
                if matching.is_empty() {
                    return Err(Error::Config(format!("no imported base graph with {num_nodes} nodes")));
                }
                Ok(matching[rng.random_range(0..matching.len())].clone())
            }
        }
    }
}

/// Samples planar components until one is satisfiable.
pub fn gen_planar_component<R: Rng + ?Sized>(num_base_nodes: usize, rng: &mut R) -> Result<CnfFormula> {
    gen_planar_component_from(&BaseSource::Quadrangulation, num_base_nodes, 5, DEFAULT_PLANAR_RETRIES, rng)
        .map(|(f, _)| f)
}

/// Returns the formula and the number of attempts used.
pub fn gen_planar_component_from<R: Rng + ?Sized>(
    source: &BaseSource,
    num_base_nodes: usize,
    max_width: usize,
    retries: usize,
    rng: &mut R,
) -> Result<(CnfFormula, usize)> {
    for attempt in 1..=retries {
        let base = source.draw(num_base_nodes, rng)?;
        let formula = formula_from_base(&base, max_width, rng)?;
        if solve_sat(&formula).is_sat() {
            return Ok((formula, attempt));
        }
    }
    Err(Error::Generation(format!("no satisfiable planar component after {retries} attempts")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadrangulations_have_the_right_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4, 5, 12, 15, 30] {
            for _ in 0..20 {
                let q = random_quadrangulation(n, &mut rng).unwrap();
                assert_eq!(q.edges.len(), 2 * n - 4);
                assert!(q.bipartition().is_some());
                assert!(q.is_biconnected());
                // Rotation lists are exactly the neighbourhoods.
                let adj = q.adjacency();
                for v in 0..n {
                    let mut a = adj[v].clone();
                    let mut r = q.rotation[v].clone();
                    a.sort_unstable();
                    r.sort_unstable();
                    assert_eq!(a, r);
                }
                // Euler: V - E + F = 2 with F = E / 2 quadrilaterals.
                assert_eq!(n as i64 - q.edges.len() as i64 + q.edges.len() as i64 / 2, 2);
            }
        }
        assert!(random_quadrangulation(3, &mut rng).is_err());
    }

    #[test]
    fn rotation_follows_insertions() {
        // Inserting into face (0,1,2,3) across diagonal 0-2 puts the new
        // vertex between 1 and 3 around vertex 0.
        let faces = [[0, 1, 2, 4], [2, 3, 0, 4], [0, 3, 2, 1]];
        let rot = rotation_from_faces(5, &faces);
        assert_eq!(rot[0], vec![1, 4, 3]);
        assert_eq!(rot[4].len(), 2);
    }

    #[test]
    fn splitting_balances_runs() {
        // K_{2,7}: two clause vertices of degree 7 become runs of 4 and 3.
        let mut edges = Vec::new();
        for v in 2..9 {
            edges.push((0, v));
            edges.push((1, v));
        }
        let text = format!(
            "9 {}\n{}",
            edges.len(),
            edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect::<String>()
        );
        let base = parse_base_graph(&text).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = formula_from_base(&base, 5, &mut rng).unwrap();
        assert_eq!(f.num_vars(), 7);
        let widths: Vec<usize> = f.clauses().iter().map(Clause::width).collect();
        assert!(widths.iter().all(|&w| w == 3 || w == 4), "{widths:?}");
        // Both clause vertices see the same ring, so equal-signed runs may be
        // dropped as repeats.
        assert!((2..=4).contains(&f.num_clauses()));
    }

    #[test]
    fn import_rejects_bad_graphs() {
        assert!(parse_base_graph("3 3\n0 1\n1 2\n2 0\n").is_err()); // odd cycle
        assert!(parse_base_graph("4 3\n0 1\n1 2\n2 3\n").is_err()); // path, cut vertices
        assert!(parse_base_graph("4 4\n0 1\n1 2\n2 3\n3 0\n").is_ok());
        assert!(matches!(parse_base_graph("4 4\n0 1\n1 2\n2 3\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_base_graph("4 1\n0 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn planar_components_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for size in [12, 15] {
            for _ in 0..50 {
                let f = gen_planar_component(size, &mut rng).unwrap();
                assert!(solve_sat(&f).is_sat());
                assert!(f.clauses().iter().all(|c| (1..=5).contains(&c.width())));
                assert!(!f.has_tautology());
                if size == 12 {
                    assert!(f.num_vars() >= 6 && f.num_vars() <= 10);
                    assert!(f.num_clauses() >= 2);
                } else {
                    assert!(f.num_vars() >= 8 && f.num_vars() <= 14);
                    assert!(f.num_clauses() <= 14);
                }
            }
        }
    }
}
