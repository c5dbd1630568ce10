use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlrni::graph::{are_isomorphic, NodeType, TypedGraph};

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn brute_isomorphic(g: &TypedGraph, h: &TypedGraph) -> bool {
    if g.num_nodes() != h.num_nodes() || g.num_edges() != h.num_edges() {
        return false;
    }
    let mut p: Vec<usize> = (0..g.num_nodes()).collect();
    loop {
        let types_ok = (0..g.num_nodes()).all(|v| g.node_type(v) == h.node_type(p[v]));
        if types_ok && g.edges().iter().all(|&(u, v)| h.has_edge(p[u], p[v])) {
            return true;
        }
        if !next_permutation(&mut p) {
            return false;
        }
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> TypedGraph {
    let types = (0..n)
        .map(|_| if rng.random_bool(0.3) { NodeType::DisjunctionNode } else { NodeType::LiteralNode })
        .collect();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|_| rng.random_bool(density)).collect();
    TypedGraph::new(types, edges).unwrap()
}

/// Same degree sequence, one edge swapped: the hard negatives.
fn rewired(rng: &mut ChaCha8Rng, g: &TypedGraph) -> Option<TypedGraph> {
    let edges = g.edges();
    for _ in 0..50 {
        let &(a, b) = edges.choose(rng)?;
        let &(c, d) = edges.choose(rng)?;
        let distinct = a != c && a != d && b != c && b != d;
        if distinct && !g.has_edge(a, d) && !g.has_edge(c, b) {
            let mut e: Vec<(usize, usize)> = edges.iter().copied().filter(|&x| x != (a, b) && x != (c, d)).collect();
            e.push((a.min(d), a.max(d)));
            e.push((c.min(b), c.max(b)));
            return TypedGraph::new(g.node_types().to_vec(), e).ok();
        }
    }
    None
}

#[test]
fn exact_search_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut yes, mut no) = (0, 0);
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let density = rng.random_range(0.2..0.7);
        let g = random_graph(&mut rng, n, density);
        let h = match case % 3 {
            0 => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                g.permuted(&perm).unwrap()
            }
            1 => rewired(&mut rng, &g).unwrap_or_else(|| random_graph(&mut rng, n, 0.5)),
            _ => {
                let density = rng.random_range(0.2..0.7);
                random_graph(&mut rng, n, density)
            }
        };
        let want = brute_isomorphic(&g, &h);
        assert_eq!(are_isomorphic(&g, &h).unwrap(), want, "case {case}: {g:?} vs {h:?}");
        if want {
            yes += 1;
        } else {
            no += 1;
        }
    }
    assert!(yes >= 60 && no >= 60, "unbalanced oracle sample: {yes} yes, {no} no");
}

#[test]
fn regular_graphs_with_same_colors() {
    // Two triangles versus a hexagon: 2-regular, untyped, not isomorphic.
    let two_triangles = TypedGraph::uniform(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let hexagon = TypedGraph::uniform(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
    assert!(!are_isomorphic(&two_triangles, &hexagon).unwrap());
    assert!(!brute_isomorphic(&two_triangles, &hexagon));
    let relabeled = hexagon.permuted(&[3, 0, 4, 1, 5, 2]).unwrap();
    assert!(are_isomorphic(&hexagon, &relabeled).unwrap());
}
