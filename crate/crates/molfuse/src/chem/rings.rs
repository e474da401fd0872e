//! Deterministic smallest set of smallest rings.
//!
//! Candidate cycles are generated Horton-style: for every vertex `v` and every
//! edge `(x, y)`, the cycle formed by BFS shortest paths `v..x`, `v..y` and the
//! edge itself, kept when the two paths share only `v`. Candidates are sorted
//! by (length, atom sequence) and greedily accepted while linearly independent
//! over GF(2) edge space, until the cyclomatic number is reached. The result
//! is a minimum cycle basis with a reproducible tie-break.

use super::Bond;
use std::collections::BTreeMap;

/// Compute the SSSR for a graph with `n` atoms. Each returned ring is a cycle
/// of atom indices, rotated so the smallest index comes first and oriented
/// toward the smaller second element.
pub fn sssr(n: usize, bonds: &[Bond]) -> Vec<Vec<usize>> {
    if n == 0 || bonds.is_empty() {
        return Vec::new();
    }
    let mut adj = vec![Vec::new(); n];
    let mut edge_id = BTreeMap::new();
    for (i, b) in bonds.iter().enumerate() {
        adj[b.a].push(b.b);
        adj[b.b].push(b.a);
        edge_id.insert((b.a.min(b.b), b.a.max(b.b)), i);
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    let components = count_components(n, &adj);
    let target = bonds.len() + components - n;
    if target == 0 {
        return Vec::new();
    }

    // candidate cycles, deduplicated by edge set
    let mut seen = std::collections::BTreeSet::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let (dist, parent) = bfs(v, &adj);
        for b in bonds {
            let (x, y) = (b.a, b.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            let px = path_to(v, x, &parent);
            let py = path_to(v, y, &parent);
            // paths must be vertex-disjoint apart from v itself
            let mut ok = true;
            for (i, a) in px.iter().enumerate() {
                for (j, c) in py.iter().enumerate() {
                    if a == c && (i != 0 || j != 0) {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
            }
            if !ok {
                continue;
            }
            // cycle: v..x, then y..v (reversed), closed by edge (x, y)
            let mut cycle = px.clone();
            cycle.extend(py.iter().rev().copied());
            cycle.pop(); // drop duplicate v
            if cycle.len() < 3 {
                continue;
            }
            let canon = canonical_cycle(&cycle);
            let edges = cycle_edge_key(&canon);
            if seen.insert(edges) {
                candidates.push(canon);
            }
        }
    }

    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    // greedy GF(2) independence over edge incidence vectors
    let words = bonds.len().div_ceil(64);
    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut chosen = Vec::new();
    for cycle in candidates {
        if chosen.len() == target {
            break;
        }
        let mut vec = vec![0u64; words];
        for (k, &i) in cycle.iter().enumerate() {
            let j = cycle[(k + 1) % cycle.len()];
            let e = edge_id[&(i.min(j), i.max(j))];
            vec[e / 64] ^= 1 << (e % 64);
        }
        let mut reduced = vec.clone();
        for b in &basis {
            let pivot = leading_bit(b);
            if pivot.is_some() && pivot == leading_bit(&reduced) {
                for (r, x) in reduced.iter_mut().zip(b) {
                    *r ^= x;
                }
            }
        }
        if reduced.iter().any(|&w| w != 0) {
            insert_reduced(&mut basis, reduced);
            chosen.push(cycle);
        }
    }

    debug_assert_eq!(chosen.len(), target, "cycle basis rank mismatch");
    chosen
}

fn insert_reduced(basis: &mut Vec<Vec<u64>>, mut vec: Vec<u64>) {
    // keep basis rows reduced against each other so pivots stay unique
    loop {
        let pivot = leading_bit(&vec);
        let clash = basis.iter().position(|b| leading_bit(b) == pivot);
        match clash {
            Some(i) => {
                for (v, x) in vec.iter_mut().zip(&basis[i]) {
                    *v ^= x;
                }
                if vec.iter().all(|&w| w == 0) {
                    return;
                }
            }
            None => {
                basis.push(vec);
                return;
            }
        }
    }
}

fn leading_bit(v: &[u64]) -> Option<usize> {
    for (i, &w) in v.iter().enumerate() {
        if w != 0 {
            return Some(i * 64 + w.trailing_zeros() as usize);
        }
    }
    None
}

fn bfs(start: usize, adj: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = 0;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn path_to(root: usize, mut v: usize, parent: &[usize]) -> Vec<usize> {
    let mut path = vec![v];
    while v != root {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    path
}

/// Rotate so the minimum atom leads, oriented toward the smaller neighbor.
fn canonical_cycle(cycle: &[usize]) -> Vec<usize> {
    let n = cycle.len();
    let start = (0..n).min_by_key(|&i| cycle[i]).unwrap();
    let forward: Vec<usize> = (0..n).map(|k| cycle[(start + k) % n]).collect();
    let backward: Vec<usize> = (0..n).map(|k| cycle[(start + n - k) % n]).collect();
    if forward <= backward {
        forward
    } else {
        backward
    }
}

fn cycle_edge_key(cycle: &[usize]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = cycle
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let j = cycle[(k + 1) % cycle.len()];
            (i.min(j), i.max(j))
        })
        .collect();
    edges.sort_unstable();
    edges
}

fn count_components(n: usize, adj: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}
