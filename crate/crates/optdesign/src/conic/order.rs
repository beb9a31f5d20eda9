//! Fill-reducing ordering for symmetric sparse patterns.
//!
//! Greedy minimum-degree on a clique-merge representation of the elimination
//! graph. Each elimination replaces the cliques incident to the pivot with
//! their union; degrees are re-evaluated lazily through a min-heap. This is
//! the classical quotient-graph scheme without supervariable detection,
//! which is plenty for the KKT systems assembled here (structural variables
//! couple densely, cone slacks locally; the ordering eliminates the slack
//! blocks first and leaves a small dense Schur complement).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Compute an elimination order for the symmetric matrix whose upper
/// triangle is given in CSC arrays. Returns `perm` with `perm[k] = old index
/// eliminated at step k`.
pub fn min_degree(n: usize, colptr: &[usize], rowind: &[usize]) -> Vec<usize> {
    // Initial cliques: one 2-clique per off-diagonal entry.
    let mut cliques: Vec<Option<Vec<u32>>> = Vec::new();
    let mut node_cliques: Vec<Vec<u32>> = vec![Vec::new(); n];
    for c in 0..n {
        for p in colptr[c]..colptr[c + 1] {
            let r = rowind[p];
            if r == c {
                continue;
            }
            let id = cliques.len() as u32;
            cliques.push(Some(vec![r as u32, c as u32]));
            node_cliques[r].push(id);
            node_cliques[c].push(id);
        }
    }

    let mut eliminated = vec![false; n];
    let mut stamp = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();

    let exact_degree = |node: usize,
                        node_cliques: &[Vec<u32>],
                        cliques: &[Option<Vec<u32>>],
                        eliminated: &[bool],
                        stamp: &mut [usize],
                        tick: usize|
     -> usize {
        let mut deg = 0;
        for &cid in &node_cliques[node] {
            if let Some(members) = &cliques[cid as usize] {
                for &u in members {
                    let u = u as usize;
                    if u != node && !eliminated[u] && stamp[u] != tick {
                        stamp[u] = tick;
                        deg += 1;
                    }
                }
            }
        }
        deg
    };

    let mut tick = 0;
    for v in 0..n {
        tick += 1;
        let d = exact_degree(v, &node_cliques, &cliques, &eliminated, &mut stamp, tick);
        heap.push(Reverse((d, v)));
    }

    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((key, v))) = heap.pop() {
        if eliminated[v] {
            continue;
        }
        tick += 1;
        let d = exact_degree(v, &node_cliques, &cliques, &eliminated, &mut stamp, tick);
        if d > key {
            // Stale entry; requeue with the true degree.
            heap.push(Reverse((d, v)));
            continue;
        }
        eliminated[v] = true;
        perm.push(v);

        // Merge the cliques incident to v into one.
        tick += 1;
        let mut merged: Vec<u32> = Vec::with_capacity(d);
        for &cid in &node_cliques[v] {
            if let Some(members) = cliques[cid as usize].take() {
                for u in members {
                    let ui = u as usize;
                    if ui != v && !eliminated[ui] && stamp[ui] != tick {
                        stamp[ui] = tick;
                        merged.push(u);
                    }
                }
            }
        }
        node_cliques[v].clear();
        if merged.len() > 1 {
            let id = cliques.len() as u32;
            for &u in &merged {
                let ui = u as usize;
                node_cliques[ui].retain(|&cid| cliques[cid as usize].is_some());
                node_cliques[ui].push(id);
                // Lower bound on the new degree keeps the lazy heap sound.
                heap.push(Reverse((merged.len() - 1, ui)));
            }
            cliques.push(Some(merged));
        } else if merged.len() == 1 {
            let ui = merged[0] as usize;
            node_cliques[ui].retain(|&cid| cliques[cid as usize].is_some());
            heap.push(Reverse((0, ui)));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_arrow_matrix_tip_last() {
        // Arrow matrix: node 0 connected to all others; eliminating it first
        // would create a dense clique, so minimum degree defers it.
        let n = 6;
        let mut trips: Vec<(usize, usize)> = Vec::new();
        for j in 1..n {
            trips.push((0, j));
        }
        // build upper CSC by columns
        let mut colptr = vec![0usize; n + 1];
        let mut rowind = Vec::new();
        for c in 0..n {
            for &(r, cc) in &trips {
                if cc == c {
                    rowind.push(r);
                }
            }
            colptr[c + 1] = rowind.len();
        }
        let perm = min_degree(n, &colptr, &rowind);
        assert_eq!(perm.len(), n);
        // The tip keeps maximal degree until only one leaf remains.
        let tip_pos = perm.iter().position(|&v| v == 0).unwrap();
        assert!(tip_pos >= n - 2, "tip eliminated at {tip_pos}");
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
