//! Bipartite matching on `n x n` port graphs.
//!
//! `max_cardinality` is Hopcroft-Karp (`O(E sqrt(V))`) and accepts a warm
//! start. `max_weight_lexmin` solves the assignment problem with the
//! Hungarian method and then walks the tight subgraph to pick the
//! lexicographically smallest optimal matching.

use std::collections::VecDeque;

const UNMATCHED: usize = usize::MAX;

/// Maximum-cardinality matching of the bipartite graph with left vertices
/// `0..adj.len()` and right vertices `0..n_right`.
///
/// `init`, when given, must be a valid matching inside `adj`; it is
/// extended rather than rebuilt. Returns the right vertex matched to each
/// left vertex.
pub fn max_cardinality(
    adj: &[Vec<usize>],
    n_right: usize,
    init: Option<&[Option<usize>]>,
) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut match_l = vec![UNMATCHED; n_left];
    let mut match_r = vec![UNMATCHED; n_right];
    if let Some(init) = init {
        for (u, m) in init.iter().enumerate() {
            if let Some(v) = *m {
                debug_assert!(adj[u].contains(&v), "warm start edge not in graph");
                debug_assert_eq!(match_r[v], UNMATCHED);
                match_l[u] = v;
                match_r[v] = u;
            }
        }
    }

    let mut dist = vec![0u32; n_left];
    let mut queue = VecDeque::with_capacity(n_left);
    loop {
        // BFS layers from free left vertices.
        queue.clear();
        let mut found = false;
        for u in 0..n_left {
            if match_l[u] == UNMATCHED {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == UNMATCHED {
                    found = true;
                } else if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n_left];
        let mut augmented = false;
        for u in 0..n_left {
            if match_l[u] == UNMATCHED
                && augment(u, adj, &mut match_l, &mut match_r, &mut dist, &mut it)
            {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }
    match_l
        .into_iter()
        .map(|v| (v != UNMATCHED).then_some(v))
        .collect()
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [u32],
    it: &mut [usize],
) -> bool {
    while it[u] < adj[u].len() {
        let v = adj[u][it[u]];
        it[u] += 1;
        let w = match_r[v];
        if w == UNMATCHED || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist, it))
        {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = u32::MAX;
    false
}

/// Adjacency lists of the cells for which `support(i, j)` holds.
pub fn support_graph(n: usize, mut support: impl FnMut(usize, usize) -> bool) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| (0..n).filter(|&j| support(i, j)).collect())
        .collect()
}

/// Maximum-weight matching of a square nonnegative weight matrix
/// (row-major), allowing partial matchings.
///
/// Among all optimal matchings the one returned is lexicographically
/// smallest as a 0/1 vector in row-major cell order, so zero-weight cells
/// are never matched and the zero matrix yields the empty matching.
pub fn max_weight_lexmin(n: usize, weights: &[u64]) -> Vec<Option<usize>> {
    assert_eq!(weights.len(), n * n);
    if weights.iter().all(|&w| w == 0) {
        return vec![None; n];
    }
    let cost = |i: usize, j: usize| -(weights[i * n + j] as i64);
    let (assign, u, v) = hungarian_min(n, cost);

    // Optimal assignments are exactly the perfect matchings of the tight
    // subgraph for any optimal dual.
    let tight = |i: usize, j: usize| cost(i, j) - u[i] - v[j] == 0;
    let mut adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| tight(i, j)).collect())
        .collect();
    let mut match_l = assign;
    let mut match_r = vec![UNMATCHED; n];
    for (i, &j) in match_l.iter().enumerate() {
        match_r[j] = i;
    }

    for i in 0..n {
        for j in 0..n {
            if weights[i * n + j] == 0 || !adj[i][j] {
                continue;
            }
            adj[i][j] = false;
            if match_l[i] != j {
                continue;
            }
            match_l[i] = UNMATCHED;
            match_r[j] = UNMATCHED;
            let mut seen = vec![false; n];
            if !dense_augment(i, &adj, &mut match_l, &mut match_r, &mut seen) {
                // Every remaining optimum uses (i, j).
                adj[i][j] = true;
                match_l[i] = j;
                match_r[j] = i;
            }
        }
    }
    match_l
        .iter()
        .enumerate()
        .map(|(i, &j)| (weights[i * n + j] > 0).then_some(j))
        .collect()
}

fn dense_augment(
    u: usize,
    adj: &[Vec<bool>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for v in 0..adj.len() {
        if !adj[u][v] || seen[v] {
            continue;
        }
        seen[v] = true;
        let w = match_r[v];
        if w == UNMATCHED || dense_augment(w, adj, match_l, match_r, seen) {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    false
}

/// Min-cost perfect assignment on an `n x n` cost function (Hungarian
/// method with potentials, `O(n^3)`).
///
/// Returns the column assigned to each row plus row and column potentials
/// satisfying `cost(i, j) - u[i] - v[j] >= 0`, with equality on the
/// assignment.
fn hungarian_min(n: usize, cost: impl Fn(usize, usize) -> i64) -> (Vec<usize>, Vec<i64>, Vec<i64>) {
    // 1-based internal indexing; column 0 is the virtual root.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}
