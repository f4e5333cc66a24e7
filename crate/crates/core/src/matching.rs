//! Weighted bipartite graphs and minimum-weight left-saturating matching.
//!
//! The solver is the shortest-augmenting-path Hungarian method with vertex
//! potentials. Missing edges stay missing: the cost matrix holds `Option`
//! entries and infeasibility is detected structurally when a row has no
//! reachable free column. Rectangular instances get zero-weight filler rows
//! so every right vertex is covered; the filler rows never take part in the
//! reported matching.
//!
//! Among all optimal matchings the one returned has the lexicographically
//! smallest right-vertex sequence when read in left-vertex order. It is found
//! by walking the tight-edge subgraph of the optimal potentials: perfect
//! matchings of that subgraph are exactly the optimal ones, so rows are fixed
//! greedily to their smallest tight column for which an alternating cycle
//! exists.

use std::collections::VecDeque;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("no matching saturates the left vertex set")]
    InfeasibleMatching,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<W> {
    pub left: usize,
    pub right: usize,
    pub weight: W,
}

/// Bipartite graph between two ordered lists of bin values.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBigraph<W> {
    left: Vec<i32>,
    right: Vec<i32>,
    edges: Vec<Edge<W>>,
}

impl<W: Scalar> WeightedBigraph<W> {
    /// Graph from explicit edges. Duplicate `(left, right)` pairs panic.
    pub fn from_edges(left: Vec<i32>, right: Vec<i32>, mut edges: Vec<Edge<W>>) -> Self {
        edges.sort_by_key(|e| (e.left, e.right));
        for pair in edges.windows(2) {
            assert!(
                (pair[0].left, pair[0].right) != (pair[1].left, pair[1].right),
                "duplicate edge"
            );
        }
        assert!(edges
            .iter()
            .all(|e| e.left < left.len() && e.right < right.len()));
        Self { left, right, edges }
    }

    pub fn left(&self) -> &[i32] {
        &self.left
    }

    pub fn right(&self) -> &[i32] {
        &self.right
    }

    /// Edges sorted by `(left, right)`.
    pub fn edges(&self) -> &[Edge<W>] {
        &self.edges
    }

    pub fn weight(&self, left: usize, right: usize) -> Option<W> {
        self.edges
            .binary_search_by_key(&(left, right), |e| (e.left, e.right))
            .ok()
            .map(|i| self.edges[i].weight)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, W)>> {
        let mut adj = vec![Vec::new(); self.left.len()];
        for e in &self.edges {
            adj[e.left].push((e.right, e.weight));
        }
        adj
    }
}

/// Connects `v1[i]` to `v2[j]` whenever `|v1[i] - v2[j]| <= bound`.
///
/// `weight_fn` returning `None` leaves the pair unconnected.
pub fn build_bigraph<W: Scalar>(
    v1: &[i32],
    v2: &[i32],
    bound: u32,
    mut weight_fn: impl FnMut(i32, i32) -> Option<W>,
) -> WeightedBigraph<W> {
    let mut edges = Vec::new();
    for (i, &u) in v1.iter().enumerate() {
        for (j, &v) in v2.iter().enumerate() {
            if u.abs_diff(v) <= bound {
                if let Some(weight) = weight_fn(u, v) {
                    edges.push(Edge {
                        left: i,
                        right: j,
                        weight,
                    });
                }
            }
        }
    }
    WeightedBigraph::from_edges(v1.to_vec(), v2.to_vec(), edges)
}

/// Matched `(left, right)` index pairs sorted by left index.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching<W> {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: W,
}

impl<W: Scalar> Matching<W> {
    /// Right index matched to each left vertex, in left order.
    pub fn assignment(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(_, j)| j).collect()
    }
}

/// `true` iff some matching covers every left vertex.
pub fn saturates_left<W: Scalar>(g: &WeightedBigraph<W>) -> bool {
    let adj: Vec<Vec<usize>> = g
        .adjacency()
        .into_iter()
        .map(|row| row.into_iter().map(|(j, _)| j).collect())
        .collect();
    let mut owner = vec![usize::MAX; g.right.len()];
    for i in 0..adj.len() {
        let mut seen = vec![false; g.right.len()];
        if !kuhn_augment(i, &adj, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn kuhn_augment(i: usize, adj: &[Vec<usize>], owner: &mut [usize], seen: &mut [bool]) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j] == usize::MAX || kuhn_augment(owner[j], adj, owner, seen) {
            owner[j] = i;
            return true;
        }
    }
    false
}

/// Minimum-weight matching that saturates the left side.
pub fn solve_mwmm<W: Scalar>(g: &WeightedBigraph<W>) -> Result<Matching<W>, MatchingError> {
    let n = g.left.len();
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            total_weight: W::zero(),
        });
    }
    // isolated right vertices cannot appear in any matching
    let mut col_of_right = vec![usize::MAX; g.right.len()];
    let mut right_of_col = Vec::new();
    for e in &g.edges {
        if col_of_right[e.right] == usize::MAX {
            col_of_right[e.right] = 0;
        }
    }
    for (j, slot) in col_of_right.iter_mut().enumerate() {
        if *slot != usize::MAX {
            *slot = right_of_col.len();
            right_of_col.push(j);
        }
    }
    let m = right_of_col.len();
    if m < n {
        return Err(MatchingError::InfeasibleMatching);
    }
    let mut rows: Vec<Vec<(usize, W)>> = g
        .adjacency()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(j, w)| (col_of_right[j], w))
                .collect()
        })
        .collect();
    let filler: Vec<(usize, W)> = (0..m).map(|c| (c, W::zero())).collect();
    rows.extend(std::iter::repeat_n(filler, m - n));

    let solved = hungarian(&rows, m)?;
    let assignment = lexicographic_refine(&rows, n, &solved);

    let mut pairs = Vec::with_capacity(n);
    let mut total = W::zero();
    for (i, &c) in assignment.iter().enumerate().take(n) {
        let j = right_of_col[c];
        total = total
            + rows[i]
                .iter()
                .find(|&&(cc, _)| cc == c)
                .map(|&(_, w)| w)
                .expect("matched pair is an edge");
        pairs.push((i, j));
    }
    Ok(Matching {
        pairs,
        total_weight: total,
    })
}

struct Solved<W> {
    col_of_row: Vec<usize>,
    row_pot: Vec<W>,
    col_pot: Vec<W>,
}

/// Square Hungarian method over sparse rows; `size` rows and columns.
fn hungarian<W: Scalar>(rows: &[Vec<(usize, W)>], size: usize) -> Result<Solved<W>, MatchingError> {
    const NONE: usize = usize::MAX;
    // 1-based columns with a virtual column 0 that holds the row being inserted
    let mut u = vec![W::zero(); size + 1];
    let mut v = vec![W::zero(); size + 1];
    let mut row_at = vec![NONE; size + 1];
    let mut way = vec![0usize; size + 1];
    let mut dense: Vec<Option<W>> = vec![None; size + 1];

    for i in 0..size {
        row_at[0] = i;
        let mut j0 = 0usize;
        let mut min_slack: Vec<Option<W>> = vec![None; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = row_at[j0];
            for &(c, w) in &rows[i0] {
                dense[c + 1] = Some(w);
            }
            let mut delta: Option<W> = None;
            let mut j1 = 0usize;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                if let Some(w) = dense[j] {
                    let cur = w - u[i0 + 1] - v[j];
                    if min_slack[j].is_none_or(|s| cur < s) {
                        min_slack[j] = Some(cur);
                        way[j] = j0;
                    }
                }
                if let Some(s) = min_slack[j] {
                    if delta.is_none_or(|d| s < d) {
                        delta = Some(s);
                        j1 = j;
                    }
                }
            }
            for &(c, _) in &rows[i0] {
                dense[c + 1] = None;
            }
            let delta = delta.ok_or(MatchingError::InfeasibleMatching)?;
            for j in 0..=size {
                if used[j] {
                    let r = row_at[j];
                    u[r + 1] = u[r + 1] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(s) = min_slack[j] {
                    min_slack[j] = Some(s - delta);
                }
            }
            j0 = j1;
            if row_at[j0] == NONE {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_at[j0] = row_at[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![NONE; size];
    for j in 1..=size {
        col_of_row[row_at[j]] = j - 1;
    }
    Ok(Solved {
        col_of_row,
        row_pot: u[1..].to_vec(),
        col_pot: v[1..].to_vec(),
    })
}

/// Re-picks the optimal matching so real rows take the smallest columns possible.
fn lexicographic_refine<W: Scalar>(
    rows: &[Vec<(usize, W)>],
    real_rows: usize,
    solved: &Solved<W>,
) -> Vec<usize> {
    let size = rows.len();
    let tight: Vec<Vec<usize>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cols: Vec<usize> = row
                .iter()
                .filter(|&&(c, w)| w.approx_eq(solved.row_pot[i] + solved.col_pot[c]))
                .map(|&(c, _)| c)
                .collect();
            cols.sort_unstable();
            cols
        })
        .collect();
    let mut col_of_row = solved.col_of_row.clone();
    let mut row_of_col = vec![0usize; size];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }
    let mut row_fixed = vec![false; size];
    let mut col_fixed = vec![false; size];
    let mut from_row = vec![usize::MAX; size];
    let mut visited = vec![false; size];
    let mut queue = VecDeque::new();

    for i in 0..real_rows {
        let current = col_of_row[i];
        for &j in &tight[i] {
            if col_fixed[j] {
                continue;
            }
            if j == current {
                break;
            }
            // j's owner moves along an alternating path that ends by taking `current`
            let start = row_of_col[j];
            visited.iter_mut().for_each(|x| *x = false);
            queue.clear();
            visited[start] = true;
            queue.push_back(start);
            let mut end_row = None;
            'bfs: while let Some(r) = queue.pop_front() {
                for &c in &tight[r] {
                    if c == j || col_fixed[c] {
                        continue;
                    }
                    if c == current {
                        end_row = Some(r);
                        break 'bfs;
                    }
                    let next = row_of_col[c];
                    if !visited[next] && !row_fixed[next] {
                        visited[next] = true;
                        from_row[next] = r;
                        queue.push_back(next);
                    }
                }
            }
            let Some(mut r) = end_row else { continue };
            let mut take = current;
            loop {
                let old = col_of_row[r];
                col_of_row[r] = take;
                row_of_col[take] = r;
                if r == start {
                    break;
                }
                take = old;
                r = from_row[r];
            }
            col_of_row[i] = j;
            row_of_col[j] = i;
            break;
        }
        row_fixed[i] = true;
        col_fixed[col_of_row[i]] = true;
    }
    col_of_row
}
