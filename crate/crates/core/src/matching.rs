//! Minimum-weight perfect matching between start and goal tiles under
//! obstacle-aware BFS distances.

use std::iter::Sum;

use num_traits::{PrimInt, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{bfs_free, Cell, Configuration, GridError, GridMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("start has {start} tiles but goal has {goal}")]
    SizeMismatch { start: usize, goal: usize },
    #[error("cost matrix is not square")]
    NotSquare,
    #[error("every perfect matching uses an unreachable pair")]
    Infeasible,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Exact cost scalar for the assignment solver.
pub trait Cost: PrimInt + Signed + Sum + std::fmt::Debug {}

impl<T> Cost for T where T: PrimInt + Signed + Sum + std::fmt::Debug {}

/// Geodesic distances from every start tile (rows) to every goal tile
/// (columns), both in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    pub rows: Vec<Cell>,
    pub cols: Vec<Cell>,
    dist: Vec<Option<u32>>,
    /// Stand-in cost for unreachable pairs; exceeds any finite matching.
    sentinel: i64,
}

impl DistanceMatrix {
    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.dist[row * self.cols.len() + col]
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn sentinel(&self) -> i64 {
        self.sentinel
    }

    /// Dense cost matrix with unreachable entries replaced by the sentinel.
    pub fn costs(&self) -> Vec<Vec<i64>> {
        (0..self.rows.len())
            .map(|i| {
                (0..self.cols.len())
                    .map(|j| self.get(i, j).map_or(self.sentinel, i64::from))
                    .collect()
            })
            .collect()
    }
}

/// A bijection between start and goal tiles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `(start, goal, distance)` in canonical start order.
    pub pairs: Vec<(Cell, Cell, u32)>,
    pub total_cost: u64,
}

/// One BFS per start tile over the free cells of `map`.
pub fn distance_matrix(map: &GridMap, s: &Configuration, g: &Configuration) -> Result<DistanceMatrix, MatchingError> {
    if s.len() != g.len() {
        return Err(MatchingError::SizeMismatch {
            start: s.len(),
            goal: g.len(),
        });
    }
    let mut dist = Vec::with_capacity(s.len() * g.len());
    for &src in s.tiles() {
        let field = bfs_free(map, &[src])?;
        dist.extend(g.tiles().iter().map(|&t| field.get(t)));
    }
    let sentinel = (s.len() as i64) * (map.area() as i64) + 1;
    Ok(DistanceMatrix {
        rows: s.tiles().to_vec(),
        cols: g.tiles().to_vec(),
        dist,
        sentinel,
    })
}

/// Minimum-cost perfect matching. Among optimal matchings the one with the
/// lexicographically smallest pair list is returned.
pub fn min_weight_perfect_matching(dm: &DistanceMatrix) -> Result<Matching, MatchingError> {
    matching_from(dm, assignment(&dm.costs())?)
}

/// Minimum-cost perfect matching that, among optimal ones, keeps as many
/// tiles as possible matched to themselves before falling back to the
/// lexicographic rule.
pub fn min_weight_perfect_matching_stationary(dm: &DistanceMatrix) -> Result<Matching, MatchingError> {
    let scale = dm.size() as i64 + 1;
    let costs: Vec<Vec<i64>> = dm
        .costs()
        .into_iter()
        .map(|row| row.into_iter().map(|c| c * scale + i64::from(c > 0)).collect())
        .collect();
    matching_from(dm, assignment(&costs)?)
}

fn matching_from(dm: &DistanceMatrix, assign: Vec<usize>) -> Result<Matching, MatchingError> {
    let mut pairs = Vec::with_capacity(assign.len());
    let mut total = 0u64;
    for (i, &j) in assign.iter().enumerate() {
        let d = dm.get(i, j).ok_or(MatchingError::Infeasible)?;
        total += u64::from(d);
        pairs.push((dm.rows[i], dm.cols[j], d));
    }
    Ok(Matching {
        pairs,
        total_cost: total,
    })
}

/// Dense Hungarian algorithm (shortest augmenting paths with potentials),
/// followed by a lexicographic canonicalisation over the tight subgraph.
///
/// Returns `col[row]`. O(n³) for the solve, O(n⁴) worst case for the
/// canonicalisation.
pub fn assignment<C: Cost>(costs: &[Vec<C>]) -> Result<Vec<usize>, MatchingError> {
    let n = costs.len();
    if costs.iter().any(|r| r.len() != n) {
        return Err(MatchingError::NotSquare);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let four = C::one() + C::one() + C::one() + C::one();
    let inf = C::max_value() / four;

    // 1-based arrays, index 0 is the virtual column
    let mut u = vec![C::zero(); n + 1];
    let mut v = vec![C::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    let mut row_of = vec![0usize; n];
    for j in 1..=n {
        col_of[owner[j] - 1] = j - 1;
        row_of[j - 1] = owner[j] - 1;
    }
    // Every optimal matching lives on the tight edges of an optimal dual.
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| costs[i][j] - u[i + 1] - v[j + 1] == C::zero()).collect())
        .collect();
    canonicalize(&tight, &mut col_of, &mut row_of);
    Ok(col_of)
}

/// Rewrites a perfect matching on `tight` into the lexicographically
/// smallest one, fixing rows in order.
fn canonicalize(tight: &[Vec<bool>], col_of: &mut [usize], row_of: &mut [usize]) {
    let n = col_of.len();
    let mut col_fixed = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if col_fixed[j] || !tight[i][j] {
                continue;
            }
            if col_of[i] == j || reroute(tight, col_of, row_of, &col_fixed, i, j) {
                col_fixed[j] = true;
                break;
            }
        }
        debug_assert!(col_fixed[col_of[i]]);
    }
}

/// Tries to give column `j` to row `i` by sending its current owner along an
/// alternating path that ends at `i`'s current column.
fn reroute(
    tight: &[Vec<bool>],
    col_of: &mut [usize],
    row_of: &mut [usize],
    col_fixed: &[bool],
    i: usize,
    j: usize,
) -> bool {
    let n = col_of.len();
    let target = col_of[i];
    let start = row_of[j];
    let mut came_from = vec![usize::MAX; n]; // column -> row that reached it
    let mut queue = std::collections::VecDeque::from([start]);
    let mut found = false;
    'bfs: while let Some(r) = queue.pop_front() {
        for c in 0..n {
            if c == j || col_fixed[c] || !tight[r][c] || came_from[c] != usize::MAX {
                continue;
            }
            came_from[c] = r;
            if c == target {
                found = true;
                break 'bfs;
            }
            queue.push_back(row_of[c]);
        }
    }
    if !found {
        return false;
    }
    let mut c = target;
    loop {
        let r = came_from[c];
        let prev = col_of[r];
        col_of[r] = c;
        row_of[c] = r;
        if r == start {
            break;
        }
        c = prev;
    }
    col_of[i] = j;
    row_of[j] = i;
    true
}
