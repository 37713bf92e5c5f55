#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilereconf::{Cell, Configuration, GridMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Grows a polyomino of `n` tiles from a random free cell by repeatedly
/// adding a random free neighbor. `None` if the seed cell's region is too
/// small.
pub fn grow_polyomino<R: Rng>(map: &GridMap, n: usize, rng: &mut R) -> Option<Vec<Cell>> {
    let free: Vec<Cell> = map.cells().filter(|&c| map.is_free(c)).collect();
    let mut tiles = vec![*free.choose(rng)?];
    let mut set: HashSet<Cell> = tiles.iter().copied().collect();
    while tiles.len() < n {
        let mut frontier: Vec<Cell> = tiles
            .iter()
            .flat_map(|c| c.neighbors())
            .filter(|&c| map.is_free(c) && !set.contains(&c))
            .collect();
        frontier.sort();
        frontier.dedup();
        let next = *frontier.choose(rng)?;
        set.insert(next);
        tiles.push(next);
    }
    Some(tiles)
}

/// Random obstacles at `density`, then start and goal polyominoes in the
/// same free component.
pub fn random_instance(
    seed: u64,
    w: i32,
    h: i32,
    n: usize,
    density: f64,
) -> Option<(GridMap, Configuration, Configuration)> {
    let mut r = rng(seed);
    for _ in 0..50 {
        let obstacles: Vec<Cell> = (0..h)
            .flat_map(|y| (0..w).map(move |x| Cell::new(x, y)))
            .filter(|_| r.gen_bool(density))
            .collect();
        let map = GridMap::new(w, h, obstacles).unwrap();
        let (Some(s), Some(g)) = (grow_polyomino(&map, n, &mut r), grow_polyomino(&map, n, &mut r)) else {
            continue;
        };
        if !map.same_free_component(&[s[0], g[0]]) {
            continue;
        }
        return Some((
            map,
            Configuration::from_tiles(s).unwrap(),
            Configuration::from_tiles(g).unwrap(),
        ));
    }
    None
}

/// Plain BFS over a cell set, used as an oracle.
pub fn set_bfs(set: &HashSet<Cell>, from: Cell, to: Cell) -> Option<u32> {
    if !set.contains(&from) {
        return None;
    }
    let mut seen = HashSet::from([from]);
    let mut q = VecDeque::from([(from, 0)]);
    while let Some((c, d)) = q.pop_front() {
        if c == to {
            return Some(d);
        }
        for nb in c.neighbors() {
            if set.contains(&nb) && seen.insert(nb) {
                q.push_back((nb, d + 1));
            }
        }
    }
    None
}

pub fn set_connected(set: &HashSet<Cell>) -> bool {
    let Some(&first) = set.iter().next() else { return true };
    set.iter().all(|&c| set_bfs(set, first, c).is_some())
}

pub fn free_set(map: &GridMap) -> HashSet<Cell> {
    map.cells().filter(|&c| map.is_free(c)).collect()
}
