mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use common::{free_set, grow_polyomino, rng, set_bfs, set_connected};
use tilereconf::grid::{
    bfs_free, bfs_on_tiles, center_of_mass, components, is_connected, largest_overlap_component, leaf_tiles, overlap,
};
use tilereconf::{Cell, Configuration, GridMap};

fn polyomino(seed: u64, n: usize) -> Configuration {
    let map = GridMap::empty(12, 12).unwrap();
    Configuration::from_tiles(grow_polyomino(&map, n, &mut rng(seed)).unwrap()).unwrap()
}

fn brute_leaves(c: &Configuration) -> Vec<Cell> {
    if c.len() == 1 {
        return c.tiles().to_vec();
    }
    c.tiles()
        .iter()
        .copied()
        .filter(|&t| {
            let rest: HashSet<Cell> = c.tiles().iter().copied().filter(|&x| x != t).collect();
            set_connected(&rest)
        })
        .collect()
}

proptest! {
    #[test]
    fn leaves_match_brute_force(seed in any::<u64>(), n in 1usize..=12) {
        let c = polyomino(seed, n);
        prop_assert_eq!(leaf_tiles(&c), brute_leaves(&c));
    }

    #[test]
    fn connectivity_matches_oracle(cells in prop::collection::btree_set((0i32..5, 0i32..5), 0..10)) {
        let tiles: Vec<Cell> = cells.into_iter().map(Cell::from).collect();
        let set: HashSet<Cell> = tiles.iter().copied().collect();
        prop_assert_eq!(is_connected(&tiles), set_connected(&set));
        let comps = components(&tiles);
        prop_assert_eq!(comps.iter().map(Vec::len).sum::<usize>(), tiles.len());
        for comp in &comps {
            prop_assert!(is_connected(comp));
        }
    }

    #[test]
    fn bfs_free_matches_oracle_and_is_symmetric(seed in any::<u64>(), density in 0.0f64..0.4) {
        let (map, _, _) = match common::random_instance(seed, 9, 7, 2, density) {
            Some(i) => i,
            None => return Ok(()),
        };
        let free = free_set(&map);
        let mut cells: Vec<Cell> = free.iter().copied().collect();
        cells.sort();
        let a = cells[seed as usize % cells.len()];
        let b = cells[(seed / 7) as usize % cells.len()];
        let from_a = bfs_free(&map, &[a]).unwrap();
        let from_b = bfs_free(&map, &[b]).unwrap();
        prop_assert_eq!(from_a.get(b), from_b.get(a));
        for &c in &cells {
            prop_assert_eq!(from_a.get(c), set_bfs(&free, a, c));
        }
    }

    #[test]
    fn bfs_on_tiles_bounds(seed in any::<u64>(), n in 1usize..=20) {
        let c = polyomino(seed, n);
        let src = c.tiles()[seed as usize % n];
        let field = bfs_on_tiles(c.tiles(), src).unwrap();
        let set: HashSet<Cell> = c.tiles().iter().copied().collect();
        for &t in c.tiles() {
            let d = field.get(t).unwrap();
            prop_assert!(d >= src.manhattan(t));
            prop_assert_eq!(Some(d), set_bfs(&set, src, t));
        }
    }

    #[test]
    fn overlap_symmetry(a in any::<u64>(), b in any::<u64>(), n in 1usize..=15) {
        let (ca, cb) = (polyomino(a, n), polyomino(b, n));
        prop_assert_eq!(overlap(&ca, &ca), n);
        prop_assert_eq!(overlap(&ca, &cb), overlap(&cb, &ca));
        let brute = ca.tiles().iter().filter(|t| cb.tiles().contains(t)).count();
        prop_assert_eq!(overlap(&ca, &cb), brute);
    }

    #[test]
    fn largest_component_matches_enumeration(a in any::<u64>(), b in any::<u64>(), n in 1usize..=15) {
        let (s, g) = (polyomino(a, n), polyomino(b, n));
        let shared: Vec<Cell> = s.tiles().iter().copied().filter(|&t| g.contains(t)).collect();
        let comps = components(&shared);
        let best = comps.iter().map(Vec::len).max().unwrap_or(0);
        // components come ordered by their smallest cell
        let expected = comps.into_iter().find(|c| c.len() == best).unwrap_or_default();
        prop_assert_eq!(largest_overlap_component(&s, &g), expected);
    }
}

#[test]
fn every_multi_tile_polyomino_has_two_leaves() {
    for seed in 0..1000u64 {
        let n = 2 + (seed % 19) as usize;
        let c = polyomino(seed, n);
        assert!(leaf_tiles(&c).len() >= 2, "seed {seed}: {:?}", c.tiles());
    }
}

#[test]
fn worked_examples() {
    let c = |v: &[(i32, i32)]| Configuration::from_tiles(v.iter().map(|&p| Cell::from(p))).unwrap();
    let square = c(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
    assert_eq!(leaf_tiles(&square), brute_leaves(&square));
    assert_eq!(leaf_tiles(&square).len(), 4);

    let wall = GridMap::new(5, 5, (0..4).map(|y| Cell::new(2, y))).unwrap();
    let field = bfs_free(&wall, &[Cell::new(0, 0)]).unwrap();
    assert_eq!(
        field.get(Cell::new(4, 0)),
        set_bfs(&free_set(&wall), Cell::new(0, 0), Cell::new(4, 0))
    );
    assert_eq!(field.get(Cell::new(4, 0)), Some(12));

    let ring: Vec<Cell> = (0..3)
        .flat_map(|y| (0..3).map(move |x| Cell::new(x, y)))
        .filter(|&p| p != Cell::new(1, 1))
        .collect();
    let set: HashSet<Cell> = ring.iter().copied().collect();
    assert_eq!(
        bfs_on_tiles(&ring, Cell::new(0, 0)).unwrap().get(Cell::new(2, 2)),
        Some(4)
    );
    assert_eq!(set_bfs(&set, Cell::new(0, 0), Cell::new(2, 2)), Some(4));

    assert!(largest_overlap_component(&c(&[(0, 0)]), &c(&[(3, 3)])).is_empty());
    // overlap is {(0,0)} and {(3,3)}: equal sizes, smaller cell wins
    let s = c(&[(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2), (3, 3)]);
    let g = c(&[(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3), (3, 3)]);
    assert_eq!(largest_overlap_component(&s, &g), vec![Cell::new(0, 0)]);
    assert_eq!(largest_overlap_component(&g, &s), vec![Cell::new(0, 0)]);
    assert_eq!(center_of_mass::<f64>(&square), (0.5, 0.5));
}
