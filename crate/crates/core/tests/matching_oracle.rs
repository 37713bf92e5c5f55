mod common;

use itertools::Itertools;
use proptest::prelude::*;
use rand::Rng;

use tilereconf::matching::{assignment, distance_matrix, min_weight_perfect_matching};

/// Cheapest permutation; the lexicographically smallest among ties.
fn brute(costs: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = costs.len();
    (0..n)
        .permutations(n)
        .map(|p| (p.iter().enumerate().map(|(i, &j)| costs[i][j]).sum::<i64>(), p))
        .min()
        .unwrap_or((0, Vec::new()))
}

fn cost_of(costs: &[Vec<i64>], p: &[usize]) -> i64 {
    p.iter().enumerate().map(|(i, &j)| costs[i][j]).sum()
}

proptest! {
    #[test]
    fn equals_permutation_oracle(costs in (1usize..=7).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0i64..20, n), n))) {
        let got = assignment(&costs).unwrap();
        let (best, lex) = brute(&costs);
        prop_assert_eq!(cost_of(&costs, &got), best);
        prop_assert_eq!(got, lex);
    }

    #[test]
    fn invariant_under_row_permutation(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = common::rng(seed);
        let costs: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| r.gen_range(0..9)).collect()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(seed as usize % n);
        let shuffled: Vec<Vec<i64>> = perm.iter().map(|&i| costs[i].clone()).collect();
        prop_assert_eq!(
            cost_of(&costs, &assignment(&costs).unwrap()),
            cost_of(&shuffled, &assignment(&shuffled).unwrap())
        );
    }

    #[test]
    fn grid_matching_equals_oracle(seed in any::<u64>(), n in 1usize..=6) {
        let Some((map, s, g)) = common::random_instance(seed, 8, 8, n, 0.15) else { return Ok(()) };
        let dm = distance_matrix(&map, &s, &g).unwrap();
        let m = min_weight_perfect_matching(&dm).unwrap();
        let (best, _) = brute(&dm.costs());
        prop_assert_eq!(m.total_cost as i64, best);
        prop_assert_eq!(m.pairs.iter().map(|p| u64::from(p.2)).sum::<u64>(), m.total_cost);
        let mut goals: Vec<_> = m.pairs.iter().map(|p| p.1).collect();
        goals.sort();
        prop_assert_eq!(goals, g.tiles().to_vec());
    }
}

#[test]
fn works_for_other_integer_widths() {
    let c32 = vec![vec![4i32, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
    let c64: Vec<Vec<i64>> = c32.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect();
    assert_eq!(assignment(&c32).unwrap(), assignment(&c64).unwrap());
    assert_eq!(cost_of(&c64, &assignment(&c64).unwrap()), brute(&c64).0);
}
