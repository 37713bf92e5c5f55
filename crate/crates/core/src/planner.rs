//! Single-dropoff local planners (GLC and MWPMexpand), move application and
//! travel-time accounting.
//!
//! A dropoff picks up a leaf tile `P`, carries it over the structure and
//! places it on a free cell `D` adjacent to the remaining tiles. The carry
//! path is measured by BFS over `S ∪ {D}`; the empty walk that precedes it
//! is measured by BFS over `S` from the robot's position.

use std::cmp::Reverse;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    bfs_free, bfs_on_tiles, is_connected, largest_overlap_component, leaf_tiles, Cell, Configuration, GridError,
    GridMap,
};
use crate::matching::{distance_matrix, min_weight_perfect_matching_stationary, MatchingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("tile {0} cannot be picked up")]
    IllegalPickup(Cell),
    #[error("tile cannot be placed at {0}")]
    IllegalPlacement(Cell),
    #[error("move would disconnect the configuration")]
    DisconnectedResult,
    #[error("robot position {0} is not on the configuration")]
    RobotOffConfiguration(Cell),
    #[error("configuration already equals the goal")]
    AlreadyAtGoal,
    #[error("no valid dropoff found")]
    NoMoveFound,
    #[error("planner is stuck after {progress} dropoffs")]
    Stuck { progress: usize },
    #[error("step budget of {budget} dropoffs exceeded")]
    BudgetExceeded { budget: usize },
    #[error("start and goal lie in different free-space components")]
    SeparateComponents,
    #[error("start has {start} tiles but goal has {goal}")]
    SizeMismatch { start: usize, goal: usize },
    #[error("a single tile cannot be moved while staying connected")]
    TooFewTiles,
    #[error("step {index} does not start where the previous one ended")]
    BrokenChain { index: usize },
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One atomic move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dropoff {
    pub source: Cell,
    pub target: Cell,
    /// Empty walk from the robot to `source`.
    pub pickup_dist: u32,
    /// Carry walk from `source` to `target`.
    pub dropoff_dist: u32,
}

impl Dropoff {
    /// A move whose distances are filled in by [`apply_dropoff`].
    pub fn new(source: Cell, target: Cell) -> Self {
        Dropoff {
            source,
            target,
            pickup_dist: 0,
            dropoff_dist: 0,
        }
    }

    pub fn travel(&self) -> u64 {
        u64::from(self.pickup_dist) + u64::from(self.dropoff_dist)
    }
}

/// Where the robot stands. `None` means it has not been placed yet; the
/// first pickup is then free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Option<Cell>,
}

impl RobotState {
    pub fn unplaced() -> Self {
        RobotState { position: None }
    }

    pub fn at(c: Cell) -> Self {
        RobotState { position: Some(c) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub before: Configuration,
    pub dropoff: Dropoff,
    pub after: Configuration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceCosts {
    pub carry_time: u64,
    pub empty_travel_time: u64,
    pub total: u64,
}

/// Checks a move against the dropoff rules, without computing distances.
pub fn check_dropoff(config: &Configuration, source: Cell, target: Cell, map: &GridMap) -> Result<(), PlanError> {
    if !config.contains(source) {
        return Err(PlanError::IllegalPickup(source));
    }
    if target == source || config.contains(target) || !map.is_free(target) {
        return Err(PlanError::IllegalPlacement(target));
    }
    let rest: Vec<Cell> = config.tiles().iter().copied().filter(|&t| t != source).collect();
    if rest.is_empty() || !is_connected(&rest) {
        return Err(PlanError::IllegalPickup(source));
    }
    if !target.neighbors().iter().any(|&nb| nb != source && config.contains(nb)) {
        return Err(PlanError::IllegalPlacement(target));
    }
    let mut after = rest;
    after.push(target);
    if !is_connected(&after) {
        return Err(PlanError::DisconnectedResult);
    }
    Ok(())
}

/// BFS distance from `source` to `target` over `config ∪ {target}`.
pub fn carry_distance(config: &Configuration, source: Cell, target: Cell) -> Option<u32> {
    let mut tiles = config.tiles().to_vec();
    if !config.contains(target) {
        tiles.push(target);
    }
    bfs_on_tiles(&tiles, source).ok()?.get(target)
}

/// BFS distance over the configuration from the robot to `source`; zero for
/// an unplaced robot.
pub fn pickup_distance(config: &Configuration, robot: RobotState, source: Cell) -> Result<u32, PlanError> {
    match robot.position {
        None => Ok(0),
        Some(pos) => {
            let field = bfs_on_tiles(config.tiles(), pos).map_err(|_| PlanError::RobotOffConfiguration(pos))?;
            field.get(source).ok_or(PlanError::IllegalPickup(source))
        }
    }
}

/// Validates `d` against `config`, fills in both distances and returns the
/// step. The robot ends at `d.target`.
pub fn apply_dropoff(
    config: &Configuration,
    robot: RobotState,
    d: &Dropoff,
    map: &GridMap,
) -> Result<PlanStep, PlanError> {
    check_dropoff(config, d.source, d.target, map)?;
    let pickup_dist = pickup_distance(config, robot, d.source)?;
    let dropoff_dist = carry_distance(config, d.source, d.target).ok_or(PlanError::IllegalPlacement(d.target))?;
    Ok(PlanStep {
        before: config.clone(),
        dropoff: Dropoff {
            source: d.source,
            target: d.target,
            pickup_dist,
            dropoff_dist,
        },
        after: config.moved(d.source, d.target),
    })
}

/// Re-applies a list of moves from `start`, recomputing all distances.
pub fn replay(
    start: &Configuration,
    robot: RobotState,
    moves: &[Dropoff],
    map: &GridMap,
) -> Result<Vec<PlanStep>, (usize, PlanError)> {
    let mut config = start.clone();
    let mut robot = robot;
    let mut steps = Vec::with_capacity(moves.len());
    for (i, m) in moves.iter().enumerate() {
        let step = apply_dropoff(&config, robot, m, map).map_err(|e| (i, e))?;
        robot = RobotState::at(step.dropoff.target);
        config = step.after.clone();
        steps.push(step);
    }
    Ok(steps)
}

/// Carry time, empty travel time and their sum.
pub fn sequence_costs(steps: &[PlanStep]) -> Result<SequenceCosts, PlanError> {
    for (i, w) in steps.windows(2).enumerate() {
        if w[0].after != w[1].before {
            return Err(PlanError::BrokenChain { index: i + 1 });
        }
    }
    let carry_time: u64 = steps.iter().map(|s| u64::from(s.dropoff.dropoff_dist)).sum();
    let empty_travel_time: u64 = steps.iter().map(|s| u64::from(s.dropoff.pickup_dist)).sum();
    Ok(SequenceCosts {
        carry_time,
        empty_travel_time,
        total: carry_time + empty_travel_time,
    })
}

/// Default safety net on the number of dropoffs: `4·n·(width+height)`.
pub fn default_step_budget(n: usize, map: &GridMap) -> usize {
    4 * n * (map.width() + map.height()) as usize
}

fn check_instance(s: &Configuration, g: &Configuration, map: &GridMap) -> Result<(), PlanError> {
    if s.len() != g.len() {
        return Err(PlanError::SizeMismatch {
            start: s.len(),
            goal: g.len(),
        });
    }
    s.check_on(map)?;
    g.check_on(map)?;
    if !map.same_free_component(&[s.tiles()[0], g.tiles()[0]]) {
        return Err(PlanError::SeparateComponents);
    }
    Ok(())
}

/// Grow Largest Component: one dropoff from `s` toward `g`.
///
/// Without overlap the tile nearest the goal side is extended by one cell
/// toward the closest goal tile. With overlap, the largest shared component
/// `M` is grown by moving the closest leaf outside `M` onto a goal cell
/// bordering `M`. Candidates are tried closest-first and invalid ones
/// (e.g. a leaf whose removal strands `D`) are skipped.
pub fn glc_step(s: &Configuration, g: &Configuration, map: &GridMap) -> Result<Dropoff, PlanError> {
    if s == g {
        return Err(PlanError::AlreadyAtGoal);
    }
    if s.len() < 2 {
        return Err(PlanError::TooFewTiles);
    }
    let leaves = leaf_tiles(s);
    let grown = largest_overlap_component(s, g);

    if grown.is_empty() {
        let from_goal = bfs_free(map, g.tiles())?;
        let s_edge = s
            .tiles()
            .iter()
            .filter_map(|&t| from_goal.get(t).map(|d| (d, t)))
            .min()
            .map(|(_, t)| t)
            .ok_or(PlanError::SeparateComponents)?;
        let from_s_edge = bfs_free(map, &[s_edge])?;
        let g_edge = g
            .tiles()
            .iter()
            .filter_map(|&t| from_s_edge.get(t).map(|d| (d, t)))
            .min()
            .map(|(_, t)| t)
            .ok_or(PlanError::SeparateComponents)?;
        let from_g_edge = bfs_free(map, &[g_edge])?;

        let mut targets: Vec<(u32, Cell)> = s
            .free_neighbors(map)
            .into_iter()
            .filter_map(|c| from_g_edge.get(c).map(|d| (d, c)))
            .collect();
        targets.sort_unstable();
        for (_, target) in targets {
            let mut sources: Vec<(u32, Cell)> = leaves
                .iter()
                .filter_map(|&p| carry_distance(s, p, target).map(|d| (d, p)))
                .collect();
            sources.sort_unstable();
            for (_, source) in sources {
                if check_dropoff(s, source, target, map).is_ok() {
                    return Ok(Dropoff::new(source, target));
                }
            }
        }
        return Err(PlanError::NoMoveFound);
    }

    let in_grown = |c: Cell| grown.binary_search(&c).is_ok();
    let frontier: Vec<Cell> = g
        .tiles()
        .iter()
        .copied()
        .filter(|&c| !in_grown(c) && c.neighbors().iter().any(|&nb| in_grown(nb)))
        .collect();
    let mut pairs: Vec<(u32, Cell, Cell)> = Vec::new();
    for &source in leaves.iter().filter(|&&p| !in_grown(p)) {
        let field = bfs_on_tiles(s.tiles(), source)?;
        for &target in &frontier {
            let best = target.neighbors().iter().filter_map(|&nb| field.get(nb)).min();
            if let Some(d) = best {
                pairs.push((d + 1, source, target));
            }
        }
    }
    pairs.sort_unstable();
    pairs
        .into_iter()
        .find(|&(_, p, d)| check_dropoff(s, p, d, map).is_ok())
        .map(|(_, p, d)| Dropoff::new(p, d))
        .ok_or(PlanError::NoMoveFound)
}

/// MWPMexpand: among matched pairs whose start tile is a leaf, move the one
/// with the longest matched distance to the free neighbor cell of `s`
/// closest to its matched goal cell. The matching keeps overlapping tiles in
/// place when that costs nothing extra. Candidates whose best placement gets
/// closer to the matched goal are preferred. Stuck when no mismatched leaf
/// has a valid placement.
pub fn mwpm_expand_step(s: &Configuration, g: &Configuration, map: &GridMap) -> Result<Dropoff, PlanError> {
    if s == g {
        return Err(PlanError::AlreadyAtGoal);
    }
    if s.len() < 2 {
        return Err(PlanError::TooFewTiles);
    }
    let dm = distance_matrix(map, s, g)?;
    let matching = match min_weight_perfect_matching_stationary(&dm) {
        Ok(m) => m,
        Err(MatchingError::Infeasible) => return Err(PlanError::SeparateComponents),
        Err(e) => return Err(e.into()),
    };
    let leaves: HashSet<Cell> = leaf_tiles(s).into_iter().collect();
    let mut candidates: Vec<(Reverse<u32>, Cell, Cell)> = matching
        .pairs
        .iter()
        .filter(|&&(p, _, d)| d > 0 && leaves.contains(&p))
        .map(|&(p, gm, d)| (Reverse(d), p, gm))
        .collect();
    candidates.sort_unstable();

    let free = s.free_neighbors(map);
    // (matched distance, valid targets by distance to the matched goal, source)
    type Choice = (u32, Vec<(u32, Cell)>, Cell);
    let mut options: Vec<Choice> = Vec::with_capacity(candidates.len());
    for &(Reverse(d), source, goal_cell) in &candidates {
        let field = bfs_free(map, &[goal_cell])?;
        let mut targets: Vec<(u32, Cell)> = free
            .iter()
            .filter_map(|&c| field.get(c).map(|dc| (dc, c)))
            .filter(|&(_, c)| check_dropoff(s, source, c, map).is_ok())
            .collect();
        targets.sort_unstable();
        options.push((d, targets, source));
    }
    // a placement closer to the matched goal first, then any valid one
    for strict in [true, false] {
        for (d, targets, source) in &options {
            if let Some(&(_, target)) = targets.iter().find(|&&(dc, _)| !strict || dc < *d) {
                return Ok(Dropoff::new(*source, target));
            }
        }
    }
    Err(PlanError::Stuck { progress: 0 })
}

/// Strategy used to move one configuration toward another.
pub trait LocalPlanner {
    fn next_dropoff(&self, s: &Configuration, g: &Configuration, map: &GridMap) -> Result<Dropoff, PlanError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalPlannerKind {
    Glc,
    MwpmExpand,
}

impl LocalPlanner for LocalPlannerKind {
    fn next_dropoff(&self, s: &Configuration, g: &Configuration, map: &GridMap) -> Result<Dropoff, PlanError> {
        match self {
            LocalPlannerKind::Glc => glc_step(s, g, map),
            LocalPlannerKind::MwpmExpand => mwpm_expand_step(s, g, map),
        }
    }
}

/// Iterates GLC until the goal is reached. Complete for valid instances;
/// running out of budget indicates a bug.
pub fn glc_solve(
    s: &Configuration,
    g: &Configuration,
    map: &GridMap,
    robot: RobotState,
    step_budget: Option<usize>,
) -> Result<Vec<PlanStep>, PlanError> {
    check_instance(s, g, map)?;
    let budget = step_budget.unwrap_or_else(|| default_step_budget(s.len(), map));
    let mut config = s.clone();
    let mut robot = robot;
    let mut steps = Vec::new();
    while &config != g {
        if steps.len() >= budget {
            return Err(PlanError::BudgetExceeded { budget });
        }
        let d = glc_step(&config, g, map)?;
        let step = apply_dropoff(&config, robot, &d, map)?;
        robot = RobotState::at(step.dropoff.target);
        config = step.after.clone();
        steps.push(step);
    }
    Ok(steps)
}

/// Iterates MWPMexpand until the goal, a stuck state, a revisited
/// configuration or the budget.
pub fn mwpm_expand_solve(
    s: &Configuration,
    g: &Configuration,
    map: &GridMap,
    robot: RobotState,
    step_budget: Option<usize>,
) -> Result<Vec<PlanStep>, PlanError> {
    check_instance(s, g, map)?;
    let budget = step_budget.unwrap_or_else(|| default_step_budget(s.len(), map));
    let mut visited: HashSet<Configuration> = HashSet::from([s.clone()]);
    let mut config = s.clone();
    let mut robot = robot;
    let mut steps = Vec::new();
    while &config != g {
        if steps.len() >= budget {
            return Err(PlanError::BudgetExceeded { budget });
        }
        let d = match mwpm_expand_step(&config, g, map) {
            Ok(d) => d,
            Err(PlanError::Stuck { .. }) => return Err(PlanError::Stuck { progress: steps.len() }),
            Err(e) => return Err(e),
        };
        let step = apply_dropoff(&config, robot, &d, map)?;
        if !visited.insert(step.after.clone()) {
            return Err(PlanError::Stuck { progress: steps.len() });
        }
        robot = RobotState::at(step.dropoff.target);
        config = step.after.clone();
        steps.push(step);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: i32, y: i32) -> Cell {
        Cell::new(x, y)
    }

    fn config(v: &[(i32, i32)]) -> Configuration {
        Configuration::from_tiles(v.iter().map(|&p| Cell::from(p))).unwrap()
    }

    #[test]
    fn apply_row_move() {
        let map = GridMap::empty(4, 1).unwrap();
        let s = config(&[(0, 0), (1, 0)]);
        let step = apply_dropoff(&s, RobotState::at(c(1, 0)), &Dropoff::new(c(0, 0), c(2, 0)), &map).unwrap();
        assert_eq!(step.after, config(&[(1, 0), (2, 0)]));
        assert_eq!(step.dropoff.pickup_dist, 1);
        assert_eq!(step.dropoff.dropoff_dist, 2);
    }

    #[test]
    fn apply_rejects_illegal_moves() {
        let map = GridMap::empty(4, 3).unwrap();
        let row = config(&[(0, 0), (1, 0), (2, 0)]);
        let robot = RobotState::unplaced();
        assert_eq!(
            apply_dropoff(&row, robot, &Dropoff::new(c(0, 0), c(0, 0)), &map),
            Err(PlanError::IllegalPlacement(c(0, 0)))
        );
        assert_eq!(
            apply_dropoff(&row, robot, &Dropoff::new(c(1, 0), c(1, 1)), &map),
            Err(PlanError::IllegalPickup(c(1, 0)))
        );
        // target only touches the picked tile
        assert_eq!(
            apply_dropoff(&row, robot, &Dropoff::new(c(0, 0), c(0, 1)), &map),
            Err(PlanError::IllegalPlacement(c(0, 1)))
        );
        assert_eq!(
            apply_dropoff(&row, robot, &Dropoff::new(c(0, 0), c(2, 0)), &map),
            Err(PlanError::IllegalPlacement(c(2, 0)))
        );
        let walled = GridMap::new(4, 3, [c(3, 0)]).unwrap();
        assert_eq!(
            apply_dropoff(&row, robot, &Dropoff::new(c(0, 0), c(3, 0)), &walled),
            Err(PlanError::IllegalPlacement(c(3, 0)))
        );
        assert_eq!(
            apply_dropoff(&row, RobotState::at(c(3, 2)), &Dropoff::new(c(0, 0), c(3, 0)), &map),
            Err(PlanError::RobotOffConfiguration(c(3, 2)))
        );
    }

    #[test]
    fn carry_may_cross_vacated_cell() {
        // P=(0,0) carried to (0,1)... through itself: distance 1
        let s = config(&[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(carry_distance(&s, c(0, 0), c(0, 1)), Some(1));
    }

    #[test]
    fn unplaced_robot_picks_up_for_free() {
        let s = config(&[(0, 0), (1, 0), (2, 0)]);
        assert_eq!(pickup_distance(&s, RobotState::unplaced(), c(2, 0)), Ok(0));
        assert_eq!(pickup_distance(&s, RobotState::at(c(0, 0)), c(2, 0)), Ok(2));
    }

    #[test]
    fn glc_domino_skips_stranding_leaf() {
        let map = GridMap::empty(8, 1).unwrap();
        let s = config(&[(0, 0), (1, 0)]);
        let g = config(&[(5, 0), (6, 0)]);
        assert_eq!(glc_step(&s, &g, &map).unwrap(), Dropoff::new(c(0, 0), c(2, 0)));
    }

    #[test]
    fn glc_at_goal() {
        let map = GridMap::empty(3, 3).unwrap();
        let s = config(&[(0, 0), (1, 0)]);
        assert_eq!(glc_step(&s, &s, &map), Err(PlanError::AlreadyAtGoal));
        assert_eq!(glc_solve(&s, &s, &map, RobotState::unplaced(), None).unwrap(), vec![]);
    }

    #[test]
    fn mwpm_expand_stuck_on_raised_middle() {
        // U-shape whose bottom middle tile has to move up between the arms
        let map = GridMap::empty(3, 2).unwrap();
        let s = config(&[(0, 0), (2, 0), (0, 1), (1, 1), (2, 1)]);
        let g = config(&[(0, 0), (1, 0), (2, 0), (0, 1), (2, 1)]);
        assert_eq!(mwpm_expand_step(&s, &g, &map), Err(PlanError::Stuck { progress: 0 }));
        assert_eq!(
            mwpm_expand_solve(&s, &g, &map, RobotState::unplaced(), None),
            Err(PlanError::Stuck { progress: 0 })
        );
        let steps = glc_solve(&s, &g, &map, RobotState::unplaced(), None).unwrap();
        assert_eq!(steps.last().unwrap().after, g);
    }

    #[test]
    fn sequence_costs_examples() {
        assert_eq!(sequence_costs(&[]).unwrap(), SequenceCosts::default());
        let s = config(&[(0, 0), (1, 0)]);
        let step = PlanStep {
            before: s.clone(),
            dropoff: Dropoff {
                source: c(0, 0),
                target: c(2, 0),
                pickup_dist: 1,
                dropoff_dist: 2,
            },
            after: config(&[(1, 0), (2, 0)]),
        };
        assert_eq!(
            sequence_costs(std::slice::from_ref(&step)).unwrap(),
            SequenceCosts {
                carry_time: 2,
                empty_travel_time: 1,
                total: 3
            }
        );
        assert_eq!(
            sequence_costs(&[step.clone(), step]),
            Err(PlanError::BrokenChain { index: 1 })
        );
    }

    #[test]
    fn single_tile_cannot_move() {
        let map = GridMap::empty(3, 1).unwrap();
        let s = config(&[(0, 0)]);
        let g = config(&[(2, 0)]);
        assert_eq!(glc_step(&s, &g, &map), Err(PlanError::TooFewTiles));
    }
}
