//! RRT* over polyomino configurations.
//!
//! Each tree node is a configuration reached from its parent by a chain of
//! at most `rad` dropoffs. Nearest neighbours are ranked by the overlap and
//! center-of-mass similarity `h = (ov + 1) / max(|com_a - com_b|, 0.1)`,
//! and the goal is sampled with a bias that grows with the tree's mean
//! overlap with the goal.
//!
//! Edge costs depend on where the parent's chain left the robot. When a
//! node is re-parented its immediate children have their edge costs
//! refreshed, but deeper descendants keep their old `cost_from_root`.
//! Solutions are always re-costed by replaying the path from the root.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{center_of_mass, overlap, Cell, Configuration, GridMap};
use crate::planner::{
    apply_dropoff, pickup_distance, replay, sequence_costs, Dropoff, LocalPlanner, PlanError, PlanStep, RobotState,
    SequenceCosts,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RrtError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error("start has {start} tiles but goal has {goal}")]
    SizeMismatch { start: usize, goal: usize },
    #[error("start and goal lie in different free-space components")]
    SeparateComponents,
    #[error("no free-space component can hold {0} tiles")]
    NoRoom(usize),
    #[error("extension produced no dropoff")]
    NoProgress,
    #[error("every node has already been extended toward the goal")]
    NoEligibleNode,
    #[error("initial solution is invalid at dropoff {index}: {source}")]
    BadInitialSolution { index: usize, source: PlanError },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams<F> {
    pub bias_base: F,
    pub bias_max: F,
    /// Maximum dropoffs per extension.
    pub rad: usize,
    pub max_nodes: usize,
    pub seed: u64,
    /// Stop as soon as a solution at most this expensive exists.
    pub cost_threshold: Option<u64>,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    /// Cap on loop iterations, including ones that add no node.
    pub max_iterations: Option<usize>,
    pub checkpoint_every: usize,
    pub robot: RobotState,
}

impl<F: Float> Default for PlannerParams<F> {
    fn default() -> Self {
        PlannerParams {
            bias_base: F::from(0.1).unwrap(),
            bias_max: F::from(0.75).unwrap(),
            rad: 1,
            max_nodes: 10_000,
            seed: 0,
            cost_threshold: None,
            time_limit: None,
            max_iterations: None,
            checkpoint_every: 500,
            robot: RobotState::unplaced(),
        }
    }
}

impl<F: Float> PlannerParams<F> {
    pub fn validate(&self) -> Result<(), RrtError> {
        let (zero, one) = (F::zero(), F::one());
        if !(zero <= self.bias_base && self.bias_base <= self.bias_max && self.bias_max <= one) {
            return Err(RrtError::InvalidParams("need 0 <= bias_base <= bias_max <= 1".into()));
        }
        if self.rad == 0 {
            return Err(RrtError::InvalidParams("rad must be at least 1".into()));
        }
        if self.max_nodes == 0 {
            return Err(RrtError::InvalidParams("max_nodes must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(RrtError::InvalidParams("checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self) -> usize {
        self.max_iterations.unwrap_or(self.max_nodes.saturating_mul(50))
    }
}

/// Similarity of two configurations; larger means closer.
pub fn heuristic<F: Float>(a: &Configuration, b: &Configuration) -> F {
    heuristic_parts(overlap(a, b), center_of_mass(a), center_of_mass(b))
}

/// The heuristic from a precomputed overlap and centers of mass.
pub fn heuristic_parts<F: Float>(ov: usize, com_a: (F, F), com_b: (F, F)) -> F {
    let floor = F::from(0.1).unwrap();
    let dist = (com_a.0 - com_b.0).hypot(com_a.1 - com_b.1);
    (F::from(ov).unwrap() + F::one()) / dist.max(floor)
}

/// `bias_base + (bias_max - bias_base) · mean_overlap / n`.
pub fn bias_from_overlap<F: Float>(bias_base: F, bias_max: F, mean_overlap: F, n: usize) -> F {
    bias_base + (bias_max - bias_base) * (mean_overlap / F::from(n).unwrap())
}

/// Goal-sampling probability for the current tree.
pub fn dynamic_bias<F: Float>(tree: &Tree<F>, params: &PlannerParams<F>) -> F {
    bias_from_overlap(
        params.bias_base,
        params.bias_max,
        tree.mean_goal_overlap(),
        tree.goal.len(),
    )
}

/// Grows a random `n`-tile polyomino: a random seed cell, then repeatedly a
/// uniformly random free frontier cell.
pub fn sample_random_config<R: Rng + ?Sized>(map: &GridMap, n: usize, rng: &mut R) -> Result<Configuration, RrtError> {
    sample_random_config_in(map, None, n, rng)
}

/// As [`sample_random_config`], restricted to cells where `region` is true.
pub fn sample_random_config_in<R: Rng + ?Sized>(
    map: &GridMap,
    region: Option<&[bool]>,
    n: usize,
    rng: &mut R,
) -> Result<Configuration, RrtError> {
    let allowed = |i: usize| region.is_none_or(|r| r[i]);
    let labels = map.free_components();
    let mut sizes: HashMap<u32, usize> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            if allowed(i) {
                *sizes.entry(*l).or_default() += 1;
            }
        }
    }
    // a region may split a component, so seeds are only a first filter
    let seeds: Vec<usize> = (0..map.area())
        .filter(|&i| allowed(i) && labels[i].is_some_and(|l| sizes[&l] >= n))
        .collect();
    if seeds.is_empty() || n == 0 {
        return Err(RrtError::NoRoom(n));
    }
    let mut in_set = vec![false; map.area()];
    let mut in_frontier = vec![false; map.area()];
    for _attempt in 0..1000 {
        in_set.iter_mut().for_each(|b| *b = false);
        in_frontier.iter_mut().for_each(|b| *b = false);
        let seed = seeds[rng.gen_range(0..seeds.len())];
        let mut grown = vec![seed];
        in_set[seed] = true;
        let mut frontier: Vec<usize> = Vec::new();
        let push_neighbors = |i: usize, frontier: &mut Vec<usize>, in_set: &[bool], in_frontier: &mut [bool]| {
            for nb in map.cell_at(i).neighbors() {
                if let Some(j) = map.index(nb) {
                    if map.is_free(nb) && allowed(j) && !in_set[j] && !in_frontier[j] {
                        in_frontier[j] = true;
                        frontier.push(j);
                    }
                }
            }
        };
        push_neighbors(seed, &mut frontier, &in_set, &mut in_frontier);
        while grown.len() < n && !frontier.is_empty() {
            let pick = frontier.swap_remove(rng.gen_range(0..frontier.len()));
            in_frontier[pick] = false;
            in_set[pick] = true;
            grown.push(pick);
            push_neighbors(pick, &mut frontier, &in_set, &mut in_frontier);
        }
        if grown.len() == n {
            let mut tiles: Vec<Cell> = grown.into_iter().map(|i| map.cell_at(i)).collect();
            tiles.sort_unstable();
            return Ok(Configuration::from_sorted_unchecked(tiles));
        }
    }
    Err(RrtError::NoRoom(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<F> {
    pub id: usize,
    pub config: Configuration,
    pub parent: Option<usize>,
    /// Chain of dropoffs from the parent's configuration.
    pub moves: Vec<Dropoff>,
    /// Travel time of `moves`, given the parent's robot position.
    pub edge_cost: u64,
    pub cost_from_root: u64,
    pub robot: RobotState,
    pub extended_toward_goal: bool,
    pub children: Vec<usize>,
    com: (F, F),
}

/// An extension result not yet in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub parent: usize,
    pub config: Configuration,
    pub moves: Vec<Dropoff>,
    pub edge_cost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(usize),
    Updated(usize),
    Ignored(usize),
}

/// Row-major occupancy bitsets of every node, packed back to back.
#[derive(Debug, Clone)]
struct CellBits {
    map_width: i32,
    words: usize,
    data: Vec<u64>,
}

impl CellBits {
    fn new(map: &GridMap) -> Self {
        let cells = (map.width() * map.height()) as usize;
        CellBits {
            map_width: map.width(),
            words: cells.div_ceil(64).max(1),
            data: Vec::new(),
        }
    }

    fn encode(&self, config: &Configuration) -> Vec<u64> {
        let mut out = vec![0; self.words];
        for t in config.tiles() {
            let i = (t.y * self.map_width + t.x) as usize;
            out[i / 64] |= 1 << (i % 64);
        }
        out
    }

    fn push(&mut self, config: &Configuration) {
        let row = self.encode(config);
        self.data.extend_from_slice(&row);
    }

    fn overlap(&self, id: usize, probe: &[u64]) -> usize {
        let row = &self.data[id * self.words..(id + 1) * self.words];
        row.iter().zip(probe).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }
}

/// Precomputed query side of [`Tree::overlap_with`].
pub struct OverlapProbe<'q> {
    config: &'q Configuration,
    bits: Option<Vec<u64>>,
}

#[derive(Debug, Clone)]
pub struct Tree<F> {
    pub nodes: Vec<TreeNode<F>>,
    index: HashMap<Configuration, usize>,
    pub goal: Configuration,
    pub goal_id: Option<usize>,
    overlap_sum: u64,
    bits: Option<CellBits>,
}

impl<F: Float> Tree<F> {
    pub fn new(root: Configuration, robot: RobotState, goal: Configuration) -> Self {
        let mut tree = Tree {
            nodes: Vec::new(),
            index: HashMap::new(),
            goal,
            goal_id: None,
            overlap_sum: 0,
            bits: None,
        };
        tree.push(root, None, Vec::new(), 0, 0, robot);
        tree
    }

    /// Keeps an occupancy bitset per node so overlap queries cost one pass
    /// over the map's words instead of a merge. All nodes must lie on `map`.
    pub fn with_cell_index(mut self, map: &GridMap) -> Self {
        let mut bits = CellBits::new(map);
        for node in &self.nodes {
            bits.push(&node.config);
        }
        self.bits = Some(bits);
        self
    }

    pub fn probe<'q>(&self, q: &'q Configuration) -> OverlapProbe<'q> {
        OverlapProbe {
            config: q,
            bits: self.bits.as_ref().map(|b| b.encode(q)),
        }
    }

    /// Shared tiles of node `id` and the probed configuration.
    pub fn overlap_with(&self, id: usize, probe: &OverlapProbe<'_>) -> usize {
        match (&self.bits, &probe.bits) {
            (Some(b), Some(p)) => b.overlap(id, p),
            _ => overlap(&self.nodes[id].config, probe.config),
        }
    }

    fn push(
        &mut self,
        config: Configuration,
        parent: Option<usize>,
        moves: Vec<Dropoff>,
        edge_cost: u64,
        cost_from_root: u64,
        robot: RobotState,
    ) -> usize {
        let id = self.nodes.len();
        self.overlap_sum += overlap(&config, &self.goal) as u64;
        if config == self.goal {
            self.goal_id = Some(id);
        }
        self.index.insert(config.clone(), id);
        if let Some(b) = &mut self.bits {
            b.push(&config);
        }
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        self.nodes.push(TreeNode {
            id,
            com: center_of_mass(&config),
            config,
            parent,
            moves,
            edge_cost,
            cost_from_root,
            robot,
            extended_toward_goal: false,
            children: Vec::new(),
        });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode<F> {
        &self.nodes[id]
    }

    pub fn find(&self, config: &Configuration) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Mean overlap of all nodes with the goal.
    pub fn mean_goal_overlap(&self) -> F {
        F::from(self.overlap_sum).unwrap() / F::from(self.nodes.len()).unwrap()
    }

    /// True when `a` is `b` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(id) = cur {
            if id == a {
                return true;
            }
            cur = self.nodes[id].parent;
        }
        false
    }

    /// Node ids from the root to `id`.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            path.push(p);
            cur = self.nodes[p].parent;
        }
        path.reverse();
        path
    }

    /// Concatenated dropoffs from the root to `id`.
    pub fn moves_to(&self, id: usize) -> Vec<Dropoff> {
        self.path_to(id)
            .into_iter()
            .flat_map(|n| self.nodes[n].moves.iter().copied())
            .collect()
    }

    /// Travel time along the current root path, from per-edge costs.
    pub fn path_cost(&self, id: usize) -> u64 {
        self.path_to(id).into_iter().map(|n| self.nodes[n].edge_cost).sum()
    }

    /// Moves `id` under `parent` with a new chain, then refreshes the
    /// pickup distance and cost of `id`'s immediate children.
    fn reparent(&mut self, id: usize, parent: usize, moves: Vec<Dropoff>, edge_cost: u64) {
        if let Some(old) = self.nodes[id].parent {
            self.nodes[old].children.retain(|&c| c != id);
        }
        self.nodes[parent].children.push(id);
        let base = self.nodes[parent].cost_from_root;
        let node = &mut self.nodes[id];
        node.parent = Some(parent);
        node.robot = moves.last().map_or(node.robot, |m| RobotState::at(m.target));
        node.moves = moves;
        node.edge_cost = edge_cost;
        node.cost_from_root = base + edge_cost;
        self.refresh_children(id);
    }

    fn refresh_children(&mut self, id: usize) {
        let (config, robot, base) = {
            let n = &self.nodes[id];
            (n.config.clone(), n.robot, n.cost_from_root)
        };
        for child in self.nodes[id].children.clone() {
            let node = &mut self.nodes[child];
            if let Some(first) = node.moves.first_mut() {
                let d_p = pickup_distance(&config, robot, first.source)
                    .expect("child chains start on the parent's configuration");
                first.pickup_dist = d_p;
            }
            node.edge_cost = node.moves.iter().map(Dropoff::travel).sum();
            node.cost_from_root = base + node.edge_cost;
        }
    }

    /// Checks stored chains against a fresh replay. Returns the number of
    /// nodes whose `cost_from_root` is stale.
    pub fn check(&self, map: &GridMap) -> Result<usize, String> {
        let mut stale = 0;
        if self.index.len() != self.nodes.len() {
            return Err("duplicate configurations".into());
        }
        for node in &self.nodes {
            let Some(p) = node.parent else {
                if node.id != 0 || node.cost_from_root != 0 || !node.moves.is_empty() {
                    return Err("malformed root".into());
                }
                continue;
            };
            let parent = &self.nodes[p];
            let steps = replay(&parent.config, parent.robot, &node.moves, map)
                .map_err(|(i, e)| format!("node {} move {i}: {e}", node.id))?;
            let last = steps.last().ok_or_else(|| format!("node {} has no moves", node.id))?;
            if last.after != node.config {
                return Err(format!("node {} chain ends elsewhere", node.id));
            }
            let cost: u64 = steps.iter().map(|s| s.dropoff.travel()).sum();
            if cost != node.edge_cost || steps.iter().zip(&node.moves).any(|(s, m)| s.dropoff != *m) {
                return Err(format!(
                    "node {} edge cost {} but replay gives {cost}",
                    node.id, node.edge_cost
                ));
            }
            if node.robot != RobotState::at(last.dropoff.target) {
                return Err(format!("node {} robot misplaced", node.id));
            }
            if !parent.children.contains(&node.id) {
                return Err(format!("node {} missing from parent's children", node.id));
            }
            if node.cost_from_root != parent.cost_from_root + node.edge_cost {
                stale += 1;
            }
        }
        Ok(stale)
    }
}

/// Node maximising the heuristic toward `q`; ties go to the lowest id.
pub fn nearest_node<F: Float>(
    tree: &Tree<F>,
    q: &Configuration,
    exclude_extended_to_goal: bool,
) -> Result<usize, RrtError> {
    let q_com = center_of_mass(q);
    let probe = tree.probe(q);
    let mut best: Option<(F, usize)> = None;
    for node in &tree.nodes {
        if exclude_extended_to_goal && node.extended_toward_goal {
            continue;
        }
        let h = heuristic_parts(tree.overlap_with(node.id, &probe), node.com, q_com);
        if best.is_none_or(|(bh, _)| h > bh) {
            best = Some((h, node.id));
        }
    }
    best.map(|(_, id)| id).ok_or(RrtError::NoEligibleNode)
}

/// Up to `rad` local-planner dropoffs from node `from` toward `q`.
pub fn extend<F: Float, P: LocalPlanner + ?Sized>(
    tree: &Tree<F>,
    from: usize,
    q: &Configuration,
    map: &GridMap,
    rad: usize,
    planner: &P,
) -> Result<Candidate, RrtError> {
    let node = &tree.nodes[from];
    let (mut config, mut robot) = (node.config.clone(), node.robot);
    let mut moves = Vec::new();
    let mut cost = 0;
    for _ in 0..rad {
        if &config == q {
            break;
        }
        let Ok(d) = planner.next_dropoff(&config, q, map) else {
            break;
        };
        let Ok(step) = apply_dropoff(&config, robot, &d, map) else {
            break;
        };
        cost += step.dropoff.travel();
        robot = RobotState::at(step.dropoff.target);
        moves.push(step.dropoff);
        config = step.after;
    }
    if moves.is_empty() {
        return Err(RrtError::NoProgress);
    }
    Ok(Candidate {
        parent: from,
        config,
        moves,
        edge_cost: cost,
    })
}

/// Adds a new configuration, or re-parents the existing node holding it
/// when the candidate's route is cheaper.
pub fn insert_or_update<F: Float>(tree: &mut Tree<F>, cand: Candidate) -> InsertOutcome {
    let parent_cost = tree.nodes[cand.parent].cost_from_root;
    let cost = parent_cost + cand.edge_cost;
    if let Some(id) = tree.find(&cand.config) {
        if id != 0 && cost < tree.nodes[id].cost_from_root && !tree.is_ancestor_or_self(id, cand.parent) {
            tree.reparent(id, cand.parent, cand.moves, cand.edge_cost);
            return InsertOutcome::Updated(id);
        }
        return InsertOutcome::Ignored(id);
    }
    let robot = RobotState::at(cand.moves.last().expect("nonempty chain").target);
    InsertOutcome::Inserted(tree.push(cand.config, Some(cand.parent), cand.moves, cand.edge_cost, cost, robot))
}

/// A chain of at most `rad` dropoffs from `from` to exactly `to`. A single
/// differing tile is tried as a direct move first.
pub fn connect<P: LocalPlanner + ?Sized>(
    from: &Configuration,
    robot: RobotState,
    to: &Configuration,
    map: &GridMap,
    rad: usize,
    planner: &P,
) -> Option<(Vec<Dropoff>, u64)> {
    let missing = from.len() - overlap(from, to);
    if missing == 0 || missing > rad {
        return None;
    }
    if missing == 1 {
        let source = *from.tiles().iter().find(|&&t| !to.contains(t))?;
        let target = *to.tiles().iter().find(|&&t| !from.contains(t))?;
        if let Ok(step) = apply_dropoff(from, robot, &Dropoff::new(source, target), map) {
            return Some((vec![step.dropoff], step.dropoff.travel()));
        }
    }
    let (mut config, mut robot) = (from.clone(), robot);
    let mut moves = Vec::new();
    let mut cost = 0;
    while &config != to {
        if moves.len() == rad {
            return None;
        }
        let d = planner.next_dropoff(&config, to, map).ok()?;
        let step = apply_dropoff(&config, robot, &d, map).ok()?;
        cost += step.dropoff.travel();
        robot = RobotState::at(step.dropoff.target);
        moves.push(step.dropoff);
        config = step.after;
    }
    Some((moves, cost))
}

/// Two rewiring passes around a freshly inserted node: pick its cheapest
/// reachable parent, then adopt every node that becomes cheaper through it.
/// Returns the number of edges changed.
pub fn rewire<F: Float, P: LocalPlanner + ?Sized>(
    tree: &mut Tree<F>,
    new_id: usize,
    map: &GridMap,
    rad: usize,
    planner: &P,
) -> usize {
    let n = tree.goal.len();
    let mut changed = 0;

    let new_config = tree.nodes[new_id].config.clone();
    let probe = tree.probe(&new_config);
    let mut best: Option<(usize, Vec<Dropoff>, u64)> = None;
    let mut best_cost = tree.nodes[new_id].cost_from_root;
    for k in 0..tree.len() {
        if k == new_id || Some(k) == tree.nodes[new_id].parent {
            continue;
        }
        let node = &tree.nodes[k];
        let missing = n - tree.overlap_with(k, &probe);
        if missing > rad || node.cost_from_root + missing as u64 >= best_cost {
            continue;
        }
        if let Some((moves, cost)) = connect(&node.config, node.robot, &new_config, map, rad, planner) {
            if node.cost_from_root + cost < best_cost {
                best_cost = node.cost_from_root + cost;
                best = Some((k, moves, cost));
            }
        }
    }
    if let Some((k, moves, cost)) = best {
        tree.reparent(new_id, k, moves, cost);
        changed += 1;
    }

    for x in 1..tree.len() {
        if x == new_id {
            continue;
        }
        let (new_cost, new_robot) = (tree.nodes[new_id].cost_from_root, tree.nodes[new_id].robot);
        let node = &tree.nodes[x];
        let missing = n - tree.overlap_with(x, &probe);
        if missing > rad || new_cost + missing as u64 >= node.cost_from_root || tree.is_ancestor_or_self(x, new_id) {
            continue;
        }
        if let Some((moves, cost)) = connect(&new_config, new_robot, &node.config, map, rad, planner) {
            if new_cost + cost < tree.nodes[x].cost_from_root {
                tree.reparent(x, new_id, moves, cost);
                changed += 1;
            }
        }
    }
    changed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub nodes: usize,
    pub best_cost: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtOutcome {
    /// Best root-to-goal sequence seen during the run, re-costed by replay.
    pub steps: Vec<PlanStep>,
    pub costs: Option<SequenceCosts>,
    /// `cost_from_root` the tree stores for the goal node at the end.
    pub tree_goal_cost: Option<u64>,
    /// Replayed cost of the tree's final root-to-goal path.
    pub final_path_cost: Option<u64>,
    pub nodes_created: usize,
    pub nodes_to_first_solution: Option<usize>,
    pub iterations: usize,
    pub rewires: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub timed_out: bool,
}

impl RrtOutcome {
    pub fn solved(&self) -> bool {
        self.costs.is_some()
    }
}

/// Incremental RRT* run; [`plan`] drives it to completion.
pub struct Rrt<'a, F, P: ?Sized> {
    map: &'a GridMap,
    params: PlannerParams<F>,
    planner: &'a P,
    tree: Tree<F>,
    rng: ChaCha8Rng,
    region: Vec<bool>,
    best: Option<(u64, Vec<Dropoff>)>,
    nodes_to_first_solution: Option<usize>,
    iterations: usize,
    rewires: usize,
    checkpoints: Vec<Checkpoint>,
    started: Instant,
}

impl<'a, F: Float, P: LocalPlanner + ?Sized> Rrt<'a, F, P> {
    pub fn new(
        start: &Configuration,
        goal: &Configuration,
        map: &'a GridMap,
        params: PlannerParams<F>,
        planner: &'a P,
    ) -> Result<Self, RrtError> {
        params.validate()?;
        if start.len() != goal.len() {
            return Err(RrtError::SizeMismatch {
                start: start.len(),
                goal: goal.len(),
            });
        }
        start.check_on(map).map_err(PlanError::from)?;
        goal.check_on(map).map_err(PlanError::from)?;
        let labels = map.free_components();
        let home = labels[map.index(start.tiles()[0]).expect("checked")];
        if labels[map.index(goal.tiles()[0]).expect("checked")] != home {
            return Err(RrtError::SeparateComponents);
        }
        let region = labels.iter().map(|&l| l == home).collect();
        let mut rrt = Rrt {
            map,
            planner,
            tree: Tree::new(start.clone(), params.robot, goal.clone()).with_cell_index(map),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            region,
            best: None,
            nodes_to_first_solution: None,
            iterations: 0,
            rewires: 0,
            checkpoints: Vec::new(),
            started: Instant::now(),
        };
        rrt.observe_goal();
        Ok(rrt)
    }

    pub fn tree(&self) -> &Tree<F> {
        &self.tree
    }

    pub fn best_cost(&self) -> Option<u64> {
        self.best.as_ref().map(|(c, _)| *c)
    }

    /// Inserts a known solution as a chain of nodes, `rad` dropoffs each.
    pub fn seed_solution(&mut self, moves: &[Dropoff]) -> Result<(), RrtError> {
        let start = self.tree.nodes[0].config.clone();
        replay(&start, self.params.robot, moves, self.map)
            .map_err(|(index, source)| RrtError::BadInitialSolution { index, source })?;
        let mut cur = 0;
        for chunk in moves.chunks(self.params.rad) {
            let node = &self.tree.nodes[cur];
            let steps = replay(&node.config, node.robot, chunk, self.map)
                .map_err(|(index, source)| RrtError::BadInitialSolution { index, source })?;
            let cand = Candidate {
                parent: cur,
                config: steps.last().expect("nonempty chunk").after.clone(),
                edge_cost: steps.iter().map(|s| s.dropoff.travel()).sum(),
                moves: steps.into_iter().map(|s| s.dropoff).collect(),
            };
            cur = match insert_or_update(&mut self.tree, cand) {
                InsertOutcome::Inserted(id) | InsertOutcome::Updated(id) | InsertOutcome::Ignored(id) => id,
            };
            self.observe_goal();
        }
        Ok(())
    }

    fn observe_goal(&mut self) {
        let Some(goal) = self.tree.goal_id else {
            return;
        };
        if self.nodes_to_first_solution.is_none() {
            self.nodes_to_first_solution = Some(self.tree.len());
        }
        let cost = self.tree.path_cost(goal);
        if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
            self.best = Some((cost, self.tree.moves_to(goal)));
        }
    }

    fn record_checkpoints(&mut self, before: usize) {
        let every = self.params.checkpoint_every;
        let after = self.tree.len();
        for mark in (before / every + 1)..=(after / every) {
            self.checkpoints.push(Checkpoint {
                nodes: mark * every,
                best_cost: self.best_cost(),
            });
        }
    }

    fn time_up(&self) -> bool {
        self.params
            .time_limit
            .is_some_and(|t| self.started.elapsed() >= Duration::from_secs_f64(t))
    }

    /// True while the loop should keep running.
    pub fn running(&self) -> bool {
        if self.tree.len() >= self.params.max_nodes || self.iterations >= self.params.iteration_cap() {
            return false;
        }
        if let (Some(t), Some(b)) = (self.params.cost_threshold, self.best_cost()) {
            if b <= t {
                return false;
            }
        }
        if self.tree.nodes[0].config == self.tree.goal {
            return false;
        }
        !self.time_up()
    }

    /// One sample / nearest / extend / insert / rewire round.
    pub fn iterate(&mut self) -> Result<(), RrtError> {
        self.iterations += 1;
        let before = self.tree.len();
        let bias = dynamic_bias(&self.tree, &self.params);
        let roll = F::from(self.rng.gen::<f64>()).unwrap();
        let goal = self.tree.goal.clone();
        let n = goal.len();

        let mut target = None;
        if roll < bias {
            if let Ok(id) = nearest_node(&self.tree, &goal, true) {
                self.tree.nodes[id].extended_toward_goal = true;
                target = Some((goal, id));
            }
        }
        let (q, from) = match target {
            Some(t) => t,
            None => {
                let q = sample_random_config_in(self.map, Some(&self.region), n, &mut self.rng)?;
                let id = nearest_node(&self.tree, &q, false)?;
                (q, id)
            }
        };

        let cand = match extend(&self.tree, from, &q, self.map, self.params.rad, self.planner) {
            Ok(c) => c,
            Err(RrtError::NoProgress) => return Ok(()),
            Err(e) => return Err(e),
        };
        match insert_or_update(&mut self.tree, cand) {
            InsertOutcome::Inserted(id) => {
                self.rewires += rewire(&mut self.tree, id, self.map, self.params.rad, self.planner);
            }
            InsertOutcome::Updated(_) | InsertOutcome::Ignored(_) => {}
        }
        self.observe_goal();
        self.record_checkpoints(before);
        Ok(())
    }

    pub fn finish(self) -> RrtOutcome {
        let timed_out = self.time_up();
        let start = &self.tree.nodes[0].config;
        let (steps, costs) = match &self.best {
            Some((cost, moves)) => {
                let steps = replay(start, self.params.robot, moves, self.map).expect("tree paths replay");
                let costs = sequence_costs(&steps).expect("replayed chain");
                debug_assert_eq!(costs.total, *cost);
                (steps, Some(costs))
            }
            None => (Vec::new(), None),
        };
        let mut checkpoints = self.checkpoints;
        if checkpoints.last().is_none_or(|c| c.nodes != self.tree.len()) {
            checkpoints.push(Checkpoint {
                nodes: self.tree.len(),
                best_cost: self.best.as_ref().map(|b| b.0),
            });
        }
        let final_path_cost = self.tree.goal_id.map(|g| {
            let moves = self.tree.moves_to(g);
            let steps = replay(start, self.params.robot, &moves, self.map).expect("tree paths replay");
            sequence_costs(&steps).expect("replayed chain").total
        });
        RrtOutcome {
            steps,
            costs,
            tree_goal_cost: self.tree.goal_id.map(|g| self.tree.nodes[g].cost_from_root),
            final_path_cost,
            nodes_created: self.tree.len(),
            nodes_to_first_solution: self.nodes_to_first_solution,
            iterations: self.iterations,
            rewires: self.rewires,
            checkpoints,
            timed_out,
        }
    }
}

/// Runs RRT* until `max_nodes` nodes exist, the cost threshold is met, or a
/// time or iteration limit expires.
pub fn plan<F: Float, P: LocalPlanner + ?Sized>(
    start: &Configuration,
    goal: &Configuration,
    map: &GridMap,
    params: PlannerParams<F>,
    planner: &P,
    initial_solution: Option<&[Dropoff]>,
) -> Result<RrtOutcome, RrtError> {
    let mut rrt = Rrt::new(start, goal, map, params, planner)?;
    if let Some(moves) = initial_solution {
        rrt.seed_solution(moves)?;
    }
    while rrt.running() {
        rrt.iterate()?;
    }
    Ok(rrt.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::LocalPlannerKind;

    fn config(v: &[(i32, i32)]) -> Configuration {
        Configuration::from_tiles(v.iter().map(|&p| Cell::from(p))).unwrap()
    }

    fn row(x0: i32, y: i32, n: i32) -> Configuration {
        Configuration::from_tiles((x0..x0 + n).map(|x| Cell::new(x, y))).unwrap()
    }

    #[test]
    fn heuristic_hand_values() {
        let a = row(0, 0, 15);
        assert_eq!(heuristic::<f64>(&a, &a), 160.0);
        let h: f64 = heuristic_parts(0, (0.0, 0.0), (3.0, 4.0));
        assert!((h - 0.2).abs() < 1e-12);
        let h: f64 = heuristic_parts(3, (0.0, 0.0), (0.05, 0.0));
        assert!((h - 40.0).abs() < 1e-12);
    }

    #[test]
    fn bias_hand_values() {
        assert_eq!(bias_from_overlap(0.1, 0.75, 0.0, 15), 0.1);
        assert!((bias_from_overlap(0.1f64, 0.75, 15.0, 15) - 0.75).abs() < 1e-12);
        assert!((bias_from_overlap(0.1f64, 0.75, 4.0, 10) - 0.36).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        let mut p = PlannerParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.bias_base = 0.8;
        assert!(p.validate().is_err());
        let p = PlannerParams::<f64> {
            rad: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = PlannerParams::<f64> {
            max_nodes: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn cell_index_matches_merge_overlap() {
        let map = GridMap::empty(67, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let goal = sample_random_config(&map, 9, &mut rng).unwrap();
        let mut tree: Tree<f64> = Tree::new(goal.clone(), RobotState::unplaced(), goal).with_cell_index(&map);
        let mut configs = vec![tree.nodes[0].config.clone()];
        for _ in 0..60 {
            let c = sample_random_config(&map, 9, &mut rng).unwrap();
            if tree.find(&c).is_none() {
                tree.push(c.clone(), Some(0), Vec::new(), 0, 0, RobotState::unplaced());
                configs.push(c);
            }
        }
        for q in &configs {
            let probe = tree.probe(q);
            for (id, c) in configs.iter().enumerate() {
                assert_eq!(tree.overlap_with(id, &probe), overlap(c, q));
            }
        }
    }

    #[test]
    fn nearest_prefers_identical_and_overlapping() {
        let g = row(0, 0, 5);
        let mut tree: Tree<f64> = Tree::new(row(10, 5, 5), RobotState::unplaced(), g.clone());
        tree.push(row(2, 0, 5), Some(0), vec![], 0, 0, RobotState::unplaced());
        assert_eq!(nearest_node(&tree, &g, false).unwrap(), 1);
        tree.push(g.clone(), Some(0), vec![], 0, 0, RobotState::unplaced());
        assert_eq!(nearest_node(&tree, &g, false).unwrap(), 2);
        for n in &mut tree.nodes {
            n.extended_toward_goal = true;
        }
        assert_eq!(nearest_node(&tree, &g, true), Err(RrtError::NoEligibleNode));
    }

    #[test]
    fn extend_stops_at_target_or_rad() {
        let map = GridMap::empty(10, 3).unwrap();
        let s = row(0, 1, 3);
        let tree: Tree<f64> = Tree::new(s.clone(), RobotState::unplaced(), s.clone());
        assert_eq!(
            extend(&tree, 0, &s, &map, 3, &LocalPlannerKind::Glc),
            Err(RrtError::NoProgress)
        );
        let q = row(2, 1, 3);
        let cand = extend(&tree, 0, &q, &map, 3, &LocalPlannerKind::Glc).unwrap();
        assert_eq!(cand.config, q);
        assert_eq!(cand.moves.len(), 2);
        let far = row(6, 1, 3);
        let cand = extend(&tree, 0, &far, &map, 3, &LocalPlannerKind::Glc).unwrap();
        assert_eq!(cand.moves.len(), 3);
    }

    #[test]
    fn insert_update_ignore() {
        let map = GridMap::empty(6, 3).unwrap();
        let s = row(0, 1, 2);
        let mut tree: Tree<f64> = Tree::new(s.clone(), RobotState::at(Cell::new(1, 1)), row(3, 1, 2));
        let direct = Candidate {
            parent: 0,
            config: row(1, 1, 2),
            moves: vec![Dropoff {
                source: Cell::new(0, 1),
                target: Cell::new(2, 1),
                pickup_dist: 1,
                dropoff_dist: 2,
            }],
            edge_cost: 3,
        };
        let id = match insert_or_update(&mut tree, direct.clone()) {
            InsertOutcome::Inserted(id) => id,
            other => panic!("{other:?}"),
        };
        assert_eq!(
            insert_or_update(
                &mut tree,
                Candidate {
                    edge_cost: 9,
                    ..direct.clone()
                }
            ),
            InsertOutcome::Ignored(id)
        );
        // pretend the stored route was expensive, then offer the cheap one again
        tree.nodes[id].cost_from_root = 50;
        assert_eq!(insert_or_update(&mut tree, direct), InsertOutcome::Updated(id));
        assert_eq!(tree.nodes[id].cost_from_root, 3);
        assert_eq!(tree.check(&map), Ok(0));
    }

    #[test]
    fn first_child_has_nothing_to_rewire() {
        let map = GridMap::empty(8, 3).unwrap();
        let mut tree: Tree<f64> = Tree::new(row(0, 1, 3), RobotState::unplaced(), row(4, 1, 3));
        let cand = extend(&tree, 0, &row(4, 1, 3), &map, 1, &LocalPlannerKind::Glc).unwrap();
        let InsertOutcome::Inserted(id) = insert_or_update(&mut tree, cand) else {
            panic!()
        };
        assert_eq!(rewire(&mut tree, id, &map, 1, &LocalPlannerKind::Glc), 0);
    }

    #[test]
    fn sampler_respects_corridor() {
        // 1-wide corridor of length 8 inside obstacles
        let map = GridMap::new(8, 3, (0..8).flat_map(|x| [Cell::new(x, 0), Cell::new(x, 2)])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..500 {
            let c = sample_random_config(&map, 3, &mut rng).unwrap();
            assert!(c.tiles().iter().all(|t| t.y == 1));
            seen.insert(c);
        }
        assert_eq!(seen.len(), 8 - 3 + 1);
        assert_eq!(sample_random_config(&map, 9, &mut rng), Err(RrtError::NoRoom(9)));
    }

    #[test]
    fn trivial_plan() {
        let map = GridMap::empty(4, 4).unwrap();
        let s = config(&[(0, 0), (1, 0)]);
        let out = plan(
            &s,
            &s,
            &map,
            PlannerParams::<f64>::default(),
            &LocalPlannerKind::Glc,
            None,
        )
        .unwrap();
        assert!(out.solved());
        assert!(out.steps.is_empty());
        assert_eq!(out.nodes_created, 1);
    }
}
