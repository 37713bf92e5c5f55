use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grid::Cell;
use crate::mapfile::Instance;
use crate::planner::{
    glc_solve, mwpm_expand_solve, sequence_costs, Dropoff, LocalPlannerKind, PlanError, PlanStep, RobotState,
};
use crate::rrt::{plan, Checkpoint, PlannerParams, RrtError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerId {
    Glc,
    MwpmExpand,
    RrtGlc,
    RrtMwpm,
}

impl PlannerId {
    pub const ALL: [PlannerId; 4] = [
        PlannerId::RrtGlc,
        PlannerId::RrtMwpm,
        PlannerId::Glc,
        PlannerId::MwpmExpand,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerId::Glc => "glc",
            PlannerId::MwpmExpand => "mwpm-expand",
            PlannerId::RrtGlc => "rrt-glc",
            PlannerId::RrtMwpm => "rrt-mwpm",
        }
    }

    pub fn is_rrt(self) -> bool {
        matches!(self, PlannerId::RrtGlc | PlannerId::RrtMwpm)
    }

    pub fn local(self) -> LocalPlannerKind {
        match self {
            PlannerId::Glc | PlannerId::RrtGlc => LocalPlannerKind::Glc,
            PlannerId::MwpmExpand | PlannerId::RrtMwpm => LocalPlannerKind::MwpmExpand,
        }
    }
}

impl fmt::Display for PlannerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown planner `{s}` (expected glc, mwpm-expand, rrt-glc or rrt-mwpm)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    Stuck,
    NotFound,
    Infeasible,
}

impl Status {
    /// Process exit code for `solve`.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Solved => 0,
            Status::Stuck => 2,
            Status::NotFound => 3,
            Status::Infeasible => 4,
        }
    }
}

pub const EXIT_PARSE_ERROR: i32 = 5;

/// Planner settings shared by all planner ids; the tree fields are ignored
/// by the greedy planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub bias_base: f64,
    pub bias_max: f64,
    pub rad: usize,
    pub max_nodes: usize,
    pub cost_threshold: Option<u64>,
    /// Seconds of wall time per run.
    pub time_limit: Option<f64>,
    pub checkpoint_every: usize,
    /// Seed the tree with the cheaper of the GLC and MWPMexpand solutions.
    pub init_solution: bool,
    pub step_budget: Option<usize>,
}

impl Default for RunParams {
    fn default() -> Self {
        let p = PlannerParams::<f64>::default();
        RunParams {
            bias_base: p.bias_base,
            bias_max: p.bias_max,
            rad: p.rad,
            max_nodes: p.max_nodes,
            cost_threshold: None,
            time_limit: None,
            checkpoint_every: p.checkpoint_every,
            init_solution: false,
            step_budget: None,
        }
    }
}

impl RunParams {
    pub fn planner_params(&self, seed: u64, robot: RobotState) -> PlannerParams<f64> {
        PlannerParams {
            bias_base: self.bias_base,
            bias_max: self.bias_max,
            rad: self.rad,
            max_nodes: self.max_nodes,
            seed,
            cost_threshold: self.cost_threshold,
            time_limit: self.time_limit,
            max_iterations: None,
            checkpoint_every: self.checkpoint_every,
            robot,
        }
    }
}

/// The solution injected into a seeded tree run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialSolution {
    pub planner: PlannerId,
    pub total_cost: u64,
}

/// One planner execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub planner: PlannerId,
    pub params: RunParams,
    pub seed: u64,
    pub robot_start: Option<Cell>,
    pub status: Status,
    pub sequence: Vec<Dropoff>,
    pub carry_time: u64,
    pub empty_travel_time: u64,
    pub total_cost: u64,
    pub nodes_created: usize,
    pub nodes_to_first_solution: Option<usize>,
    /// Stored cost-from-root of the goal node at the end of the run.
    pub tree_goal_cost: Option<u64>,
    /// Recomputed cost of the goal node's final tree path.
    pub final_path_cost: Option<u64>,
    pub checkpoints: Vec<Checkpoint>,
    pub initial: Option<InitialSolution>,
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl RunRecord {
    fn blank(label: &str, planner: PlannerId, params: &RunParams, seed: u64, robot: RobotState) -> Self {
        RunRecord {
            label: label.to_string(),
            planner,
            params: *params,
            seed,
            robot_start: robot.position,
            status: Status::NotFound,
            sequence: Vec::new(),
            carry_time: 0,
            empty_travel_time: 0,
            total_cost: 0,
            nodes_created: 0,
            nodes_to_first_solution: None,
            tree_goal_cost: None,
            final_path_cost: None,
            checkpoints: Vec::new(),
            initial: None,
            message: None,
            wall_time: None,
        }
    }

    pub(crate) fn failed(
        label: &str,
        planner: PlannerId,
        params: &RunParams,
        seed: u64,
        status: Status,
        message: &str,
    ) -> Self {
        let mut rec = RunRecord::blank(label, planner, params, seed, RobotState::unplaced());
        rec.status = status;
        rec.message = Some(message.to_string());
        rec
    }

    fn set_solution(&mut self, steps: &[PlanStep]) {
        let costs = sequence_costs(steps).expect("planner output is a chain");
        self.status = Status::Solved;
        self.sequence = steps.iter().map(|s| s.dropoff).collect();
        self.carry_time = costs.carry_time;
        self.empty_travel_time = costs.empty_travel_time;
        self.total_cost = costs.total;
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

fn plan_status(e: &PlanError) -> Status {
    match e {
        PlanError::Stuck { .. } | PlanError::NoMoveFound => Status::Stuck,
        PlanError::BudgetExceeded { .. } => Status::NotFound,
        _ => Status::Infeasible,
    }
}

fn rrt_status(e: &RrtError) -> Status {
    match e {
        RrtError::Plan(p) => plan_status(p),
        RrtError::NoEligibleNode | RrtError::NoProgress => Status::NotFound,
        _ => Status::Infeasible,
    }
}

fn greedy(
    instance: &Instance,
    kind: LocalPlannerKind,
    robot: RobotState,
    budget: Option<usize>,
) -> Result<Vec<PlanStep>, PlanError> {
    let Instance { map, start, goal } = instance;
    match kind {
        LocalPlannerKind::Glc => glc_solve(start, goal, map, robot, budget),
        LocalPlannerKind::MwpmExpand => mwpm_expand_solve(start, goal, map, robot, budget),
    }
}

/// Cheaper of the two greedy solutions; GLC wins ties.
pub fn best_greedy_solution(
    instance: &Instance,
    robot: RobotState,
    budget: Option<usize>,
) -> Option<(PlannerId, Vec<PlanStep>, u64)> {
    [
        (PlannerId::Glc, LocalPlannerKind::Glc),
        (PlannerId::MwpmExpand, LocalPlannerKind::MwpmExpand),
    ]
    .into_iter()
    .filter_map(|(id, kind)| {
        let steps = greedy(instance, kind, robot, budget).ok()?;
        let cost = sequence_costs(&steps).ok()?.total;
        Some((id, steps, cost))
    })
    .min_by_key(|&(_, _, cost)| cost)
}

/// Runs one planner on one instance.
pub fn run_planner(
    instance: &Instance,
    label: &str,
    planner: PlannerId,
    params: &RunParams,
    seed: u64,
    robot: RobotState,
    timing: bool,
) -> RunRecord {
    let started = Instant::now();
    let mut rec = RunRecord::blank(label, planner, params, seed, robot);
    if instance.start == instance.goal {
        rec.status = Status::Solved;
    } else if !planner.is_rrt() {
        match greedy(instance, planner.local(), robot, params.step_budget) {
            Ok(steps) => rec.set_solution(&steps),
            Err(e) => {
                rec.status = plan_status(&e);
                rec.message = Some(e.to_string());
            }
        }
    } else {
        run_tree(instance, planner, params, seed, robot, &mut rec);
    }
    if timing {
        rec.wall_time = Some(started.elapsed().as_secs_f64());
    }
    rec
}

fn run_tree(
    instance: &Instance,
    planner: PlannerId,
    params: &RunParams,
    seed: u64,
    robot: RobotState,
    rec: &mut RunRecord,
) {
    let initial = if params.init_solution {
        best_greedy_solution(instance, robot, params.step_budget)
    } else {
        None
    };
    rec.initial = initial.as_ref().map(|(id, _, cost)| InitialSolution {
        planner: *id,
        total_cost: *cost,
    });
    let moves: Option<Vec<Dropoff>> = initial.map(|(_, steps, _)| steps.into_iter().map(|s| s.dropoff).collect());
    let kind = planner.local();
    let outcome = plan(
        &instance.start,
        &instance.goal,
        &instance.map,
        params.planner_params(seed, robot),
        &kind,
        moves.as_deref(),
    );
    match outcome {
        Ok(out) => {
            rec.nodes_created = out.nodes_created;
            rec.nodes_to_first_solution = out.nodes_to_first_solution;
            rec.tree_goal_cost = out.tree_goal_cost;
            rec.final_path_cost = out.final_path_cost;
            rec.checkpoints = out.checkpoints.clone();
            if out.solved() {
                rec.set_solution(&out.steps);
            } else {
                rec.status = Status::NotFound;
                if out.timed_out {
                    rec.message = Some("time limit exceeded".into());
                }
            }
        }
        Err(e) => {
            rec.status = rrt_status(&e);
            rec.message = Some(e.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapfile::MapFile;

    fn inst(text: &str) -> Instance {
        MapFile::parse(text).unwrap().instance().unwrap()
    }

    #[test]
    fn planner_ids_round_trip() {
        for p in PlannerId::ALL {
            assert_eq!(p.as_str().parse::<PlannerId>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.as_str()));
        }
        assert!("rrt".parse::<PlannerId>().is_err());
    }

    #[test]
    fn trivial_instance_is_solved_empty() {
        let i = inst("3 1\nBB.\n");
        for p in PlannerId::ALL {
            let r = run_planner(&i, "t", p, &RunParams::default(), 1, RobotState::unplaced(), false);
            assert_eq!(r.status, Status::Solved);
            assert!(r.sequence.is_empty());
            assert_eq!(r.total_cost, 0);
        }
    }

    #[test]
    fn stuck_instance_exits_with_stuck_code() {
        let i = inst("3 2\nBGB\nBSB\n");
        let r = run_planner(
            &i,
            "stuck",
            PlannerId::MwpmExpand,
            &RunParams::default(),
            0,
            RobotState::unplaced(),
            false,
        );
        assert_eq!(r.status, Status::Stuck);
        assert_eq!(r.status.exit_code(), 2);
        let r = run_planner(
            &i,
            "stuck",
            PlannerId::Glc,
            &RunParams::default(),
            0,
            RobotState::unplaced(),
            false,
        );
        assert_eq!(r.status, Status::Solved);
        assert_eq!(r.total_cost, r.carry_time + r.empty_travel_time);
    }

    #[test]
    fn separated_instance_is_infeasible() {
        let i = inst("5 1\nSS#GG\n");
        for p in PlannerId::ALL {
            let r = run_planner(&i, "sep", p, &RunParams::default(), 0, RobotState::unplaced(), false);
            assert_eq!(r.status, Status::Infeasible, "{p}");
        }
    }

    #[test]
    fn seeded_tree_reports_initial_cost() {
        let i = inst("6 3\nSSS...\n......\n...GGG\n");
        let params = RunParams {
            init_solution: true,
            max_nodes: 50,
            ..RunParams::default()
        };
        let r = run_planner(
            &i,
            "seeded",
            PlannerId::RrtGlc,
            &params,
            3,
            RobotState::unplaced(),
            false,
        );
        assert_eq!(r.status, Status::Solved);
        let init = r.initial.unwrap();
        assert!(r.total_cost <= init.total_cost);
    }
}
