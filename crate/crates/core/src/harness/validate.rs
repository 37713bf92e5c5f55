//! Replay checker for recorded sequences. It keeps its own set-based
//! connectivity and BFS so that planner bugs in the grid module cannot hide
//! behind the same code.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::grid::Cell;
use crate::mapfile::MapFile;
use crate::planner::Dropoff;

use super::run::{RunRecord, Status};

type P = (i32, i32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// The source is not a tile, or removing it disconnects the rest.
    IllegalPickup {
        cell: Cell,
    },
    /// The target is occupied, blocked, out of bounds, or not adjacent to
    /// the remaining tiles.
    IllegalPlacement {
        cell: Cell,
    },
    /// The robot cannot walk to the source over the tiles.
    Unreachable {
        cell: Cell,
    },
    PickupDistance {
        recorded: u32,
        expected: u32,
    },
    DropoffDistance {
        recorded: u32,
        expected: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IllegalPickup { cell } => write!(f, "IllegalPickup at {cell}"),
            Violation::IllegalPlacement { cell } => write!(f, "IllegalPlacement at {cell}"),
            Violation::Unreachable { cell } => write!(f, "robot cannot reach {cell}"),
            Violation::PickupDistance { recorded, expected } => {
                write!(f, "d_P mismatch: recorded {recorded}, expected {expected}")
            }
            Violation::DropoffDistance { recorded, expected } => {
                write!(f, "d_D mismatch: recorded {recorded}, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepCheck {
    pub index: usize,
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub expected_pickup: Option<u32>,
    pub expected_dropoff: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub steps: Vec<StepCheck>,
    /// Index of the first step with a violation.
    pub first_failure: Option<usize>,
    /// Steps after a structural violation are not checked.
    pub unchecked: usize,
    pub reaches_goal: bool,
    pub carry_time: u64,
    pub empty_travel_time: u64,
    pub total_cost: u64,
    /// Differences between the record's totals and the recomputed ones.
    pub totals_mismatch: Vec<String>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let verdict = if s.ok {
                "ok".to_string()
            } else {
                s.violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            };
            out += &format!("step {}: {}\n", s.index, verdict);
        }
        if self.unchecked > 0 {
            out += &format!("{} later steps not checked\n", self.unchecked);
        }
        out += &format!(
            "carry {} empty {} total {}\nreaches goal: {}\n",
            self.carry_time, self.empty_travel_time, self.total_cost, self.reaches_goal
        );
        for m in &self.totals_mismatch {
            out += &format!("mismatch: {m}\n");
        }
        out += if self.passed { "PASS\n" } else { "FAIL\n" };
        if let Some(i) = self.first_failure {
            out += &format!("first offending step: {i}\n");
        }
        out
    }
}

fn nbrs((x, y): P) -> [P; 4] {
    [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
}

fn bfs(set: &HashSet<P>, from: P, to: P) -> Option<u32> {
    if !set.contains(&from) {
        return None;
    }
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([(from, 0u32)]);
    while let Some((p, d)) = queue.pop_front() {
        if p == to {
            return Some(d);
        }
        for q in nbrs(p) {
            if set.contains(&q) && seen.insert(q) {
                queue.push_back((q, d + 1));
            }
        }
    }
    None
}

fn connected(set: &HashSet<P>) -> bool {
    let Some(&first) = set.iter().next() else {
        return true;
    };
    let mut seen = HashSet::from([first]);
    let mut stack = vec![first];
    while let Some(p) = stack.pop() {
        for q in nbrs(p) {
            if set.contains(&q) && seen.insert(q) {
                stack.push(q);
            }
        }
    }
    seen.len() == set.len()
}

fn p(c: Cell) -> P {
    (c.x, c.y)
}

/// Replays `sequence` from the map file's start cells.
pub fn validate_sequence(mf: &MapFile, robot_start: Option<Cell>, sequence: &[Dropoff]) -> ValidationReport {
    let (w, h) = (mf.map.width(), mf.map.height());
    let blocked = |q: P| q.0 < 0 || q.1 < 0 || q.0 >= w || q.1 >= h || mf.map.is_obstacle(Cell::new(q.0, q.1));
    let mut tiles: HashSet<P> = mf.start.iter().map(|&c| p(c)).collect();
    let goal: HashSet<P> = mf.goal.iter().map(|&c| p(c)).collect();
    let mut robot = robot_start.map(p);
    let mut steps = Vec::new();
    let mut first_failure = None;
    let (mut carry, mut empty) = (0u64, 0u64);
    let mut halted = false;

    for (i, d) in sequence.iter().enumerate() {
        let (src, dst) = (p(d.source), p(d.target));
        let mut violations = Vec::new();
        let mut rest = tiles.clone();
        let picked = rest.remove(&src);
        if !picked || !connected(&rest) {
            violations.push(Violation::IllegalPickup { cell: d.source });
        }
        if tiles.contains(&dst) || blocked(dst) || !nbrs(dst).iter().any(|q| rest.contains(q)) {
            violations.push(Violation::IllegalPlacement { cell: d.target });
        }
        let expected_pickup = match robot {
            None => Some(0),
            Some(r) => bfs(&tiles, r, src),
        };
        if expected_pickup.is_none() {
            violations.push(Violation::Unreachable { cell: d.source });
        }
        let structural = !violations.is_empty();
        let mut walk = tiles.clone();
        walk.insert(dst);
        let expected_dropoff = if structural { None } else { bfs(&walk, src, dst) };
        if let Some(e) = expected_pickup.filter(|_| !structural) {
            if e != d.pickup_dist {
                violations.push(Violation::PickupDistance {
                    recorded: d.pickup_dist,
                    expected: e,
                });
            }
            empty += u64::from(e);
        }
        if let Some(e) = expected_dropoff {
            if e != d.dropoff_dist {
                violations.push(Violation::DropoffDistance {
                    recorded: d.dropoff_dist,
                    expected: e,
                });
            }
            carry += u64::from(e);
        }
        let ok = violations.is_empty();
        if !ok && first_failure.is_none() {
            first_failure = Some(i);
        }
        steps.push(StepCheck {
            index: i,
            ok,
            violations,
            expected_pickup,
            expected_dropoff,
        });
        if structural {
            halted = true;
            break;
        }
        rest.insert(dst);
        tiles = rest;
        robot = Some(dst);
    }

    let unchecked = sequence.len() - steps.len();
    let reaches_goal = !halted && tiles == goal;
    ValidationReport {
        passed: first_failure.is_none() && reaches_goal,
        steps,
        first_failure,
        unchecked,
        reaches_goal,
        carry_time: carry,
        empty_travel_time: empty,
        total_cost: carry + empty,
        totals_mismatch: Vec::new(),
    }
}

/// Replays a record and compares its totals. Records that are not solved
/// pass when they carry an empty sequence.
pub fn validate_record(mf: &MapFile, record: &RunRecord) -> ValidationReport {
    let mut report = validate_sequence(mf, record.robot_start, &record.sequence);
    if record.status != Status::Solved {
        report.reaches_goal = false;
        report.passed = report.first_failure.is_none() && record.sequence.is_empty();
        return report;
    }
    for (name, recorded, recomputed) in [
        ("carry_time", record.carry_time, report.carry_time),
        ("empty_travel_time", record.empty_travel_time, report.empty_travel_time),
        ("total_cost", record.total_cost, report.total_cost),
    ] {
        if recorded != recomputed {
            report
                .totals_mismatch
                .push(format!("{name}: recorded {recorded}, recomputed {recomputed}"));
        }
    }
    if record.total_cost != record.carry_time + record.empty_travel_time {
        report
            .totals_mismatch
            .push("total_cost != carry_time + empty_travel_time".into());
    }
    report.passed &= report.totals_mismatch.is_empty();
    report
}
