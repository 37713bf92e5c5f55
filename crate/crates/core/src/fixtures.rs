//! Instance generators: the lower-bound constructions, seeded random maps
//! and the bundled benchmark maps.
//!
//! Layouts:
//!
//! * detour: two horizontal rows of `n` tiles at `y = 1` and `y = 3` with a
//!   `k`-cell obstacle wall centered on `y = 2`, two free columns of margin
//!   on each side.
//! * c-shape: the outline of a `W × H` rectangle (`W + H = (n + 6) / 2`)
//!   with a two-cell gap in the middle of its right side. The goal moves the
//!   upper terminal tile into the gap cell next to the lower terminal.
//! * cc-shape: two c-shapes mirrored about a shared spine column, with the
//!   same terminal move applied on both open sides.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Cell, Configuration, GridMap};
use crate::mapfile::{Instance, MapFile};
use crate::rrt::sample_random_config;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("{family} needs {requirement}, got n = {n}")]
    TooSmall {
        family: &'static str,
        n: usize,
        requirement: &'static str,
    },
    #[error("no feasible instance after {attempts} attempts")]
    Infeasible { attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no bundled map {0}")]
    UnknownMap(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSpec {
    pub label: String,
    pub map: GridMap,
    pub start: Configuration,
    pub goal: Configuration,
}

impl InstanceSpec {
    pub fn instance(&self) -> Instance {
        Instance {
            map: self.map.clone(),
            start: self.start.clone(),
            goal: self.goal.clone(),
        }
    }

    pub fn to_map_file(&self) -> MapFile {
        MapFile::from_instance(&self.instance())
    }
}

fn build(label: String, map: GridMap, start: Vec<Cell>, goal: Vec<Cell>) -> InstanceSpec {
    let start = Configuration::on_map(start, &map).expect("generator produced an invalid start");
    let goal = Configuration::on_map(goal, &map).expect("generator produced an invalid goal");
    InstanceSpec {
        label,
        map,
        start,
        goal,
    }
}

/// Parallel rows two units apart with a wall of length `k` between them.
pub fn gen_obstacle_detour(n: usize, k: usize) -> Result<InstanceSpec, FixtureError> {
    if n == 0 {
        return Err(FixtureError::TooSmall {
            family: "detour",
            n,
            requirement: "n >= 1",
        });
    }
    let (n, k) = (n as i32, k as i32);
    let width = n.max(k) + 4;
    let x0 = (width - n) / 2;
    let wall0 = (width - k) / 2;
    let map = GridMap::new(width, 5, (wall0..wall0 + k).map(|x| Cell::new(x, 2))).unwrap();
    let start = (x0..x0 + n).map(|x| Cell::new(x, 1)).collect();
    let goal = (x0..x0 + n).map(|x| Cell::new(x, 3)).collect();
    Ok(build(format!("detour-n{n}-k{k}"), map, start, goal))
}

/// Outline cells of a `w × h` rectangle at `(ox, oy)`.
fn outline(ox: i32, oy: i32, w: i32, h: i32) -> Vec<Cell> {
    let mut cells = Vec::new();
    for y in oy..oy + h {
        for x in ox..ox + w {
            if y == oy || y == oy + h - 1 || x == ox || x == ox + w - 1 {
                cells.push(Cell::new(x, y));
            }
        }
    }
    cells
}

/// Rows of the two-cell gap in a side column of height `h` starting at `oy`.
fn gap_rows(oy: i32, h: i32) -> (i32, i32) {
    (oy + h / 2 - 1, oy + h / 2)
}

/// A c-shaped start whose goal moves one tile across the terminal gap.
pub fn gen_c_shape(n: usize) -> Result<InstanceSpec, FixtureError> {
    const REQ: &str = "an even n >= 16";
    if n < 16 || n % 2 == 1 {
        return Err(FixtureError::TooSmall {
            family: "c-shape",
            n,
            requirement: REQ,
        });
    }
    let half = (n as i32 + 6) / 2;
    let (w, h) = (half / 2, half - half / 2);
    let (ox, oy) = (1, 1);
    let right = ox + w - 1;
    let (gap_hi, gap_lo) = gap_rows(oy, h);
    let start: Vec<Cell> = outline(ox, oy, w, h)
        .into_iter()
        .filter(|c| !(c.x == right && (c.y == gap_hi || c.y == gap_lo)))
        .collect();
    debug_assert_eq!(start.len(), n);
    let upper_terminal = Cell::new(right, gap_hi - 1);
    let mut goal: Vec<Cell> = start.iter().copied().filter(|&c| c != upper_terminal).collect();
    goal.push(Cell::new(right, gap_lo));
    let map = GridMap::empty(w + 2, h + 2).unwrap();
    Ok(build(format!("c-shape-n{n}"), map, start, goal))
}

/// Two mirrored c-shapes sharing their spine; the goal moves a tile across
/// the gap on both open sides.
pub fn gen_cc_shape(n: usize) -> Result<InstanceSpec, FixtureError> {
    const REQ: &str = "n = 4w + 3h - 12 with w >= 3, h >= 6";
    // half-width w (spine included), height h
    let n_i = n as i32;
    let (w, h) = (3..=n_i)
        .filter_map(|w| {
            let rest = n_i + 12 - 4 * w;
            (rest >= 18 && rest % 3 == 0).then_some((w, rest / 3))
        })
        .min_by_key(|&(w, h)| ((w - h).abs(), h))
        .ok_or(FixtureError::TooSmall {
            family: "cc-shape",
            n,
            requirement: REQ,
        })?;
    let total_w = 2 * w - 1;
    let (ox, oy) = (1, 1);
    let spine = ox + w - 1;
    let (left, right) = (ox, ox + total_w - 1);
    let (gap_hi, gap_lo) = gap_rows(oy, h);
    let mut start: Vec<Cell> = outline(ox, oy, total_w, h)
        .into_iter()
        .filter(|c| !((c.x == left || c.x == right) && (c.y == gap_hi || c.y == gap_lo)))
        .collect();
    start.extend((oy + 1..oy + h - 1).map(|y| Cell::new(spine, y)));
    debug_assert_eq!(start.len(), n);
    let mut goal: Vec<Cell> = start
        .iter()
        .copied()
        .filter(|&c| !((c.x == left || c.x == right) && c.y == gap_hi - 1))
        .collect();
    goal.push(Cell::new(left, gap_lo));
    goal.push(Cell::new(right, gap_lo));
    let map = GridMap::empty(total_w + 2, h + 2).unwrap();
    Ok(build(format!("cc-shape-n{n}"), map, start, goal))
}

/// Random start and goal polyominoes joined by a free corridor, then
/// obstacles placed uniformly over the remaining cells until `density` of
/// the whole grid is blocked.
pub fn gen_random_map(
    width: i32,
    height: i32,
    n: usize,
    density: f64,
    seed: u64,
) -> Result<InstanceSpec, FixtureError> {
    const ATTEMPTS: usize = 200;
    if !(0.0..1.0).contains(&density) {
        return Err(FixtureError::InvalidParam(format!("density {density} not in [0, 1)")));
    }
    if n == 0 {
        return Err(FixtureError::InvalidParam("n must be positive".into()));
    }
    let empty = GridMap::empty(width, height).map_err(|e| FixtureError::InvalidParam(e.to_string()))?;
    let area = empty.area();
    let blocked = (density * area as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let (Ok(start), Ok(goal)) = (
            sample_random_config(&empty, n, &mut rng),
            sample_random_config(&empty, n, &mut rng),
        ) else {
            return Err(FixtureError::Infeasible { attempts: 0 });
        };
        let mut reserved = vec![false; area];
        for &c in start.tiles().iter().chain(goal.tiles()) {
            reserved[empty.index(c).unwrap()] = true;
        }
        for c in corridor(&start, &goal, &mut rng) {
            reserved[empty.index(c).unwrap()] = true;
        }
        let open: Vec<usize> = (0..area).filter(|&i| !reserved[i]).collect();
        if open.len() < blocked {
            continue;
        }
        let obstacles = sample(&mut rng, open.len(), blocked)
            .into_iter()
            .map(|k| empty.cell_at(open[k]));
        let map = GridMap::new(width, height, obstacles).unwrap();
        debug_assert!(map.same_free_component(&[start.tiles()[0], goal.tiles()[0]]));
        let label = format!("random-{width}x{height}-n{n}-d{density:.2}-s{seed}");
        return Ok(InstanceSpec {
            label,
            map,
            start,
            goal,
        });
    }
    Err(FixtureError::Infeasible { attempts: ATTEMPTS })
}

/// An L-shaped lattice path between the closest start/goal tile pair.
fn corridor<R: Rng>(start: &Configuration, goal: &Configuration, rng: &mut R) -> Vec<Cell> {
    let (a, b) = start
        .tiles()
        .iter()
        .flat_map(|&a| goal.tiles().iter().map(move |&b| (a, b)))
        .min_by_key(|&(a, b)| (a.manhattan(b), a, b))
        .expect("nonempty configurations");
    let horizontal_first = rng.gen_bool(0.5);
    let corner = if horizontal_first {
        Cell::new(b.x, a.y)
    } else {
        Cell::new(a.x, b.y)
    };
    let mut path = Vec::new();
    for (from, to) in [(a, corner), (corner, b)] {
        let (dx, dy) = ((to.x - from.x).signum(), (to.y - from.y).signum());
        let mut c = from;
        path.push(c);
        while c != to {
            c = Cell::new(c.x + dx, c.y + dy);
            path.push(c);
        }
    }
    path
}

const BUNDLED: [&str; 5] = [
    include_str!("../maps/map1.txt"),
    include_str!("../maps/map2.txt"),
    include_str!("../maps/map3.txt"),
    include_str!("../maps/map4.txt"),
    include_str!("../maps/map5.txt"),
];

/// The five bundled benchmark maps, numbered from 1.
pub fn bundled_map(index: usize) -> Result<InstanceSpec, FixtureError> {
    let text = index
        .checked_sub(1)
        .and_then(|i| BUNDLED.get(i))
        .ok_or(FixtureError::UnknownMap(index))?;
    let instance = MapFile::parse(text)
        .expect("bundled maps parse")
        .instance()
        .expect("bundled maps are valid");
    Ok(InstanceSpec {
        label: format!("map{index}"),
        map: instance.map,
        start: instance.start,
        goal: instance.goal,
    })
}

pub fn bundled_maps() -> Vec<InstanceSpec> {
    (1..=BUNDLED.len()).map(|i| bundled_map(i).unwrap()).collect()
}
