//! Workspace grid, polyomino configurations and the BFS primitives every
//! planner is built on.
//!
//! Adjacency is 4-connectivity throughout. Cells outside the map rectangle
//! behave like obstacles.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("map dimensions must be positive, got {width}x{height}")]
    EmptyMap { width: i32, height: i32 },
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("BFS source {0} lies on an obstacle")]
    SourceOnObstacle(Cell),
    #[error("BFS source {0} is not one of the tiles")]
    SourceNotOnTiles(Cell),
    #[error("configuration has no tiles")]
    EmptyConfiguration,
    #[error("tile {0} listed twice")]
    DuplicateTile(Cell),
    #[error("tile {0} lies on an obstacle")]
    TileOnObstacle(Cell),
    #[error("tiles are not 4-connected")]
    Disconnected,
}

/// A unit cell of the workspace. `x` grows rightward, `y` grows downward.
///
/// Cells order row-major: by `y`, then `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// The four edge-adjacent cells, in row-major order. May leave the map.
    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
        ]
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell::new(x, y)
    }
}

/// Rectangular workspace with obstacle cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: i32,
    height: i32,
    obstacles: Vec<bool>,
}

impl GridMap {
    /// An obstacle-free map.
    pub fn empty(width: i32, height: i32) -> Result<Self, GridError> {
        if width <= 0 || height <= 0 {
            return Err(GridError::EmptyMap { width, height });
        }
        Ok(GridMap {
            width,
            height,
            obstacles: vec![false; (width * height) as usize],
        })
    }

    /// Builds a map from its obstacle cells. Repeated cells are accepted.
    pub fn new<I>(width: i32, height: i32, obstacles: I) -> Result<Self, GridError>
    where
        I: IntoIterator<Item = Cell>,
    {
        let mut map = GridMap::empty(width, height)?;
        for c in obstacles {
            map.set_obstacle(c, true)?;
        }
        Ok(map)
    }

    pub fn set_obstacle(&mut self, c: Cell, obstacle: bool) -> Result<(), GridError> {
        let i = self.index(c).ok_or(GridError::OutOfBounds(c))?;
        self.obstacles[i] = obstacle;
        Ok(())
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn area(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c).then(|| (c.y * self.width + c.x) as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let i = index as i32;
        Cell::new(i % self.width, i / self.width)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.index(c).is_none_or(|i| self.obstacles[i])
    }

    /// In bounds and not an obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_obstacle(c)
    }

    pub fn obstacle_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.obstacles
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacles.iter().filter(|&&o| o).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.area()).map(|i| self.cell_at(i))
    }

    /// Labels the free-space components. Obstacles get `None`; labels are
    /// assigned in row-major order of each component's first cell.
    pub fn free_components(&self) -> Vec<Option<u32>> {
        let mut label = vec![None; self.area()];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..self.area() {
            if self.obstacles[start] || label[start].is_some() {
                continue;
            }
            label[start] = Some(next);
            queue.push_back(self.cell_at(start));
            while let Some(c) = queue.pop_front() {
                for nb in c.neighbors() {
                    if let Some(j) = self.index(nb) {
                        if !self.obstacles[j] && label[j].is_none() {
                            label[j] = Some(next);
                            queue.push_back(nb);
                        }
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// True when every cell of `cells` lies in one free-space component.
    pub fn same_free_component(&self, cells: &[Cell]) -> bool {
        let Some(&first) = cells.first() else {
            return true;
        };
        match bfs_free(self, &[first]) {
            Ok(field) => cells.iter().all(|&c| field.get(c).is_some()),
            Err(_) => false,
        }
    }
}

/// A nonempty, 4-connected set of tiles kept in canonical row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    tiles: Vec<Cell>,
}

impl Configuration {
    /// Validates nonemptiness, uniqueness and connectivity.
    pub fn from_tiles<I>(tiles: I) -> Result<Self, GridError>
    where
        I: IntoIterator<Item = Cell>,
    {
        let mut tiles: Vec<Cell> = tiles.into_iter().collect();
        if tiles.is_empty() {
            return Err(GridError::EmptyConfiguration);
        }
        tiles.sort_unstable();
        if let Some(w) = tiles.windows(2).find(|w| w[0] == w[1]) {
            return Err(GridError::DuplicateTile(w[0]));
        }
        if !is_connected(&tiles) {
            return Err(GridError::Disconnected);
        }
        Ok(Configuration { tiles })
    }

    /// Like [`Configuration::from_tiles`], additionally checking the tiles
    /// against the map.
    pub fn on_map<I>(tiles: I, map: &GridMap) -> Result<Self, GridError>
    where
        I: IntoIterator<Item = Cell>,
    {
        let config = Configuration::from_tiles(tiles)?;
        config.check_on(map)?;
        Ok(config)
    }

    pub fn check_on(&self, map: &GridMap) -> Result<(), GridError> {
        for &t in &self.tiles {
            if !map.in_bounds(t) {
                return Err(GridError::OutOfBounds(t));
            }
            if map.is_obstacle(t) {
                return Err(GridError::TileOnObstacle(t));
            }
        }
        Ok(())
    }

    /// Sorted tiles without any validation. Callers guarantee the invariants.
    pub(crate) fn from_sorted_unchecked(tiles: Vec<Cell>) -> Self {
        debug_assert!(tiles.windows(2).all(|w| w[0] < w[1]));
        Configuration { tiles }
    }

    pub fn tiles(&self) -> &[Cell] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.tiles.binary_search(&c).is_ok()
    }

    /// The tile set with `source` removed and `target` added. No checks.
    pub(crate) fn moved(&self, source: Cell, target: Cell) -> Configuration {
        let mut tiles: Vec<Cell> = self.tiles.iter().copied().filter(|&t| t != source).collect();
        let at = tiles.binary_search(&target).unwrap_or_else(|e| e);
        tiles.insert(at, target);
        Configuration { tiles }
    }

    /// Free cells edge-adjacent to the configuration, row-major.
    pub fn free_neighbors(&self, map: &GridMap) -> Vec<Cell> {
        let mut out: Vec<Cell> = self
            .tiles
            .iter()
            .flat_map(|t| t.neighbors())
            .filter(|&c| map.is_free(c) && !self.contains(c))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// True iff the cells form one 4-connected set. Empty and singleton sets
/// are connected.
pub fn is_connected(tiles: &[Cell]) -> bool {
    if tiles.len() <= 1 {
        return true;
    }
    let index: HashMap<Cell, usize> = tiles.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut seen = vec![false; tiles.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for nb in tiles[i].neighbors() {
            if let Some(&j) = index.get(&nb) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
    }
    count == index.len()
}

/// 4-connected components of an arbitrary cell set. Each component is
/// sorted; components are ordered by their smallest cell.
pub fn components(tiles: &[Cell]) -> Vec<Vec<Cell>> {
    let mut sorted = tiles.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let index: HashMap<Cell, usize> = sorted.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut seen = vec![false; sorted.len()];
    let mut out = Vec::new();
    for start in 0..sorted.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![sorted[start]];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for nb in sorted[i].neighbors() {
                if let Some(&j) = index.get(&nb) {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(nb);
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Articulation points of the tile adjacency graph (iterative Tarjan).
fn cut_vertices(tiles: &[Cell]) -> Vec<bool> {
    let n = tiles.len();
    let index: HashMap<Cell, usize> = tiles.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let adj: Vec<Vec<usize>> = tiles
        .iter()
        .map(|t| t.neighbors().iter().filter_map(|nb| index.get(nb).copied()).collect())
        .collect();

    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_cut = vec![false; n];
    let mut timer = 0;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        let mut root_children = 0;
        // (vertex, parent, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(frame) = stack.last_mut() {
            let (v, parent, pos) = *frame;
            if pos < adj[v].len() {
                frame.2 += 1;
                let w = adj[v][pos];
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    if v == root {
                        root_children += 1;
                    }
                    stack.push((w, v, 0));
                } else if w != parent {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[v]);
                    if parent != root && low[v] >= disc[parent] {
                        is_cut[parent] = true;
                    }
                }
            }
        }
        if root_children > 1 {
            is_cut[root] = true;
        }
    }
    is_cut
}

/// Tiles whose removal leaves the rest connected, in row-major order.
pub fn leaf_tiles(config: &Configuration) -> Vec<Cell> {
    let cut = cut_vertices(config.tiles());
    config
        .tiles()
        .iter()
        .zip(cut)
        .filter(|(_, c)| !c)
        .map(|(&t, _)| t)
        .collect()
}

pub(crate) const UNREACHABLE: u32 = u32::MAX;

/// BFS distances over a rectangular window of the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    origin: Cell,
    width: i32,
    height: i32,
    dist: Vec<u32>,
}

impl DistanceField {
    fn new(origin: Cell, width: i32, height: i32) -> Self {
        DistanceField {
            origin,
            width,
            height,
            dist: vec![UNREACHABLE; (width * height) as usize],
        }
    }

    fn slot(&self, c: Cell) -> Option<usize> {
        let x = c.x - self.origin.x;
        let y = c.y - self.origin.y;
        (x >= 0 && y >= 0 && x < self.width && y < self.height).then(|| (y * self.width + x) as usize)
    }

    /// Distance to `c`, or `None` when unreachable.
    pub fn get(&self, c: Cell) -> Option<u32> {
        self.slot(c).map(|i| self.dist[i]).filter(|&d| d != UNREACHABLE)
    }

    /// Reachable cells with their distances, row-major.
    pub fn reachable(&self) -> impl Iterator<Item = (Cell, u32)> + '_ {
        self.dist
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != UNREACHABLE)
            .map(|(i, &d)| {
                let i = i as i32;
                (
                    Cell::new(self.origin.x + i % self.width, self.origin.y + i / self.width),
                    d,
                )
            })
    }

    fn run<F>(&mut self, sources: &[Cell], passable: F)
    where
        F: Fn(Cell) -> bool,
    {
        let mut queue = VecDeque::new();
        for &s in sources {
            if let Some(i) = self.slot(s) {
                if self.dist[i] == UNREACHABLE {
                    self.dist[i] = 0;
                    queue.push_back(s);
                }
            }
        }
        while let Some(c) = queue.pop_front() {
            let d = self.dist[self.slot(c).unwrap()];
            for nb in c.neighbors() {
                if let Some(j) = self.slot(nb) {
                    if self.dist[j] == UNREACHABLE && passable(nb) {
                        self.dist[j] = d + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
    }
}

/// Multi-source BFS over the obstacle-free cells of the map.
pub fn bfs_free(map: &GridMap, sources: &[Cell]) -> Result<DistanceField, GridError> {
    for &s in sources {
        if !map.in_bounds(s) {
            return Err(GridError::OutOfBounds(s));
        }
        if map.is_obstacle(s) {
            return Err(GridError::SourceOnObstacle(s));
        }
    }
    let mut field = DistanceField::new(Cell::new(0, 0), map.width(), map.height());
    field.run(sources, |c| map.is_free(c));
    Ok(field)
}

/// BFS from `source` restricted to the given tiles.
pub fn bfs_on_tiles(tiles: &[Cell], source: Cell) -> Result<DistanceField, GridError> {
    if !tiles.contains(&source) {
        return Err(GridError::SourceNotOnTiles(source));
    }
    let (mut lo, mut hi) = (source, source);
    for &t in tiles {
        lo = Cell::new(lo.x.min(t.x), lo.y.min(t.y));
        hi = Cell::new(hi.x.max(t.x), hi.y.max(t.y));
    }
    let mut field = DistanceField::new(lo, hi.x - lo.x + 1, hi.y - lo.y + 1);
    let mut member = vec![false; field.dist.len()];
    for &t in tiles {
        member[field.slot(t).unwrap()] = true;
    }
    let probe = field.clone();
    field.run(&[source], |c| probe.slot(c).is_some_and(|i| member[i]));
    Ok(field)
}

/// Number of tiles shared by two configurations.
pub fn overlap(a: &Configuration, b: &Configuration) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    let (ta, tb) = (a.tiles(), b.tiles());
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(&tb[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Shared tiles of two configurations, row-major.
pub fn intersection(a: &Configuration, b: &Configuration) -> Vec<Cell> {
    a.tiles().iter().copied().filter(|&t| b.contains(t)).collect()
}

/// Mean tile coordinate.
pub fn center_of_mass<F: Float>(config: &Configuration) -> (F, F) {
    let n = F::from(config.len()).unwrap();
    let (sx, sy) = config.tiles().iter().fold((F::zero(), F::zero()), |(sx, sy), t| {
        (sx + F::from(t.x).unwrap(), sy + F::from(t.y).unwrap())
    });
    (sx / n, sy / n)
}

/// Largest 4-connected component of `s ∩ g`; ties go to the component with
/// the smallest row-major cell. Empty when the two do not overlap.
pub fn largest_overlap_component(s: &Configuration, g: &Configuration) -> Vec<Cell> {
    let shared = intersection(s, g);
    // components come ordered by smallest cell, so the first maximum wins ties
    components(&shared).into_iter().fold(
        Vec::new(),
        |best, comp| if comp.len() > best.len() { comp } else { best },
    )
}
