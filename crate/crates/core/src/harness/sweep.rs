//! Seeded benchmark sweeps.
//!
//! A sweep spec is a flat `key = value` file; `#` starts a comment and list
//! values are comma separated:
//!
//! ```text
//! source = random            # random | files | bundled
//! width = 30
//! height = 30
//! tiles = 15
//! densities = 0.1, 0.3, 0.5
//! maps_per_density = 10
//! planners = rrt-glc, rrt-mwpm, glc, mwpm-expand
//! bias_max = 0.75
//! rad = 1
//! seeds = 10
//! max_nodes = 10000
//! time_limit = 60
//! master_seed = 1
//! ```
//!
//! Greedy planners run once per map; tree planners run `seeds` times for
//! every `bias_max × rad` pair.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::fixtures::{bundled_maps, gen_random_map};
use crate::mapfile::{Instance, MapFile};
use crate::planner::RobotState;

use super::run::{run_planner, PlannerId, RunParams, RunRecord, Status};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Random {
        width: i32,
        height: i32,
        tiles: usize,
        densities: Vec<f64>,
        maps_per_density: usize,
    },
    Files(Vec<PathBuf>),
    Bundled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub source: MapSource,
    pub planners: Vec<PlannerId>,
    pub bias_max: Vec<f64>,
    pub rad: Vec<usize>,
    /// Runs per tree-planner cell.
    pub seeds: usize,
    /// `bias_max` and `rad` are overridden per cell.
    pub base: RunParams,
    pub master_seed: u64,
    pub timing: bool,
    pub threads: Option<usize>,
}

/// Per-cell wall-time limit used when a spec does not set one.
pub const DEFAULT_TIME_LIMIT: f64 = 60.0;

impl SweepSpec {
    /// Relative file paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, SweepError> {
        let mut kv: HashMap<String, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SweepError::Spec {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(SweepError::Spec {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }

        let mut take = |key: &str| kv.remove(key);
        fn conv<T: std::str::FromStr>(key: &str, entry: (usize, String)) -> Result<T, SweepError>
        where
            T::Err: std::fmt::Display,
        {
            entry.1.parse::<T>().map_err(|e| SweepError::Spec {
                line: entry.0,
                message: format!("{key}: {e}"),
            })
        }
        fn list<T: std::str::FromStr>(key: &str, entry: (usize, String)) -> Result<Vec<T>, SweepError>
        where
            T::Err: std::fmt::Display,
        {
            entry
                .1
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| conv(key, (entry.0, s.to_string())))
                .collect()
        }
        macro_rules! get {
            ($key:literal, $default:expr) => {
                match take($key) {
                    Some(e) => conv($key, e)?,
                    None => $default,
                }
            };
        }
        macro_rules! get_list {
            ($key:literal, $default:expr) => {
                match take($key) {
                    Some(e) => list($key, e)?,
                    None => $default,
                }
            };
        }

        let defaults = RunParams::default();
        let source_kind: String = get!("source", "random".to_string());
        let source = match source_kind.as_str() {
            "random" => MapSource::Random {
                width: get!("width", 30),
                height: get!("height", 30),
                tiles: get!("tiles", 15),
                densities: get_list!("densities", vec![0.1, 0.3, 0.5, 0.7, 0.9]),
                maps_per_density: get!("maps_per_density", 10),
            },
            "files" => {
                let files: Vec<String> = get_list!("files", Vec::new());
                MapSource::Files(files.into_iter().map(|f| base_dir.join(f)).collect())
            }
            "bundled" => MapSource::Bundled,
            other => return Err(SweepError::Invalid(format!("unknown source `{other}`"))),
        };
        let time_limit: f64 = get!("time_limit", DEFAULT_TIME_LIMIT);
        let cost_threshold: Option<u64> = match take("cost_threshold") {
            Some(e) => Some(conv("cost_threshold", e)?),
            None => None,
        };
        let threads: Option<usize> = match take("threads") {
            Some(e) => Some(conv("threads", e)?),
            None => None,
        };
        let spec = SweepSpec {
            source,
            planners: get_list!("planners", PlannerId::ALL.to_vec()),
            bias_max: get_list!("bias_max", vec![defaults.bias_max]),
            rad: get_list!("rad", vec![defaults.rad]),
            seeds: get!("seeds", 10),
            base: RunParams {
                bias_base: get!("bias_base", defaults.bias_base),
                max_nodes: get!("max_nodes", defaults.max_nodes),
                checkpoint_every: get!("checkpoint_every", defaults.checkpoint_every),
                init_solution: get!("init_solution", false),
                time_limit: (time_limit > 0.0).then_some(time_limit),
                cost_threshold,
                ..defaults
            },
            master_seed: get!("master_seed", 1),
            timing: get!("timing", false),
            threads,
        };
        if let Some((key, (line, _))) = kv.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(SweepError::Spec {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path)?;
        SweepSpec::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::Invalid(m.to_string()));
        if self.planners.is_empty() {
            return bad("planner matrix is empty");
        }
        if self.planners.iter().any(|p| p.is_rrt()) && (self.bias_max.is_empty() || self.rad.is_empty()) {
            return bad("bias_max and rad lists must be nonempty");
        }
        if self.seeds == 0 || self.base.max_nodes == 0 || self.base.checkpoint_every == 0 {
            return bad("seeds, max_nodes and checkpoint_every must be positive");
        }
        if self.rad.contains(&0) {
            return bad("rad values must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        match &self.source {
            MapSource::Random {
                width,
                height,
                tiles,
                densities,
                maps_per_density,
            } => {
                if *width <= 0 || *height <= 0 || *tiles == 0 || *maps_per_density == 0 || densities.is_empty() {
                    return bad("random maps need positive width, height, tiles, maps_per_density and densities");
                }
            }
            MapSource::Files(f) if f.is_empty() => return bad("no map files listed"),
            _ => {}
        }
        Ok(())
    }
}

/// SplitMix64 over a sequence of words.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    words.iter().fold(mix(master), |acc, &w| mix(acc ^ mix(w)))
}

#[derive(Debug, Clone)]
pub struct SweepMap {
    pub index: usize,
    /// Aggregation group: the density for random maps, the label otherwise.
    pub group: String,
    pub label: String,
    pub instance: Result<Instance, String>,
}

fn load_maps(spec: &SweepSpec) -> Vec<SweepMap> {
    let mut maps = Vec::new();
    match &spec.source {
        MapSource::Random {
            width,
            height,
            tiles,
            densities,
            maps_per_density,
        } => {
            for (di, &d) in densities.iter().enumerate() {
                for m in 0..*maps_per_density {
                    let seed = derive_seed(spec.master_seed, &[0, di as u64, m as u64]);
                    let group = format!("{d:.2}");
                    let (label, instance) = match gen_random_map(*width, *height, *tiles, d, seed) {
                        Ok(s) => (s.label.clone(), Ok(s.instance())),
                        Err(e) => (
                            format!("random-{width}x{height}-n{tiles}-d{d:.2}-s{seed}"),
                            Err(e.to_string()),
                        ),
                    };
                    maps.push(SweepMap {
                        index: maps.len(),
                        group,
                        label,
                        instance,
                    });
                }
            }
        }
        MapSource::Files(files) => {
            for f in files {
                let label = f
                    .file_stem()
                    .map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
                let instance = MapFile::read(f)
                    .map_err(|e| e.to_string())
                    .and_then(|mf| mf.instance().map_err(|e| e.to_string()));
                maps.push(SweepMap {
                    index: maps.len(),
                    group: label.clone(),
                    label,
                    instance,
                });
            }
        }
        MapSource::Bundled => {
            for s in bundled_maps() {
                maps.push(SweepMap {
                    index: maps.len(),
                    group: s.label.clone(),
                    label: s.label.clone(),
                    instance: Ok(s.instance()),
                });
            }
        }
    }
    maps
}

/// Position of one run in the matrix; rows are sorted by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub map: usize,
    pub planner: usize,
    pub bias: usize,
    pub rad: usize,
    pub run: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub key: CellKey,
    pub group: String,
    pub record: RunRecord,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub maps: Vec<SweepMap>,
    pub rows: Vec<SweepRow>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let maps = load_maps(spec);
    let mut cells = Vec::new();
    for m in &maps {
        for (pi, &p) in spec.planners.iter().enumerate() {
            if p.is_rrt() {
                for bi in 0..spec.bias_max.len() {
                    for ri in 0..spec.rad.len() {
                        for run in 0..spec.seeds {
                            cells.push(CellKey {
                                map: m.index,
                                planner: pi,
                                bias: bi,
                                rad: ri,
                                run,
                            });
                        }
                    }
                }
            } else {
                cells.push(CellKey {
                    map: m.index,
                    planner: pi,
                    bias: 0,
                    rad: 0,
                    run: 0,
                });
            }
        }
    }

    let execute = |key: &CellKey| -> SweepRow {
        let m = &maps[key.map];
        let planner = spec.planners[key.planner];
        let mut params = spec.base;
        if planner.is_rrt() {
            params.bias_max = spec.bias_max[key.bias];
            params.rad = spec.rad[key.rad];
        }
        let seed = derive_seed(
            spec.master_seed,
            &[
                1,
                key.map as u64,
                planner as u64,
                key.bias as u64,
                key.rad as u64,
                key.run as u64,
            ],
        );
        let record = match &m.instance {
            Ok(inst) => run_planner(
                inst,
                &m.label,
                planner,
                &params,
                seed,
                RobotState::unplaced(),
                spec.timing,
            ),
            Err(msg) => RunRecord::failed(&m.label, planner, &params, seed, Status::Infeasible, msg),
        };
        SweepRow {
            key: *key,
            group: m.group.clone(),
            record,
        }
    };
    let mut rows: Vec<SweepRow> = match spec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SweepError::Invalid(e.to_string()))?
            .install(|| cells.par_iter().map(execute).collect()),
        None => cells.par_iter().map(execute).collect(),
    };
    rows.sort_by_key(|r| r.key);
    Ok(SweepResult { maps, rows })
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.3}"))
}

fn pct(num: usize, den: usize) -> String {
    if den == 0 {
        String::new()
    } else {
        format!("{:.1}", 100.0 * num as f64 / den as f64)
    }
}

impl SweepResult {
    pub fn records_jsonl(&self) -> String {
        self.rows.iter().map(|r| r.record.to_json_line() + "\n").collect()
    }

    /// One row per map × planner × bias_max × rad cell.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "group,label,planner,bias_max,rad,runs,solved,success_pct,mean_cost,mean_nodes_to_first_solution,mean_nodes_created\n",
        );
        let mut cells: BTreeMap<(usize, usize, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
        for r in &self.rows {
            cells
                .entry((r.key.map, r.key.planner, r.key.bias, r.key.rad))
                .or_default()
                .push(&r.record);
        }
        for ((map, ..), recs) in cells {
            let first = recs[0];
            let solved: Vec<&&RunRecord> = recs.iter().filter(|r| r.status == Status::Solved).collect();
            let (bias, rad) = if first.planner.is_rrt() {
                (format!("{}", first.params.bias_max), format!("{}", first.params.rad))
            } else {
                (String::new(), String::new())
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.maps[map].group,
                first.label,
                first.planner,
                bias,
                rad,
                recs.len(),
                solved.len(),
                pct(solved.len(), recs.len()),
                fmt_opt(mean(solved.iter().map(|r| r.total_cost as f64))),
                fmt_opt(mean(
                    solved
                        .iter()
                        .filter_map(|r| r.nodes_to_first_solution.map(|n| n as f64))
                )),
                fmt_opt(mean(
                    recs.iter()
                        .filter(|r| r.planner.is_rrt())
                        .map(|r| r.nodes_created as f64)
                )),
            )
            .unwrap();
        }
        out
    }

    fn groups(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for m in &self.maps {
            if !seen.contains(&m.group) {
                seen.push(m.group.clone());
            }
        }
        seen
    }

    /// Mean solved cost of each planner on one map.
    fn method_costs(&self, map: usize) -> BTreeMap<PlannerId, Option<f64>> {
        let mut by: BTreeMap<PlannerId, Vec<f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.key.map == map) {
            let e = by.entry(r.record.planner).or_default();
            if r.record.status == Status::Solved {
                e.push(r.record.total_cost as f64);
            }
        }
        by.into_iter().map(|(p, v)| (p, mean(v))).collect()
    }

    /// Per group: share of feasible maps on which each method returns the
    /// cheapest mean solution (ties credit every tied method), plus the
    /// success rate of each greedy planner.
    pub fn table_csv(&self) -> String {
        let planners: Vec<PlannerId> = PlannerId::ALL
            .into_iter()
            .filter(|p| self.rows.iter().any(|r| r.record.planner == *p))
            .collect();
        let contenders: Vec<PlannerId> = planners
            .iter()
            .copied()
            .filter(|&p| p != PlannerId::MwpmExpand)
            .collect();
        let mut out = String::from("group,maps,feasible");
        for p in &contenders {
            write!(out, ",{}_best_pct", p.as_str().replace('-', "_")).unwrap();
        }
        for p in planners.iter().filter(|p| !p.is_rrt()) {
            write!(out, ",{}_success_pct", p.as_str().replace('-', "_")).unwrap();
        }
        out.push('\n');
        for g in self.groups() {
            let maps: Vec<&SweepMap> = self.maps.iter().filter(|m| m.group == g).collect();
            let mut feasible = 0;
            let mut best = vec![0usize; contenders.len()];
            let mut greedy_ok: BTreeMap<PlannerId, usize> = BTreeMap::new();
            for m in &maps {
                let costs = self.method_costs(m.index);
                if m.instance.is_err() || costs.values().all(|c| c.is_none()) {
                    continue;
                }
                feasible += 1;
                let min = contenders
                    .iter()
                    .filter_map(|p| costs.get(p).copied().flatten())
                    .fold(f64::INFINITY, f64::min);
                for (i, p) in contenders.iter().enumerate() {
                    if costs.get(p).copied().flatten() == Some(min) {
                        best[i] += 1;
                    }
                }
                for p in planners.iter().filter(|p| !p.is_rrt()) {
                    if costs.get(p).copied().flatten().is_some() {
                        *greedy_ok.entry(*p).or_default() += 1;
                    }
                }
            }
            write!(out, "{g},{},{feasible}", maps.len()).unwrap();
            for b in best {
                write!(out, ",{}", pct(b, feasible)).unwrap();
            }
            for p in planners.iter().filter(|p| !p.is_rrt()) {
                write!(out, ",{}", pct(greedy_ok.get(p).copied().unwrap_or(0), feasible)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Seeded runs only: which greedy planner supplied the initial solution
    /// and how often the tree improved on it, per tree planner and rad.
    pub fn seeding_table_csv(&self) -> Option<String> {
        let seeded: Vec<&SweepRow> = self.rows.iter().filter(|r| r.record.initial.is_some()).collect();
        if seeded.is_empty() {
            return None;
        }
        let mut columns: Vec<(PlannerId, usize)> =
            seeded.iter().map(|r| (r.record.planner, r.record.params.rad)).collect();
        columns.sort();
        columns.dedup();
        let mut out = String::from("group,seeded_maps,initial_glc_pct,initial_mwpm_expand_pct");
        for (p, rad) in &columns {
            write!(out, ",{}_improved_rad{rad}_pct", p.as_str().replace('-', "_")).unwrap();
        }
        out.push('\n');
        for g in self.groups() {
            let mut maps = 0;
            let mut from_glc = 0;
            let mut from_mwpm = 0;
            let mut improved = vec![0usize; columns.len()];
            for m in self.maps.iter().filter(|m| m.group == g) {
                let rows: Vec<&&SweepRow> = seeded.iter().filter(|r| r.key.map == m.index).collect();
                let Some(init) = rows.first().and_then(|r| r.record.initial) else {
                    continue;
                };
                maps += 1;
                match init.planner {
                    PlannerId::Glc => from_glc += 1,
                    _ => from_mwpm += 1,
                }
                for (i, &(p, rad)) in columns.iter().enumerate() {
                    let c = mean(
                        rows.iter()
                            .filter(|r| {
                                r.record.planner == p && r.record.params.rad == rad && r.record.status == Status::Solved
                            })
                            .map(|r| r.record.total_cost as f64),
                    );
                    if c.is_some_and(|c| c < init.total_cost as f64) {
                        improved[i] += 1;
                    }
                }
            }
            write!(out, "{g},{maps},{},{}", pct(from_glc, maps), pct(from_mwpm, maps)).unwrap();
            for v in improved {
                write!(out, ",{}", pct(v, maps)).unwrap();
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Best cost against node count for every tree run.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("group,label,planner,bias_max,rad,run,nodes,best_cost\n");
        for r in self.rows.iter().filter(|r| r.record.planner.is_rrt()) {
            for c in &r.record.checkpoints {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.group,
                    r.record.label,
                    r.record.planner,
                    r.record.params.bias_max,
                    r.record.params.rad,
                    r.key.run,
                    c.nodes,
                    c.best_cost.map_or_else(String::new, |b| b.to_string())
                )
                .unwrap();
            }
        }
        out
    }

    /// Writes `results.jsonl`, `summary.csv`, `table.csv`, `curves.csv` and,
    /// for seeded sweeps, `seeding.csv`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("results.jsonl", self.records_jsonl()),
            ("summary.csv", self.summary_csv()),
            ("table.csv", self.table_csv()),
            ("curves.csv", self.curves_csv()),
        ];
        if let Some(s) = self.seeding_table_csv() {
            files.push(("seeding.csv", s));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}
