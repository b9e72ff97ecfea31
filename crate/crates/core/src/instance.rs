//! Problem instances: agents, tasks, obstacles, execution durations, order
//! constraints and time windows, plus random generation and the on-disk format.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::heuristics::constraint_aware_edf;
use crate::motion;
use crate::schedule::simulate;
use crate::util::rng_from_seed;

/// Current instance file schema.
pub const SCHEMA_VERSION: u32 = 1;

/// An agent with a fixed start location and travel speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub start: Point,
    /// Travel speed in meters per second; strictly positive.
    pub velocity: f64,
}

/// A task at a fixed location with a completion time window `[window_start, window_end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub position: Point,
    pub window_start: f64,
    pub window_end: f64,
}

/// Obstacles are axis-aligned rectangles.
pub type Obstacle = Rect;

/// A complete problem instance.
///
/// `durations[i][k]` is the time agent `i` needs to execute task `k` (seconds,
/// strictly positive). `precedence[j][k] == 1` means task `j` must finish
/// before task `k` may start, after an additional wait of `wait[j][k]` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    pub workspace: Rect,
    pub agents: Vec<Agent>,
    pub tasks: Vec<Task>,
    pub obstacles: Vec<Obstacle>,
    /// Row per agent, column per task.
    pub durations: Vec<Vec<f64>>,
    /// Row per predecessor task, column per successor task; entries 0/1.
    pub precedence: Vec<Vec<u8>>,
    /// Wait offsets in seconds; nonzero only where `precedence` is 1.
    pub wait: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Instance {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Planning horizon: the latest window end.
    pub fn horizon(&self) -> f64 {
        self.tasks
            .iter()
            .map(|t| t.window_end)
            .fold(0.0, f64::max)
    }

    /// Predecessors of task `k` under the order constraints.
    pub fn predecessors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_tasks()).filter(move |&j| self.precedence[j][k] == 1)
    }
}

/// Configuration for random instance generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_agents: usize,
    pub n_tasks: usize,
    pub n_obstacles: usize,
    pub workspace_width: f64,
    pub workspace_height: f64,
    /// Agent speeds drawn uniformly from this range (m/s).
    pub velocity_range: (f64, f64),
    /// Execution durations drawn uniformly per (agent, task) pair (s).
    pub duration_range: (f64, f64),
    /// In (0, 1]: 1 pins every window end to the calibration schedule's finish
    /// time, smaller values leave proportionally more slack.
    pub window_tightness: f64,
    /// In [0, 1): probability of an order edge between each forward task pair.
    pub precedence_density: f64,
    /// Wait offsets drawn uniformly for each order edge (s).
    pub wait_range: (f64, f64),
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_agents: 3,
            n_tasks: 6,
            n_obstacles: 3,
            workspace_width: 40.0,
            workspace_height: 30.0,
            velocity_range: (0.5, 2.0),
            duration_range: (2.0, 10.0),
            window_tightness: 0.5,
            precedence_density: 0.15,
            wait_range: (0.0, 5.0),
        }
    }
}

impl GenConfig {
    /// Checks the configuration ranges; returns the first problem found.
    pub fn check(&self) -> Result<(), GenError> {
        let fail = |msg: &str| Err(GenError::InvalidConfig(msg.to_string()));
        if self.n_agents == 0 || self.n_tasks == 0 {
            return fail("n_agents and n_tasks must be at least 1");
        }
        if !(self.workspace_width > 0.0 && self.workspace_height > 0.0) {
            return fail("workspace dimensions must be positive");
        }
        let (v0, v1) = self.velocity_range;
        if !(v0 > 0.0 && v1 >= v0 && v1.is_finite()) {
            return fail("velocity_range must satisfy 0 < v_min <= v_max");
        }
        let (d0, d1) = self.duration_range;
        if !(d0 > 0.0 && d1 >= d0 && d1.is_finite()) {
            return fail("duration_range must satisfy 0 < d_min <= d_max");
        }
        if !(self.window_tightness > 0.0 && self.window_tightness <= 1.0) {
            return fail("window_tightness must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.precedence_density) {
            return fail("precedence_density must lie in [0, 1)");
        }
        let (w0, w1) = self.wait_range;
        if !(w0 >= 0.0 && w1 >= w0 && w1.is_finite()) {
            return fail("wait_range must satisfy 0 <= w_min <= w_max");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("instance generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
}

/// A named invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema version mismatch: file has {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
}

const POSITION_RETRIES: usize = 10_000;
const DRAFT_RETRIES: usize = 20;

/// Generates a random instance. Deterministic for a fixed `(config, seed)`.
///
/// Positions are rejection-sampled until outside every obstacle, precedence is
/// a random DAG over the task index order, and time windows are calibrated so
/// the constraint-aware EDF schedule of the draft instance stays feasible,
/// then shrunk by the configured tightness factor.
pub fn generate(config: &GenConfig, seed: u64) -> Result<Instance, GenError> {
    config.check()?;
    let mut rng = rng_from_seed(seed);

    for attempt in 0..DRAFT_RETRIES {
        match try_generate(config, seed, &mut rng) {
            Ok(inst) => return Ok(inst),
            Err(_) if attempt + 1 < DRAFT_RETRIES => continue,
            Err(reason) => {
                return Err(GenError::GenerationFailed {
                    attempts: DRAFT_RETRIES,
                    reason,
                })
            }
        }
    }
    unreachable!()
}

fn try_generate(
    config: &GenConfig,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<Instance, String> {
    let workspace = Rect::new(
        Point::new(0.0, 0.0),
        Point::new(config.workspace_width, config.workspace_height),
    );

    // Obstacles: extents between 5% and 18% of each workspace dimension.
    let mut obstacles = Vec::with_capacity(config.n_obstacles);
    for _ in 0..config.n_obstacles {
        let w = rng.gen_range(0.05..=0.18) * config.workspace_width;
        let h = rng.gen_range(0.05..=0.18) * config.workspace_height;
        let x = rng.gen_range(0.0..=(config.workspace_width - w));
        let y = rng.gen_range(0.0..=(config.workspace_height - h));
        obstacles.push(Rect::new(Point::new(x, y), Point::new(x + w, y + h)));
    }

    let mut sample_free_point = |rng: &mut dyn rand::RngCore| -> Result<Point, String> {
        for _ in 0..POSITION_RETRIES {
            let p = Point::new(
                rng.gen_range(0.0..=config.workspace_width),
                rng.gen_range(0.0..=config.workspace_height),
            );
            if !obstacles.iter().any(|o| o.contains(&p)) {
                return Ok(p);
            }
        }
        Err("could not place a point outside the obstacles".to_string())
    };

    let mut agents = Vec::with_capacity(config.n_agents);
    for id in 0..config.n_agents {
        let start = sample_free_point(rng)?;
        let velocity = rng.gen_range(config.velocity_range.0..=config.velocity_range.1);
        agents.push(Agent {
            id,
            start,
            velocity,
        });
    }

    let mut tasks = Vec::with_capacity(config.n_tasks);
    for id in 0..config.n_tasks {
        let position = sample_free_point(rng)?;
        tasks.push(Task {
            id,
            position,
            window_start: 0.0,
            window_end: DRAFT_WINDOW_END,
        });
    }

    let durations: Vec<Vec<f64>> = (0..config.n_agents)
        .map(|_| {
            (0..config.n_tasks)
                .map(|_| rng.gen_range(config.duration_range.0..=config.duration_range.1))
                .collect()
        })
        .collect();

    // Random DAG: only forward edges in task index order, subsampled at the
    // configured density. Acyclic by construction.
    let n = config.n_tasks;
    let mut precedence = vec![vec![0u8; n]; n];
    let mut wait = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        for k in (j + 1)..n {
            if rng.gen_range(0.0..1.0) < config.precedence_density {
                precedence[j][k] = 1;
                wait[j][k] = rng.gen_range(config.wait_range.0..=config.wait_range.1);
            }
        }
    }

    let mut inst = Instance {
        schema_version: SCHEMA_VERSION,
        workspace,
        agents,
        tasks,
        obstacles,
        durations,
        precedence,
        wait,
        seed,
    };

    calibrate_windows(&mut inst, config.window_tightness, rng)?;

    debug_assert!(validate(&inst).is_empty());
    Ok(inst)
}

const DRAFT_WINDOW_END: f64 = 1e18;

/// Probes the draft instance with constraint-aware EDF and sets time windows
/// around the resulting schedule: window ends sit between the achieved finish
/// time (tightness 1) and twice the draft makespan (tightness near 0), window
/// starts stay below the achieved start times so the probe schedule remains
/// feasible by construction.
fn calibrate_windows(
    inst: &mut Instance,
    tightness: f64,
    rng: &mut impl Rng,
) -> Result<(), String> {
    let tt = motion::default_travel_times(inst).map_err(|e| e.to_string())?;
    let cand = constraint_aware_edf(inst, &tt);
    let draft = simulate(inst, &tt, &cand);
    if draft.finish.iter().any(|f| !f.is_finite()) {
        return Err("draft schedule has non-finite times".to_string());
    }

    let makespan = draft.makespan;
    let loose_end = 2.0 * makespan;
    let slack = 1.0 - tightness;
    for k in 0..inst.n_tasks() {
        let f = draft.finish[k];
        let s = draft.start[k];
        inst.tasks[k].window_end = f + slack * (loose_end - f).max(0.0);
        inst.tasks[k].window_start = rng.gen_range(0.0..=1.0) * slack * s;
    }

    // The probe schedule must stay feasible under the calibrated windows.
    let check = simulate(inst, &tt, &cand);
    if check.feasible.iter().all(|&f| f) {
        Ok(())
    } else {
        Err("calibrated windows broke the probe schedule".to_string())
    }
}

/// Checks every instance invariant; returns one entry per violated rule.
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, rule: String| {
        out.push(Violation {
            field: field.to_string(),
            rule,
        })
    };

    let na = inst.n_agents();
    let nt = inst.n_tasks();

    if !inst.workspace.is_proper() {
        push("workspace", "min corner must be strictly below max corner".into());
    }

    for (i, ob) in inst.obstacles.iter().enumerate() {
        if !ob.is_proper() {
            push(
                "obstacles",
                format!("obstacle {i}: min corner must be strictly below max corner"),
            );
        }
    }

    for a in &inst.agents {
        if !(a.velocity > 0.0 && a.velocity.is_finite()) {
            push("agents", format!("agent {}: velocity must be positive and finite", a.id));
        }
        if !inst.workspace.contains(&a.start) {
            push("agents", format!("agent {}: start outside workspace", a.id));
        }
        if inst.obstacles.iter().any(|o| o.contains_interior(&a.start)) {
            push("agents", format!("agent {}: start inside an obstacle", a.id));
        }
    }

    for t in &inst.tasks {
        if !(t.window_start >= 0.0 && t.window_start < t.window_end) {
            push(
                "tasks",
                format!("task {}: requires 0 <= window_start < window_end", t.id),
            );
        }
        if !inst.workspace.contains(&t.position) {
            push("tasks", format!("task {}: position outside workspace", t.id));
        }
        if inst.obstacles.iter().any(|o| o.contains_interior(&t.position)) {
            push("tasks", format!("task {}: position inside an obstacle", t.id));
        }
    }

    if inst.durations.len() != na || inst.durations.iter().any(|row| row.len() != nt) {
        push("durations", format!("shape must be {na}x{nt}"));
    } else {
        for (i, row) in inst.durations.iter().enumerate() {
            for (k, &d) in row.iter().enumerate() {
                if !(d > 0.0 && d.is_finite()) {
                    push(
                        "durations",
                        format!("entry ({i},{k}) must be strictly positive and finite"),
                    );
                }
            }
        }
    }

    let prec_shape_ok =
        inst.precedence.len() == nt && inst.precedence.iter().all(|row| row.len() == nt);
    if !prec_shape_ok {
        push("precedence", format!("shape must be {nt}x{nt}"));
    } else {
        for j in 0..nt {
            if inst.precedence[j][j] != 0 {
                push("precedence", format!("diagonal entry ({j},{j}) must be zero"));
            }
            for k in 0..nt {
                if inst.precedence[j][k] > 1 {
                    push("precedence", format!("entry ({j},{k}) must be 0 or 1"));
                }
            }
        }
        if let Some(cycle) = find_cycle(&inst.precedence) {
            push(
                "precedence",
                format!("order constraints contain a cycle through tasks {cycle:?}"),
            );
        }
    }

    if inst.wait.len() != nt || inst.wait.iter().any(|row| row.len() != nt) {
        push("wait", format!("shape must be {nt}x{nt}"));
    } else if prec_shape_ok {
        for j in 0..nt {
            for k in 0..nt {
                let w = inst.wait[j][k];
                if !(w >= 0.0 && w.is_finite()) {
                    push("wait", format!("entry ({j},{k}) must be nonnegative and finite"));
                }
                if inst.precedence[j][k] == 0 && w != 0.0 {
                    push(
                        "wait",
                        format!("entry ({j},{k}) must be zero where precedence is zero"),
                    );
                }
            }
        }
    }

    out
}

/// Kahn's algorithm; returns the tasks left after peeling (a cycle witness),
/// or None when the graph is acyclic.
fn find_cycle(precedence: &[Vec<u8>]) -> Option<Vec<usize>> {
    let n = precedence.len();
    let mut indeg = vec![0usize; n];
    for j in 0..n {
        for k in 0..n {
            if precedence[j][k] == 1 {
                indeg[k] += 1;
            }
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
    let mut seen = 0;
    while let Some(j) = queue.pop() {
        seen += 1;
        for k in 0..n {
            if precedence[j][k] == 1 {
                indeg[k] -= 1;
                if indeg[k] == 0 {
                    queue.push(k);
                }
            }
        }
    }
    if seen == n {
        None
    } else {
        Some((0..n).filter(|&k| indeg[k] > 0).collect())
    }
}

/// Returns a topological order of the precedence DAG, or None on a cycle.
pub fn topological_order(precedence: &[Vec<u8>]) -> Option<Vec<usize>> {
    let n = precedence.len();
    let mut indeg = vec![0usize; n];
    for row in precedence {
        for (k, &e) in row.iter().enumerate() {
            if e == 1 {
                indeg[k] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
    ready.sort_unstable_by(|a, b| b.cmp(a)); // pop() yields lowest id first
    let mut order = Vec::with_capacity(n);
    while let Some(j) = ready.pop() {
        order.push(j);
        for k in 0..n {
            if precedence[j][k] == 1 {
                indeg[k] -= 1;
                if indeg[k] == 0 {
                    // Keep the ready stack sorted descending so ties resolve by id.
                    let pos = ready.partition_point(|&x| x > k);
                    ready.insert(pos, k);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Writes the instance as pretty-printed JSON. Numeric fields round-trip
/// exactly (shortest representation that parses back to the same f64).
pub fn save(inst: &Instance, path: &Path) -> Result<(), InstanceIoError> {
    let text = serde_json::to_string_pretty(inst)
        .map_err(|e| InstanceIoError::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Instance, InstanceIoError> {
    let text = fs::read_to_string(path)?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Instance, InstanceIoError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: u32,
    }
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| InstanceIoError::Parse(e.to_string()))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(InstanceIoError::SchemaVersionMismatch {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_str(text).map_err(|e| InstanceIoError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_is_deterministic() {
        let config = GenConfig::default();
        let a = generate(&config, 42).unwrap();
        let b = generate(&config, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_instances_validate_clean() {
        let config = GenConfig::default();
        for seed in 0..20 {
            let inst = generate(&config, seed).unwrap();
            assert_eq!(inst.n_agents(), config.n_agents);
            assert_eq!(inst.n_tasks(), config.n_tasks);
            let violations = validate(&inst);
            assert!(violations.is_empty(), "seed {seed}: {violations:?}");
            assert!(topological_order(&inst.precedence).is_some());
        }
    }

    #[test]
    fn single_task_has_no_precedence() {
        let config = GenConfig {
            n_agents: 1,
            n_tasks: 1,
            n_obstacles: 0,
            ..GenConfig::default()
        };
        let inst = generate(&config, 3).unwrap();
        assert_eq!(inst.precedence, vec![vec![0]]);
        assert_eq!(inst.wait, vec![vec![0.0]]);
    }

    #[test]
    fn precedence_is_acyclic_over_seeds() {
        let config = GenConfig {
            n_agents: 2,
            n_tasks: 4,
            precedence_density: 0.3,
            ..GenConfig::default()
        };
        let inst = generate(&config, 7).unwrap();
        assert!(find_cycle(&inst.precedence).is_none());
        assert!(topological_order(&inst.precedence).is_some());
    }

    #[test]
    fn validate_reports_cycle_and_bad_duration() {
        let config = GenConfig {
            n_agents: 1,
            n_tasks: 4,
            n_obstacles: 0,
            ..GenConfig::default()
        };
        let mut inst = generate(&config, 0).unwrap();
        inst.precedence[0][1] = 1;
        inst.precedence[1][0] = 1;
        inst.durations[0][3] = 0.0;
        let violations = validate(&inst);
        assert!(violations
            .iter()
            .any(|v| v.field == "precedence" && v.rule.contains("cycle")));
        assert!(violations
            .iter()
            .any(|v| v.field == "durations" && v.rule.contains("(0,3)")));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let inst = generate(&GenConfig::default(), 5).unwrap();
        save(&inst, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(inst, loaded);
    }

    #[test]
    fn load_reports_missing_field() {
        let err = load_str(r#"{"schema_version": 1, "workspace": null}"#).unwrap_err();
        match err {
            InstanceIoError::Parse(msg) => assert!(msg.contains("workspace"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_wrong_schema_version() {
        let err = load_str(r#"{"schema_version": 99}"#).unwrap_err();
        match err {
            InstanceIoError::SchemaVersionMismatch { found, expected } => {
                assert_eq!(found, 99);
                assert_eq!(expected, SCHEMA_VERSION);
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let config = GenConfig {
            window_tightness: 0.0,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate(&config, 0),
            Err(GenError::InvalidConfig(_))
        ));
    }
}
