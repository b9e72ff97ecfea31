//! Branch-and-bound over the LP relaxation, with warm-start injection,
//! constraint propagation on the assignment binaries, and a search/validation
//! timing breakdown.
//!
//! Node selection is best-bound-first with ties broken by tree path
//! (lexicographic, floor branch < ceil branch), which makes warm-start
//! pruning monotone: an accepted incumbent can only remove nodes from the
//! explored set. Incumbent objectives always come from re-simulating the
//! extracted candidate, so reported makespans use the exact schedule
//! arithmetic rather than LP values.
//!
//! Trace format (one line per processed node, gated by `SolveOptions::trace`):
//! `node=<id> depth=<d> bound=<b> action=<word>` with an optional
//! `var=<name>`/`value=<v>` suffix.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use thiserror::Error;

use crate::instance::Instance;
use crate::milp::{self, MilpModel, ObjectiveKind, VarKind};
use crate::motion::TravelTimes;
use crate::schedule::{check_constraints, simulate, CandidateSchedule, ConstraintViolation, TimedSchedule};
use crate::simplex::{solve_lp, LpStatus, SimplexError, SimplexOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRule {
    /// Most fractional binary, ties by lowest variable index.
    MostFractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSelection {
    /// Best LP bound first, ties by tree path (floor child first).
    BestBound,
    /// Depth-first, floor child first.
    DepthFirst,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Relative optimality gap for pruning; 0 makes the search exact.
    pub gap: f64,
    pub node_limit: u64,
    pub branching: BranchRule,
    pub node_selection: NodeSelection,
    /// Reserved for randomized rules; the defaults are deterministic.
    pub seed: u64,
    pub trace: bool,
    pub lp: SimplexOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: 600.0,
            gap: 1e-6,
            node_limit: 5_000_000,
            branching: BranchRule::MostFractional,
            node_selection: NodeSelection::BestBound,
            seed: 0,
            trace: false,
            lp: SimplexOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Search tree exhausted with an incumbent.
    Optimal,
    /// A time or node limit stopped the search; `best` may hold an incumbent.
    Feasible,
    /// Search tree exhausted without any feasible integer solution.
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub best: Option<TimedSchedule>,
    /// Makespan of the best schedule (exact simulate arithmetic).
    pub objective: Option<f64>,
    pub nodes_explored: u64,
    pub lp_iterations_total: u64,
    pub search_time: f64,
    pub validation_time: f64,
    pub total_time: f64,
    pub warm_start_accepted: bool,
    pub trace: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BnbError {
    #[error("LP relaxation failed: {0}")]
    Lp(#[from] SimplexError),
    #[error("LP relaxation hit its iteration limit at node {0}")]
    LpIterationLimit(u64),
    #[error("LP relaxation reported unbounded; the model is malformed")]
    UnboundedRelaxation,
}

/// Outcome of validating a warm-start candidate.
#[derive(Clone, Debug)]
pub enum WarmStartOutcome {
    Accepted {
        schedule: TimedSchedule,
        makespan: f64,
    },
    Rejected {
        violations: Vec<ConstraintViolation>,
    },
}

/// Simulates and validates a candidate; on success it is installed by the
/// caller as the initial incumbent with its makespan as upper bound.
pub fn inject_warm_start(
    model: &MilpModel,
    candidate: &CandidateSchedule,
    inst: &Instance,
    tt: &TravelTimes,
) -> WarmStartOutcome {
    if let Err(e) = candidate.check() {
        let _ = e;
        let ts = simulate_lenient(inst, tt, candidate);
        return WarmStartOutcome::Rejected {
            violations: check_constraints(inst, tt, &ts),
        };
    }
    let ts = simulate(inst, tt, candidate);
    let violations = check_constraints(inst, tt, &ts);
    if violations.is_empty() {
        debug_assert!(milp::schedule_to_vector(model, &ts)
            .map(|v| model.violations(&v, 1e-6).is_empty())
            .unwrap_or(false));
        WarmStartOutcome::Accepted {
            makespan: ts.makespan,
            schedule: ts,
        }
    } else {
        WarmStartOutcome::Rejected { violations }
    }
}

/// A malformed candidate cannot be simulated; report it through the
/// validator with infinite times so C1 carries the rejection reason.
fn simulate_lenient(inst: &Instance, tt: &TravelTimes, cand: &CandidateSchedule) -> TimedSchedule {
    let _ = tt;
    let n = inst.n_tasks();
    TimedSchedule {
        candidate: cand.clone(),
        arrival: vec![f64::INFINITY; n],
        start: vec![f64::INFINITY; n],
        finish: vec![f64::INFINITY; n],
        feasible: vec![false; n],
        makespan: f64::INFINITY,
        horizon: inst.horizon(),
    }
}

struct Node {
    id: u64,
    path: Vec<u8>,
    /// Binary fixings accumulated from the root: (variable, value).
    fixings: Vec<(usize, u8)>,
    /// Inherited LP bound (parent's relaxation objective).
    bound: f64,
}

/// Min-order on (bound, path) wrapped for BinaryHeap's max semantics.
struct HeapNode(Node);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.path.cmp(&self.0.path))
    }
}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Frontier {
    Heap(BinaryHeap<HeapNode>),
    Stack(Vec<Node>),
}

impl Frontier {
    fn new(selection: NodeSelection) -> Self {
        match selection {
            NodeSelection::BestBound => Frontier::Heap(BinaryHeap::new()),
            NodeSelection::DepthFirst => Frontier::Stack(Vec::new()),
        }
    }

    fn push(&mut self, node: Node) {
        match self {
            Frontier::Heap(h) => h.push(HeapNode(node)),
            Frontier::Stack(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Heap(h) => h.pop().map(|HeapNode(n)| n),
            Frontier::Stack(s) => s.pop(),
        }
    }
}

struct Incumbent {
    value: f64,
    schedule: TimedSchedule,
}

/// Solves the model to proven optimality (within the gap) by LP-based
/// branch-and-bound. `inst` and `tt` must be the data the model was built
/// from; integer candidates are re-simulated on them so that incumbent
/// objectives use exact schedule arithmetic.
pub fn solve(
    model: &MilpModel,
    inst: &Instance,
    tt: &TravelTimes,
    opts: &SolveOptions,
    warm_start: Option<&CandidateSchedule>,
) -> Result<SolveResult, BnbError> {
    let mut validation_time = 0.0f64;
    let mut incumbent: Option<Incumbent> = None;
    let mut warm_start_accepted = false;

    if let Some(cand) = warm_start {
        let t0 = Instant::now();
        match inject_warm_start(model, cand, inst, tt) {
            WarmStartOutcome::Accepted { schedule, makespan } => {
                incumbent = Some(Incumbent {
                    value: makespan,
                    schedule,
                });
                warm_start_accepted = true;
            }
            WarmStartOutcome::Rejected { .. } => {}
        }
        validation_time = t0.elapsed().as_secs_f64();
    }

    let search_start = Instant::now();
    let mut trace: Vec<String> = Vec::new();
    let mut nodes_explored = 0u64;
    let mut lp_iterations_total = 0u64;
    let mut next_id = 0u64;
    let mut limit_hit = false;

    let base_lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();

    let mut lp = model.to_lp();

    let mut frontier = Frontier::new(opts.node_selection);
    frontier.push(Node {
        id: next_id,
        path: Vec::new(),
        fixings: Vec::new(),
        bound: f64::NEG_INFINITY,
    });
    next_id += 1;

    let prunable = |bound: f64, inc: &Option<Incumbent>| -> bool {
        inc.as_ref()
            .is_some_and(|i| bound >= i.value - opts.gap * i.value.abs())
    };

    while let Some(node) = frontier.pop() {
        if search_start.elapsed().as_secs_f64() > opts.time_limit
            || nodes_explored >= opts.node_limit
        {
            limit_hit = true;
            break;
        }
        let depth = node.path.len();
        let mut emit = |action: &str, bound: f64, extra: &str| {
            if opts.trace {
                trace.push(format!(
                    "node={} depth={} bound={:.9} action={}{}",
                    node.id, depth, bound, action, extra
                ));
            }
        };

        if prunable(node.bound, &incumbent) {
            emit("pruned_bound", node.bound, "");
            continue;
        }

        // Materialize node bounds and propagate the assignment logic.
        lp.lower.copy_from_slice(&base_lower);
        lp.upper.copy_from_slice(&base_upper);
        for &(var, val) in &node.fixings {
            lp.lower[var] = val as f64;
            lp.upper[var] = val as f64;
        }
        if !propagate(model, &mut lp.lower, &mut lp.upper) {
            emit("pruned_propagation", node.bound, "");
            continue;
        }

        let lp_result = solve_lp(&lp, &opts.lp)?;
        nodes_explored += 1;
        lp_iterations_total += lp_result.iterations as u64;

        match lp_result.status {
            LpStatus::Infeasible => {
                emit("lp_infeasible", node.bound, "");
                continue;
            }
            LpStatus::Unbounded => return Err(BnbError::UnboundedRelaxation),
            LpStatus::IterationLimit => return Err(BnbError::LpIterationLimit(node.id)),
            LpStatus::Optimal => {}
        }
        let bound = lp_result.objective;
        if prunable(bound, &incumbent) {
            emit("pruned_bound", bound, "");
            continue;
        }

        let fractional = pick_branch_var(&binaries, &lp_result.x);
        match fractional {
            None => {
                // Integral relaxation: extract, re-simulate, validate.
                let mut vec = lp_result.x.clone();
                for &j in &binaries {
                    vec[j] = vec[j].round();
                }
                match milp::vector_to_schedule(model, &vec) {
                    Ok(lp_schedule) => {
                        let ts = simulate(inst, tt, &lp_schedule.candidate);
                        if check_constraints(inst, tt, &ts).is_empty() {
                            let value = ts.makespan_objective(model.objective_kind);
                            if incumbent.as_ref().map_or(true, |i| value < i.value) {
                                emit("integer_incumbent", bound, &format!(" value={value:.9}"));
                                incumbent = Some(Incumbent {
                                    value,
                                    schedule: ts,
                                });
                            } else {
                                emit("integer_feasible", bound, "");
                            }
                        } else {
                            emit("integer_rejected", bound, "");
                        }
                    }
                    Err(_) => emit("integer_rejected", bound, ""),
                }
            }
            Some(var) => {
                if node.path.is_empty() {
                    // Root rounding heuristic: runs once, identically with or
                    // without a warm start, so pruning stays monotone.
                    if let Some((value, ts)) = round_heuristic(model, inst, tt, &lp_result.x) {
                        if incumbent.as_ref().map_or(true, |i| value < i.value) {
                            emit("root_heuristic", bound, &format!(" value={value:.9}"));
                            incumbent = Some(Incumbent {
                                value,
                                schedule: ts,
                            });
                        }
                    }
                    if prunable(bound, &incumbent) {
                        emit("pruned_bound", bound, "");
                        continue;
                    }
                }
                emit(
                    "branched",
                    bound,
                    &format!(" var={}", model.variables[var].name),
                );
                let mut floor_path = node.path.clone();
                floor_path.push(0);
                let mut ceil_path = node.path.clone();
                ceil_path.push(1);
                let mut floor_fix = node.fixings.clone();
                floor_fix.push((var, 0));
                let mut ceil_fix = node.fixings.clone();
                ceil_fix.push((var, 1));
                let floor_node = Node {
                    id: next_id,
                    path: floor_path,
                    fixings: floor_fix,
                    bound,
                };
                let ceil_node = Node {
                    id: next_id + 1,
                    path: ceil_path,
                    fixings: ceil_fix,
                    bound,
                };
                next_id += 2;
                match opts.node_selection {
                    NodeSelection::BestBound => {
                        frontier.push(floor_node);
                        frontier.push(ceil_node);
                    }
                    NodeSelection::DepthFirst => {
                        // Stack pops last-in first: push ceil, then floor.
                        frontier.push(ceil_node);
                        frontier.push(floor_node);
                    }
                }
            }
        }
    }

    let search_time = search_start.elapsed().as_secs_f64();
    let status = if limit_hit {
        SolveStatus::Feasible
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let (best, objective) = match incumbent {
        Some(i) => (Some(i.schedule), Some(i.value)),
        None => (None, None),
    };
    Ok(SolveResult {
        status,
        best,
        objective,
        nodes_explored,
        lp_iterations_total,
        search_time,
        validation_time,
        total_time: search_time + validation_time,
        warm_start_accepted,
        trace,
    })
}

impl TimedSchedule {
    fn makespan_objective(&self, kind: ObjectiveKind) -> f64 {
        match kind {
            ObjectiveKind::Makespan => self.makespan,
            ObjectiveKind::TotalFinishTime => self.finish.iter().sum(),
        }
    }
}

/// Most fractional binary (largest distance to the nearest integer), ties by
/// lowest variable index. None when all binaries are integral within 1e-6.
fn pick_branch_var(binaries: &[usize], x: &[f64]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &j in binaries {
        let frac = (x[j] - x[j].round()).abs();
        if frac > milp::INT_TOL {
            match best {
                Some((bf, _)) if bf >= frac => {}
                _ => best = Some((frac, j)),
            }
        }
    }
    best.map(|(_, j)| j)
}

/// Fixpoint propagation of the assignment logic over variable bounds:
/// a task fixed to an agent clears the other agents' binaries, a task with a
/// single remaining agent gets fixed to it, and clearing an assignment clears
/// the agent's sequencing binaries for that task. Returns false on conflict
/// (some task has no agent left).
fn propagate(model: &MilpModel, lower: &mut [f64], upper: &mut [f64]) -> bool {
    let na = model.n_agents;
    let nt = model.n_tasks;
    loop {
        let mut changed = false;
        for k in 0..nt {
            let mut fixed_one: Option<usize> = None;
            let mut open: Vec<usize> = Vec::new();
            for i in 0..na {
                let j = model.a_idx(i, k);
                if lower[j] > 0.5 {
                    fixed_one = Some(i);
                } else if upper[j] > 0.5 {
                    open.push(i);
                }
            }
            match fixed_one {
                Some(i1) => {
                    for i in 0..na {
                        if i != i1 {
                            let j = model.a_idx(i, k);
                            if upper[j] > 0.5 {
                                if lower[j] > 0.5 {
                                    return false; // two agents fixed to one task
                                }
                                upper[j] = 0.0;
                                changed = true;
                            }
                        }
                    }
                }
                None => {
                    if open.is_empty() {
                        return false; // C1 unsatisfiable
                    }
                    if open.len() == 1 {
                        let j = model.a_idx(open[0], k);
                        lower[j] = 1.0;
                        changed = true;
                    }
                }
            }
        }
        // A cleared assignment silences the agent's sequencing binaries.
        if nt > 1 {
            for i in 0..na {
                for k in 0..nt {
                    let a = model.a_idx(i, k);
                    if upper[a] < 0.5 {
                        for j in 0..nt {
                            if j != k {
                                for s in [model.s_idx(i, j, k), model.s_idx(i, k, j)] {
                                    if upper[s] > 0.5 {
                                        if lower[s] > 0.5 {
                                            return false;
                                        }
                                        upper[s] = 0.0;
                                        changed = true;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Rounds a fractional root relaxation to a candidate: each task goes to its
/// largest-weight agent (ties by agent id), each agent's tasks ordered by the
/// relaxation's start times (ties by task id). Returns the simulated value
/// when the rounded schedule validates.
fn round_heuristic(
    model: &MilpModel,
    inst: &Instance,
    tt: &TravelTimes,
    x: &[f64],
) -> Option<(f64, TimedSchedule)> {
    let mut orders: Vec<Vec<usize>> = vec![Vec::new(); model.n_agents];
    for k in 0..model.n_tasks {
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..model.n_agents {
            let w = x[model.a_idx(i, k)];
            if w > best.1 {
                best = (i, w);
            }
        }
        orders[best.0].push(k);
    }
    for order in &mut orders {
        order.sort_by(|&a, &b| {
            x[model.t_start_idx(a)]
                .total_cmp(&x[model.t_start_idx(b)])
                .then(a.cmp(&b))
        });
    }
    let cand = CandidateSchedule::new(model.n_tasks, orders).ok()?;
    let ts = simulate(inst, tt, &cand);
    if check_constraints(inst, tt, &ts).is_empty() {
        let value = ts.makespan_objective(model.objective_kind);
        Some((value, ts))
    } else {
        None
    }
}

/// Convenience pipeline: build the model, inject the warm start, solve.
pub fn solve_instance(
    inst: &Instance,
    tt: &TravelTimes,
    opts: &SolveOptions,
    warm_start: Option<&CandidateSchedule>,
) -> Result<SolveResult, BnbError> {
    let model = milp::build(inst, tt, ObjectiveKind::Makespan);
    solve(&model, inst, tt, opts, warm_start)
}
