//! Deterministic forward simulation of candidate schedules, score metrics,
//! and the constraint validator used for warm-start acceptance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::motion::TravelTimes;

/// Validation tolerance (seconds) for the C1-C10 re-check.
pub const CONSTRAINT_TOL: f64 = 1e-6;

/// A candidate assignment and per-agent task ordering.
///
/// `orders[i]` lists the tasks of agent `i` in execution order; every task
/// must appear in exactly one agent's list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSchedule {
    pub n_tasks: usize,
    pub orders: Vec<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("task {0} appears {1} times across agent orders (expected exactly once)")]
    BadCover(usize, usize),
    #[error("task id {0} out of range (n_tasks = {1})")]
    OutOfRange(usize, usize),
}

impl CandidateSchedule {
    /// Builds a candidate and checks the exactly-once cover invariant.
    pub fn new(n_tasks: usize, orders: Vec<Vec<usize>>) -> Result<Self, CandidateError> {
        let cand = CandidateSchedule { n_tasks, orders };
        cand.check()?;
        Ok(cand)
    }

    pub fn check(&self) -> Result<(), CandidateError> {
        let mut count = vec![0usize; self.n_tasks];
        for order in &self.orders {
            for &k in order {
                if k >= self.n_tasks {
                    return Err(CandidateError::OutOfRange(k, self.n_tasks));
                }
                count[k] += 1;
            }
        }
        for (k, &c) in count.iter().enumerate() {
            if c != 1 {
                return Err(CandidateError::BadCover(k, c));
            }
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.orders.len()
    }

    /// Assigned agent per task; None where the cover invariant is broken.
    pub fn agent_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_tasks];
        for (i, order) in self.orders.iter().enumerate() {
            for &k in order {
                if k < self.n_tasks && out[k].is_none() {
                    out[k] = Some(i);
                }
            }
        }
        out
    }

    /// Dense 0/1 assignment matrix, row per agent.
    pub fn assignment_matrix(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n_tasks]; self.orders.len()];
        for (i, order) in self.orders.iter().enumerate() {
            for &k in order {
                if k < self.n_tasks {
                    a[i][k] = 1;
                }
            }
        }
        a
    }
}

/// A simulated schedule with per-task arrival/start/finish times and
/// feasibility flags. Tasks caught in a sequencing deadlock carry infinite
/// times and are marked infeasible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSchedule {
    pub candidate: CandidateSchedule,
    pub arrival: Vec<f64>,
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub feasible: Vec<bool>,
    pub makespan: f64,
    /// Planning horizon (the instance's latest window end).
    pub horizon: f64,
}

impl TimedSchedule {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }

    /// Normalized schedule quality in [0, 1]: feasible-task count plus the
    /// makespan term, divided by task count plus one. The makespan term
    /// clamps the makespan to the horizon, so deadlocked or late schedules
    /// contribute zero there.
    pub fn r_score(&self) -> f64 {
        assert!(self.horizon > 0.0, "horizon must be positive");
        self.quality_score() / (self.feasible.len() as f64 + 1.0)
    }

    /// Unnormalized quality score in [0, n_tasks + 1].
    pub fn quality_score(&self) -> f64 {
        assert!(self.horizon > 0.0, "horizon must be positive");
        let feasible_count = self.feasible.iter().filter(|&&f| f).count() as f64;
        let clamped = self.makespan.max(0.0).min(self.horizon);
        feasible_count + (1.0 - clamped / self.horizon)
    }

    /// Writes one record per task with the computed time columns, sorted by
    /// (agent, position in the agent's order).
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("agent,seq,task,arrival_s,start_s,finish_s,feasible\n");
        for (agent, order) in self.candidate.orders.iter().enumerate() {
            for (seq, &task) in order.iter().enumerate() {
                out.push_str(&format!(
                    "{agent},{seq},{task},{},{},{},{}\n",
                    self.arrival[task], self.start[task], self.finish[task], self.feasible[task]
                ));
            }
        }
        fs::write(path, out)
    }
}

/// Simulates a candidate on an instance: event-driven evaluation of the
/// arrival/start/finish recurrence in an order consistent with both the
/// per-agent sequences and the precedence edges.
///
/// Tasks on or downstream of a dependency cycle (an agent ordering that
/// contradicts precedence) get infinite times and `feasible = false`;
/// infeasibility is data, not an error.
pub fn simulate(inst: &Instance, tt: &TravelTimes, cand: &CandidateSchedule) -> TimedSchedule {
    let n = inst.n_tasks();
    debug_assert_eq!(cand.n_tasks, n);

    let agent_of = cand.agent_of();
    let mut pred_in_chain = vec![None::<usize>; n];
    for order in &cand.orders {
        for w in order.windows(2) {
            pred_in_chain[w[1]] = Some(w[0]);
        }
    }

    // Combined dependency graph: agent-chain edges plus precedence edges.
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 0..n {
        if let Some(j) = pred_in_chain[k] {
            succ[j].push(k);
            indeg[k] += 1;
        }
        for j in inst.predecessors(k) {
            succ[j].push(k);
            indeg[k] += 1;
        }
    }

    let mut arrival = vec![f64::INFINITY; n];
    let mut start = vec![f64::INFINITY; n];
    let mut finish = vec![f64::INFINITY; n];
    let mut feasible = vec![false; n];

    // Kahn's peeling; lowest task id first for a deterministic trace.
    let mut ready: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
    ready.sort_unstable_by(|a, b| b.cmp(a));
    let mut done = 0;
    while let Some(k) = ready.pop() {
        done += 1;
        let i = agent_of[k].expect("candidate invariant: every task assigned");
        let t_arr = match pred_in_chain[k] {
            None => tt.from_start(i, k),
            Some(j) => finish[j] + tt.between(i, j, k),
        };
        let mut t_start = t_arr.max(inst.tasks[k].window_start);
        for j in inst.predecessors(k) {
            t_start = t_start.max(finish[j] + inst.wait[j][k]);
        }
        let t_finish = t_start + inst.durations[i][k];

        arrival[k] = t_arr;
        start[k] = t_start;
        finish[k] = t_finish;
        feasible[k] = t_finish <= inst.tasks[k].window_end;

        for &s in &succ[k] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                let pos = ready.partition_point(|&x| x > s);
                ready.insert(pos, s);
            }
        }
    }
    debug_assert!(done <= n);

    let makespan = finish.iter().copied().fold(0.0f64, f64::max);
    TimedSchedule {
        candidate: cand.clone(),
        arrival,
        start,
        finish,
        feasible,
        makespan,
        horizon: inst.horizon(),
    }
}

/// One violated Eq.-1 constraint, with the indices it fired at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstraintViolation {
    /// Task not covered exactly once.
    C1 { task: usize, count: usize },
    C2 { agent: usize, j: usize, k: usize },
    C3 { agent: usize, j: usize, k: usize },
    /// Same-agent sequencing: arrival of `to` earlier than finish of `from`
    /// plus travel.
    C4 { agent: usize, from: usize, to: usize },
    /// Arrival earlier than travel from the agent's start.
    C5 { agent: usize, task: usize },
    C6 { task: usize },
    /// Order constraint with wait offset not respected.
    C7 { from: usize, to: usize },
    C8 { task: usize },
    C9 { agent: usize, task: usize },
    /// Finish after the window end.
    C10 { task: usize },
}

impl ConstraintViolation {
    pub fn id(&self) -> &'static str {
        match self {
            ConstraintViolation::C1 { .. } => "C1",
            ConstraintViolation::C2 { .. } => "C2",
            ConstraintViolation::C3 { .. } => "C3",
            ConstraintViolation::C4 { .. } => "C4",
            ConstraintViolation::C5 { .. } => "C5",
            ConstraintViolation::C6 { .. } => "C6",
            ConstraintViolation::C7 { .. } => "C7",
            ConstraintViolation::C8 { .. } => "C8",
            ConstraintViolation::C9 { .. } => "C9",
            ConstraintViolation::C10 { .. } => "C10",
        }
    }
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintViolation::C1 { task, count } => {
                write!(f, "C1: task {task} covered {count} times")
            }
            ConstraintViolation::C2 { agent, j, k } => write!(f, "C2 at ({agent},{j},{k})"),
            ConstraintViolation::C3 { agent, j, k } => write!(f, "C3 at ({agent},{j},{k})"),
            ConstraintViolation::C4 { agent, from, to } => {
                write!(f, "C4 at ({agent},{from},{to})")
            }
            ConstraintViolation::C5 { agent, task } => write!(f, "C5 at ({agent},{task})"),
            ConstraintViolation::C6 { task } => write!(f, "C6 at task {task}"),
            ConstraintViolation::C7 { from, to } => write!(f, "C7 at ({from},{to})"),
            ConstraintViolation::C8 { task } => write!(f, "C8 at task {task}"),
            ConstraintViolation::C9 { agent, task } => write!(f, "C9 at ({agent},{task})"),
            ConstraintViolation::C10 { task } => write!(f, "C10 at task {task}"),
        }
    }
}

/// Re-checks every C1-C10 inequality on the concrete times at
/// [`CONSTRAINT_TOL`]. Empty result means the timed schedule is feasible for
/// the exact model. Sequencing variables are derived from the per-agent total
/// orders, under which C2/C3 hold structurally; they are still evaluated so
/// malformed candidates report against the right constraint.
pub fn check_constraints(
    inst: &Instance,
    tt: &TravelTimes,
    ts: &TimedSchedule,
) -> Vec<ConstraintViolation> {
    let tol = CONSTRAINT_TOL;
    let n = inst.n_tasks();
    let cand = &ts.candidate;
    let mut out = Vec::new();

    // C1: exact cover.
    let mut count = vec![0usize; n];
    for order in &cand.orders {
        for &k in order {
            if k < n {
                count[k] += 1;
            }
        }
    }
    for (k, &c) in count.iter().enumerate() {
        if c != 1 {
            out.push(ConstraintViolation::C1 { task: k, count: c });
        }
    }

    let assignment = cand.assignment_matrix();

    for (i, order) in cand.orders.iter().enumerate() {
        // C2/C3 on the derived sequencing variables.
        for (pj, &j) in order.iter().enumerate() {
            for &k in order.iter().skip(pj + 1) {
                // s_jk + s_kj == 1 here by construction.
                if 1 > assignment[i][j] {
                    out.push(ConstraintViolation::C2 { agent: i, j, k });
                }
                if 1 > assignment[i][k] {
                    out.push(ConstraintViolation::C3 { agent: i, j, k });
                }
            }
        }

        // C4 for every ordered pair on the same agent (general precedence).
        for (pj, &j) in order.iter().enumerate() {
            for &k in order.iter().skip(pj + 1) {
                if ts.arrival[k] < ts.finish[j] + tt.between(i, j, k) - tol {
                    out.push(ConstraintViolation::C4 {
                        agent: i,
                        from: j,
                        to: k,
                    });
                }
            }
        }

        for &k in order {
            // C5: arrival no earlier than travel from the agent's start.
            if ts.arrival[k] < tt.from_start(i, k) - tol {
                out.push(ConstraintViolation::C5 { agent: i, task: k });
            }
            // C9: execution duration of the assigned agent.
            if ts.finish[k] < ts.start[k] + inst.durations[i][k] - tol {
                out.push(ConstraintViolation::C9 { agent: i, task: k });
            }
        }
    }

    for k in 0..n {
        if ts.start[k] < ts.arrival[k] - tol {
            out.push(ConstraintViolation::C6 { task: k });
        }
        if ts.start[k] < inst.tasks[k].window_start - tol {
            out.push(ConstraintViolation::C8 { task: k });
        }
        if !(ts.finish[k] <= inst.tasks[k].window_end + tol) {
            out.push(ConstraintViolation::C10 { task: k });
        }
        for j in inst.predecessors(k) {
            if ts.start[k] < ts.finish[j] + inst.wait[j][k] - tol {
                out.push(ConstraintViolation::C7 { from: j, to: k });
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::instance::{Agent, Task};
    use crate::motion::build_roadmap;
    use crate::motion::travel_times;

    /// One agent at the origin, tasks on a line, no obstacles.
    fn line_instance(task_xs: &[f64], exec: f64) -> (Instance, TravelTimes) {
        let tasks: Vec<Task> = task_xs
            .iter()
            .enumerate()
            .map(|(id, &x)| Task {
                id,
                position: Point::new(x, 0.0),
                window_start: 0.0,
                window_end: 100.0,
            })
            .collect();
        let nt = tasks.len();
        let inst = Instance {
            schema_version: 1,
            workspace: Rect::new(Point::new(0.0, 0.0), Point::new(100.0, 10.0)),
            agents: vec![Agent {
                id: 0,
                start: Point::new(0.0, 0.0),
                velocity: 1.0,
            }],
            tasks,
            obstacles: vec![],
            durations: vec![vec![exec; nt]],
            precedence: vec![vec![0; nt]; nt],
            wait: vec![vec![0.0; nt]; nt],
            seed: 0,
        };
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        (inst, tt)
    }

    #[test]
    fn single_task_recurrence() {
        let (inst, tt) = line_instance(&[5.0], 10.0);
        let cand = CandidateSchedule::new(1, vec![vec![0]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert_eq!(ts.arrival[0], 5.0);
        assert_eq!(ts.start[0], 5.0);
        assert_eq!(ts.finish[0], 15.0);
        assert!(ts.feasible[0]);
        assert_eq!(ts.makespan, 15.0);
    }

    #[test]
    fn wait_offset_delays_start() {
        let (mut inst, tt) = line_instance(&[2.0, 3.0], 4.0);
        inst.precedence[0][1] = 1;
        inst.wait[0][1] = 3.0;
        let cand = CandidateSchedule::new(2, vec![vec![0, 1]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        // Task 0: arrive 2, finish 6. Task 1: arrive 6 + 1 = 7;
        // precedence requires 6 + 3 = 9; start = max(7, 9, 0) = 9.
        assert_eq!(ts.finish[0], 6.0);
        assert_eq!(ts.arrival[1], 7.0);
        assert_eq!(ts.start[1], 9.0);
        assert_eq!(ts.finish[1], 13.0);
    }

    #[test]
    fn cross_constraint_deadlock_is_infinite() {
        let (mut inst, tt) = line_instance(&[2.0, 3.0], 4.0);
        // Precedence 0 -> 1, but the agent visits 1 first: cycle.
        inst.precedence[0][1] = 1;
        let cand = CandidateSchedule::new(2, vec![vec![1, 0]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert!(ts.finish[0].is_infinite());
        assert!(ts.finish[1].is_infinite());
        assert!(!ts.feasible[0] && !ts.feasible[1]);
        assert!(ts.makespan.is_infinite());
        // Scores stay bounded thanks to the clamp.
        assert!(ts.r_score() >= 0.0 && ts.r_score() <= 1.0);
        assert_eq!(ts.quality_score(), 0.0);
    }

    #[test]
    fn score_formula_matches_hand_values() {
        let cand = CandidateSchedule::new(4, vec![vec![0, 1, 2, 3]]).unwrap();
        let mk = |feasible: Vec<bool>, makespan: f64, horizon: f64| TimedSchedule {
            candidate: cand.clone(),
            arrival: vec![0.0; 4],
            start: vec![0.0; 4],
            finish: vec![0.0; 4],
            feasible,
            makespan,
            horizon,
        };
        // 3 of 4 feasible, makespan = horizon / 2: (3 + 0.5) / 5 = 0.7.
        let ts = mk(vec![true, true, true, false], 50.0, 100.0);
        assert_eq!(ts.r_score(), 0.7);
        assert_eq!(ts.quality_score(), 3.5);
        // All feasible, makespan -> 0: score = 1.
        let ts = mk(vec![true; 4], 0.0, 100.0);
        assert_eq!(ts.r_score(), 1.0);
        assert_eq!(ts.quality_score(), 5.0);
        // All feasible, makespan = horizon.
        let ts = mk(vec![true; 4], 100.0, 100.0);
        assert_eq!(ts.quality_score(), 4.0);
    }

    #[test]
    fn twenty_task_score_range_matches() {
        let cand = CandidateSchedule::new(20, vec![(0..20).collect()]).unwrap();
        let ts = TimedSchedule {
            candidate: cand,
            arrival: vec![0.0; 20],
            start: vec![0.0; 20],
            finish: vec![0.0; 20],
            feasible: vec![true; 20],
            makespan: 0.0,
            horizon: 10.0,
        };
        assert_eq!(ts.quality_score(), 21.0);
        let r = ts.r_score();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simulate_output_passes_validator() {
        let (mut inst, tt) = line_instance(&[2.0, 5.0, 9.0], 3.0);
        inst.precedence[0][2] = 1;
        inst.wait[0][2] = 1.0;
        let cand = CandidateSchedule::new(3, vec![vec![0, 1, 2]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert!(ts.all_feasible());
        assert!(check_constraints(&inst, &tt, &ts).is_empty());
    }

    #[test]
    fn validator_reports_deadline_miss() {
        let (mut inst, tt) = line_instance(&[5.0], 10.0);
        inst.tasks[0].window_end = 12.0; // finish is 15
        let cand = CandidateSchedule::new(1, vec![vec![0]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert!(!ts.feasible[0]);
        let v = check_constraints(&inst, &tt, &ts);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].id(), "C10");
    }

    #[test]
    fn validator_reports_same_agent_overlap() {
        let (inst, tt) = line_instance(&[2.0, 4.0], 3.0);
        let cand = CandidateSchedule::new(2, vec![vec![0, 1]]).unwrap();
        let mut ts = simulate(&inst, &tt, &cand);
        // Force task 1 to overlap task 0 on the same agent.
        ts.arrival[1] = ts.finish[0] - 1.0;
        ts.start[1] = ts.arrival[1];
        ts.finish[1] = ts.start[1] + 3.0;
        let v = check_constraints(&inst, &tt, &ts);
        assert!(v.iter().any(|x| matches!(
            x,
            ConstraintViolation::C4 {
                agent: 0,
                from: 0,
                to: 1
            }
        )));
    }

    #[test]
    fn relaxing_windows_preserves_feasibility() {
        let (mut inst, tt) = line_instance(&[3.0, 6.0, 1.0], 2.0);
        inst.tasks[0].window_end = 6.0;
        inst.tasks[1].window_end = 11.0;
        inst.tasks[2].window_end = 14.0;
        let cand = CandidateSchedule::new(3, vec![vec![0, 1, 2]]).unwrap();
        let base = simulate(&inst, &tt, &cand);
        for delta in [0.5, 2.0, 100.0] {
            let mut relaxed = inst.clone();
            for t in &mut relaxed.tasks {
                t.window_end += delta;
            }
            let ts = simulate(&relaxed, &tt, &cand);
            for k in 0..3 {
                assert!(ts.feasible[k] >= base.feasible[k]);
            }
        }
    }
}
