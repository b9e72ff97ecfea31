//! Exact MILP formulation of the joint assignment and scheduling problem in
//! solver-agnostic matrix form, plus conversions between schedules and
//! variable vectors.
//!
//! Variables: assignment binaries `A[i][j]`, sequencing binaries `S[i][j][k]`
//! (j != k, general precedence on the same agent), continuous per-task
//! arrival/start/finish times, and an auxiliary makespan variable. Window
//! starts and ends are folded into variable bounds instead of rows.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::instance::Instance;
use crate::motion::TravelTimes;
use crate::schedule::{CandidateSchedule, TimedSchedule};
use crate::simplex::{LpProblem, LpRow, Sense};

/// Integrality tolerance used when reading binaries back out of LP vectors.
pub const INT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Which constraint family a row came from, with its indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowTag {
    C1 { task: usize },
    C2 { agent: usize, j: usize, k: usize },
    C3 { agent: usize, j: usize, k: usize },
    /// Sequencing completeness repair: co-assigned pairs must pick an order.
    SeqComplete { agent: usize, j: usize, k: usize },
    C4 { agent: usize, from: usize, to: usize },
    C5 { agent: usize, task: usize },
    C6 { task: usize },
    C7 { from: usize, to: usize },
    C9 { agent: usize, task: usize },
    /// t_ms >= finish of task k.
    Makespan { task: usize },
}

impl RowTag {
    pub fn family(&self) -> &'static str {
        match self {
            RowTag::C1 { .. } => "C1",
            RowTag::C2 { .. } => "C2",
            RowTag::C3 { .. } => "C3",
            RowTag::SeqComplete { .. } => "SEQ",
            RowTag::C4 { .. } => "C4",
            RowTag::C5 { .. } => "C5",
            RowTag::C6 { .. } => "C6",
            RowTag::C7 { .. } => "C7",
            RowTag::C9 { .. } => "C9",
            RowTag::Makespan { .. } => "MS",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Minimize the auxiliary makespan variable.
    Makespan,
    /// Minimize the sum of finish times.
    TotalFinishTime,
}

/// The assembled model.
#[derive(Clone, Debug)]
pub struct MilpModel {
    pub n_agents: usize,
    pub n_tasks: usize,
    pub variables: Vec<Variable>,
    pub rows: Vec<ModelRow>,
    pub objective: Vec<f64>,
    pub objective_kind: ObjectiveKind,
    pub big_m: f64,
    /// Window bounds mirrored from the instance (folded into bounds).
    pub window_start: Vec<f64>,
    pub window_end: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("dimension mismatch: schedule has {got} {what}, model expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-integral solution: variable {name} = {value}")]
    NonIntegralSolution { name: String, value: f64 },
    #[error("invalid assignment: task {task} has {count} assigned agents")]
    InvalidAssignment { task: usize, count: usize },
}

impl MilpModel {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn a_idx(&self, agent: usize, task: usize) -> usize {
        agent * self.n_tasks + task
    }

    /// Sequencing binary S^i_{jk}; requires j != k.
    pub fn s_idx(&self, agent: usize, j: usize, k: usize) -> usize {
        debug_assert_ne!(j, k);
        let nt = self.n_tasks;
        let base = self.n_agents * nt;
        let col = if k < j { k } else { k - 1 };
        base + agent * nt * (nt - 1) + j * (nt - 1) + col
    }

    pub fn t_arrival_idx(&self, task: usize) -> usize {
        self.time_base() + task
    }

    pub fn t_start_idx(&self, task: usize) -> usize {
        self.time_base() + self.n_tasks + task
    }

    pub fn t_finish_idx(&self, task: usize) -> usize {
        self.time_base() + 2 * self.n_tasks + task
    }

    pub fn t_makespan_idx(&self) -> usize {
        self.time_base() + 3 * self.n_tasks
    }

    fn time_base(&self) -> usize {
        self.n_agents * self.n_tasks + self.n_agents * self.n_tasks * (self.n_tasks - 1)
    }

    /// LP relaxation: same rows and bounds, integrality dropped.
    pub fn to_lp(&self) -> LpProblem {
        LpProblem {
            n_vars: self.n_vars(),
            objective: self.objective.clone(),
            lower: self.variables.iter().map(|v| v.lower).collect(),
            upper: self.variables.iter().map(|v| v.upper).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| LpRow {
                    coeffs: r.coeffs.clone(),
                    sense: r.sense,
                    rhs: r.rhs,
                })
                .collect(),
        }
    }

    /// Rows and bounds violated by `vec` beyond `tol`, with the excess.
    pub fn violations(&self, vec: &[f64], tol: f64) -> Vec<(RowTag, f64)> {
        let mut out = Vec::new();
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * vec[j]).sum();
            let excess = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            if excess > tol {
                out.push((row.tag, excess));
            }
        }
        out
    }

    /// Bound violations of `vec` beyond `tol`: (variable index, excess).
    pub fn bound_violations(&self, vec: &[f64], tol: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (j, v) in self.variables.iter().enumerate() {
            let below = v.lower - vec[j];
            let above = vec[j] - v.upper;
            let excess = below.max(above);
            if excess > tol {
                out.push((j, excess));
            }
        }
        out
    }

    /// Writes the model in LP text format for cross-checking against
    /// external solvers. Decimals carry 15 significant digits.
    pub fn write_lp(&self, path: &Path) -> std::io::Result<()> {
        let num = |x: f64| {
            if x == x.trunc() && x.abs() < 1e15 {
                format!("{}", x)
            } else {
                format!("{:.14e}", x)
            }
        };
        let mut s = String::from("Minimize\n obj:");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                s.push_str(&format!(" + {} {}", num(c), self.variables[j].name));
            }
        }
        s.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            s.push_str(&format!(" r{}_{}:", row.tag.family().to_lowercase(), r));
            for &(j, a) in &row.coeffs {
                if a >= 0.0 {
                    s.push_str(&format!(" + {} {}", num(a), self.variables[j].name));
                } else {
                    s.push_str(&format!(" - {} {}", num(-a), self.variables[j].name));
                }
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            s.push_str(&format!(" {} {}\n", op, num(row.rhs)));
        }
        s.push_str("Bounds\n");
        for v in &self.variables {
            if v.upper.is_finite() {
                s.push_str(&format!(" {} <= {} <= {}\n", num(v.lower), v.name, num(v.upper)));
            } else {
                s.push_str(&format!(" {} <= {}\n", num(v.lower), v.name));
            }
        }
        s.push_str("Binaries\n");
        for v in &self.variables {
            if v.kind == VarKind::Binary {
                s.push(' ');
                s.push_str(&v.name);
                s.push('\n');
            }
        }
        s.push_str("End\n");
        fs::write(path, s)
    }
}

/// Big-M constant: latest window end, plus the total worst-case execution
/// time, plus the sum of the N_T largest travel-time entries, plus the
/// largest start-to-task travel time, plus the largest wait offset.
///
/// Why this is sufficient: in any feasible schedule every finish time is at
/// most max_k e_k (C10 folds it into the bounds), so the left sides that big-M
/// must dominate -- t^F_j + t^T_{ijk} in C4, t^T_{ik} in C5, t^F_j + W_{jk} in
/// C7, and t^S_k + t^E_{ik} in C9 -- are each at most
/// max_e + max_travel + max_wait + max_exec, which this sum exceeds, while all
/// time variables are nonnegative. Deactivated rows therefore never bind.
pub fn big_m(inst: &Instance, tt: &TravelTimes) -> f64 {
    let max_e = inst.horizon();
    let sum_exec: f64 = (0..inst.n_tasks())
        .map(|k| {
            (0..inst.n_agents())
                .map(|i| inst.durations[i][k])
                .fold(0.0f64, f64::max)
        })
        .sum();

    let mut travel_entries: Vec<f64> = Vec::new();
    for i in 0..inst.n_agents() {
        for k in 0..inst.n_tasks() {
            travel_entries.push(tt.from_start(i, k));
            for j in 0..inst.n_tasks() {
                travel_entries.push(tt.between(i, j, k));
            }
        }
    }
    travel_entries.sort_by(|a, b| b.total_cmp(a));
    let sum_travel: f64 = travel_entries.iter().take(inst.n_tasks()).sum();

    let max_start_travel = (0..inst.n_agents())
        .flat_map(|i| (0..inst.n_tasks()).map(move |k| (i, k)))
        .map(|(i, k)| tt.from_start(i, k))
        .fold(0.0f64, f64::max);
    let max_wait = inst
        .wait
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);

    max_e + sum_exec + sum_travel + max_start_travel + max_wait
}

/// Builds the full model: C1 cover rows, C2/C3 mutual-exclusion rows plus the
/// sequencing-completeness repair, big-M-guarded C4/C5 arrival rows, C6
/// start-after-arrival rows, C7 wait rows (emitted only for active order
/// pairs), big-M-guarded C9 duration rows, window bounds folded into the
/// start/finish variables, and makespan linking rows for the objective.
pub fn build(inst: &Instance, tt: &TravelTimes, objective_kind: ObjectiveKind) -> MilpModel {
    let na = inst.n_agents();
    let nt = inst.n_tasks();
    let m = big_m(inst, tt);

    let mut variables = Vec::new();
    for i in 0..na {
        for j in 0..nt {
            variables.push(Variable {
                name: format!("a_{i}_{j}"),
                kind: VarKind::Binary,
                lower: 0.0,
                upper: 1.0,
            });
        }
    }
    for i in 0..na {
        for j in 0..nt {
            for k in 0..nt {
                if j != k {
                    variables.push(Variable {
                        name: format!("s_{i}_{j}_{k}"),
                        kind: VarKind::Binary,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
            }
        }
    }
    for k in 0..nt {
        variables.push(Variable {
            name: format!("ta_{k}"),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
    }
    for k in 0..nt {
        // C8 folded into the lower bound.
        variables.push(Variable {
            name: format!("ts_{k}"),
            kind: VarKind::Continuous,
            lower: inst.tasks[k].window_start,
            upper: f64::INFINITY,
        });
    }
    for k in 0..nt {
        // C10 folded into the upper bound.
        variables.push(Variable {
            name: format!("tf_{k}"),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: inst.tasks[k].window_end,
        });
    }
    variables.push(Variable {
        name: "t_ms".to_string(),
        kind: VarKind::Continuous,
        lower: 0.0,
        upper: f64::INFINITY,
    });

    let mut model = MilpModel {
        n_agents: na,
        n_tasks: nt,
        variables,
        rows: Vec::new(),
        objective: Vec::new(),
        objective_kind,
        big_m: m,
        window_start: inst.tasks.iter().map(|t| t.window_start).collect(),
        window_end: inst.tasks.iter().map(|t| t.window_end).collect(),
    };
    debug_assert_eq!(
        model.n_vars(),
        na * nt + na * nt * (nt - 1) + 3 * nt + 1
    );

    // C1: every task assigned exactly once.
    for j in 0..nt {
        let coeffs = (0..na).map(|i| (model.a_idx(i, j), 1.0)).collect();
        model.rows.push(ModelRow {
            coeffs,
            sense: Sense::Eq,
            rhs: 1.0,
            tag: RowTag::C1 { task: j },
        });
    }

    // C2/C3 and the completeness repair, per agent and unordered pair.
    for i in 0..na {
        for j in 0..nt {
            for k in (j + 1)..nt {
                let s_jk = model.s_idx(i, j, k);
                let s_kj = model.s_idx(i, k, j);
                let a_ij = model.a_idx(i, j);
                let a_ik = model.a_idx(i, k);
                model.rows.push(ModelRow {
                    coeffs: vec![(s_jk, 1.0), (s_kj, 1.0), (a_ij, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::C2 { agent: i, j, k },
                });
                model.rows.push(ModelRow {
                    coeffs: vec![(s_jk, 1.0), (s_kj, 1.0), (a_ik, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::C3 { agent: i, j, k },
                });
                // Without this row two co-assigned tasks could go unordered,
                // making C4 vacuous and letting executions overlap.
                model.rows.push(ModelRow {
                    coeffs: vec![(s_jk, 1.0), (s_kj, 1.0), (a_ij, -1.0), (a_ik, -1.0)],
                    sense: Sense::Ge,
                    rhs: -1.0,
                    tag: RowTag::SeqComplete { agent: i, j, k },
                });
            }
        }
    }

    // C4: t^A_k >= -M(3 - A_ij - A_ik - S^i_jk) + t^F_j + t^T_ijk.
    for i in 0..na {
        for j in 0..nt {
            for k in 0..nt {
                if j == k {
                    continue;
                }
                model.rows.push(ModelRow {
                    coeffs: vec![
                        (model.t_arrival_idx(k), 1.0),
                        (model.t_finish_idx(j), -1.0),
                        (model.a_idx(i, j), -m),
                        (model.a_idx(i, k), -m),
                        (model.s_idx(i, j, k), -m),
                    ],
                    sense: Sense::Ge,
                    rhs: tt.between(i, j, k) - 3.0 * m,
                    tag: RowTag::C4 {
                        agent: i,
                        from: j,
                        to: k,
                    },
                });
            }
        }
    }

    // C5: t^A_k >= -M(1 - A_ik) + t^T_ik.
    for i in 0..na {
        for k in 0..nt {
            model.rows.push(ModelRow {
                coeffs: vec![(model.t_arrival_idx(k), 1.0), (model.a_idx(i, k), -m)],
                sense: Sense::Ge,
                rhs: tt.from_start(i, k) - m,
                tag: RowTag::C5 { agent: i, task: k },
            });
        }
    }

    // C6: start after arrival.
    for k in 0..nt {
        model.rows.push(ModelRow {
            coeffs: vec![(model.t_start_idx(k), 1.0), (model.t_arrival_idx(k), -1.0)],
            sense: Sense::Ge,
            rhs: 0.0,
            tag: RowTag::C6 { task: k },
        });
    }

    // C7: only for active order pairs; rows with O_jk = 0 are vacuous at this
    // M and omitted.
    for j in 0..nt {
        for k in 0..nt {
            if inst.precedence[j][k] == 1 {
                model.rows.push(ModelRow {
                    coeffs: vec![(model.t_start_idx(k), 1.0), (model.t_finish_idx(j), -1.0)],
                    sense: Sense::Ge,
                    rhs: inst.wait[j][k],
                    tag: RowTag::C7 { from: j, to: k },
                });
            }
        }
    }

    // C9, big-M guarded per agent so exactly the assigned agent's duration
    // binds: t^F_k >= t^S_k + t^E_ik - M(1 - A_ik).
    for i in 0..na {
        for k in 0..nt {
            model.rows.push(ModelRow {
                coeffs: vec![
                    (model.t_finish_idx(k), 1.0),
                    (model.t_start_idx(k), -1.0),
                    (model.a_idx(i, k), -m),
                ],
                sense: Sense::Ge,
                rhs: inst.durations[i][k] - m,
                tag: RowTag::C9 { agent: i, task: k },
            });
        }
    }

    // Makespan linking rows.
    for k in 0..nt {
        model.rows.push(ModelRow {
            coeffs: vec![(model.t_makespan_idx(), 1.0), (model.t_finish_idx(k), -1.0)],
            sense: Sense::Ge,
            rhs: 0.0,
            tag: RowTag::Makespan { task: k },
        });
    }

    let mut objective = vec![0.0; model.n_vars()];
    match objective_kind {
        ObjectiveKind::Makespan => objective[model.t_makespan_idx()] = 1.0,
        ObjectiveKind::TotalFinishTime => {
            for k in 0..nt {
                objective[model.t_finish_idx(k)] = 1.0;
            }
        }
    }
    model.objective = objective;
    model
}

/// Closed-form row count of [`build`] for a given size and order-edge count.
pub fn expected_row_count(na: usize, nt: usize, n_order_edges: usize) -> usize {
    let pairs = nt * (nt - 1) / 2;
    nt                      // C1
        + 3 * na * pairs    // C2 + C3 + completeness
        + na * nt * (nt - 1) // C4
        + na * nt           // C5
        + nt                // C6
        + n_order_edges     // C7
        + na * nt           // C9
        + nt // makespan links
}

/// Maps a timed schedule onto the model's variable vector: A from the
/// assignment, S from the per-agent total orders (all ordered pairs), time
/// variables copied from the schedule, t_ms set to the latest finish.
pub fn schedule_to_vector(model: &MilpModel, ts: &TimedSchedule) -> Result<Vec<f64>, MilpError> {
    let cand = &ts.candidate;
    if cand.n_agents() != model.n_agents {
        return Err(MilpError::DimensionMismatch {
            what: "agents",
            got: cand.n_agents(),
            expected: model.n_agents,
        });
    }
    if cand.n_tasks != model.n_tasks {
        return Err(MilpError::DimensionMismatch {
            what: "tasks",
            got: cand.n_tasks,
            expected: model.n_tasks,
        });
    }
    cand.check().map_err(|_| MilpError::InvalidAssignment {
        task: 0,
        count: 0,
    })?;

    let mut vec = vec![0.0f64; model.n_vars()];
    for (i, order) in cand.orders.iter().enumerate() {
        for (pos, &j) in order.iter().enumerate() {
            vec[model.a_idx(i, j)] = 1.0;
            for &k in order.iter().skip(pos + 1) {
                vec[model.s_idx(i, j, k)] = 1.0;
            }
        }
    }
    for k in 0..model.n_tasks {
        vec[model.t_arrival_idx(k)] = ts.arrival[k];
        vec[model.t_start_idx(k)] = ts.start[k];
        vec[model.t_finish_idx(k)] = ts.finish[k];
    }
    vec[model.t_makespan_idx()] = ts.makespan;
    Ok(vec)
}

/// Reconstructs a timed schedule from a variable vector with integral
/// binaries: per-agent orders sorted by start time (ties by task id), times
/// copied from the vector, feasibility from the folded window bounds.
pub fn vector_to_schedule(model: &MilpModel, vec: &[f64]) -> Result<TimedSchedule, MilpError> {
    if vec.len() != model.n_vars() {
        return Err(MilpError::DimensionMismatch {
            what: "variables",
            got: vec.len(),
            expected: model.n_vars(),
        });
    }
    for (j, var) in model.variables.iter().enumerate() {
        if var.kind == VarKind::Binary {
            let v = vec[j];
            if (v - v.round()).abs() > INT_TOL {
                return Err(MilpError::NonIntegralSolution {
                    name: var.name.clone(),
                    value: v,
                });
            }
        }
    }

    let nt = model.n_tasks;
    let mut agent_of = vec![usize::MAX; nt];
    for k in 0..nt {
        let assigned: Vec<usize> = (0..model.n_agents)
            .filter(|&i| vec[model.a_idx(i, k)].round() == 1.0)
            .collect();
        if assigned.len() != 1 {
            return Err(MilpError::InvalidAssignment {
                task: k,
                count: assigned.len(),
            });
        }
        agent_of[k] = assigned[0];
    }

    let mut orders: Vec<Vec<usize>> = vec![Vec::new(); model.n_agents];
    for k in 0..nt {
        orders[agent_of[k]].push(k);
    }
    for order in &mut orders {
        order.sort_by(|&a, &b| {
            vec[model.t_start_idx(a)]
                .total_cmp(&vec[model.t_start_idx(b)])
                .then(a.cmp(&b))
        });
    }
    let candidate = CandidateSchedule {
        n_tasks: nt,
        orders,
    };

    let arrival: Vec<f64> = (0..nt).map(|k| vec[model.t_arrival_idx(k)]).collect();
    let start: Vec<f64> = (0..nt).map(|k| vec[model.t_start_idx(k)]).collect();
    let finish: Vec<f64> = (0..nt).map(|k| vec[model.t_finish_idx(k)]).collect();
    let feasible: Vec<bool> = (0..nt)
        .map(|k| finish[k] <= model.window_end[k] + INT_TOL)
        .collect();
    let makespan = finish.iter().copied().fold(0.0f64, f64::max);
    let horizon = model.window_end.iter().copied().fold(0.0f64, f64::max);

    Ok(TimedSchedule {
        candidate,
        arrival,
        start,
        finish,
        feasible,
        makespan,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::instance::{Agent, Task};
    use crate::motion::{build_roadmap, travel_times};
    use crate::schedule::{check_constraints, simulate};

    fn tiny_instance(na: usize, task_xs: &[f64]) -> (Instance, TravelTimes) {
        let agents = (0..na)
            .map(|id| Agent {
                id,
                start: Point::new(id as f64, 0.0),
                velocity: 1.0,
            })
            .collect::<Vec<_>>();
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
            durations: vec![vec![2.0; nt]; na],
            precedence: vec![vec![0; nt]; nt],
            wait: vec![vec![0.0; nt]; nt],
            agents,
            tasks,
            obstacles: vec![],
            seed: 0,
        };
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        (inst, tt)
    }

    #[test]
    fn big_m_on_single_task_fixture() {
        // e_0 = 10, exec = 2, travel = 3: M = 10 + 2 + 3 + 3 + 0 = 18.
        let (mut inst, _) = tiny_instance(1, &[3.0]);
        inst.tasks[0].window_end = 10.0;
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        assert_eq!(big_m(&inst, &tt), 18.0);
    }

    #[test]
    fn big_m_degenerate_and_homogeneous() {
        // All-zero travel: task at the agent's start.
        let (mut inst, _) = tiny_instance(1, &[0.0]);
        inst.tasks[0].window_end = 10.0;
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        assert_eq!(big_m(&inst, &tt), 10.0 + 2.0);

        // Scaling every time datum by 10 scales M by 10.
        let (mut inst, tt) = tiny_instance(2, &[3.0, 7.0]);
        let m1 = big_m(&inst, &tt);
        let mut tt10 = tt.clone();
        for i in 0..2 {
            for k in 0..2 {
                tt10.from_start[i][k] *= 10.0;
                for j in 0..2 {
                    tt10.between[i][j][k] *= 10.0;
                }
            }
        }
        for t in &mut inst.tasks {
            t.window_end *= 10.0;
        }
        for row in &mut inst.durations {
            for d in row.iter_mut() {
                *d *= 10.0;
            }
        }
        let m10 = big_m(&inst, &tt10);
        assert!((m10 - 10.0 * m1).abs() < 1e-9 * m10);
    }

    #[test]
    fn smallest_model_shape() {
        let (inst, tt) = tiny_instance(1, &[3.0]);
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        assert_eq!(model.n_vars(), 5); // a_00, ta_0, ts_0, tf_0, t_ms
        assert!(model
            .variables
            .iter()
            .all(|v| !v.name.starts_with("s_")));
        assert_eq!(model.rows.len(), expected_row_count(1, 1, 0));
    }

    #[test]
    fn two_by_two_counts_match_closed_form() {
        let (inst, tt) = tiny_instance(2, &[3.0, 7.0]);
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        assert_eq!(model.n_vars(), 2 * 2 + 2 * 2 * 1 + 3 * 2 + 1);
        assert_eq!(model.rows.len(), expected_row_count(2, 2, 0));
        for row in &model.rows {
            for &(j, _) in &row.coeffs {
                assert!(j < model.n_vars());
            }
        }
    }

    #[test]
    fn simulated_schedule_satisfies_every_row() {
        let (mut inst, _) = tiny_instance(2, &[3.0, 7.0, 5.0]);
        inst.precedence[0][2] = 1;
        inst.wait[0][2] = 1.5;
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        let cand = CandidateSchedule::new(3, vec![vec![0, 2], vec![1]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert!(ts.all_feasible());
        assert!(check_constraints(&inst, &tt, &ts).is_empty());
        let vec = schedule_to_vector(&model, &ts).unwrap();
        assert!(model.violations(&vec, 1e-6).is_empty());
        assert!(model.bound_violations(&vec, 1e-6).is_empty());
    }

    #[test]
    fn infeasible_schedule_violates_bounds() {
        let (mut inst, _) = tiny_instance(1, &[5.0]);
        inst.tasks[0].window_end = 4.0; // finish will be 7
        let rm = build_roadmap(&inst, 0, 1000.0, 0).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        let cand = CandidateSchedule::new(1, vec![vec![0]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        assert!(!ts.feasible[0]);
        let vec = schedule_to_vector(&model, &ts).unwrap();
        let bv = model.bound_violations(&vec, 1e-6);
        assert!(bv.iter().any(|&(j, _)| j == model.t_finish_idx(0)));
    }

    #[test]
    fn vector_round_trip_preserves_assignment_and_order() {
        let (inst, tt) = tiny_instance(2, &[3.0, 7.0, 5.0]);
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        let cand = CandidateSchedule::new(3, vec![vec![2, 0], vec![1]]).unwrap();
        let ts = simulate(&inst, &tt, &cand);
        let vec = schedule_to_vector(&model, &ts).unwrap();
        let back = vector_to_schedule(&model, &vec).unwrap();
        assert_eq!(back.candidate, cand);
        let vec2 = schedule_to_vector(&model, &back).unwrap();
        assert_eq!(vec, vec2);
    }

    #[test]
    fn fractional_binary_is_rejected() {
        let (inst, tt) = tiny_instance(2, &[3.0, 7.0]);
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        let mut vec = vec![0.0; model.n_vars()];
        vec[model.a_idx(0, 0)] = 0.5;
        assert!(matches!(
            vector_to_schedule(&model, &vec),
            Err(MilpError::NonIntegralSolution { .. })
        ));
    }

    #[test]
    fn one_agent_two_tasks_orders_by_start() {
        let (inst, tt) = tiny_instance(1, &[3.0, 7.0]);
        let model = build(&inst, &tt, ObjectiveKind::Makespan);
        let mut vec = vec![0.0; model.n_vars()];
        vec[model.a_idx(0, 0)] = 1.0;
        vec[model.a_idx(0, 1)] = 1.0;
        vec[model.s_idx(0, 0, 1)] = 1.0;
        vec[model.t_start_idx(0)] = 3.0;
        vec[model.t_start_idx(1)] = 9.0;
        let ts = vector_to_schedule(&model, &vec).unwrap();
        assert_eq!(ts.candidate.orders[0], vec![0, 1]);
    }
}
