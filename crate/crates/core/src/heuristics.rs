//! Earliest-deadline-first warm-start generators: plain EDF (ignores task
//! dependencies) and constraint-aware EDF (schedules only dependency-ready
//! tasks and accounts for wait offsets).

use crate::instance::Instance;
use crate::motion::TravelTimes;
use crate::schedule::CandidateSchedule;

#[derive(Clone, Copy)]
struct AgentTail {
    last_task: Option<usize>,
    finish: f64,
}

/// Finish time for task `k` if appended to agent `i`'s current tail.
/// `extra_lb` is an additional lower bound on the start time (precedence
/// waits for the constraint-aware variant; 0 for plain EDF).
fn tail_finish(
    inst: &Instance,
    tt: &TravelTimes,
    tail: &AgentTail,
    agent: usize,
    task: usize,
    extra_lb: f64,
) -> f64 {
    let arrival = match tail.last_task {
        None => tt.from_start(agent, task),
        Some(last) => tail.finish + tt.between(agent, last, task),
    };
    let start = arrival.max(inst.tasks[task].window_start).max(extra_lb);
    start + inst.durations[agent][task]
}

fn pick_best_agent(
    inst: &Instance,
    tt: &TravelTimes,
    tails: &[AgentTail],
    task: usize,
    extra_lb: f64,
) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, tail) in tails.iter().enumerate() {
        let finish = tail_finish(inst, tt, tail, i, task, extra_lb);
        if finish < best.1 {
            best = (i, finish);
        }
    }
    best
}

/// Greedy earliest-deadline-first assignment: tasks in ascending window-end
/// order (ties by id), each appended to the agent that finishes it soonest
/// (ties by agent id). Task dependencies are ignored entirely, so the result
/// is always a complete candidate but may be infeasible in time or order.
pub fn edf(inst: &Instance, tt: &TravelTimes) -> CandidateSchedule {
    let mut sequence: Vec<usize> = (0..inst.n_tasks()).collect();
    sequence.sort_by(|&a, &b| {
        inst.tasks[a]
            .window_end
            .total_cmp(&inst.tasks[b].window_end)
            .then(a.cmp(&b))
    });

    let mut tails = vec![
        AgentTail {
            last_task: None,
            finish: 0.0
        };
        inst.n_agents()
    ];
    let mut orders = vec![Vec::new(); inst.n_agents()];
    for task in sequence {
        let (agent, finish) = pick_best_agent(inst, tt, &tails, task, 0.0);
        orders[agent].push(task);
        tails[agent] = AgentTail {
            last_task: Some(task),
            finish,
        };
    }
    CandidateSchedule::new(inst.n_tasks(), orders).expect("edf covers every task once")
}

/// Constraint-aware EDF: at each step only tasks whose predecessors are all
/// scheduled are eligible; the earliest-deadline ready task (ties by id) goes
/// to the agent that finishes it soonest including wait offsets (ties by
/// agent id). Acyclicity of the precedence graph guarantees termination, and
/// the result never deadlocks under simulation.
pub fn constraint_aware_edf(inst: &Instance, tt: &TravelTimes) -> CandidateSchedule {
    let n = inst.n_tasks();
    let mut indeg = vec![0usize; n];
    for j in 0..n {
        for k in 0..n {
            if inst.precedence[j][k] == 1 {
                indeg[k] += 1;
            }
        }
    }

    let mut tails = vec![
        AgentTail {
            last_task: None,
            finish: 0.0
        };
        inst.n_agents()
    ];
    let mut orders = vec![Vec::new(); inst.n_agents()];
    let mut finish_times = vec![f64::INFINITY; n];
    let mut scheduled = vec![false; n];

    for _ in 0..n {
        let ready = (0..n)
            .filter(|&k| !scheduled[k] && indeg[k] == 0)
            .min_by(|&a, &b| {
                inst.tasks[a]
                    .window_end
                    .total_cmp(&inst.tasks[b].window_end)
                    .then(a.cmp(&b))
            })
            .expect("acyclic precedence always leaves a ready task");

        let mut extra_lb: f64 = 0.0;
        for j in inst.predecessors(ready) {
            extra_lb = extra_lb.max(finish_times[j] + inst.wait[j][ready]);
        }
        let (agent, finish) = pick_best_agent(inst, tt, &tails, ready, extra_lb);
        orders[agent].push(ready);
        tails[agent] = AgentTail {
            last_task: Some(ready),
            finish,
        };
        finish_times[ready] = finish;
        scheduled[ready] = true;
        for k in 0..n {
            if inst.precedence[ready][k] == 1 {
                indeg[k] -= 1;
            }
        }
    }
    CandidateSchedule::new(n, orders).expect("constraint-aware edf covers every task once")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::instance::{generate, Agent, GenConfig, Task};
    use crate::motion::{build_roadmap, default_travel_times, travel_times};
    use crate::schedule::simulate;

    fn fixture(
        agent_pos: &[(f64, f64)],
        tasks: &[((f64, f64), f64)], // (position, window_end)
        exec: f64,
    ) -> (Instance, TravelTimes) {
        let agents = agent_pos
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Agent {
                id,
                start: Point::new(x, y),
                velocity: 1.0,
            })
            .collect::<Vec<_>>();
        let tasks: Vec<Task> = tasks
            .iter()
            .enumerate()
            .map(|(id, &((x, y), e))| Task {
                id,
                position: Point::new(x, y),
                window_start: 0.0,
                window_end: e,
            })
            .collect();
        let nt = tasks.len();
        let inst = Instance {
            schema_version: 1,
            workspace: Rect::new(Point::new(0.0, 0.0), Point::new(50.0, 50.0)),
            durations: vec![vec![exec; nt]; agents.len()],
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
    fn edf_processes_by_deadline() {
        // Deadlines {8, 3, 5} on one agent: order must be [1, 2, 0].
        let (inst, tt) = fixture(
            &[(0.0, 0.0)],
            &[((1.0, 0.0), 8.0), ((2.0, 0.0), 3.0), ((3.0, 0.0), 5.0)],
            1.0,
        );
        let cand = edf(&inst, &tt);
        assert_eq!(cand.orders[0], vec![1, 2, 0]);
    }

    #[test]
    fn edf_tie_breaks_by_agent_id() {
        // Two identical agents, two identical tasks equidistant from both.
        let (inst, tt) = fixture(
            &[(0.0, 0.0), (10.0, 0.0)],
            &[((5.0, 1.0), 20.0), ((5.0, 1.0), 20.0)],
            1.0,
        );
        // Both tasks at (5,1): distance sqrt(26) from each agent.
        let cand = edf(&inst, &tt);
        assert_eq!(cand.orders[0], vec![0]);
        assert_eq!(cand.orders[1], vec![1]);
    }

    #[test]
    fn ca_edf_respects_chain_despite_deadlines() {
        // Chain 0 -> 1 -> 2 with inverted deadlines (task 0 latest).
        let (mut inst, tt) = fixture(
            &[(0.0, 0.0)],
            &[((1.0, 0.0), 30.0), ((2.0, 0.0), 20.0), ((3.0, 0.0), 10.0)],
            1.0,
        );
        inst.precedence[0][1] = 1;
        inst.precedence[1][2] = 1;
        let cand = constraint_aware_edf(&inst, &tt);
        assert_eq!(cand.orders[0], vec![0, 1, 2]);
        // Plain EDF would pick the inverted order and deadlock the chain.
        let plain = edf(&inst, &tt);
        assert_eq!(plain.orders[0], vec![2, 1, 0]);
        let ts = simulate(&inst, &tt, &plain);
        assert!(ts.makespan.is_infinite());
    }

    #[test]
    fn diamond_sink_is_scheduled_last() {
        let (mut inst, tt) = fixture(
            &[(0.0, 0.0), (1.0, 0.0)],
            &[
                ((2.0, 0.0), 50.0),
                ((3.0, 0.0), 10.0),
                ((4.0, 0.0), 10.0),
                ((5.0, 0.0), 5.0),
            ],
            1.0,
        );
        for (j, k) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            inst.precedence[j][k] = 1;
        }
        let cand = constraint_aware_edf(&inst, &tt);
        // Reconstruct the global scheduling order from simulated start times.
        let ts = simulate(&inst, &tt, &cand);
        assert!(ts.makespan.is_finite());
        let last = (0..4).max_by(|&a, &b| ts.start[a].total_cmp(&ts.start[b])).unwrap();
        assert_eq!(last, 3);
    }

    #[test]
    fn heuristics_agree_without_precedence() {
        for seed in 0..10 {
            let config = GenConfig {
                precedence_density: 0.0,
                ..GenConfig::default()
            };
            let inst = generate(&config, seed).unwrap();
            let tt = default_travel_times(&inst).unwrap();
            assert_eq!(edf(&inst, &tt), constraint_aware_edf(&inst, &tt));
        }
    }

    #[test]
    fn ca_edf_never_deadlocks() {
        for seed in 0..10 {
            let config = GenConfig {
                precedence_density: 0.4,
                window_tightness: 0.9,
                ..GenConfig::default()
            };
            let inst = generate(&config, seed).unwrap();
            let tt = default_travel_times(&inst).unwrap();
            let cand = constraint_aware_edf(&inst, &tt);
            let ts = simulate(&inst, &tt, &cand);
            assert!(ts.makespan.is_finite());
        }
    }
}
