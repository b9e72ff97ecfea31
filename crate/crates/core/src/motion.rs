//! Shared roadmap over the obstacle field and precomputed collision-free
//! travel times between agent starts and task locations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_intersects_interior, Point, Rect};
use crate::instance::Instance;
use crate::util::rng_from_seed;

/// Default number of uniform samples added to the anchor set.
pub const DEFAULT_SAMPLES: usize = 200;
/// Retries with doubled connection radius when anchors end up disconnected.
pub const RADIUS_RETRIES: usize = 5;

/// A sampled roadmap. Nodes `0..n_agents` are agent start anchors, nodes
/// `n_agents..n_agents+n_tasks` are task anchors, the rest are free samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Roadmap {
    pub nodes: Vec<Point>,
    /// Adjacency list per node: (neighbor, Euclidean length in meters).
    pub edges: Vec<Vec<(usize, f64)>>,
    pub n_agents: usize,
    pub n_tasks: usize,
    pub rng_seed: u64,
    pub radius: f64,
}

impl Roadmap {
    pub fn agent_anchor(&self, i: usize) -> usize {
        i
    }

    pub fn task_anchor(&self, k: usize) -> usize {
        self.n_agents + k
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().map(|adj| adj.len()).sum::<usize>() / 2
    }

    /// Debug dump (nodes, edges, lengths) in the same structured-text
    /// conventions as the instance format.
    pub fn write_debug(&self, path: &Path) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Dump<'a> {
            schema_version: u32,
            n_agents: usize,
            n_tasks: usize,
            radius: f64,
            nodes: &'a [Point],
            edges: Vec<(usize, usize, f64)>,
        }
        let mut edges = Vec::new();
        for (u, adj) in self.edges.iter().enumerate() {
            for &(v, len) in adj {
                if u < v {
                    edges.push((u, v, len));
                }
            }
        }
        let dump = Dump {
            schema_version: 1,
            n_agents: self.n_agents,
            n_tasks: self.n_tasks,
            radius: self.radius,
            nodes: &self.nodes,
            edges,
        };
        fs::write(path, serde_json::to_string_pretty(&dump).unwrap())
    }
}

/// Collision-free travel times derived from roadmap shortest paths.
///
/// `from_start[i][k]` is the time agent `i` needs from its start to task `k`;
/// `between[i][j][k]` the time it needs from task `j` to task `k`. The
/// underlying shortest-path distances (meters) are kept alongside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TravelTimes {
    pub from_start: Vec<Vec<f64>>,
    pub between: Vec<Vec<Vec<f64>>>,
    pub start_dist: Vec<Vec<f64>>,
    pub task_dist: Vec<Vec<f64>>,
}

impl TravelTimes {
    pub fn from_start(&self, agent: usize, task: usize) -> f64 {
        self.from_start[agent][task]
    }

    pub fn between(&self, agent: usize, from: usize, to: usize) -> f64 {
        self.between[agent][from][to]
    }
}

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("roadmap disconnected after {retries} radius-doubling retries")]
    RoadmapDisconnected { retries: usize },
    #[error("anchor pair ({0}, {1}) unreachable on the roadmap")]
    AnchorUnreachable(usize, usize),
}

/// True iff the open segment (p, q) passes through any obstacle's interior.
/// Touching a boundary does not count; see [`segment_intersects_interior`]
/// for the exact convention.
pub fn segment_collides(p: &Point, q: &Point, obstacles: &[Rect]) -> bool {
    obstacles
        .iter()
        .any(|o| segment_intersects_interior(p, q, o))
}

/// Builds a roadmap over the instance's obstacle field: anchors for every
/// agent start and task position plus `n_samples` uniform collision-free
/// samples, with an edge between any two nodes within `radius` whose
/// connecting segment is collision-free. If the anchors are not mutually
/// connected the radius is doubled and sampling repeated, up to
/// [`RADIUS_RETRIES`] times.
pub fn build_roadmap(
    inst: &Instance,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Roadmap, MotionError> {
    assert!(radius > 0.0, "connection radius must be positive");
    let mut rng = rng_from_seed(seed ^ 0x524f_4144_4d41_50);
    let mut radius = radius;

    for _ in 0..=RADIUS_RETRIES {
        let roadmap = sample_roadmap(inst, n_samples, radius, seed, &mut rng);
        if anchors_connected(&roadmap) {
            return Ok(roadmap);
        }
        radius *= 2.0;
    }
    Err(MotionError::RoadmapDisconnected {
        retries: RADIUS_RETRIES,
    })
}

fn sample_roadmap(
    inst: &Instance,
    n_samples: usize,
    radius: f64,
    seed: u64,
    rng: &mut impl Rng,
) -> Roadmap {
    let mut nodes: Vec<Point> = Vec::with_capacity(inst.n_agents() + inst.n_tasks() + n_samples);
    nodes.extend(inst.agents.iter().map(|a| a.start));
    nodes.extend(inst.tasks.iter().map(|t| t.position));

    let ws = &inst.workspace;
    let mut placed = 0;
    let mut budget = n_samples.saturating_mul(100).max(1000);
    while placed < n_samples && budget > 0 {
        budget -= 1;
        let p = Point::new(
            rng.gen_range(ws.min.x..=ws.max.x),
            rng.gen_range(ws.min.y..=ws.max.y),
        );
        if !inst.obstacles.iter().any(|o| o.contains(&p)) {
            nodes.push(p);
            placed += 1;
        }
    }

    let n = nodes.len();
    let mut edges = vec![Vec::new(); n];
    for u in 0..n {
        for v in (u + 1)..n {
            let len = nodes[u].dist(&nodes[v]);
            if len <= radius && !segment_collides(&nodes[u], &nodes[v], &inst.obstacles) {
                edges[u].push((v, len));
                edges[v].push((u, len));
            }
        }
    }

    Roadmap {
        nodes,
        edges,
        n_agents: inst.n_agents(),
        n_tasks: inst.n_tasks(),
        rng_seed: seed,
        radius,
    }
}

fn anchors_connected(rm: &Roadmap) -> bool {
    let n_anchors = rm.n_agents + rm.n_tasks;
    if n_anchors <= 1 {
        return true;
    }
    let mut seen = vec![false; rm.nodes.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in &rm.edges[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen[..n_anchors].iter().all(|&s| s)
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap via reversed compare; ties broken by node index for determinism.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths with a binary heap.
pub fn dijkstra(rm: &Roadmap, source: usize) -> Vec<f64> {
    let n = rm.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &rm.edges[u] {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    dist
}

/// Computes all travel-time tables from roadmap shortest paths.
///
/// Distances between tasks are made exactly symmetric by running Dijkstra
/// from each task anchor and keeping the run from the lower-indexed task for
/// each pair.
pub fn travel_times(inst: &Instance, rm: &Roadmap) -> Result<TravelTimes, MotionError> {
    let na = inst.n_agents();
    let nt = inst.n_tasks();

    let mut task_dist = vec![vec![0.0f64; nt]; nt];
    let mut start_dist = vec![vec![0.0f64; nt]; na];

    for j in 0..nt {
        let dist = dijkstra(rm, rm.task_anchor(j));
        for k in j..nt {
            let d = dist[rm.task_anchor(k)];
            if !d.is_finite() {
                return Err(MotionError::AnchorUnreachable(
                    rm.task_anchor(j),
                    rm.task_anchor(k),
                ));
            }
            task_dist[j][k] = d;
            task_dist[k][j] = d;
        }
        for i in 0..na {
            let d = dist[rm.agent_anchor(i)];
            if !d.is_finite() {
                return Err(MotionError::AnchorUnreachable(
                    rm.agent_anchor(i),
                    rm.task_anchor(j),
                ));
            }
            start_dist[i][j] = d;
        }
    }

    let mut from_start = vec![vec![0.0f64; nt]; na];
    let mut between = vec![vec![vec![0.0f64; nt]; nt]; na];
    for (i, agent) in inst.agents.iter().enumerate() {
        let v = agent.velocity;
        for k in 0..nt {
            from_start[i][k] = start_dist[i][k] / v;
            for j in 0..nt {
                between[i][j][k] = task_dist[j][k] / v;
            }
        }
    }

    Ok(TravelTimes {
        from_start,
        between,
        start_dist,
        task_dist,
    })
}

/// The canonical travel-time pipeline used by generation, solving and the
/// benchmark: default sampling parameters seeded by the instance seed, so
/// every consumer of an instance sees identical travel times. Obstacle-free
/// instances use the complete graph over anchors (straight-line distances).
pub fn default_travel_times(inst: &Instance) -> Result<TravelTimes, MotionError> {
    let rm = default_roadmap(inst)?;
    travel_times(inst, &rm)
}

pub fn default_roadmap(inst: &Instance) -> Result<Roadmap, MotionError> {
    let diag = inst.workspace.diagonal();
    if inst.obstacles.is_empty() {
        build_roadmap(inst, 0, diag * 1.001, inst.seed)
    } else {
        build_roadmap(inst, DEFAULT_SAMPLES, diag / 4.0, inst.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::instance::{Agent, Task};

    fn free_instance(agent_pos: &[(f64, f64)], task_pos: &[(f64, f64)]) -> Instance {
        let agents = agent_pos
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Agent {
                id,
                start: Point::new(x, y),
                velocity: 1.0,
            })
            .collect::<Vec<_>>();
        let tasks = task_pos
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Task {
                id,
                position: Point::new(x, y),
                window_start: 0.0,
                window_end: 1e6,
            })
            .collect::<Vec<_>>();
        let nt = tasks.len();
        Instance {
            schema_version: 1,
            workspace: Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0)),
            durations: vec![vec![1.0; nt]; agents.len()],
            precedence: vec![vec![0; nt]; nt],
            wait: vec![vec![0.0; nt]; nt],
            agents,
            tasks,
            obstacles: vec![],
            seed: 0,
        }
    }

    #[test]
    fn free_space_travel_times_are_euclidean() {
        let mut inst = free_instance(&[(0.0, 0.0)], &[(0.0, 0.0), (3.0, 4.0)]);
        let rm = build_roadmap(&inst, 0, 100.0, 1).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        assert!((tt.between(0, 0, 1) - 5.0).abs() < 1e-12);
        assert!((tt.between(0, 1, 0) - 5.0).abs() < 1e-12);

        inst.agents[0].velocity = 2.0;
        let tt = travel_times(&inst, &rm).unwrap();
        assert!((tt.between(0, 0, 1) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn roadmap_is_deterministic() {
        let inst = free_instance(&[(1.0, 1.0), (9.0, 9.0)], &[(2.0, 7.0), (8.0, 3.0)]);
        let a = build_roadmap(&inst, 50, 3.0, 7).unwrap();
        let b = build_roadmap(&inst, 50, 3.0, 7).unwrap();
        assert_eq!(a.nodes.len(), b.nodes.len());
        for (pa, pb) in a.nodes.iter().zip(&b.nodes) {
            assert_eq!(pa, pb);
        }
        assert_eq!(a.n_edges(), b.n_edges());
    }

    #[test]
    fn wall_blocks_or_detours() {
        // Near-full-height wall between the two anchors.
        let mut inst = free_instance(&[(1.0, 5.0)], &[(9.0, 5.0)]);
        inst.obstacles = vec![Rect::new(Point::new(4.0, 0.5), Point::new(6.0, 10.0))];
        match build_roadmap(&inst, 60, 2.5, 3) {
            Ok(rm) => {
                let tt = travel_times(&inst, &rm).unwrap();
                // Any path must detour below the wall.
                assert!(tt.from_start(0, 0) > 8.0);
            }
            Err(MotionError::RoadmapDisconnected { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn detour_never_beats_straight_line() {
        let mut inst = free_instance(&[(1.0, 5.0)], &[(9.0, 5.0), (5.0, 9.5)]);
        inst.obstacles = vec![Rect::new(Point::new(4.0, 2.0), Point::new(6.0, 8.0))];
        let rm = build_roadmap(&inst, 120, 3.0, 11).unwrap();
        let tt = travel_times(&inst, &rm).unwrap();
        for k in 0..2 {
            let straight = inst.agents[0].start.dist(&inst.tasks[k].position);
            assert!(tt.start_dist[0][k] >= straight - 1e-9);
        }
        let straight = inst.tasks[0].position.dist(&inst.tasks[1].position);
        assert!(tt.task_dist[0][1] >= straight - 1e-9);
    }

    #[test]
    fn dijkstra_matches_bellman_ford() {
        let mut inst = free_instance(&[(1.0, 1.0), (9.0, 9.0)], &[(2.0, 8.0), (8.0, 2.0)]);
        inst.obstacles = vec![Rect::new(Point::new(4.0, 4.0), Point::new(6.0, 6.0))];
        let rm = build_roadmap(&inst, 80, 3.0, 5).unwrap();
        for src in 0..4 {
            let d = dijkstra(&rm, src);
            let bf = bellman_ford(&rm, src);
            for (a, b) in d.iter().zip(&bf) {
                if a.is_finite() || b.is_finite() {
                    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    // Test-only oracle: edge relaxation until fixpoint.
    fn bellman_ford(rm: &Roadmap, source: usize) -> Vec<f64> {
        let n = rm.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if !dist[u].is_finite() {
                    continue;
                }
                for &(v, len) in &rm.edges[u] {
                    let nd = dist[u] + len;
                    if nd < dist[v] {
                        dist[v] = nd;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }
}
