//! Graph worlds: edge-list ingestion, hop distances, lazy-walk passive
//! dynamics with a home-base reset, and the target-tracking cost stream.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma};

use crate::chains::{sample_next, CostFunction, StochasticMatrix};
use crate::error::{Error, Result};
use crate::online::CostStream;
use crate::scalar::Scalar;

/// Default probability of staying put in the lazy walk.
pub const DEFAULT_STAY_PROB: f64 = 0.01;
/// Default weight of the home-base reset.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Connected undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut seen = HashSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let g = Self { n, edges, adjacency };
        let reached = g.bfs_from(0).iter().filter(|d| d.is_some()).count();
        if reached != n {
            return Err(Error::InvalidGraph(format!(
                "graph is disconnected: {reached} of {n} vertices reachable from 0"
            )));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    fn bfs_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Parses a whitespace-separated, 0-based edge list, one edge per line.
/// Blank lines and lines starting with `#` are skipped. The vertex count is
/// one more than the largest index mentioned.
pub fn load_graph(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected two vertex indices, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("`{s}` is not a vertex index"),
            })
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    let n = edges
        .iter()
        .map(|&(a, b)| a.max(b) + 1)
        .max()
        .ok_or_else(|| Error::InvalidGraph("edge list is empty".into()))?;
    Graph::new(n, edges)
}

/// `rows × cols` 4-connected lattice, vertex `r * cols + c`.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("dimensions must be positive, got {rows}x{cols}"),
        });
    }
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// All-pairs hop counts by one breadth-first search per source, and the diameter.
pub fn bfs_distances(graph: &Graph) -> (Vec<Vec<usize>>, usize) {
    let dist: Vec<Vec<usize>> = (0..graph.n())
        .map(|s| {
            graph
                .bfs_from(s)
                .into_iter()
                .map(|d| d.expect("graphs are connected"))
                .collect()
        })
        .collect();
    let diameter = dist.iter().flatten().copied().max().unwrap_or(0);
    (dist, diameter)
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in (0, 1), got {v}"),
        });
    }
    Ok(())
}

/// `(1 − δ) P₁ + δ P₀` where `P₁` stays with probability `stay_prob` and
/// otherwise moves to a uniformly chosen neighbor, and `P₀` jumps to `home`.
pub fn build_passive<T: Scalar>(graph: &Graph, stay_prob: f64, delta: f64, home: usize) -> Result<StochasticMatrix<T>> {
    check_open_unit("stay_prob", stay_prob)?;
    check_open_unit("delta", delta)?;
    lazy_walk_with_reset(graph, stay_prob, delta, home)
}

/// [`build_passive`] without the `δ > 0` requirement, so the pure lazy walk
/// (`δ = 0`) can be built.
pub fn lazy_walk_with_reset<T: Scalar>(
    graph: &Graph,
    stay_prob: f64,
    delta: f64,
    home: usize,
) -> Result<StochasticMatrix<T>> {
    let n = graph.n();
    if home >= n {
        return Err(Error::IndexOutOfRange { index: home, n });
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must lie in [0, 1), got {delta}"),
        });
    }
    let mut rows = vec![vec![0.0f64; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        let deg = graph.degree(x);
        if deg == 0 {
            row[x] = 1.0 - delta;
        } else {
            row[x] = (1.0 - delta) * stay_prob;
            let step = (1.0 - delta) * (1.0 - stay_prob) / deg as f64;
            for &y in graph.neighbors(x) {
                row[y] = step;
            }
        }
        row[home] += delta;
    }
    StochasticMatrix::new(
        rows.into_iter()
            .map(|r| r.into_iter().map(T::lit).collect())
            .collect(),
    )
}

/// A target doing a random walk on the graph; the state cost is the
/// normalized hop distance from the agent to the target.
#[derive(Debug, Clone)]
pub struct TrackingEnv<T: Scalar = f64> {
    graph: Graph,
    target_kernel: StochasticMatrix<T>,
    distances: Vec<Vec<usize>>,
    diameter: usize,
    /// Target positions, pre-simulated when the environment is created.
    path: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

/// Samples the target's kernel (rows flat-Dirichlet over closed
/// neighborhoods) and its initial vertex (uniform), then pre-simulates
/// `horizon` target positions.
pub fn make_tracking_env<T: Scalar>(
    graph: &Graph,
    seed: u64,
    dirichlet_alpha: f64,
    horizon: usize,
) -> Result<TrackingEnv<T>> {
    let gamma = Gamma::new(dirichlet_alpha, 1.0).map_err(|e| Error::InvalidParameter {
        name: "dirichlet_alpha",
        reason: e.to_string(),
    })?;
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![T::zero(); n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        let closed: Vec<usize> = std::iter::once(x).chain(graph.neighbors(x).iter().copied()).collect();
        let draws: Vec<f64> = loop {
            let d: Vec<f64> = closed.iter().map(|_| gamma.sample(&mut rng)).collect();
            if d.iter().sum::<f64>() > 0.0 {
                break d;
            }
        };
        let total: f64 = draws.iter().sum();
        for (&y, g) in closed.iter().zip(draws) {
            row[y] = T::lit(g / total);
        }
    }
    let target_kernel = StochasticMatrix::new(rows)?;
    let (distances, diameter) = bfs_distances(graph);
    let mut env = TrackingEnv {
        graph: graph.clone(),
        target_kernel,
        distances,
        diameter,
        path: Vec::with_capacity(horizon),
        cursor: 0,
        rng,
    };
    let start = env.rng.random_range(0..n);
    env.path.push(start);
    env.extend_to(horizon.max(1))?;
    Ok(env)
}

impl<T: Scalar> TrackingEnv<T> {
    fn extend_to(&mut self, len: usize) -> Result<()> {
        while self.path.len() < len {
            let last = *self.path.last().unwrap();
            let next = sample_next(&self.target_kernel, last, &mut self.rng)?;
            self.path.push(next);
        }
        Ok(())
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn target_kernel(&self) -> &StochasticMatrix<T> {
        &self.target_kernel
    }

    pub fn distances(&self) -> &[Vec<usize>] {
        &self.distances
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Pre-simulated target positions.
    pub fn target_path(&self) -> &[usize] {
        &self.path
    }

    /// Position of the target at the next step to be emitted.
    pub fn target_state(&self) -> usize {
        self.path[self.cursor.min(self.path.len() - 1)]
    }

    /// The first `len` cost functions, without advancing the stream.
    pub fn costs(&mut self, len: usize) -> Result<Vec<CostFunction<T>>> {
        self.extend_to(len)?;
        self.path[..len].iter().map(|&s| tracking_cost(self, s)).collect()
    }
}

/// `f(x) = d(x, target) / diameter`.
pub fn tracking_cost<T: Scalar>(env: &TrackingEnv<T>, target: usize) -> Result<CostFunction<T>> {
    let n = env.graph.n();
    if target >= n {
        return Err(Error::IndexOutOfRange { index: target, n });
    }
    if env.diameter == 0 {
        return Ok(CostFunction::zeros(n));
    }
    let diam = T::from_usize(env.diameter).unwrap();
    CostFunction::new(
        env.distances[target]
            .iter()
            .map(|&d| T::from_usize(d).unwrap() / diam)
            .collect(),
    )
}

impl<T: Scalar> CostStream<T> for TrackingEnv<T> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn next_cost(&mut self) -> CostFunction<T> {
        self.extend_to(self.cursor + 1)
            .expect("target kernel rows are valid distributions");
        let s = self.path[self.cursor];
        self.cursor += 1;
        tracking_cost(self, s).expect("target positions are valid vertices")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{dobrushin_coefficient, ergodicity_report};

    fn path3() -> Graph {
        load_graph("0 1\n1 2").unwrap()
    }

    #[test]
    fn load_path_graph() {
        let g = path3();
        assert_eq!(g.n(), 3);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn load_graph_errors() {
        assert!(load_graph("").is_err());
        assert!(load_graph("# only a comment\n").is_err());
        assert!(matches!(load_graph("0 1\n2 3"), Err(Error::InvalidGraph(_))));
        assert!(matches!(load_graph("0 1\n1 0"), Err(Error::InvalidGraph(_))));
        assert!(matches!(load_graph("0 1\n1 x"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_graph("0 1 2"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_graph("1 1"), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn load_graph_skips_comments() {
        let g = load_graph("# header\n0 1\n\n  # indented\n1 2\n").unwrap();
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn single_vertex_graph_is_connected() {
        let g = Graph::new(1, vec![]).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(bfs_distances(&g).1, 0);
    }

    #[test]
    fn distances_on_small_graphs() {
        let (d, diam) = bfs_distances(&path3());
        assert_eq!(d[0][2], 2);
        assert_eq!(diam, 2);
        let k4 = Graph::new(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let (d, diam) = bfs_distances(&k4);
        assert_eq!(diam, 1);
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, usize::from(i != j));
            }
        }
    }

    #[test]
    fn grid_distances_match_manhattan() {
        let g = grid_graph(6, 6).unwrap();
        let (d, diam) = bfs_distances(&g);
        assert_eq!(diam, 10);
        for a in 0..36usize {
            for b in 0..36usize {
                let manhattan = (a / 6).abs_diff(b / 6) + (a % 6).abs_diff(b % 6);
                assert_eq!(d[a][b], manhattan);
            }
        }
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_graph(1, 1).unwrap().n(), 1);
        let g = grid_graph(2, 2).unwrap();
        assert_eq!((g.n(), g.edges().len()), (4, 4));
        let g = grid_graph(10, 10).unwrap();
        assert_eq!((g.n(), g.edges().len()), (100, 2 * 10 * 10 - 10 - 10));
        assert!(grid_graph(0, 3).is_err());
    }

    #[test]
    fn pure_lazy_walk_rows() {
        let p: StochasticMatrix = lazy_walk_with_reset(&path3(), 0.5, 0.0, 0).unwrap();
        assert_eq!(p.row(1), &[0.25, 0.5, 0.25]);
        assert_eq!(p.row(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn passive_mixes_in_home_column() {
        let p: StochasticMatrix = build_passive(&path3(), 0.5, 0.1, 2).unwrap();
        // row 0: 0.9·(0.5, 0.5, 0) + 0.1·e_2
        assert!((p.get(0, 0) - 0.45).abs() < 1e-15);
        assert!((p.get(0, 2) - 0.1).abs() < 1e-15);
        for row in p.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!(build_passive::<f64>(&path3(), 0.0, 0.1, 0).is_err());
        assert!(build_passive::<f64>(&path3(), 0.5, 0.0, 0).is_err());
        assert!(build_passive::<f64>(&path3(), 0.5, 0.1, 3).is_err());
    }

    #[test]
    fn default_passive_is_ergodic_and_contracting() {
        for g in [grid_graph(10, 10).unwrap(), grid_graph(3, 7).unwrap(), path3()] {
            let p: StochasticMatrix = build_passive(&g, DEFAULT_STAY_PROB, DEFAULT_DELTA, 0).unwrap();
            let r = ergodicity_report(&p);
            assert!(r.irreducible && r.aperiodic);
            assert!(dobrushin_coefficient(&p) <= 0.99 + 1e-12);
        }
    }

    #[test]
    fn tracking_env_kernel_support() {
        let g = grid_graph(4, 5).unwrap();
        let env: TrackingEnv = make_tracking_env(&g, 17, 1.0, 50).unwrap();
        for x in 0..g.n() {
            let row = env.target_kernel().row(x);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (y, &p) in row.iter().enumerate() {
                if y != x && !g.neighbors(x).contains(&y) {
                    assert_eq!(p, 0.0);
                }
            }
        }
        assert_eq!(env.target_path().len(), 50);
        for w in env.target_path().windows(2) {
            assert!(w[0] == w[1] || g.neighbors(w[0]).contains(&w[1]));
        }
    }

    #[test]
    fn tracking_env_is_reproducible() {
        let g = grid_graph(5, 5).unwrap();
        let a: TrackingEnv = make_tracking_env(&g, 99, 1.0, 200).unwrap();
        let b: TrackingEnv = make_tracking_env(&g, 99, 1.0, 200).unwrap();
        assert_eq!(a.target_path(), b.target_path());
        let c: TrackingEnv = make_tracking_env(&g, 100, 1.0, 200).unwrap();
        assert_ne!(a.target_path(), c.target_path());
    }

    #[test]
    fn large_alpha_gives_near_uniform_rows() {
        let g = grid_graph(3, 3).unwrap();
        let env: TrackingEnv = make_tracking_env(&g, 1, 1e6, 1).unwrap();
        for x in 0..g.n() {
            let k = (g.degree(x) + 1) as f64;
            for &y in env.target_kernel().support(x) {
                assert!((env.target_kernel().get(x, y) - 1.0 / k).abs() < 0.01);
            }
        }
    }

    #[test]
    fn tracking_costs() {
        let env: TrackingEnv = make_tracking_env(&path3(), 0, 1.0, 5).unwrap();
        assert_eq!(tracking_cost(&env, 0).unwrap().values(), &[0.0, 0.5, 1.0]);
        assert_eq!(tracking_cost(&env, 1).unwrap().values()[1], 0.0);
        let g = grid_graph(6, 6).unwrap();
        let env: TrackingEnv = make_tracking_env(&g, 0, 1.0, 5).unwrap();
        let f = tracking_cost(&env, 0).unwrap();
        assert_eq!(f.values()[35], 1.0);
        assert_eq!(f.max(), 1.0);
        assert!(tracking_cost(&env, 36).is_err());
    }

    #[test]
    fn stream_emits_precomputed_costs() {
        let g = grid_graph(4, 4).unwrap();
        let mut env: TrackingEnv = make_tracking_env(&g, 5, 1.0, 30).unwrap();
        let expected = env.costs(30).unwrap();
        for f in expected {
            assert_eq!(env.next_cost(), f);
        }
        // Past the pre-simulated horizon the walk keeps going.
        let extra = env.next_cost();
        assert_eq!(extra.len(), 16);
    }
}
