//! Random `d`-regular simple graphs and their structural statistics.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("n*d must be even (n={n}, d={d})")]
    OddProduct { n: usize, d: usize },
    #[error("degree d={d} must be smaller than n={n}")]
    DegreeTooLarge { n: usize, d: usize },
    #[error("degree d={d} must be at least 3")]
    DegreeTooSmall { d: usize },
    #[error("no simple graph after {attempts} restarts (n={n}, d={d})")]
    RejectionLimit { n: usize, d: usize, attempts: u64 },
    #[error("cycle length {k} exceeds the enumeration cap of 5")]
    KTooLarge { k: usize },
    #[error("cycle length {k} is below 3")]
    KTooSmall { k: usize },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("malformed graph file: {0}")]
    Parse(String),
}

/// Which sampler produced a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    /// Uniform pairing of half-edges, restarting on any loop or multi-edge.
    #[default]
    Pairing,
    /// Incremental pairing that only ever forms admissible edges, restarting
    /// when stuck. Asymptotically uniform; feasible for larger `d`.
    StegerWormald,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Pairing => "pairing",
            Generator::StegerWormald => "steger-wormald",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pairing" => Some(Generator::Pairing),
            "steger-wormald" => Some(Generator::StegerWormald),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub generator: String,
    pub rejections: u64,
}

/// A simple `d`-regular graph in compressed adjacency form.
///
/// Neighbor lists are sorted ascending so every traversal order is
/// reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    d: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    provenance: Provenance,
}

impl Graph {
    /// Builds a graph from an undirected edge list, checking simplicity and
    /// regularity. Any degree is accepted here; `d` is inferred.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], provenance: Provenance) -> Result<Self, GraphError> {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::Invalid(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(GraphError::Invalid(format!("self-loop at {u}")));
            }
            lists[u].push(v as u32);
            lists[v].push(u as u32);
        }
        let d = lists.first().map_or(0, Vec::len);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(n * d);
        offsets.push(0);
        for (v, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if list.len() != d {
                return Err(GraphError::Invalid(format!("vertex {v} has degree {} != {d}", list.len())));
            }
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(GraphError::Invalid(format!("multi-edge at vertex {v}")));
            }
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Ok(Graph { n, d, offsets, targets, provenance })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges, Provenance { seed: 0, generator: "complete".into(), rejections: 0 })
            .expect("complete graph is regular")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3);
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges, Provenance { seed: 0, generator: "cycle".into(), rejections: 0 })
            .expect("cycle is 2-regular")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n * self.d / 2);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if (v as usize) > u {
                    out.push((u, v as usize));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        if (self.n * self.d) % 2 == 1 {
            return Err(GraphError::OddProduct { n: self.n, d: self.d });
        }
        for u in 0..self.n {
            let nb = self.neighbors(u);
            if nb.len() != self.d {
                return Err(GraphError::Invalid(format!("vertex {u} has degree {}", nb.len())));
            }
            if !nb.windows(2).all(|w| w[0] < w[1]) {
                return Err(GraphError::Invalid(format!("neighbors of {u} not strictly sorted")));
            }
            for &v in nb {
                let v = v as usize;
                if v >= self.n || v == u || !self.has_edge(v, u) {
                    return Err(GraphError::Invalid(format!("bad edge ({u},{v})")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            n: self.n,
            d: self.d,
            seed: self.provenance.seed,
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(s).map_err(|e| GraphError::Parse(e.to_string()))?;
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        if let Some(bad) = edges.iter().find(|(i, j)| i >= j) {
            return Err(GraphError::Parse(format!("edge {:?} is not ordered i<j", bad)));
        }
        if !edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(GraphError::Parse("edges are not sorted lexicographically".into()));
        }
        let prov = Provenance { seed: file.seed, generator: "file".into(), rejections: 0 };
        let g = Graph::from_edges(file.n, &edges, prov)?;
        if g.d != file.d && file.n > 0 {
            return Err(GraphError::Parse(format!("declared d={} but edges give d={}", file.d, g.d)));
        }
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    d: usize,
    seed: u64,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub generator: Generator,
    /// Restart cap; `None` picks [`default_restart_limit`].
    pub max_restarts: Option<u64>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { generator: Generator::Pairing, max_restarts: None }
    }
}

/// Restart cap for the pairing sampler: at least `10 d²`, and at least 50
/// times the inverse of the asymptotic acceptance probability
/// `exp(-(d²-1)/4)` so a failure is practically impossible where the
/// sampler is usable at all.
pub fn default_restart_limit(d: usize) -> u64 {
    let d = d as f64;
    let inverse_acceptance = ((d * d - 1.0) / 4.0).exp();
    let scaled = (50.0 * inverse_acceptance).ceil().min(1e7);
    (10.0 * d * d).max(scaled) as u64
}

pub fn generate_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    generate_regular_with(n, d, seed, &GenerateOptions::default())
}

pub fn generate_regular_with(n: usize, d: usize, seed: u64, opts: &GenerateOptions) -> Result<Graph, GraphError> {
    if d < 3 {
        return Err(GraphError::DegreeTooSmall { d });
    }
    if (n * d) % 2 == 1 {
        return Err(GraphError::OddProduct { n, d });
    }
    if d >= n {
        return Err(GraphError::DegreeTooLarge { n, d });
    }
    let limit = opts.max_restarts.unwrap_or_else(|| default_restart_limit(d));
    let mut rng = rng_from_seed(seed);
    let mut adj = FlatAdjacency::new(n, d);
    for attempt in 0..=limit {
        adj.clear();
        let ok = match opts.generator {
            Generator::Pairing => pairing_attempt(&mut adj, &mut rng),
            Generator::StegerWormald => steger_wormald_attempt(&mut adj, &mut rng),
        };
        if ok {
            let prov = Provenance { seed, generator: opts.generator.name().into(), rejections: attempt };
            return Ok(adj.into_graph(prov));
        }
    }
    Err(GraphError::RejectionLimit { n, d, attempts: limit })
}

struct FlatAdjacency {
    n: usize,
    d: usize,
    nbr: Vec<u32>,
    deg: Vec<u8>,
}

impl FlatAdjacency {
    fn new(n: usize, d: usize) -> Self {
        Self { n, d, nbr: vec![0; n * d], deg: vec![0; n] }
    }

    fn clear(&mut self) {
        self.deg.iter_mut().for_each(|x| *x = 0);
    }

    #[inline]
    fn adjacent(&self, u: usize, v: usize) -> bool {
        let row = &self.nbr[u * self.d..u * self.d + self.deg[u] as usize];
        row.contains(&(v as u32))
    }

    #[inline]
    fn push(&mut self, u: usize, v: usize) {
        self.nbr[u * self.d + self.deg[u] as usize] = v as u32;
        self.deg[u] += 1;
        self.nbr[v * self.d + self.deg[v] as usize] = u as u32;
        self.deg[v] += 1;
    }

    fn into_graph(self, provenance: Provenance) -> Graph {
        let mut offsets = Vec::with_capacity(self.n + 1);
        let mut targets = self.nbr;
        offsets.push(0);
        for v in 0..self.n {
            targets[v * self.d..(v + 1) * self.d].sort_unstable();
            offsets.push((v + 1) * self.d);
        }
        Graph { n: self.n, d: self.d, offsets, targets, provenance }
    }
}

/// Draws a uniform perfect matching of the `n d` half-edges point by point
/// and gives up at the first loop or repeated edge. Stopping early does not
/// change the law of accepted matchings.
fn pairing_attempt(adj: &mut FlatAdjacency, rng: &mut impl Rng) -> bool {
    let d = adj.d;
    let mut points: Vec<u32> = (0..(adj.n * d) as u32).collect();
    let len = points.len();
    let mut i = 0;
    while i < len {
        let j = rng.random_range(i + 1..len);
        points.swap(i + 1, j);
        let u = points[i] as usize / d;
        let v = points[i + 1] as usize / d;
        if u == v || adj.adjacent(u, v) {
            return false;
        }
        adj.push(u, v);
        i += 2;
    }
    true
}

fn steger_wormald_attempt(adj: &mut FlatAdjacency, rng: &mut impl Rng) -> bool {
    let d = adj.d;
    let mut free: Vec<u32> = (0..(adj.n * d) as u32).collect();
    while !free.is_empty() {
        let len = free.len();
        let mut paired = false;
        for _ in 0..64 {
            let a = rng.random_range(0..len);
            let b = rng.random_range(0..len);
            let (u, v) = (free[a] as usize / d, free[b] as usize / d);
            if a != b && u != v && !adj.adjacent(u, v) {
                adj.push(u, v);
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                free.swap_remove(hi);
                free.swap_remove(lo);
                paired = true;
                break;
            }
        }
        if paired {
            continue;
        }
        // Rare when many points remain: enumerate admissible pairs and pick one uniformly.
        let mut admissible = Vec::new();
        for a in 0..len {
            for b in a + 1..len {
                let (u, v) = (free[a] as usize / d, free[b] as usize / d);
                if u != v && !adj.adjacent(u, v) {
                    admissible.push((a, b));
                }
            }
        }
        if admissible.is_empty() {
            return false;
        }
        let (a, b) = admissible[rng.random_range(0..admissible.len())];
        adj.push(free[a] as usize / d, free[b] as usize / d);
        free.swap_remove(b);
        free.swap_remove(a);
    }
    true
}

/// Counts simple cycles of each length `3..=k_max`, each cycle once.
///
/// Every cycle is enumerated from its smallest vertex, in both directions,
/// through vertices larger than the start; the count is then halved.
pub fn count_cycles(g: &Graph, k_max: usize) -> Result<BTreeMap<usize, u64>, GraphError> {
    if k_max > 5 {
        return Err(GraphError::KTooLarge { k: k_max });
    }
    if k_max < 3 {
        return Err(GraphError::KTooSmall { k: k_max });
    }
    let mut directed = vec![0u64; k_max + 1];
    let mut path = Vec::with_capacity(k_max);
    for s in 0..g.n() {
        path.clear();
        path.push(s);
        extend_paths(g, s, &mut path, k_max, &mut directed);
    }
    Ok((3..=k_max).map(|k| (k, directed[k] / 2)).collect())
}

fn extend_paths(g: &Graph, start: usize, path: &mut Vec<usize>, k_max: usize, counts: &mut [u64]) {
    let tip = *path.last().expect("nonempty path");
    for &w in g.neighbors(tip) {
        let w = w as usize;
        if w == start && path.len() >= 3 {
            counts[path.len()] += 1;
        } else if w > start && path.len() < k_max && !path.contains(&w) {
            path.push(w);
            extend_paths(g, start, path, k_max, counts);
            path.pop();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diameter {
    Finite(usize),
    Disconnected,
}

fn bfs_distances(g: &Graph, src: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) -> (usize, u32) {
    dist.iter_mut().for_each(|x| *x = u32::MAX);
    dist[src] = 0;
    queue.clear();
    queue.push_back(src);
    let (mut seen, mut far) = (1, 0);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            let w = w as usize;
            if dist[w] == u32::MAX {
                dist[w] = dist[u] + 1;
                far = far.max(dist[w]);
                seen += 1;
                queue.push_back(w);
            }
        }
    }
    (seen, far)
}

/// Largest BFS eccentricity over all vertices.
pub fn diameter(g: &Graph) -> Diameter {
    let mut dist = vec![0u32; g.n()];
    let mut queue = VecDeque::new();
    let mut best = 0;
    for v in 0..g.n() {
        let (seen, far) = bfs_distances(g, v, &mut dist, &mut queue);
        if seen < g.n() {
            return Diameter::Disconnected;
        }
        best = best.max(far as usize);
    }
    Diameter::Finite(best)
}

pub fn component_count(g: &Graph) -> usize {
    let mut dist = vec![u32::MAX; g.n()];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for v in 0..g.n() {
        if dist[v] != u32::MAX {
            continue;
        }
        count += 1;
        dist[v] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = 0;
                    queue.push_back(w as usize);
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats {
    pub cycle_counts: BTreeMap<usize, u64>,
    pub diameter: Diameter,
    pub component_count: usize,
}

pub fn stats(g: &Graph, k_max: usize) -> Result<GraphStats, GraphError> {
    Ok(GraphStats { cycle_counts: count_cycles(g, k_max)?, diameter: diameter(g), component_count: component_count(g) })
}
