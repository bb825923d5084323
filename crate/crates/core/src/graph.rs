//! Simple undirected graphs, the generated families, hop distances,
//! geodesics and the level-wise ray extraction.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Undirected simple graph on dense vertex ids `0..n` with sorted
/// neighbour lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops, duplicate edges and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({v}, {})", w[0])));
            }
        }
        Ok(Self {
            adjacency,
            edge_count: edges.len(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Breadth-first distances from `source`; `u32::MAX` marks unreachable
    /// vertices.
    pub fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            for &w in &self.adjacency[u] {
                if dist[w] == u32::MAX {
                    dist[w] = next;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Generator family of a truncated graph, parsed from its tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Layers `k = 1..=depth`, layer `k` a path on `2^(k-1)+1` vertices.
    Example1 {
        depth: usize,
    },
    /// Cliques `V_0..V_depth` with `|V_k| = 2^k` and binary parent links.
    Example2 {
        depth: usize,
    },
    Tree {
        branching: usize,
        depth: usize,
    },
    Cycle {
        n: usize,
    },
    Path {
        n: usize,
    },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Example1 { depth } => write!(f, "example1:depth={depth}"),
            Family::Example2 { depth } => write!(f, "example2:depth={depth}"),
            Family::Tree { branching, depth } => {
                write!(f, "tree:branching={branching},depth={depth}")
            }
            Family::Cycle { n } => write!(f, "cycle:n={n}"),
            Family::Path { n } => write!(f, "path:n={n}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognised family tag `{s}`"));
        let (name, params) = s.split_once(':').ok_or_else(bad)?;
        let mut values = std::collections::BTreeMap::new();
        for kv in params.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: usize = v.parse().map_err(|_| bad())?;
            if values.insert(k, v).is_some() {
                return Err(bad());
            }
        }
        let get = |k: &str| values.get(k).copied().ok_or_else(bad);
        let family = match (name, values.len()) {
            ("example1", 1) => Family::Example1 { depth: get("depth")? },
            ("example2", 1) => Family::Example2 { depth: get("depth")? },
            ("tree", 2) => Family::Tree {
                branching: get("branching")?,
                depth: get("depth")?,
            },
            ("cycle", 1) => Family::Cycle { n: get("n")? },
            ("path", 1) => Family::Path { n: get("n")? },
            _ => return Err(bad()),
        };
        Ok(family)
    }
}

impl Family {
    pub fn generate(&self) -> Result<TruncatedGraph> {
        match *self {
            Family::Example1 { depth } => generate_example1(depth),
            Family::Example2 { depth } => generate_example2(depth),
            Family::Tree { branching, depth } => generate_tree(branching, depth),
            Family::Cycle { n } => generate_cycle(n),
            Family::Path { n } => generate_path(n),
        }
    }
}

/// A finite ball of a generated (or parsed) graph around its root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedGraph {
    graph: Graph,
    root: usize,
    depth: u32,
    family_tag: String,
    layer_of: Option<Vec<u32>>,
}

impl TruncatedGraph {
    /// Wraps a connected graph. `depth` is computed as the eccentricity of
    /// the root.
    pub fn new(graph: Graph, root: usize, family_tag: impl Into<String>, layer_of: Option<Vec<u32>>) -> Result<Self> {
        let family_tag = family_tag.into();
        if graph.vertex_count() == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if root >= graph.vertex_count() {
            return Err(Error::InvalidGraph(format!("root {root} out of range")));
        }
        if family_tag.is_empty() || family_tag.chars().any(char::is_whitespace) {
            return Err(Error::InvalidGraph(format!(
                "family tag `{family_tag}` must be a non-empty token"
            )));
        }
        if let Some(layers) = &layer_of {
            if layers.len() != graph.vertex_count() {
                return Err(Error::InvalidGraph(format!(
                    "{} layer entries for {} vertices",
                    layers.len(),
                    graph.vertex_count()
                )));
            }
        }
        let dist = graph.bfs(root);
        if let Some(v) = dist.iter().position(|&x| x == u32::MAX) {
            return Err(Error::Disconnected {
                source_vertex: root,
                unreachable: v,
            });
        }
        let depth = dist.iter().copied().max().unwrap_or(0);
        Ok(Self {
            graph,
            root,
            depth,
            family_tag,
            layer_of,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Maximal breadth-first distance from the root.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn family_tag(&self) -> &str {
        &self.family_tag
    }

    pub fn family(&self) -> Option<Family> {
        self.family_tag.parse().ok()
    }

    pub fn layer_of(&self) -> Option<&[u32]> {
        self.layer_of.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.graph.neighbors(v)
    }

    /// Radius of the sphere used as the boundary proxy: the largest radius
    /// whose ball is complete in the truncation. For example1 with `L`
    /// layers that is `L - 1`; for the other families it is the depth.
    pub fn boundary_radius(&self) -> u32 {
        match self.family() {
            Some(Family::Example1 { depth }) => (depth as u32).saturating_sub(1).min(self.depth),
            _ => self.depth,
        }
    }

    /// Position in `[0, 1]` of an example1 vertex along its layer.
    pub fn example1_position(&self, v: usize) -> Option<f64> {
        let Some(Family::Example1 { .. }) = self.family() else {
            return None;
        };
        let layers = self.layer_of.as_ref()?;
        let k = layers[v];
        let first = (1usize << (k - 1)) - 1 + (k as usize - 1);
        let i = v - first;
        Some(i as f64 / (1u64 << (k - 1)) as f64)
    }
}

/// Example 1: layer `k` (1-based) is the path `x^k_1 .. x^k_{2^(k-1)+1}`,
/// and `x^k_i` is joined to `x^{k+1}_j` iff `2(i-1)+1 = j`. Vertex ids are
/// layer-major; the root is `x^1_1 = 0`.
pub fn generate_example1(depth: usize) -> Result<TruncatedGraph> {
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "example1 needs depth >= 1 (layer 0 would have 2^-1+1 vertices)".into(),
        ));
    }
    if depth > 24 {
        return Err(Error::InvalidParameter(format!("example1 depth {depth} is too large")));
    }
    let size = |k: usize| (1usize << (k - 1)) + 1;
    let mut offset = vec![0usize; depth + 2];
    for k in 1..=depth {
        offset[k + 1] = offset[k] + size(k);
    }
    let id = |k: usize, i: usize| offset[k] + i - 1;
    let n = offset[depth + 1];
    let mut edges = Vec::new();
    let mut layer_of = vec![0u32; n];
    for k in 1..=depth {
        for i in 1..=size(k) {
            layer_of[id(k, i)] = k as u32;
            if i < size(k) {
                edges.push((id(k, i), id(k, i + 1)));
            }
            if k < depth {
                edges.push((id(k, i), id(k + 1, 2 * (i - 1) + 1)));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    TruncatedGraph::new(graph, 0, Family::Example1 { depth }.to_string(), Some(layer_of))
}

/// Example 2: cliques `V_k` of size `2^k`; the children of the `i`-th
/// vertex of `V_k` are vertices `2i` and `2i+1` of `V_{k+1}`.
pub fn generate_example2(depth: usize) -> Result<TruncatedGraph> {
    if depth > 20 {
        return Err(Error::InvalidParameter(format!("example2 depth {depth} is too large")));
    }
    let offset = |k: usize| (1usize << k) - 1;
    let n = offset(depth + 1);
    let mut edges = Vec::new();
    let mut layer_of = vec![0u32; n];
    for k in 0..=depth {
        let width = 1usize << k;
        for a in 0..width {
            layer_of[offset(k) + a] = k as u32;
            for b in a + 1..width {
                edges.push((offset(k) + a, offset(k) + b));
            }
            if k < depth {
                edges.push((offset(k) + a, offset(k + 1) + 2 * a));
                edges.push((offset(k) + a, offset(k + 1) + 2 * a + 1));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    TruncatedGraph::new(graph, 0, Family::Example2 { depth }.to_string(), Some(layer_of))
}

/// Complete `branching`-ary tree of the given depth in breadth-first order.
pub fn generate_tree(branching: usize, depth: usize) -> Result<TruncatedGraph> {
    if branching < 2 || depth == 0 {
        return Err(Error::InvalidParameter(format!(
            "tree needs branching >= 2 and depth >= 1 (got {branching}, {depth})"
        )));
    }
    let mut edges = Vec::new();
    let mut layer_of = vec![0u32];
    let mut frontier = vec![0usize];
    let mut next_id = 1usize;
    for level in 1..=depth {
        let mut next = Vec::with_capacity(frontier.len() * branching);
        for &u in &frontier {
            for _ in 0..branching {
                edges.push((u, next_id));
                layer_of.push(level as u32);
                next.push(next_id);
                next_id += 1;
                if next_id > 1 << 24 {
                    return Err(Error::InvalidParameter("tree is too large".into()));
                }
            }
        }
        frontier = next;
    }
    let graph = Graph::from_edges(next_id, &edges)?;
    TruncatedGraph::new(graph, 0, Family::Tree { branching, depth }.to_string(), Some(layer_of))
}

pub fn generate_cycle(n: usize) -> Result<TruncatedGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("cycle needs n >= 3 (got {n})")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let graph = Graph::from_edges(n, &edges)?;
    TruncatedGraph::new(graph, 0, Family::Cycle { n }.to_string(), None)
}

pub fn generate_path(n: usize) -> Result<TruncatedGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter("path needs n >= 1".into()));
    }
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    let graph = Graph::from_edges(n, &edges)?;
    TruncatedGraph::new(graph, 0, Family::Path { n }.to_string(), None)
}

/// Dense all-pairs hop distances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceOracle {
    n: usize,
    dist: Vec<u32>,
}

impl DistanceOracle {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.dist[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[u32] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Vertices at distance exactly `r` from `center`, ascending.
    pub fn sphere(&self, center: usize, r: u32) -> Vec<usize> {
        (0..self.n).filter(|&v| self.get(center, v) == r).collect()
    }
}

/// Breadth-first search from every vertex (in parallel).
pub fn all_pairs_distances(g: &Graph) -> Result<DistanceOracle> {
    let n = g.vertex_count();
    let mut dist = vec![0u32; n * n];
    dist.par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(s, row)| row.copy_from_slice(&g.bfs(s)));
    if let Some(idx) = dist.iter().position(|&x| x == u32::MAX) {
        return Err(Error::Disconnected {
            source_vertex: idx / n,
            unreachable: idx % n,
        });
    }
    Ok(DistanceOracle { n, dist })
}

/// A vertex sequence together with its geodesic flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphPath {
    vertices: Vec<usize>,
    geodesic: bool,
}

impl GraphPath {
    /// Validates adjacency of consecutive vertices and records whether the
    /// path length equals the distance of its endpoints.
    pub fn new(g: &Graph, d: &DistanceOracle, vertices: Vec<usize>) -> Result<Self> {
        let (&first, &last) = match (vertices.first(), vertices.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidParameter("empty path".into())),
        };
        if let Some(w) = vertices.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
            return Err(Error::InvalidParameter(format!(
                "path step {} -> {} is not an edge",
                w[0], w[1]
            )));
        }
        let geodesic = d.get(first, last) as usize + 1 == vertices.len();
        Ok(Self { vertices, geodesic })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<usize> {
        self.vertices
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() == 1
    }

    pub fn is_geodesic(&self) -> bool {
        self.geodesic
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }
}

/// Lexicographically least geodesic: at each step the least-id neighbour
/// one step closer to `y`.
pub fn one_geodesic(g: &Graph, d: &DistanceOracle, x: usize, y: usize) -> GraphPath {
    GraphPath {
        vertices: lex_geodesic(g, d, x, y),
        geodesic: true,
    }
}

pub(crate) fn lex_geodesic(g: &Graph, d: &DistanceOracle, x: usize, y: usize) -> Vec<usize> {
    let mut path = Vec::with_capacity(d.get(x, y) as usize + 1);
    path.push(x);
    let mut cur = x;
    while cur != y {
        let target = d.get(cur, y) - 1;
        cur = *g
            .neighbors(cur)
            .iter()
            .find(|&&w| d.get(w, y) == target)
            .expect("a connected graph has a neighbour one step closer");
        path.push(cur);
    }
    path
}

/// Result of [`all_geodesics`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicSet {
    pub paths: Vec<GraphPath>,
    /// The cap was reached; `paths.len()` is then only a lower bound.
    pub truncated: bool,
}

impl GeodesicSet {
    pub fn count(&self) -> usize {
        self.paths.len()
    }
}

/// All geodesics from `x` to `y` in lexicographic order, at most `cap`.
pub fn all_geodesics(g: &Graph, d: &DistanceOracle, x: usize, y: usize, cap: usize) -> GeodesicSet {
    fn walk(
        g: &Graph,
        d: &DistanceOracle,
        y: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<GraphPath>,
        cap: usize,
        truncated: &mut bool,
    ) {
        if *truncated {
            return;
        }
        let cur = *prefix.last().unwrap();
        if cur == y {
            if out.len() == cap {
                *truncated = true;
                return;
            }
            out.push(GraphPath {
                vertices: prefix.clone(),
                geodesic: true,
            });
            return;
        }
        let target = d.get(cur, y) - 1;
        for &w in g.neighbors(cur) {
            if d.get(w, y) == target {
                prefix.push(w);
                walk(g, d, y, prefix, out, cap, truncated);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut truncated = false;
    walk(g, d, y, &mut vec![x], &mut out, cap, &mut truncated);
    GeodesicSet { paths: out, truncated }
}

/// Level-wise ray extraction: walks `pred` back from the least-id vertex
/// of the deepest level and returns `v_0 .. v_R` with `v_n` in level `n`.
pub fn koenig_ray(levels: &[Vec<usize>], pred: impl Fn(usize) -> Option<usize>) -> Result<Vec<usize>> {
    if levels.is_empty() {
        return Err(Error::EmptyLevel(0));
    }
    if let Some(i) = levels.iter().position(|l| l.is_empty()) {
        return Err(Error::EmptyLevel(i));
    }
    let deepest = levels.len() - 1;
    let mut cur = *levels[deepest].iter().min().unwrap();
    let mut ray = vec![cur];
    for level in (1..=deepest).rev() {
        match pred(cur) {
            Some(p) if levels[level - 1].contains(&p) => {
                ray.push(p);
                cur = p;
            }
            _ => return Err(Error::BadPredecessor { vertex: cur, level }),
        }
    }
    ray.reverse();
    Ok(ray)
}
