//! Staged construction of a spanning tree with boundedly many root paths
//! per boundary cell: nets on the cell metric, spliced geodesic branches,
//! completion to a spanning tree and a ray census.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{default_radius_grid, doubling_kappa, ls23_cover, r_multiplicity, BallCover, RADIUS_TOL};
use crate::error::{Error, Result};
use crate::graph::{lex_geodesic, DistanceOracle, TruncatedGraph};
use crate::hyperbolicity::GromovTable;
use crate::tree::RootedTree;
use crate::visual::BoundaryCellSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulOptions {
    /// Initial net radius; the cell-metric diameter when `None`.
    pub epsilon0: Option<f64>,
    /// Doubling exponent; estimated from the cell metric when `None`.
    pub kappa: Option<u32>,
    pub stage_cap: usize,
    /// 0 keeps least-id priority; anything else shuffles cell priority.
    pub seed: u64,
}

impl Default for FaithfulOptions {
    fn default() -> Self {
        Self {
            epsilon0: None,
            kappa: None,
            stage_cap: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulParams {
    pub epsilon0: f64,
    pub kappa: u32,
    /// `N = 2^kappa`.
    pub n: u64,
    /// Exponent `eps` of the visual metric.
    pub visual_epsilon: f64,
    pub delta2x: u32,
    /// `exp(5 eps delta)`.
    pub delta_prime: f64,
    pub stage_cap: usize,
    pub seed: u64,
}

impl FaithfulParams {
    /// `eps_j = eps_{j-1} / (128 N)`.
    pub fn next_epsilon(&self, prev: f64) -> f64 {
        prev / (128.0 * self.n as f64)
    }

    fn delta(&self) -> f64 {
        f64::from(self.delta2x) / 2.0
    }
}

/// `log2` of `N^(8 + log2(8N))` for `N = 2^kappa`.
pub fn census_bound_log2(kappa: u32) -> u32 {
    kappa * (8 + 3 + kappa)
}

/// `N^(8 + log2(8N))` for `N = 2^kappa`, as a float.
pub fn census_bound(kappa: u32) -> f64 {
    2f64.powi(census_bound_log2(kappa) as i32)
}

pub fn resolve_params(cells: &BoundaryCellSet, delta2x: u32, opts: FaithfulOptions) -> Result<FaithfulParams> {
    let m = cells.metric();
    let epsilon0 = opts.epsilon0.unwrap_or_else(|| m.diameter());
    if !(epsilon0.is_finite() && epsilon0 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon0 must be finite and nonnegative, got {epsilon0}"
        )));
    }
    if opts.stage_cap == 0 {
        return Err(Error::InvalidParameter("stage cap must be positive".into()));
    }
    let kappa = match opts.kappa {
        Some(k) if k > 20 => return Err(Error::InvalidParameter(format!("kappa {k} is too large"))),
        Some(k) => k,
        None => doubling_kappa(m, &default_radius_grid(m)).kappa,
    };
    let visual_epsilon = cells.epsilon();
    Ok(FaithfulParams {
        epsilon0,
        kappa,
        n: 1 << kappa,
        visual_epsilon,
        delta2x,
        delta_prime: (5.0 * visual_epsilon * f64::from(delta2x) / 2.0).exp(),
        stage_cap: opts.stage_cap,
        seed: opts.seed,
    })
}

/// A recorded geodesic between the representatives of two net cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleRay {
    /// Cells at the two ends (equal for the initial ray).
    pub ends: (usize, usize),
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    pub cell: usize,
    pub target: usize,
    pub target_distance: f64,
    /// Vertex where the spliced path joins the target's tree path.
    pub junction: usize,
    /// Index of the spliced path in the recorded double rays.
    pub double_ray: usize,
    /// Vertices added to the tree, from the representative outward-in.
    pub branch: Vec<usize>,
    /// First tree vertex met.
    pub hit: usize,
    pub connected_to: usize,
    pub eventually_connected_to: Option<usize>,
    pub connected_distance: f64,
    /// `d(mu, connected) <= delta' eps_{j-1}` (with slack).
    pub hit_claim_ok: bool,
    /// `d(mu, eventual) <= 8 N eps_{j-1}` (with slack).
    pub claim2_ok: bool,
    pub chain_cycle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: usize,
    pub epsilon_prev: f64,
    pub epsilon: f64,
    /// `eps_j * 128 N == eps_{j-1}` in floating point.
    pub schedule_exact: bool,
    pub cover: BallCover,
    /// `S_j` in insertion order.
    pub net: Vec<usize>,
    /// New cells in processing order, with their multiplicity class.
    pub new_cells: Vec<(usize, usize)>,
    pub rays: Vec<RayRecord>,
    pub claim1_pairs: usize,
    pub claim1_violations: usize,
    pub slack: f64,
    /// Largest `|B'|` (balls of this stage within `8 N eps_j`).
    pub bprime_max: usize,
    pub bprime_bound_log2: u32,
    /// `eps_{j-1}/16`-multiplicity of `S_j`.
    pub net_multiplicity: usize,
    pub net_multiplicity_bound_log2: u32,
}

/// Construction state after stage `j`.
#[derive(Clone, Debug)]
pub struct StageState {
    pub j: usize,
    /// `eps_j`.
    pub epsilon: f64,
    /// `S_j` in insertion order.
    pub net: Vec<usize>,
    /// Member sets of the balls of `B_j` (a single ball at stage 0).
    pub balls: Vec<Vec<usize>>,
    pub tree: RootedTree,
    pub rays: Vec<DoubleRay>,
    /// Index into `rays` of the ray that added each tree vertex.
    pub owner: Vec<Option<usize>>,
    pub connected_to: Vec<Option<usize>>,
    pub eventually_connected_to: Vec<Option<usize>>,
}

/// Everything the stages read.
pub struct FaithfulContext<'a> {
    pub graph: &'a TruncatedGraph,
    pub dist: &'a DistanceOracle,
    pub table: &'a GromovTable,
    pub cells: &'a BoundaryCellSet,
    pub params: FaithfulParams,
    /// `rank[c]`: priority of cell `c` (lower first).
    pub rank: Vec<usize>,
}

impl<'a> FaithfulContext<'a> {
    pub fn new(
        graph: &'a TruncatedGraph,
        dist: &'a DistanceOracle,
        table: &'a GromovTable,
        cells: &'a BoundaryCellSet,
        params: FaithfulParams,
    ) -> Self {
        let mut order: Vec<usize> = (0..cells.len()).collect();
        if params.seed != 0 {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
        }
        let mut rank = vec![0; order.len()];
        for (r, &c) in order.iter().enumerate() {
            rank[c] = r;
        }
        Self {
            graph,
            dist,
            table,
            cells,
            params,
            rank,
        }
    }

    fn cd(&self, a: usize, b: usize) -> f64 {
        self.cells.metric().get(a, b)
    }

    fn rep(&self, c: usize) -> usize {
        self.cells.cell(c).representative
    }

    fn by_priority(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        order.sort_by_key(|&c| self.rank[c]);
        order
    }

    fn set_distance(&self, x: usize, set: &[usize]) -> f64 {
        set.iter().map(|&y| self.cd(x, y)).fold(f64::INFINITY, f64::min)
    }
}

/// Stage 0: a geodesic from the root to the first cell by priority.
pub fn init_stage0(ctx: &FaithfulContext) -> StageState {
    let n = ctx.graph.vertex_count();
    let root = ctx.graph.root();
    let eta = ctx.by_priority()[0];
    let path = lex_geodesic(ctx.graph.graph(), ctx.dist, root, ctx.rep(eta));
    let mut tree = RootedTree::singleton(n, root);
    let mut owner = vec![None; n];
    owner[root] = Some(0);
    for w in path.windows(2) {
        tree.attach(w[1], w[0]);
        owner[w[1]] = Some(0);
    }
    let k = ctx.cells.len();
    let mut eventually = vec![None; k];
    eventually[eta] = Some(eta);
    StageState {
        j: 0,
        epsilon: ctx.params.epsilon0,
        net: vec![eta],
        balls: vec![(0..k).collect()],
        tree,
        rays: vec![DoubleRay {
            ends: (eta, eta),
            vertices: path,
        }],
        owner,
        connected_to: vec![None; k],
        eventually_connected_to: eventually,
    }
}

/// Smallest `k` in `1..=N` such that the closed `8 k eps`-ball around `x`
/// meets at most `k` balls; `N + 1` if none.
fn multiplicity_class(ctx: &FaithfulContext, x: usize, balls: &[Vec<usize>], eps: f64) -> usize {
    let n = ctx.params.n as usize;
    for k in 1..=n {
        let reach = 8.0 * k as f64 * eps + RADIUS_TOL;
        let met = balls.iter().filter(|b| ctx.set_distance(x, b) <= reach).count();
        if met <= k {
            return k;
        }
    }
    n + 1
}

/// One stage of the construction.
pub fn advance_stage(ctx: &FaithfulContext, state: &StageState) -> Result<(StageState, StageRecord)> {
    let params = &ctx.params;
    let eps_prev = state.epsilon;
    let eps = params.next_epsilon(eps_prev);
    let radius = eps_prev / 16.0;
    let slack = 4.0 * params.delta() * eps_prev;
    let m = ctx.cells.metric();
    let k_cells = ctx.cells.len();

    let cover = ls23_cover(m, radius, params.kappa, &state.net)?;
    let balls = cover.balls(m);

    // S_j: maximal eps-separated extension of Y_j, by priority.
    let mut net = state.net.clone();
    for &c in &cover.centers {
        if !net.contains(&c) {
            net.push(c);
        }
    }
    for c in ctx.by_priority() {
        if !net.contains(&c) && net.iter().all(|&s| ctx.cd(c, s) > eps) {
            net.push(c);
        }
    }
    let old: Vec<bool> = {
        let mut v = vec![false; k_cells];
        state.net.iter().for_each(|&c| v[c] = true);
        v
    };
    let mut new_cells: Vec<(usize, usize)> = net
        .iter()
        .filter(|&&c| !old[c])
        .map(|&c| (c, multiplicity_class(ctx, c, &state.balls, eps_prev)))
        .collect();
    new_cells.sort_by_key(|&(c, class)| (class, ctx.rank[c]));

    let mut next = StageState {
        j: state.j + 1,
        epsilon: eps,
        net: net.clone(),
        balls: balls.clone(),
        tree: state.tree.clone(),
        rays: state.rays.clone(),
        owner: state.owner.clone(),
        connected_to: state.connected_to.clone(),
        eventually_connected_to: state.eventually_connected_to.clone(),
    };
    let mut added = old.clone();
    let mut rays = Vec::new();
    for &(mu, _) in &new_cells {
        let record = splice(ctx, &mut next, &added, &old, mu, eps_prev, slack)?;
        added[mu] = true;
        rays.push(record);
    }

    let mut claim1_pairs = 0;
    let mut claim1_violations = 0;
    for (a, &(x, cx)) in new_cells.iter().enumerate() {
        for &(y, cy) in &new_cells[a + 1..] {
            if cx != cy || cx > params.n as usize || ctx.cd(x, y) > 8.0 * eps_prev + RADIUS_TOL {
                continue;
            }
            claim1_pairs += 1;
            let reach = 8.0 * cx as f64 * eps_prev;
            let bad = state.balls.iter().any(|b| {
                let (dx, dy) = (ctx.set_distance(x, b), ctx.set_distance(y, b));
                (dx <= reach && dy > reach + slack) || (dy <= reach && dx > reach + slack)
            });
            if bad {
                claim1_violations += 1;
            }
        }
    }

    let near = 8.0 * params.n as f64 * eps + RADIUS_TOL;
    let bprime_max = balls
        .iter()
        .map(|b| {
            balls
                .iter()
                .filter(|o| b.iter().any(|&p| ctx.set_distance(p, o) <= near))
                .count()
        })
        .max()
        .unwrap_or(0);
    let singletons: Vec<Vec<usize>> = net.iter().map(|&s| vec![s]).collect();
    let net_multiplicity = r_multiplicity(m, &singletons, radius).value;

    let record = StageRecord {
        j: next.j,
        epsilon_prev: eps_prev,
        epsilon: eps,
        schedule_exact: eps * 128.0 * params.n as f64 == eps_prev,
        cover,
        net,
        new_cells,
        rays,
        claim1_pairs,
        claim1_violations,
        slack,
        bprime_max,
        bprime_bound_log2: 8 * params.kappa,
        net_multiplicity,
        net_multiplicity_bound_log2: params.kappa * (3 + params.kappa),
    };
    Ok((next, record))
}

/// Adds the branch towards `mu` and records how it connects.
fn splice(
    ctx: &FaithfulContext,
    state: &mut StageState,
    added: &[bool],
    old: &[bool],
    mu: usize,
    eps_prev: f64,
    slack: f64,
) -> Result<RayRecord> {
    let g = ctx.graph.graph();
    let d = ctx.dist;
    let (target, target_distance) = old
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(c, _)| (c, ctx.cd(mu, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("previous net is nonempty");
    if target_distance > eps_prev + RADIUS_TOL {
        return Err(Error::NoTarget {
            cell: mu,
            radius: eps_prev,
            nearest: target_distance,
        });
    }
    let (a, b) = (ctx.rep(mu), ctx.rep(target));
    let p = state.tree.path_from_root(b);
    let len = p.len() - 1;
    let dab = d.get(a, b) as usize;
    let k = (0..=len)
        .find(|&k| d.get(p[k], b) as usize == len - k && d.get(a, p[k]) as usize + (len - k) == dab)
        .expect("the endpoint itself qualifies");
    let mut pi = lex_geodesic(g, d, a, p[k]);
    pi.extend_from_slice(&p[k + 1..]);
    debug_assert_eq!(pi.len() - 1, dab);

    let hit_at = pi
        .iter()
        .position(|&v| state.tree.contains(v))
        .expect("path ends in the tree");
    let hit = pi[hit_at];
    let ray_index = state.rays.len();
    for i in (0..hit_at).rev() {
        state.tree.attach(pi[i], pi[i + 1]);
        state.owner[pi[i]] = Some(ray_index);
    }
    let branch = pi[..hit_at].to_vec();
    state.rays.push(DoubleRay {
        ends: (mu, target),
        vertices: pi.clone(),
    });

    let connected_to = if p[k..].contains(&hit) {
        target
    } else {
        let owner = state.owner[hit].expect("tree vertices have owners");
        let (x, y) = state.rays[owner].ends;
        if ctx.cd(mu, y) < ctx.cd(mu, x) {
            y
        } else {
            x
        }
    };
    state.connected_to[mu] = Some(connected_to);

    // Follow the connection chain back into the previous net.
    let mut seen = vec![mu];
    let mut cur = connected_to;
    let mut chain_cycle = false;
    let eventual = loop {
        if old[cur] {
            break Some(cur);
        }
        if seen.contains(&cur) || !added[cur] {
            chain_cycle = true;
            break None;
        }
        seen.push(cur);
        match state.connected_to[cur] {
            Some(next) => cur = next,
            None => {
                chain_cycle = true;
                break None;
            }
        }
    };
    state.eventually_connected_to[mu] = eventual;

    let connected_distance = ctx.cd(mu, connected_to);
    let n = ctx.params.n as f64;
    Ok(RayRecord {
        cell: mu,
        target,
        target_distance,
        junction: p[k],
        double_ray: ray_index,
        branch,
        hit,
        connected_to,
        eventually_connected_to: eventual,
        connected_distance,
        hit_claim_ok: connected_distance <= ctx.params.delta_prime * eps_prev + slack + RADIUS_TOL,
        claim2_ok: eventual.is_some_and(|e| ctx.cd(mu, e) <= 8.0 * n * eps_prev + slack + RADIUS_TOL),
        chain_cycle,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// All cells are in the net.
    Complete,
    StageCap,
}

/// Edge bookkeeping: every edge of the partial tree lies on the initial
/// ray or on a recorded geodesic between two net representatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarReport {
    pub edges: usize,
    pub edges_on_recorded_rays: usize,
    pub recorded_rays_geodesic: bool,
}

/// Geodesic suffixes of the maximal root paths of the partial tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixReport {
    pub leaves: usize,
    /// Leaves whose root path ends with its whole last spliced branch as a
    /// geodesic (the whole path for the initial ray).
    pub branch_geodesic: usize,
    /// Leaves with geodesic suffix `>= d(root, leaf) - 4 delta`.
    pub within_4delta: usize,
    /// Leaves with geodesic suffix at least half the path length.
    pub at_least_half: usize,
    pub min_suffix: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub rounds: usize,
    pub finite_component_vertices: usize,
    pub outward_vertices: usize,
    pub fallback_vertices: usize,
    /// Recorded `d_i` per round.
    pub d_values: Vec<u32>,
    /// Landing vertices present after completion but not before.
    pub new_landings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayCensus {
    /// Distinct root paths landing in each cell.
    pub per_cell: Vec<usize>,
    pub max_multiplicity: usize,
    pub argmax: usize,
    pub kappa: u32,
    pub bound_log2: u32,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulTree {
    pub params: FaithfulParams,
    pub tree: RootedTree,
    pub partial: RootedTree,
    pub rays: Vec<DoubleRay>,
    pub stages: Vec<StageRecord>,
    pub termination: Termination,
    pub star: StarReport,
    pub suffix: SuffixReport,
    pub completion: CompletionReport,
    pub census: RayCensus,
}

pub fn build_faithful_tree(
    g: &TruncatedGraph,
    d: &DistanceOracle,
    t: &GromovTable,
    cells: &BoundaryCellSet,
    opts: FaithfulOptions,
) -> Result<FaithfulTree> {
    if cells.is_empty() {
        return Err(Error::EmptySphere(cells.radius()));
    }
    let params = resolve_params(cells, t.delta2x(), opts)?;
    let ctx = FaithfulContext::new(g, d, t, cells, params.clone());
    let mut state = init_stage0(&ctx);
    let mut stages = Vec::new();
    let termination = loop {
        if state.net.len() == cells.len() {
            break Termination::Complete;
        }
        if stages.len() == params.stage_cap {
            break Termination::StageCap;
        }
        let (next, record) = advance_stage(&ctx, &state)?;
        stages.push(record);
        state = next;
    };
    let partial = state.tree.clone();
    let star = star_check(&ctx, &state);
    let suffix = suffix_check(&ctx, &state);
    let (tree, completion) = complete_spanning_tree(g, d, &partial, cells.radius());
    let census = ray_census(&tree, d, cells, params.kappa);
    Ok(FaithfulTree {
        params,
        tree,
        partial,
        rays: state.rays,
        stages,
        termination,
        star,
        suffix,
        completion,
        census,
    })
}

fn star_check(ctx: &FaithfulContext, state: &StageState) -> StarReport {
    let mut on_ray = std::collections::HashSet::new();
    let mut geodesic = true;
    for (i, ray) in state.rays.iter().enumerate() {
        let v = &ray.vertices;
        let (s, e) = (v[0], v[v.len() - 1]);
        if i > 0 {
            let reps_ok = s == ctx.rep(ray.ends.0) && e == ctx.rep(ray.ends.1);
            geodesic &= reps_ok && ctx.dist.get(s, e) as usize == v.len() - 1;
        }
        for w in v.windows(2) {
            on_ray.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    let edges = state.tree.edges();
    StarReport {
        edges: edges.len(),
        edges_on_recorded_rays: edges
            .iter()
            .filter(|&&(a, b)| on_ray.contains(&(a.min(b), a.max(b))))
            .count(),
        recorded_rays_geodesic: geodesic,
    }
}

fn suffix_check(ctx: &FaithfulContext, state: &StageState) -> SuffixReport {
    let tree = &state.tree;
    let n = tree.len();
    let mut has_child = vec![false; n];
    for (_, p) in tree.edges() {
        has_child[p] = true;
    }
    let root = tree.root();
    let delta = ctx.params.delta();
    let mut report = SuffixReport {
        leaves: 0,
        branch_geodesic: 0,
        within_4delta: 0,
        at_least_half: 0,
        min_suffix: usize::MAX,
    };
    for leaf in tree.members().filter(|&v| !has_child[v] && v != root) {
        let path = tree.path_from_root(leaf);
        let h = path.len() - 1;
        let suffix = (0..=h)
            .take_while(|&s| ctx.dist.get(path[h - s], leaf) as usize == s)
            .last()
            .unwrap_or(0);
        let owner = state.owner[leaf].expect("member");
        let ray = &state.rays[owner].vertices;
        let spliced = path
            .iter()
            .rev()
            .take_while(|&&v| state.owner[v] == Some(owner))
            .count();
        let branch_ok = if owner == 0 {
            suffix == h
        } else {
            ray[0] == leaf && suffix >= spliced
        };
        report.leaves += 1;
        report.branch_geodesic += usize::from(branch_ok);
        report.within_4delta += usize::from(suffix as f64 >= f64::from(ctx.dist.get(root, leaf)) - 4.0 * delta);
        report.at_least_half += usize::from(2 * suffix >= h);
        report.min_suffix = report.min_suffix.min(suffix);
    }
    if report.leaves == 0 {
        report.min_suffix = 0;
    }
    report
}

/// Extends `t` to a spanning tree: finite components of `G - T` first,
/// then the nearest unattached vertices through paths staying outside the
/// ball of the recorded radius, round by round.
pub fn complete_spanning_tree(
    g: &TruncatedGraph,
    d: &DistanceOracle,
    t: &RootedTree,
    radius: u32,
) -> (RootedTree, CompletionReport) {
    let graph = g.graph();
    let n = graph.vertex_count();
    let dist = d.row(t.root());
    let mut tree = t.clone();
    let mut report = CompletionReport {
        rounds: 0,
        finite_component_vertices: 0,
        outward_vertices: 0,
        fallback_vertices: 0,
        d_values: vec![],
        new_landings: 0,
    };
    let before = landing_vertices(&tree, dist, radius);
    let mut d_prev = 0u32;
    while tree.member_count() < n {
        report.rounds += 1;
        let mut progress = 0;

        // Components of G - T that stay strictly inside the sphere.
        let mut comp = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for s in 0..n {
            if tree.contains(s) || comp[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut i = 0;
            while i < members.len() {
                let v = members[i];
                i += 1;
                for &w in graph.neighbors(v) {
                    if !tree.contains(w) && comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            comps.push(members);
        }
        for members in comps.iter().filter(|c| c.iter().all(|&v| dist[v] < radius)) {
            let mut frontier: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&v| graph.neighbors(v).iter().any(|&w| tree.contains(w)))
                .collect();
            frontier.sort_unstable();
            let mut queue = std::collections::VecDeque::new();
            for v in frontier {
                let p = *graph.neighbors(v).iter().find(|&&w| tree.contains(w)).unwrap();
                tree.attach(v, p);
                queue.push_back(v);
            }
            while let Some(v) = queue.pop_front() {
                for &w in graph.neighbors(v) {
                    if !tree.contains(w) {
                        tree.attach(w, v);
                        queue.push_back(w);
                    }
                }
            }
            report.finite_component_vertices += members.len();
            progress += members.len();
        }

        let unattached: Vec<usize> = (0..n).filter(|&v| !tree.contains(v)).collect();
        if unattached.is_empty() {
            break;
        }
        let d_near = unattached.iter().map(|&v| dist[v]).min().unwrap();
        let b = d_near.max(d_prev);
        report.d_values.push(b);
        let level = unattached.iter().map(|&v| dist[v]).filter(|&x| x >= b).min();
        let mut attached_max = None;
        if let Some(level) = level {
            let targets: Vec<usize> = unattached.iter().copied().filter(|&v| dist[v] == level).collect();
            for v in targets {
                if tree.contains(v) {
                    continue;
                }
                if let Some(path) = outward_path(graph, &tree, dist, v, b) {
                    for w in path.windows(2).rev() {
                        if !tree.contains(w[0]) {
                            tree.attach(w[0], w[1]);
                            report.outward_vertices += 1;
                            progress += 1;
                            attached_max = Some(attached_max.unwrap_or(0).max(dist[w[0]]));
                        }
                    }
                }
            }
        }
        if let Some(mx) = attached_max {
            d_prev = d_prev.max(mx);
        }
        if progress == 0 {
            let v = (0..n)
                .filter(|&v| !tree.contains(v) && graph.neighbors(v).iter().any(|&w| tree.contains(w)))
                .min_by_key(|&v| (dist[v], v))
                .expect("connected graph");
            let p = *graph.neighbors(v).iter().find(|&&w| tree.contains(w)).unwrap();
            tree.attach(v, p);
            report.fallback_vertices += 1;
        }
    }
    let after = landing_vertices(&tree, dist, radius);
    report.new_landings = after.iter().filter(|v| !before.contains(v)).count();
    (tree, report)
}

/// Shortest path `v = p_0, ..., p_k` with `p_k` in the tree, `p_0..p_{k-1}`
/// outside it, and every vertex at root distance `>= b`.
fn outward_path(graph: &crate::graph::Graph, tree: &RootedTree, dist: &[u32], v: usize, b: u32) -> Option<Vec<usize>> {
    let n = graph.vertex_count();
    let mut prev = vec![usize::MAX; n];
    prev[v] = v;
    let mut queue = std::collections::VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            if prev[w] != usize::MAX || dist[w] < b {
                continue;
            }
            prev[w] = u;
            if tree.contains(w) {
                let mut path = vec![w];
                let mut cur = w;
                while cur != v {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}

/// First vertex at root distance `>= radius` on the tree path to `v`.
pub fn landing_vertex(tree: &RootedTree, dist: &[u32], radius: u32, v: usize) -> Option<usize> {
    tree.path_from_root(v).into_iter().find(|&w| dist[w] >= radius)
}

fn landing_vertices(tree: &RootedTree, dist: &[u32], radius: u32) -> std::collections::BTreeSet<usize> {
    tree.members()
        .filter(|&v| dist[v] == radius)
        .filter_map(|v| landing_vertex(tree, dist, radius, v))
        .collect()
}

/// Counts, per cell, the distinct root paths (cut at the sphere) that
/// reach the cell's members.
pub fn ray_census(tree: &RootedTree, d: &DistanceOracle, cells: &BoundaryCellSet, kappa: u32) -> RayCensus {
    let dist = d.row(tree.root());
    let radius = cells.radius();
    let per_cell: Vec<usize> = cells
        .cells()
        .iter()
        .map(|c| {
            let mut landings: Vec<usize> = c
                .members
                .iter()
                .filter_map(|&v| landing_vertex(tree, dist, radius, v))
                .collect();
            landings.sort_unstable();
            landings.dedup();
            landings.len()
        })
        .collect();
    let (argmax, max_multiplicity) =
        per_cell
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    let bound_log2 = census_bound_log2(kappa);
    RayCensus {
        per_cell,
        max_multiplicity,
        argmax,
        kappa,
        bound_log2,
        bound: census_bound(kappa),
        within_bound: bound_log2 >= 64 || (max_multiplicity as u64) <= 1u64 << bound_log2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_pairs_distances, generate_example1, generate_example2, generate_path, generate_tree};
    use crate::hyperbolicity::gromov_table;
    use crate::visual::{auto_epsilon, boundary_cells, CellOptions};

    fn run(g: &TruncatedGraph, opts: FaithfulOptions) -> (DistanceOracle, BoundaryCellSet, FaithfulTree) {
        let d = all_pairs_distances(g.graph()).unwrap();
        let t = gromov_table(&d, g.root());
        let cells = boundary_cells(g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
        let f = build_faithful_tree(g, &d, &t, &cells, opts).unwrap();
        (d, cells, f)
    }

    #[test]
    fn census_bound_arithmetic() {
        assert_eq!(census_bound(1), 4096.0);
        assert_eq!(census_bound_log2(1), 12);
        assert_eq!(census_bound(0), 1.0);
    }

    #[test]
    fn example2_single_cell() {
        let g = generate_example2(5).unwrap();
        let (d, _, f) = run(&g, FaithfulOptions::default());
        assert!(f.stages.is_empty());
        assert_eq!(f.termination, Termination::Complete);
        assert_eq!(f.partial.edges().len(), 5);
        assert!(f.tree.is_spanning());
        assert_eq!(f.tree.edges().len(), g.vertex_count() - 1);
        f.tree.validate(g.graph()).unwrap();
        let _ = d;
    }

    #[test]
    fn tree_is_its_own_faithful_tree() {
        let g = generate_tree(2, 6).unwrap();
        let (_, cells, f) = run(&g, FaithfulOptions::default());
        assert_eq!(f.termination, Termination::Complete);
        assert_eq!(cells.len(), 64);
        assert!(f.census.per_cell.iter().all(|&m| m == 1));
        let mut edges: Vec<(usize, usize)> = f.tree.edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        let graph_edges: Vec<(usize, usize)> = g.graph().edges().collect();
        assert_eq!(edges, graph_edges);
        for s in &f.stages {
            assert!(s.schedule_exact);
        }
    }

    #[test]
    fn example1_construction_invariants() {
        let g = generate_example1(8).unwrap();
        for seed in [0, 3] {
            let (_, cells, f) = run(
                &g,
                FaithfulOptions {
                    seed,
                    ..Default::default()
                },
            );
            assert_eq!(f.termination, Termination::Complete);
            assert!(f.tree.is_spanning());
            f.tree.validate(g.graph()).unwrap();
            assert_eq!(f.star.edges, f.star.edges_on_recorded_rays);
            assert!(f.star.recorded_rays_geodesic);
            assert_eq!(f.suffix.branch_geodesic, f.suffix.leaves);
            assert_eq!(f.census.per_cell.len(), cells.len());
            assert!(f.census.per_cell.iter().all(|&m| m >= 1));
            assert!(f.census.within_bound);
            let last = f.stages.last().unwrap();
            assert_eq!(last.net.len(), cells.len());
            for s in &f.stages {
                assert!(s.schedule_exact);
                assert!(s.cover.certificates.cover);
                assert!(s.rays.iter().all(|r| !r.chain_cycle));
            }
        }
    }

    #[test]
    fn completion_examples() {
        let g = generate_path(6).unwrap();
        let d = all_pairs_distances(g.graph()).unwrap();
        let t = RootedTree::singleton(6, 0);
        let (tree, _) = complete_spanning_tree(&g, &d, &t, g.depth());
        assert_eq!(tree.parents(), &[Some(0), Some(0), Some(1), Some(2), Some(3), Some(4)]);
        let (again, rep) = complete_spanning_tree(&g, &d, &tree, g.depth());
        assert_eq!(again, tree);
        assert_eq!(rep.rounds, 0);
    }
}
