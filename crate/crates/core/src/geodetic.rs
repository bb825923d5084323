//! Breadth-first (distance preserving) spanning trees, limit sets of the
//! components of `T - S`, separator search for a cover of the cells and
//! the lower-bound counting audit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faithful::{landing_vertex, ray_census};
use crate::graph::{all_pairs_distances, generate_example2, DistanceOracle, Graph};
use crate::hyperbolicity::gromov_table;
use crate::tree::RootedTree;
use crate::visual::{auto_epsilon, boundary_cells, BoundaryCellSet, CellOptions};

/// Parent choice among the neighbors one layer closer to the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TieBreak {
    LeastId,
    GreatestId,
    Random(u64),
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LeastId => f.write_str("least-id"),
            Self::GreatestId => f.write_str("greatest-id"),
            Self::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least-id" => Ok(Self::LeastId),
            "greatest-id" => Ok(Self::GreatestId),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(Self::Random)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "unknown tie-break `{s}` (expected least-id, greatest-id or random:<seed>)"
                    ))
                }),
        }
    }
}

impl From<TieBreak> for String {
    fn from(t: TieBreak) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for TieBreak {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodeticTree {
    pub tree: RootedTree,
    pub tie_break: TieBreak,
    /// `d_T(root, v) = d_G(root, v)` for every vertex.
    pub certified: bool,
}

pub fn build_geodetic_tree(g: &Graph, d: &DistanceOracle, root: usize, tie_break: TieBreak) -> GeodeticTree {
    let n = g.vertex_count();
    let dist = d.row(root);
    let mut rng = match tie_break {
        TieBreak::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut parent = vec![None; n];
    parent[root] = Some(root);
    for v in 0..n {
        if v == root {
            continue;
        }
        let up: Vec<usize> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| dist[w] + 1 == dist[v])
            .collect();
        let p = match tie_break {
            TieBreak::LeastId => up[0],
            TieBreak::GreatestId => up[up.len() - 1],
            TieBreak::Random(_) => up[rng.as_mut().unwrap().gen_range(0..up.len())],
        };
        parent[v] = Some(p);
    }
    let tree = RootedTree::from_parents(g, root, parent).expect("breadth-first parents form a tree");
    let certified = tree.depths().iter().zip(dist).all(|(a, b)| a == b);
    GeodeticTree {
        tree,
        tie_break,
        certified,
    }
}

/// Distinct root paths (cut at the sphere) landing in the single cell of
/// example2, for each depth in the range.
pub fn example2_ray_growth(depths: std::ops::RangeInclusive<usize>) -> Result<Vec<(usize, usize)>> {
    depths
        .map(|r| {
            let g = generate_example2(r)?;
            let d = all_pairs_distances(g.graph())?;
            let t = gromov_table(&d, g.root());
            let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x())))?;
            let gt = build_geodetic_tree(g.graph(), &d, g.root(), TieBreak::LeastId);
            let census = ray_census(&gt.tree, &d, &cells, 0);
            Ok((r, census.max_multiplicity))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// Member closest to the root.
    pub top: usize,
    pub size: usize,
    pub sphere_vertices: Vec<usize>,
    /// Cells of the sphere vertices.
    pub z: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSetFamily {
    pub separator: Vec<usize>,
    /// Components of `T - S` that reach the sphere.
    pub components: Vec<Component>,
    /// Components that stay inside the sphere.
    pub inner_components: usize,
    /// Largest number of `Z_i` containing one cell.
    pub m: usize,
    /// Largest tested radius whose open balls meet at most `m` of the
    /// `Z_i` around every cell; `None` when every radius works.
    pub epsilon_star: Option<f64>,
    /// Most `Z_i` met by one `epsilon_star`-ball.
    pub epsilon_star_worst: usize,
    /// Finite cell sets are closed; recorded for completeness.
    pub closed: bool,
}

fn children(tree: &RootedTree) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); tree.len()];
    for (v, p) in tree.edges() {
        ch[p].push(v);
    }
    ch
}

fn components(
    tree: &RootedTree,
    dist: &[u32],
    separator: &[usize],
    cells: &BoundaryCellSet,
) -> (Vec<Component>, usize) {
    let n = tree.len();
    let mut in_s = vec![false; n];
    separator.iter().for_each(|&v| in_s[v] = true);
    let ch = children(tree);
    let radius = cells.radius();
    let mut tops: Vec<usize> = (0..n)
        .filter(|&v| !in_s[v] && tree.contains(v))
        .filter(|&v| v == tree.root() || in_s[tree.parent(v).unwrap()])
        .collect();
    tops.sort_by_key(|&v| (dist[v], v));
    let mut out = Vec::new();
    let mut inner = 0;
    for top in tops {
        let mut stack = vec![top];
        let mut size = 0;
        let mut sphere = Vec::new();
        while let Some(v) = stack.pop() {
            size += 1;
            if dist[v] == radius {
                sphere.push(v);
            }
            stack.extend(ch[v].iter().copied().filter(|&w| !in_s[w]));
        }
        if sphere.is_empty() {
            inner += 1;
            continue;
        }
        sphere.sort_unstable();
        let mut z: Vec<usize> = sphere.iter().filter_map(|&v| cells.cell_of(v)).collect();
        z.sort_unstable();
        z.dedup();
        out.push(Component {
            top,
            size,
            sphere_vertices: sphere,
            z,
        });
    }
    (out, inner)
}

/// Number of sets of `family` met by the open `rho`-ball around `cell`.
fn ball_meets(cells: &BoundaryCellSet, family: &[Vec<usize>], cell: usize, rho: Option<f64>) -> usize {
    let m = cells.metric();
    family
        .iter()
        .filter(|z| z.iter().any(|&c| rho.is_none_or(|r| m.get(cell, c) < r)))
        .count()
}

fn worst_ball(cells: &BoundaryCellSet, family: &[Vec<usize>], rho: Option<f64>) -> usize {
    (0..cells.len())
        .map(|c| ball_meets(cells, family, c, rho))
        .max()
        .unwrap_or(0)
}

pub fn limit_sets(
    tree: &RootedTree,
    d: &DistanceOracle,
    separator: &[usize],
    cells: &BoundaryCellSet,
) -> Result<LimitSetFamily> {
    let dist = d.row(tree.root());
    let (comps, inner) = components(tree, dist, separator, cells);
    if comps.is_empty() {
        return Err(Error::NoSphereVertices);
    }
    let family: Vec<Vec<usize>> = comps.iter().map(|c| c.z.clone()).collect();
    let mut containment = vec![0usize; cells.len()];
    for z in &family {
        for &c in z {
            containment[c] += 1;
        }
    }
    let m = containment.iter().copied().max().unwrap_or(0);
    // Candidate radii ascending, unbounded last; validity is monotone.
    let mut candidates: Vec<Option<f64>> = cells.metric().distinct_distances().into_iter().map(Some).collect();
    candidates.push(None);
    let valid = |rho: Option<f64>| worst_ball(cells, &family, rho) <= m;
    let (mut lo, mut hi) = (0usize, candidates.len());
    // Invariant: candidates[..lo] valid, candidates[hi..] invalid.
    while lo < hi {
        let mid = (lo + hi) / 2;
        if valid(candidates[mid]) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    // The smallest positive distance always passes (the ball is the cell itself).
    let epsilon_star = if lo == 0 { candidates[0] } else { candidates[lo - 1] };
    Ok(LimitSetFamily {
        separator: separator.to_vec(),
        epsilon_star_worst: worst_ball(cells, &family, epsilon_star),
        components: comps,
        inner_components: inner,
        m,
        epsilon_star,
        closed: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparatorStatus {
    Certified,
    /// A bad component reaches the sphere before it can be split.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatorResult {
    pub status: SeparatorStatus,
    pub separator: Vec<usize>,
    /// For each component, the index of a cover set containing its `Z`.
    pub assignment: Vec<Option<usize>>,
    pub family: LimitSetFamily,
}

fn check_cover(cells: &BoundaryCellSet, cover: &[Vec<usize>]) -> Result<()> {
    let mut hit = vec![false; cells.len()];
    for u in cover {
        for &c in u {
            if c >= cells.len() {
                return Err(Error::InvalidParameter(format!(
                    "cover names cell {c}, only {} exist",
                    cells.len()
                )));
            }
            hit[c] = true;
        }
    }
    match hit.iter().position(|&h| !h) {
        Some(c) => Err(Error::CoverIncomplete(c)),
        None => Ok(()),
    }
}

fn assign(comps: &[Component], cover: &[Vec<usize>]) -> Vec<Option<usize>> {
    comps
        .iter()
        .map(|c| cover.iter().position(|u| c.z.iter().all(|x| u.contains(x))))
        .collect()
}

/// Greedy separator: split the shallowest component whose cells fit in
/// no cover set at its top vertex, until every component fits; then drop
/// separator vertices that are not needed.
pub fn find_separator(
    tree: &RootedTree,
    d: &DistanceOracle,
    cells: &BoundaryCellSet,
    cover: &[Vec<usize>],
) -> Result<SeparatorResult> {
    check_cover(cells, cover)?;
    let dist = d.row(tree.root());
    let radius = cells.radius();
    let mut s: Vec<usize> = Vec::new();
    let status = loop {
        let (comps, _) = components(tree, dist, &s, cells);
        let bad = comps
            .iter()
            .zip(assign(&comps, cover))
            .filter(|(_, a)| a.is_none())
            .map(|(c, _)| c.top)
            .min_by_key(|&v| (dist[v], v));
        match bad {
            None => break SeparatorStatus::Certified,
            Some(top) if dist[top] >= radius => break SeparatorStatus::Inconclusive,
            Some(top) => s.push(top),
        }
    };
    if status == SeparatorStatus::Certified {
        let mut i = s.len();
        while i > 0 {
            i -= 1;
            let mut trial = s.clone();
            trial.remove(i);
            let (comps, _) = components(tree, dist, &trial, cells);
            if !comps.is_empty() && assign(&comps, cover).iter().all(Option::is_some) {
                s = trial;
            }
        }
    }
    s.sort_unstable();
    let family = limit_sets(tree, d, &s, cells)?;
    let assignment = assign(&family.components, cover);
    let status = if assignment.iter().all(Option::is_some) {
        status
    } else {
        SeparatorStatus::Inconclusive
    };
    Ok(SeparatorResult {
        status,
        separator: s,
        assignment,
        family,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub holds: bool,
    pub witness: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub claimed_dimension: usize,
    /// Some cell lies in at least `n + 1` cover sets.
    pub precondition: bool,
    pub note: Option<String>,
    pub separator: Option<SeparatorResult>,
    /// The refinement `Z'' = Z' ∩ U`, one per component.
    pub refinement: Vec<Vec<usize>>,
    pub refinement_covers: bool,
    pub refinement_refines: bool,
    /// Number of refinement sets containing each cell.
    pub refinement_multiplicity: Vec<usize>,
    pub ray_multiplicity: Vec<usize>,
    pub links: Vec<Link>,
}

pub fn lower_bound_audit(
    tree: &RootedTree,
    d: &DistanceOracle,
    cells: &BoundaryCellSet,
    cover: &[Vec<usize>],
    n: usize,
) -> Result<AuditReport> {
    check_cover(cells, cover)?;
    let k = cells.len();
    let mut cover_mult = vec![0usize; k];
    for u in cover {
        let mut u = u.clone();
        u.sort_unstable();
        u.dedup();
        u.iter().for_each(|&c| cover_mult[c] += 1);
    }
    let census = ray_census(tree, d, cells, 0);
    let mut report = AuditReport {
        claimed_dimension: n,
        precondition: cover_mult.iter().any(|&x| x >= n + 1),
        note: None,
        separator: None,
        refinement: vec![],
        refinement_covers: false,
        refinement_refines: false,
        refinement_multiplicity: vec![],
        ray_multiplicity: census.per_cell.clone(),
        links: vec![],
    };
    if !report.precondition {
        report.note = Some("criticality not established at this depth".into());
        return Ok(report);
    }
    let sep = find_separator(tree, d, cells, cover)?;
    let fam = &sep.family;
    let m = cells.metric();
    let mut refinement = Vec::new();
    let mut refines = true;
    for (comp, a) in fam.components.iter().zip(&sep.assignment) {
        let fattened: Vec<usize> = (0..k)
            .filter(|&c| comp.z.iter().any(|&z| fam.epsilon_star.is_none_or(|r| m.get(c, z) < r)))
            .collect();
        let zpp: Vec<usize> = match a {
            Some(u) => fattened.into_iter().filter(|c| cover[*u].contains(c)).collect(),
            None => {
                refines = false;
                fattened
            }
        };
        refines &= cover.iter().any(|u| zpp.iter().all(|c| u.contains(c)));
        refinement.push(zpp);
    }
    let mut mult = vec![0usize; k];
    for z in &refinement {
        z.iter().for_each(|&c| mult[c] += 1);
    }
    let covers = mult.iter().all(|&x| x > 0);
    let fam_m = fam.m;

    let top = (0..k).max_by_key(|&c| (mult[c], std::cmp::Reverse(c))).unwrap_or(0);
    let mut links = vec![Link {
        name: "refinement-multiplicity-reaches-n+1".into(),
        holds: mult[top] >= n + 1,
        witness: Some(top),
        detail: format!("cell {top} lies in {} refinement sets (need {})", mult[top], n + 1),
    }];
    let over = (0..k).find(|&c| mult[c] > 2 * fam_m);
    links.push(Link {
        name: "refinement-multiplicity-at-most-2m".into(),
        holds: over.is_none(),
        witness: over,
        detail: format!("max refinement multiplicity {} against 2m = {}", mult[top], 2 * fam_m),
    });
    links.push(Link {
        name: "2m>=n+1".into(),
        holds: 2 * fam_m >= n + 1,
        witness: None,
        detail: format!("m = {fam_m}, n + 1 = {}", n + 1),
    });
    // Each component containing a cell carries its own root path to it.
    let mut containment = vec![0usize; k];
    for comp in &fam.components {
        comp.z.iter().for_each(|&c| containment[c] += 1);
    }
    let dist = d.row(tree.root());
    let short = (0..k).find(|&c| census.per_cell[c] < containment[c]);
    links.push(Link {
        name: "rays-dominate-containment".into(),
        holds: short.is_none(),
        witness: short,
        detail: "every cell has at least as many root paths as components reaching it".into(),
    });
    let best = (0..k)
        .max_by_key(|&c| (census.per_cell[c], std::cmp::Reverse(c)))
        .unwrap_or(0);
    links.push(Link {
        name: "rays>=(n+1)/2".into(),
        holds: 2 * census.per_cell[best] >= n + 1,
        witness: Some(best),
        detail: format!(
            "cell {best} has {} root paths (landing vertex of its representative: {:?})",
            census.per_cell[best],
            landing_vertex(tree, dist, cells.radius(), cells.cell(best).representative)
        ),
    });
    report.refinement = refinement;
    report.refinement_covers = covers;
    report.refinement_refines = refines;
    report.refinement_multiplicity = mult;
    report.links = links;
    report.separator = Some(sep);
    Ok(report)
}
