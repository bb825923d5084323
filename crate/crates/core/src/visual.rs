//! The visual metric `d_eps` (chain infimum of `exp(-eps (x,y)_o)`), the
//! two-sided sandwich bound, and boundary cells on the depth-R sphere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DistanceOracle, TruncatedGraph};
use crate::hyperbolicity::GromovTable;
use crate::metric::FiniteMetric;
use crate::unionfind::UnionFind;

/// `sqrt(2) - 1`, the admissibility cap on `eps'`.
pub const EPSILON_PRIME_CAP: f64 = std::f64::consts::SQRT_2 - 1.0;

const ADMISSIBILITY_TOL: f64 = 1e-12;

/// Largest admissible `eps = ln(sqrt 2) / delta`; `ln(sqrt 2)` when
/// `delta = 0` (every positive `eps` is admissible then).
pub fn auto_epsilon(delta2x: u32) -> f64 {
    let ln_sqrt2 = std::f64::consts::LN_2 / 2.0;
    if delta2x == 0 {
        ln_sqrt2
    } else {
        ln_sqrt2 / (f64::from(delta2x) / 2.0)
    }
}

/// `eps' = exp(eps delta) - 1`.
pub fn epsilon_prime(epsilon: f64, delta2x: u32) -> f64 {
    (epsilon * f64::from(delta2x) / 2.0).exp() - 1.0
}

pub fn check_admissible(epsilon: f64, delta2x: u32) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if epsilon_prime(epsilon, delta2x) > EPSILON_PRIME_CAP + ADMISSIBILITY_TOL {
        return Err(Error::InadmissibleEpsilon {
            epsilon,
            delta: f64::from(delta2x) / 2.0,
            max_epsilon: auto_epsilon(delta2x),
        });
    }
    Ok(())
}

/// `d_eps` on a finite point set of vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualMetric {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub base: usize,
    pub delta2x: u32,
    /// Vertex ids; index `i` of the metric is vertex `points[i]`.
    pub points: Vec<usize>,
    pub metric: FiniteMetric,
}

impl VisualMetric {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.metric.get(i, j)
    }
}

/// `exp(-eps (x,y)_o)`.
pub fn rho(t: &GromovTable, epsilon: f64, x: usize, y: usize) -> f64 {
    (-epsilon * f64::from(t.prod2x(x, y)) / 2.0).exp()
}

/// Chain infimum over chains inside `points`, by Floyd-Warshall on the
/// complete graph weighted by `rho`.
pub fn chain_metric(t: &GromovTable, epsilon: f64, points: &[usize]) -> Result<VisualMetric> {
    check_admissible(epsilon, t.delta2x())?;
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "chain_metric needs a nonempty point set".into(),
        ));
    }
    let m = points.len();
    let mut dist = vec![0.0f64; m * m];
    dist.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j {
                0.0
            } else {
                rho(t, epsilon, points[i], points[j])
            };
        }
    });
    for k in 0..m {
        let via: Vec<f64> = dist[k * m..(k + 1) * m].to_vec();
        dist.par_chunks_mut(m).for_each(|row| {
            let dik = row[k];
            for (j, cell) in row.iter_mut().enumerate() {
                let alt = dik + via[j];
                if alt < *cell {
                    *cell = alt;
                }
            }
        });
    }
    Ok(VisualMetric {
        epsilon,
        epsilon_prime: epsilon_prime(epsilon, t.delta2x()),
        base: t.base(),
        delta2x: t.delta2x(),
        points: points.to_vec(),
        metric: FiniteMetric::from_matrix(m, dist),
    })
}

/// Every vertex of the graph, in id order.
pub fn all_points(t: &GromovTable) -> Vec<usize> {
    (0..t.vertex_count()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichViolation {
    pub x: usize,
    pub y: usize,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub pairs_checked: u64,
    pub tolerance: f64,
    pub violations: Vec<SandwichViolation>,
    /// Counts of `d_eps / rho` in ten bins of `[0, 1]`.
    pub tightness: Vec<u64>,
}

pub const SANDWICH_TOL: f64 = 1e-9;

/// Checks `eps' rho <= d_eps <= rho` over distinct point pairs.
pub fn sandwich_check(vm: &VisualMetric, t: &GromovTable) -> SandwichReport {
    let m = vm.points.len();
    let per_row: Vec<(Vec<SandwichViolation>, [u64; 10])> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut bad = Vec::new();
            let mut bins = [0u64; 10];
            for j in i + 1..m {
                let (x, y) = (vm.points[i], vm.points[j]);
                let upper = rho(t, vm.epsilon, x, y);
                let lower = vm.epsilon_prime * upper;
                let value = vm.get(i, j);
                if value < lower - SANDWICH_TOL || value > upper + SANDWICH_TOL {
                    bad.push(SandwichViolation {
                        x,
                        y,
                        lower,
                        value,
                        upper,
                    });
                }
                let bin = ((value / upper) * 10.0).floor().clamp(0.0, 9.0) as usize;
                bins[bin] += 1;
            }
            (bad, bins)
        })
        .collect();
    let mut violations = Vec::new();
    let mut tightness = vec![0u64; 10];
    for (bad, bins) in per_row {
        violations.extend(bad);
        for (acc, b) in tightness.iter_mut().zip(bins) {
            *acc += b;
        }
    }
    SandwichReport {
        pairs_checked: (m as u64) * (m as u64).saturating_sub(1) / 2,
        tolerance: SANDWICH_TOL,
        violations,
        tightness,
    }
}

/// Point set through which chains of the cell metric may pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainPoints {
    #[default]
    Sphere,
    AllVertices,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    /// Sphere radius; the graph's boundary radius when `None`.
    pub radius: Option<u32>,
    /// Doubled clustering threshold; `2R - 1` when `None`.
    pub threshold2x: Option<u32>,
    pub epsilon: f64,
    pub chain_points: ChainPoints,
}

impl CellOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            radius: None,
            threshold2x: None,
            epsilon,
            chain_points: ChainPoints::Sphere,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub members: Vec<usize>,
    pub representative: usize,
}

/// Clusters of sphere vertices standing in for boundary points, with
/// `d_eps` between their representatives.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCellSet {
    radius: u32,
    threshold2x: u32,
    epsilon: f64,
    cells: Vec<Cell>,
    cell_of: Vec<Option<usize>>,
    metric: FiniteMetric,
}

impl BoundaryCellSet {
    /// Reassembles a cell set from its parts (e.g. after parsing).
    pub fn from_parts(
        vertex_count: usize,
        radius: u32,
        threshold2x: u32,
        epsilon: f64,
        cells: Vec<Cell>,
        metric: FiniteMetric,
    ) -> Result<Self> {
        if metric.len() != cells.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cells but a metric on {} points",
                cells.len(),
                metric.len()
            )));
        }
        let mut cell_of = vec![None; vertex_count];
        for (id, c) in cells.iter().enumerate() {
            if !c.members.contains(&c.representative) {
                return Err(Error::InvalidParameter(format!(
                    "representative of cell {id} is not a member"
                )));
            }
            for &v in &c.members {
                if v >= vertex_count || cell_of[v].is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {v} is out of range or in two cells"
                    )));
                }
                cell_of[v] = Some(id);
            }
        }
        Ok(Self {
            radius,
            threshold2x,
            epsilon,
            cells,
            cell_of,
            metric,
        })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn threshold2x(&self) -> u32 {
        self.threshold2x
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn cell_of(&self, v: usize) -> Option<usize> {
        self.cell_of.get(v).copied().flatten()
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.representative).collect()
    }

    /// Sphere vertices in id order.
    pub fn sphere(&self) -> Vec<usize> {
        (0..self.cell_of.len()).filter(|&v| self.cell_of[v].is_some()).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.cell_of.len()
    }

    /// `d_eps` between cell representatives.
    pub fn metric(&self) -> &FiniteMetric {
        &self.metric
    }
}

pub fn boundary_cells(
    g: &TruncatedGraph,
    d: &DistanceOracle,
    t: &GromovTable,
    opts: CellOptions,
) -> Result<BoundaryCellSet> {
    let radius = opts.radius.unwrap_or_else(|| g.boundary_radius());
    if radius > g.depth() {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} exceeds the truncation depth {}",
            g.depth()
        )));
    }
    let threshold2x = opts.threshold2x.unwrap_or((2 * radius).saturating_sub(1));
    let sphere = d.sphere(t.base(), radius);
    if sphere.is_empty() {
        return Err(Error::EmptySphere(radius));
    }
    let mut uf = UnionFind::new(sphere.len());
    for i in 0..sphere.len() {
        for j in i + 1..sphere.len() {
            if t.prod2x(sphere[i], sphere[j]) >= threshold2x {
                uf.union(i, j);
            }
        }
    }
    let cells: Vec<Cell> = uf
        .groups()
        .into_iter()
        .map(|group| {
            let members: Vec<usize> = group.into_iter().map(|i| sphere[i]).collect();
            let representative = representative(t, &members);
            Cell {
                members,
                representative,
            }
        })
        .collect();

    let chain_points = match opts.chain_points {
        ChainPoints::Sphere => sphere.clone(),
        ChainPoints::AllVertices => all_points(t),
    };
    let vm = chain_metric(t, opts.epsilon, &chain_points)?;
    let index_of = |v: usize| chain_points.binary_search(&v).expect("representative is a chain point");
    let reps: Vec<usize> = cells.iter().map(|c| index_of(c.representative)).collect();
    let metric = vm.metric.restrict(&reps);
    BoundaryCellSet::from_parts(g.vertex_count(), radius, threshold2x, opts.epsilon, cells, metric)
}

/// Least member maximizing the minimal product to the rest of the cell.
fn representative(t: &GromovTable, members: &[usize]) -> usize {
    let score = |u: usize| {
        members
            .iter()
            .filter(|&&v| v != u)
            .map(|&v| t.prod2x(u, v))
            .min()
            .unwrap_or(u32::MAX)
    };
    let mut best = members[0];
    let mut best_score = score(best);
    for &u in &members[1..] {
        let s = score(u);
        if s > best_score {
            best = u;
            best_score = s;
        }
    }
    best
}

/// The cell containing the endpoint of a root-to-sphere path.
pub fn ray_limit_cell(cells: &BoundaryCellSet, path: &[usize]) -> Result<usize> {
    let end = *path
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty path".into()))?;
    cells.cell_of(end).ok_or(Error::NotOnSphere {
        vertex: end,
        radius: cells.radius(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_pairs_distances, generate_example1, generate_example2, generate_tree, one_geodesic};
    use crate::hyperbolicity::gromov_table;

    fn setup(g: &TruncatedGraph) -> (DistanceOracle, GromovTable) {
        let d = all_pairs_distances(g.graph()).unwrap();
        let t = gromov_table(&d, g.root());
        (d, t)
    }

    #[test]
    fn admissibility() {
        assert!(check_admissible(auto_epsilon(4), 4).is_ok());
        assert!(check_admissible(auto_epsilon(4) * 1.01, 4).is_err());
        assert!(check_admissible(5.0, 0).is_ok());
        assert!(check_admissible(-1.0, 0).is_err());
        assert!((epsilon_prime(auto_epsilon(3), 3) - EPSILON_PRIME_CAP).abs() < 1e-12);
        match check_admissible(1.0, 2) {
            Err(Error::InadmissibleEpsilon { max_epsilon, .. }) => {
                assert!((max_epsilon - std::f64::consts::LN_2 / 2.0).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_metric_basics() {
        let g = generate_example1(5).unwrap();
        let (_, t) = setup(&g);
        let eps = auto_epsilon(t.delta2x());
        let vm = chain_metric(&t, eps, &all_points(&t)).unwrap();
        for x in 0..g.vertex_count() {
            assert_eq!(vm.get(x, x), 0.0);
            assert!(vm.get(x, 0) <= 1.0 + 1e-15);
        }
        assert_eq!(vm.metric.axiom_violations(1e-12), 0);
        assert!(chain_metric(&t, eps, &[]).is_err());
    }

    #[test]
    fn tree_visual_metric_has_no_shortcuts() {
        // Brute force over all simple chains on a 15-vertex tree is
        // infeasible; use the ultrametric inequality instead, which rules
        // out every chain shortcut at once.
        let g = generate_tree(2, 3).unwrap();
        let (_, t) = setup(&g);
        let eps = 0.7;
        let vm = chain_metric(&t, eps, &all_points(&t)).unwrap();
        let n = g.vertex_count();
        for x in 0..n {
            for y in 0..n {
                let r = if x == y { 0.0 } else { rho(&t, eps, x, y) };
                assert!((vm.get(x, y) - r).abs() < 1e-15, "{x} {y}");
                for z in 0..n {
                    assert!(t.prod2x(x, y) >= t.prod2x(x, z).min(t.prod2x(z, y)));
                }
            }
        }
    }

    #[test]
    fn sandwich_on_example1_and_tree() {
        let g = generate_example1(8).unwrap();
        let (_, t) = setup(&g);
        let vm = chain_metric(&t, auto_epsilon(t.delta2x()), &all_points(&t)).unwrap();
        let r = sandwich_check(&vm, &t);
        assert!(r.violations.is_empty());
        assert_eq!(r.tightness.iter().sum::<u64>(), r.pairs_checked);

        let g = generate_tree(2, 4).unwrap();
        let (_, t) = setup(&g);
        let vm = chain_metric(&t, auto_epsilon(0), &all_points(&t)).unwrap();
        assert_eq!(vm.epsilon_prime, 0.0);
        let r = sandwich_check(&vm, &t);
        assert!(r.violations.is_empty());
        assert_eq!(r.tightness[9], r.pairs_checked, "upper bound tight on trees");
    }

    #[test]
    fn tree_cells() {
        for depth in [3usize, 5] {
            let g = generate_tree(2, depth).unwrap();
            let (d, t) = setup(&g);
            let mut opts = CellOptions::new(auto_epsilon(0));
            let cells = boundary_cells(&g, &d, &t, opts).unwrap();
            assert_eq!(cells.len(), 1 << depth);
            opts.threshold2x = Some(2 * (depth as u32 - 1));
            let cells = boundary_cells(&g, &d, &t, opts).unwrap();
            assert_eq!(cells.len(), 1 << (depth - 1), "siblings meet at depth R-1");
        }
    }

    #[test]
    fn example2_has_one_cell() {
        let g = generate_example2(6).unwrap();
        let (d, t) = setup(&g);
        let mut opts = CellOptions::new(auto_epsilon(t.delta2x()));
        assert_eq!(boundary_cells(&g, &d, &t, opts).unwrap().len(), 1);
        opts.threshold2x = Some(12 - 2 * t.delta2x());
        let cells = boundary_cells(&g, &d, &t, opts).unwrap();
        assert_eq!(cells.len(), 1);
        let path = one_geodesic(g.graph(), &d, 0, 100);
        assert_eq!(ray_limit_cell(&cells, path.vertices()).unwrap(), 0);
        assert!(matches!(
            ray_limit_cell(&cells, &[0, 1]),
            Err(Error::NotOnSphere { vertex: 1, .. })
        ));
    }

    #[test]
    fn example1_cells_follow_the_arc() {
        let mut counts = Vec::new();
        for depth in [8usize, 10] {
            let g = generate_example1(depth).unwrap();
            let (d, t) = setup(&g);
            let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
            counts.push(cells.len());
            let pos: Vec<(f64, f64)> = cells
                .cells()
                .iter()
                .map(|c| {
                    let p: Vec<f64> = c.members.iter().map(|&v| g.example1_position(v).unwrap()).collect();
                    (
                        p.iter().copied().fold(f64::MAX, f64::min),
                        p.iter().copied().fold(f64::MIN, f64::max),
                    )
                })
                .collect();
            let mut sorted = pos.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in sorted.windows(2) {
                assert!(w[0].1 < w[1].0, "cells are disjoint arc intervals");
            }
            for c in cells.cells() {
                assert!(c.members.len() <= 3);
            }
            assert_eq!(cells.metric().axiom_violations(1e-12), 0);
        }
        assert_eq!(counts, vec![19, 51]);
    }

    #[test]
    fn raising_threshold_refines() {
        let g = generate_example1(7).unwrap();
        let (d, t) = setup(&g);
        let mut prev: Option<BoundaryCellSet> = None;
        for th in 0..=12 {
            let mut opts = CellOptions::new(auto_epsilon(t.delta2x()));
            opts.threshold2x = Some(th);
            let cells = boundary_cells(&g, &d, &t, opts).unwrap();
            if let Some(p) = &prev {
                for c in cells.cells() {
                    let owner = p.cell_of(c.members[0]);
                    assert!(c.members.iter().all(|&v| p.cell_of(v) == owner));
                }
            }
            prev = Some(cells);
        }
    }
}
