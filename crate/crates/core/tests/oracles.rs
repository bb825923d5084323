//! Brute-force oracles, computed from the raw edge lists and checked
//! against the library.

use hypertree::covering::{doubling_kappa, packing_count, r_multiplicity};
use hypertree::geodetic::{build_geodetic_tree, example2_ray_growth, limit_sets, TieBreak};
use hypertree::graph::{
    all_geodesics, all_pairs_distances, generate_cycle, generate_example1, generate_example2, generate_tree,
    one_geodesic,
};
use hypertree::hyperbolicity::{gromov_table, thin_triangle_delta, LexLeast, ScanOptions};
use hypertree::visual::{all_points, auto_epsilon, boundary_cells, chain_metric, CellOptions};
use hypertree::{FiniteMetric, TruncatedGraph};

const INF: u32 = u32::MAX / 4;

fn floyd(g: &TruncatedGraph) -> Vec<Vec<u32>> {
    let n = g.vertex_count();
    let mut d = vec![vec![INF; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for (u, v) in g.graph().edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Every geodesic from `x` to `y` as a vertex list.
fn geodesics(g: &TruncatedGraph, d: &[Vec<u32>], x: usize, y: usize) -> Vec<Vec<usize>> {
    if x == y {
        return vec![vec![x]];
    }
    let mut out = Vec::new();
    for &w in g.neighbors(x) {
        if d[w][y] + 1 == d[x][y] {
            for mut rest in geodesics(g, d, w, y) {
                rest.insert(0, x);
                out.push(rest);
            }
        }
    }
    out
}

/// Doubled four-point defect at base `o`, all triples.
fn four_point_oracle(d: &[Vec<u32>], o: usize) -> u32 {
    let n = d.len();
    let p = |x: usize, y: usize| (d[x][o] + d[y][o]) as i64 - d[x][y] as i64;
    let mut best = 0i64;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                best = best.max(p(x, z).min(p(y, z)) - p(x, y));
            }
        }
    }
    best as u32
}

fn thinness(d: &[Vec<u32>], sides: [&Vec<usize>; 3]) -> u32 {
    let mut worst = 0;
    for i in 0..3 {
        for &u in sides[i] {
            let near = sides[(i + 1) % 3]
                .iter()
                .chain(sides[(i + 2) % 3])
                .map(|&w| d[u][w])
                .min()
                .unwrap();
            worst = worst.max(near);
        }
    }
    worst
}

/// Worst thinness over all triples and all choices of geodesic sides.
fn thin_oracle(g: &TruncatedGraph, d: &[Vec<u32>]) -> u32 {
    let n = d.len();
    let all: Vec<Vec<Vec<Vec<usize>>>> = (0..n)
        .map(|x| (0..n).map(|y| geodesics(g, d, x, y)).collect())
        .collect();
    let mut best = 0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for a in &all[x][y] {
                    for b in &all[y][z] {
                        for c in &all[z][x] {
                            best = best.max(thinness(d, [a, b, c]));
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn distances_match_floyd_warshall() {
    for g in [
        generate_example1(6).unwrap(),
        generate_example2(4).unwrap(),
        generate_cycle(9).unwrap(),
    ] {
        let d = all_pairs_distances(g.graph()).unwrap();
        let f = floyd(&g);
        for (x, row) in f.iter().enumerate() {
            assert_eq!(d.row(x), row.as_slice());
        }
    }
}

#[test]
fn cycle_deltas_match_brute_force() {
    let mut four = Vec::new();
    let mut thin = Vec::new();
    for n in 4..=12 {
        let g = generate_cycle(n).unwrap();
        let f = floyd(&g);
        let d = all_pairs_distances(g.graph()).unwrap();
        for o in 0..n {
            assert_eq!(gromov_table(&d, o).delta2x(), four_point_oracle(&f, o), "C{n} base {o}");
        }
        let choice = LexLeast {
            graph: g.graph(),
            dist: &d,
        };
        let report = thin_triangle_delta(&d, &choice, ScanOptions::THIN_TRIANGLE);
        assert!(report.exhaustive);
        assert_eq!(report.value, thin_oracle(&g, &f), "C{n}");
        four.push(gromov_table(&d, 0).delta2x());
        thin.push(report.value);
    }
    // Values pinned from the oracle.
    assert_eq!(four, [2, 1, 2, 2, 4, 3, 4, 4, 6]);
    assert_eq!(thin, [1, 1, 1, 1, 2, 2, 2, 2, 3]);
}

#[test]
fn trees_have_zero_delta() {
    for b in 2..=3 {
        for depth in 1..=6 {
            let g = generate_tree(b, depth).unwrap();
            let d = all_pairs_distances(g.graph()).unwrap();
            assert_eq!(gromov_table(&d, g.root()).delta2x(), 0);
        }
    }
    let g = generate_tree(2, 3).unwrap();
    assert_eq!(four_point_oracle(&floyd(&g), 0), 0);
    assert_eq!(thin_oracle(&g, &floyd(&g)), 0);
}

#[test]
fn small_family_deltas_match_brute_force() {
    for g in [generate_example1(5).unwrap(), generate_example2(3).unwrap()] {
        let f = floyd(&g);
        let d = all_pairs_distances(g.graph()).unwrap();
        for o in 0..g.vertex_count() {
            assert_eq!(gromov_table(&d, o).delta2x(), four_point_oracle(&f, o));
        }
    }
}

#[test]
fn geodesic_enumeration_matches_dfs() {
    for g in [
        generate_example1(5).unwrap(),
        generate_cycle(8).unwrap(),
        generate_example2(3).unwrap(),
    ] {
        let f = floyd(&g);
        let d = all_pairs_distances(g.graph()).unwrap();
        let n = g.vertex_count();
        for x in 0..n {
            for y in 0..n {
                let mut want = geodesics(&g, &f, x, y);
                want.sort();
                let set = all_geodesics(g.graph(), &d, x, y, usize::MAX);
                let mut got: Vec<Vec<usize>> = set.paths.iter().map(|p| p.vertices().to_vec()).collect();
                got.sort();
                assert_eq!(got, want);
                assert!(one_geodesic(g.graph(), &d, x, y).is_geodesic());
            }
        }
    }
}

#[test]
fn example2_growth_matches_geodesic_counts() {
    let table = example2_ray_growth(1..=10).unwrap();
    for (depth, mult) in table {
        let g = generate_example2(depth).unwrap();
        let d = all_pairs_distances(g.graph()).unwrap();
        let root = g.root();
        let oracle: usize = d
            .sphere(root, depth as u32)
            .into_iter()
            .map(|v| all_geodesics(g.graph(), &d, root, v, usize::MAX).count())
            .sum();
        assert_eq!(mult, oracle);
        assert_eq!(mult, 1 << depth);
    }
}

#[test]
fn chain_metric_matches_relaxation() {
    for g in [
        generate_cycle(7).unwrap(),
        generate_example1(5).unwrap(),
        generate_tree(2, 3).unwrap(),
    ] {
        let f = floyd(&g);
        let d = all_pairs_distances(g.graph()).unwrap();
        let t = gromov_table(&d, g.root());
        let eps = auto_epsilon(t.delta2x());
        let n = g.vertex_count();
        let o = g.root();
        let rho = |x: usize, y: usize| {
            if x == y {
                0.0
            } else {
                (-eps * 0.5 * ((f[x][o] + f[y][o]) as f64 - f[x][y] as f64)).exp()
            }
        };
        // Bellman-Ford style relaxation until nothing changes.
        let mut best: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| rho(x, y)).collect()).collect();
        loop {
            let mut changed = false;
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let via = best[x][z] + rho(z, y);
                        if via < best[x][y] - 1e-15 {
                            best[x][y] = via;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let vm = chain_metric(&t, eps, &all_points(&t)).unwrap();
        for x in 0..n {
            for y in 0..n {
                assert!((vm.get(x, y) - best[x][y]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn cells_are_components_of_the_product_graph() {
    for g in [
        generate_example1(8).unwrap(),
        generate_tree(2, 5).unwrap(),
        generate_example2(5).unwrap(),
    ] {
        let d = all_pairs_distances(g.graph()).unwrap();
        let t = gromov_table(&d, g.root());
        let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
        let sphere = d.sphere(g.root(), cells.radius());
        let linked = |a: usize, b: usize| t.prod2x(a, b) >= cells.threshold2x();
        // Flood fill.
        let mut seen = vec![false; sphere.len()];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for s in 0..sphere.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut comp = Vec::new();
            while let Some(i) = stack.pop() {
                comp.push(sphere[i]);
                for j in 0..sphere.len() {
                    if !seen[j] && linked(sphere[i], sphere[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort();
        let mut got: Vec<Vec<usize>> = cells.cells().iter().map(|c| c.members.clone()).collect();
        got.sort();
        assert_eq!(got, comps);
    }
}

fn random_metric(n: usize, seed: u64) -> FiniteMetric {
    // Points on a line with pseudo-random gaps: a metric by construction.
    let mut x = Vec::with_capacity(n);
    let mut s = seed;
    let mut pos = 0.0;
    for _ in 0..n {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        pos += 1.0 + (s >> 40) as f64 / (1u64 << 24) as f64 * 3.0;
        x.push(pos);
    }
    FiniteMetric::from_fn(n, |i, j| (x[i] - x[j]).abs())
}

fn packing_oracle(m: &FiniteMetric, alpha: f64, beta: f64) -> usize {
    let n = m.len();
    let ok = |a: usize, b: usize| m.get(a, b) >= alpha - 1e-12 && m.get(a, b) <= beta + 1e-12;
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let pts: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if pts.len() > best && pts.iter().all(|&a| pts.iter().all(|&b| a == b || ok(a, b))) {
            best = pts.len();
        }
    }
    best
}

#[test]
fn packing_count_matches_subset_enumeration() {
    for seed in 0..6 {
        let m = random_metric(11, seed);
        for (alpha, beta) in [(1.5, 20.0), (2.0, 8.0), (4.0, 40.0), (1.0, 100.0)] {
            let got = packing_count(&m, alpha, beta).unwrap();
            assert!(got.exact);
            assert_eq!(
                got.count,
                packing_oracle(&m, alpha, beta),
                "seed {seed} ({alpha},{beta})"
            );
        }
    }
}

#[test]
fn packing_count_on_example1_cells() {
    let g = generate_example1(8).unwrap();
    let d = all_pairs_distances(g.graph()).unwrap();
    let t = gromov_table(&d, g.root());
    let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
    let m = cells.metric();
    assert!(m.len() <= 20);
    let diam = m.diameter();
    for (a, b) in [
        (diam / 8.0, diam),
        (diam / 4.0, diam / 2.0),
        (diam / 16.0, diam),
        (diam / 2.0, diam),
    ] {
        assert_eq!(packing_count(m, a, b).unwrap().count, packing_oracle(m, a, b));
    }
}

#[test]
fn r_multiplicity_matches_subset_enumeration() {
    for seed in 0..5 {
        let m = random_metric(10, seed);
        let n = m.len();
        let family: Vec<Vec<usize>> = (0..n).map(|i| (i..n.min(i + 3)).collect()).collect();
        for r in [0.5, 2.0, 4.0, 7.5, 15.0] {
            let mut best = 0;
            for mask in 1u32..(1 << n) {
                let pts: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let diam = pts
                    .iter()
                    .flat_map(|&a| pts.iter().map(move |&b| (a, b)))
                    .map(|(a, b)| m.get(a, b))
                    .fold(0.0, f64::max);
                if diam <= r {
                    let met = family.iter().filter(|s| s.iter().any(|p| pts.contains(p))).count();
                    best = best.max(met);
                }
            }
            assert_eq!(r_multiplicity(&m, &family, r).value, best, "seed {seed} r {r}");
        }
    }
}

#[test]
fn doubling_kappa_matches_exhaustive_cover() {
    for seed in 0..4 {
        let m = random_metric(9, seed);
        let n = m.len();
        let scales = [3.0, 6.0, 12.0];
        let mut worst = 0usize;
        for &r in &scales {
            for c in 0..n {
                let ball: Vec<usize> = (0..n).filter(|&p| m.get(c, p) <= r).collect();
                // Smallest set of half-radius balls (centers anywhere) covering the ball.
                let mut k = 1;
                'grow: loop {
                    for mask in 0u32..(1 << n) {
                        if mask.count_ones() != k {
                            continue;
                        }
                        let centers: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                        if ball.iter().all(|&p| centers.iter().any(|&q| m.get(p, q) <= r / 2.0)) {
                            break 'grow;
                        }
                    }
                    k += 1;
                }
                worst = worst.max(k as usize);
            }
        }
        let report = doubling_kappa(&m, &scales);
        assert!(report.exact);
        assert_eq!(report.worst, worst, "seed {seed}");
        assert_eq!(report.kappa, (worst as f64).log2().ceil() as u32);
    }
}

#[test]
fn example1_limit_sets_match_recount() {
    let g = generate_example1(10).unwrap();
    let d = all_pairs_distances(g.graph()).unwrap();
    let t = gromov_table(&d, g.root());
    let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
    let tree = build_geodetic_tree(g.graph(), &d, g.root(), TieBreak::LeastId);
    // A mid-graph cut: the whole layer at root distance 5.
    let cut = d.sphere(g.root(), 5);
    let fam = limit_sets(&tree.tree, &d, &cut, &cells).unwrap();
    // Recount: follow each sphere vertex up the tree to its first vertex below the cut.
    let dist = d.row(g.root());
    let mut groups: std::collections::BTreeMap<usize, std::collections::BTreeSet<usize>> = Default::default();
    for v in d.sphere(g.root(), cells.radius()) {
        let path = tree.tree.path_to_root(v);
        let top = *path.iter().take_while(|&&w| dist[w] > 5).last().unwrap();
        groups.entry(top).or_default().insert(cells.cell_of(v).unwrap());
    }
    let want: Vec<Vec<usize>> = groups.values().map(|s| s.iter().copied().collect()).collect();
    let mut got: Vec<Vec<usize>> = fam.components.iter().map(|c| c.z.clone()).collect();
    got.sort();
    let mut want_sorted = want.clone();
    want_sorted.sort();
    assert_eq!(got, want_sorted);
    let mut count = vec![0; cells.len()];
    want.iter().flatten().for_each(|&c| count[c] += 1);
    assert_eq!(fam.m, *count.iter().max().unwrap());
    // Each Z_i is an interval of arc-ordered cells.
    let pos = |c: usize| g.example1_position(cells.cell(c).representative).unwrap();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| pos(a).total_cmp(&pos(b)));
    let rank: Vec<usize> = {
        let mut r = vec![0; cells.len()];
        order.iter().enumerate().for_each(|(i, &c)| r[c] = i);
        r
    };
    for z in &got {
        let mut ranks: Vec<usize> = z.iter().map(|&c| rank[c]).collect();
        ranks.sort_unstable();
        assert_eq!(ranks.last().unwrap() - ranks[0] + 1, ranks.len(), "{z:?}");
    }
}
