//! Claims that do not hold on the finite models. Run with `--ignored`; each
//! test fails and its message carries the measurement.

use hypertree::faithful::{build_faithful_tree, FaithfulOptions};
use hypertree::graph::{all_pairs_distances, generate_cycle, generate_example1};
use hypertree::hyperbolicity::{gromov_table, product_vs_geodesic_check, ScanOptions};
use hypertree::visual::{auto_epsilon, boundary_cells, CellOptions};

#[test]
#[ignore = "fails: vertex geodesics in a triangle sit 1/2 above the product while delta is 0"]
fn product_geodesic_bound_on_triangle() {
    let g = generate_cycle(3).unwrap();
    let d = all_pairs_distances(g.graph()).unwrap();
    let t = gromov_table(&d, g.root());
    let r = product_vs_geodesic_check(g.graph(), &d, &t, ScanOptions::PRODUCT_GEODESIC);
    assert!(
        r.violations.is_empty(),
        "delta2x {}, violations {:?}",
        t.delta2x(),
        r.violations
    );
}

fn faithful_depth12(seed: u64) -> hypertree::faithful::FaithfulTree {
    let g = generate_example1(12).unwrap();
    let d = all_pairs_distances(g.graph()).unwrap();
    let t = gromov_table(&d, g.root());
    let cells = boundary_cells(&g, &d, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
    build_faithful_tree(
        &g,
        &d,
        &t,
        &cells,
        FaithfulOptions {
            seed,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
#[ignore = "fails: the splice geodesic between adjacent cells runs along the sphere"]
fn faithful_suffix_within_four_delta_at_depth_12() {
    let bad: Vec<(u64, usize, usize)> = (1..=5)
        .map(|seed| (seed, faithful_depth12(seed).suffix))
        .filter(|(_, s)| s.within_4delta < s.leaves)
        .map(|(seed, s)| (seed, s.leaves - s.within_4delta, s.leaves))
        .collect();
    assert!(bad.is_empty(), "(seed, short leaves, leaves): {bad:?}");
}

#[test]
#[ignore = "fails: every measured census has multiplicity 1"]
fn faithful_multiplicity_at_least_two() {
    let mults: Vec<usize> = (1..=5)
        .map(|seed| faithful_depth12(seed).census.max_multiplicity)
        .collect();
    assert!(mults.iter().all(|&m| m >= 2), "max multiplicities {mults:?}");
}
