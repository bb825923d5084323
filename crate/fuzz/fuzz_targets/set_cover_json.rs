#![no_main]

use std::sync::OnceLock;

use hypertree::format::{from_json, SetCoverDoc};
use hypertree::geodetic::{build_geodetic_tree, find_separator, lower_bound_audit, TieBreak};
use hypertree::graph::{all_pairs_distances, generate_example1};
use hypertree::hyperbolicity::gromov_table;
use hypertree::visual::{auto_epsilon, boundary_cells, CellOptions};
use hypertree::{BoundaryCellSet, DistanceOracle, RootedTree};
use libfuzzer_sys::fuzz_target;

struct Fixture {
    tree: RootedTree,
    dist: DistanceOracle,
    cells: BoundaryCellSet,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g = generate_example1(6).unwrap();
        let dist = all_pairs_distances(g.graph()).unwrap();
        let t = gromov_table(&dist, g.root());
        let cells = boundary_cells(&g, &dist, &t, CellOptions::new(auto_epsilon(t.delta2x()))).unwrap();
        let tree = build_geodetic_tree(g.graph(), &dist, g.root(), TieBreak::LeastId).tree;
        Fixture { tree, dist, cells }
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = from_json::<SetCoverDoc>(data) else {
        return;
    };
    let f = fixture();
    let _ = find_separator(&f.tree, &f.dist, &f.cells, &doc.sets);
    let _ = lower_bound_audit(&f.tree, &f.dist, &f.cells, &doc.sets, doc.claimed_dimension);
});
