use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hypertree::covering::{assouad_estimate, default_packing_grid, default_radius_grid, doubling_kappa};
use hypertree::faithful::{build_faithful_tree, FaithfulOptions, FaithfulTree, RayCensus};
use hypertree::format::{
    to_json, write_graph, Caps, CellsDoc, DeltaChecks, DeltaDoc, DimensionDoc, Document, GeodeticDoc, Meta,
    SetCoverDoc, TreeDoc, VisualDoc,
};
use hypertree::geodetic::{build_geodetic_tree, find_separator, limit_sets, lower_bound_audit, TieBreak};
use hypertree::graph::all_pairs_distances;
use hypertree::hyperbolicity::{
    basepoint_transfer_check, gromov_table, product_vs_geodesic_check, thin_triangle_delta, LexLeast, ScanOptions,
};
use hypertree::visual::{boundary_cells, chain_metric, check_admissible, epsilon_prime, sandwich_check, CellOptions};
use hypertree::{BoundaryCellSet, DistanceOracle, GromovTable, TruncatedGraph, FORMAT_VERSION};

use crate::config::ExperimentConfig;

/// A module error tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: hypertree::Error,
}

fn at<T>(stage: &'static str, r: hypertree::Result<T>) -> Result<T, StageError> {
    r.map_err(|source| StageError { stage, source })
}

pub struct Prepared {
    pub graph: TruncatedGraph,
    pub dist: DistanceOracle,
    /// Products based at the root.
    pub table: GromovTable,
}

pub fn prepare(graph: TruncatedGraph) -> Result<Prepared, StageError> {
    let dist = at("distances", all_pairs_distances(graph.graph()))?;
    let table = gromov_table(&dist, graph.root());
    Ok(Prepared { graph, dist, table })
}

fn scan(cap: usize, samples: usize, seed: u64) -> ScanOptions {
    ScanOptions {
        exhaustive_cap: cap,
        samples,
        seed,
    }
}

pub fn delta_report(p: &Prepared, base: usize, caps: &Caps, seed: u64, thin: bool) -> DeltaDoc {
    let t = if base == p.graph.root() {
        p.table.clone()
    } else {
        gromov_table(&p.dist, base)
    };
    let choice = LexLeast {
        graph: p.graph.graph(),
        dist: &p.dist,
    };
    let checks = DeltaChecks {
        basepoint_transfer: Some(basepoint_transfer_check(
            &p.dist,
            t.delta2x(),
            scan(caps.basepoint_cap, caps.basepoint_samples, seed),
        )),
        thin_triangle: thin.then(|| {
            thin_triangle_delta(
                &p.dist,
                &choice,
                scan(caps.thin_triangle_cap, caps.thin_triangle_samples, seed),
            )
        }),
        product_vs_geodesic: Some(product_vs_geodesic_check(
            p.graph.graph(),
            &p.dist,
            &t,
            scan(caps.product_cap, caps.product_samples, seed),
        )),
    };
    DeltaDoc {
        version: FORMAT_VERSION,
        family: p.graph.family_tag().to_string(),
        base,
        delta2x: t.delta2x(),
        witnesses: t.witness().into_iter().collect(),
        checks,
        meta: None,
    }
}

/// Sandwich and axiom report for the visual metric on the largest root
/// ball with at most `caps.visual_points` vertices.
pub fn visual_report(p: &Prepared, base: usize, epsilon: f64, caps: &Caps) -> hypertree::Result<VisualDoc> {
    let t = if base == p.graph.root() {
        p.table.clone()
    } else {
        gromov_table(&p.dist, base)
    };
    check_admissible(epsilon, t.delta2x())?;
    let row = p.dist.row(base);
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by_key(|&v| (row[v], v));
    let mut take = order.len().min(caps.visual_points);
    while take < order.len() && take > 0 && row[order[take]] == row[order[take - 1]] {
        take -= 1;
    }
    let mut points: Vec<usize> = order[..take.max(1)].to_vec();
    points.sort_unstable();
    let vm = chain_metric(&t, epsilon, &points)?;
    Ok(VisualDoc {
        version: FORMAT_VERSION,
        family: p.graph.family_tag().to_string(),
        base,
        epsilon,
        epsilon_prime: epsilon_prime(epsilon, t.delta2x()),
        points: points.len(),
        sandwich: sandwich_check(&vm, &t),
        metric_axiom_violations: vm.metric.axiom_violations(1e-12),
        meta: None,
    })
}

pub fn cells(p: &Prepared, cfg: &ExperimentConfig, epsilon: f64) -> hypertree::Result<BoundaryCellSet> {
    let opts = CellOptions {
        radius: cfg.radius,
        threshold2x: cfg.threshold2x,
        epsilon,
        chain_points: cfg.chain_points,
    };
    boundary_cells(&p.graph, &p.dist, &p.table, opts)
}

pub fn dimension_report(family: &str, cells: &BoundaryCellSet) -> DimensionDoc {
    let m = cells.metric();
    let (packing, packing_note) = match assouad_estimate(m, &default_packing_grid(m)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    DimensionDoc {
        version: FORMAT_VERSION,
        family: family.to_string(),
        cells: cells.len(),
        packing,
        packing_note,
        doubling: doubling_kappa(m, &default_radius_grid(m)),
        cover: None,
        meta: None,
    }
}

/// Default audit cover: two overlapping arc halves on example1 (claimed
/// dimension 1), the single set of all cells elsewhere.
pub fn default_audit_cover(g: &TruncatedGraph, cells: &BoundaryCellSet) -> SetCoverDoc {
    let all: Vec<usize> = (0..cells.len()).collect();
    let sets = match cells
        .cells()
        .iter()
        .map(|c| g.example1_position(c.representative))
        .collect::<Option<Vec<f64>>>()
    {
        Some(pos) if cells.len() >= 2 => {
            let lo: Vec<usize> = all.iter().copied().filter(|&c| pos[c] <= 0.6).collect();
            let hi: Vec<usize> = all.iter().copied().filter(|&c| pos[c] >= 0.4).collect();
            return SetCoverDoc {
                version: FORMAT_VERSION,
                claimed_dimension: 1,
                sets: vec![lo, hi],
            };
        }
        _ => vec![all],
    };
    SetCoverDoc {
        version: FORMAT_VERSION,
        claimed_dimension: 0,
        sets,
    }
}

pub fn geodetic_report(
    p: &Prepared,
    cells: &BoundaryCellSet,
    tie_break: TieBreak,
    kappa: u32,
    cover: Option<&SetCoverDoc>,
) -> hypertree::Result<GeodeticDoc> {
    let tree = build_geodetic_tree(p.graph.graph(), &p.dist, p.graph.root(), tie_break);
    let census = hypertree::faithful::ray_census(&tree.tree, &p.dist, cells, kappa);
    let root_split = match limit_sets(&tree.tree, &p.dist, &[p.graph.root()], cells) {
        Ok(f) => Some(f),
        Err(hypertree::Error::NoSphereVertices) => None,
        Err(e) => return Err(e),
    };
    let (separator, audit) = match cover {
        Some(c) => (
            Some(find_separator(&tree.tree, &p.dist, cells, &c.sets)?),
            Some(lower_bound_audit(
                &tree.tree,
                &p.dist,
                cells,
                &c.sets,
                c.claimed_dimension,
            )?),
        ),
        None => (None, None),
    };
    Ok(GeodeticDoc {
        version: FORMAT_VERSION,
        family: p.graph.family_tag().to_string(),
        tie_break,
        certified: tree.certified,
        census,
        limit_sets: root_split,
        separator,
        audit,
        meta: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn inv(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Invariant {
    Invariant {
        name: name.into(),
        holds,
        detail: detail.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub version: u32,
    pub family: String,
    pub vertices: usize,
    pub delta2x: u32,
    pub epsilon: f64,
    pub cells: usize,
    pub kappa: u32,
    pub stages: Vec<String>,
    pub invariants: Vec<Invariant>,
    pub ok: bool,
    pub meta: Meta,
}

impl Document for SummaryDoc {
    const KIND: &'static str = "summary";
    fn version(&self) -> u32 {
        self.version
    }
}

pub fn faithful_invariants(seed: u64, f: &FaithfulTree) -> Vec<Invariant> {
    let covers_ok = f.stages.iter().all(|s| {
        let c = &s.cover.certificates;
        c.cover
            && c.seeds_included
            && c.per_color_mult.iter().all(|&m| m <= 1)
            && c.total_mult as u64 <= 1u64 << s.cover.kappa.min(63)
    });
    vec![
        inv(
            format!("faithful-spanning:{seed}"),
            f.tree.is_spanning(),
            format!("{} vertices", f.tree.member_count()),
        ),
        inv(
            format!("faithful-star:{seed}"),
            f.star.edges_on_recorded_rays == f.star.edges,
            format!(
                "{}/{} partial-tree edges on recorded rays",
                f.star.edges_on_recorded_rays, f.star.edges
            ),
        ),
        inv(
            format!("schedule:{seed}"),
            f.stages.iter().all(|s| s.schedule_exact),
            format!("{} stages", f.stages.len()),
        ),
        inv(
            format!("ls23-certificates:{seed}"),
            covers_ok,
            "cover, per-color and total multiplicity, seeds",
        ),
        census_invariant(&format!("census-bound:{seed}"), &f.census),
    ]
}

fn census_invariant(name: &str, c: &RayCensus) -> Invariant {
    inv(
        name,
        c.within_bound,
        format!("max multiplicity {} vs 2^{}", c.max_multiplicity, c.bound_log2),
    )
}

/// Named files of a report bundle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
    pub ok: bool,
}

impl Bundle {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("csv rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}

#[derive(Serialize)]
struct MetricRow {
    i: usize,
    j: usize,
    distance: f64,
}

#[derive(Serialize)]
struct CensusRow<'a> {
    tree: &'a str,
    seed: u64,
    cell: usize,
    multiplicity: usize,
}

#[derive(Serialize)]
struct MultiplicityRow<'a> {
    family: &'a str,
    boundary_radius: u32,
    tree: &'a str,
    seed: u64,
    max_multiplicity: usize,
    bound_log2: u32,
}

#[derive(Serialize)]
struct TightnessRow {
    bin_low: f64,
    bin_high: f64,
    count: u64,
}

/// Runs every module on the configured family and collects the bundle.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<Bundle, StageError> {
    cfg.validate().map_err(|m| StageError {
        stage: "config",
        source: hypertree::Error::InvalidParameter(m),
    })?;
    let meta = Meta {
        config_hash: cfg.hash(),
        caps: cfg.caps,
    };
    let family = at("generate", cfg.family())?;
    let graph = at("generate", family.generate())?;
    let tag = graph.family_tag().to_string();
    let mut files = BTreeMap::new();
    let mut stages = vec!["generate".to_string()];
    let mut invariants = Vec::new();
    files.insert("graph.txt".to_string(), write_graph(&graph).into_bytes());

    let p = prepare(graph)?;
    stages.push("distances".into());
    let base = cfg.base.unwrap_or(p.graph.root());
    if base >= p.graph.vertex_count() {
        return Err(StageError {
            stage: "hyperbolicity",
            source: hypertree::Error::InvalidParameter(format!("base {base} out of range")),
        });
    }

    let mut delta = delta_report(&p, base, &cfg.caps, cfg.scan_seed, true);
    let bp = delta.checks.basepoint_transfer.as_ref().unwrap();
    invariants.push(inv(
        "basepoint-transfer",
        bp.violations.is_empty(),
        format!("{} bases, bound2x {}", bp.bases_checked, bp.bound2x),
    ));
    let pg = delta.checks.product_vs_geodesic.as_ref().unwrap();
    invariants.push(inv(
        "product-vs-geodesic",
        pg.violations.is_empty(),
        format!("{} pairs", pg.pairs_checked),
    ));
    delta.meta = Some(meta.clone());
    files.insert("delta.json".into(), to_json(&delta));
    stages.push("hyperbolicity".into());

    let epsilon = cfg.epsilon.resolve(p.table.delta2x());
    let mut visual = at("visual-boundary", visual_report(&p, base, epsilon, &cfg.caps))?;
    invariants.push(inv(
        "visual-metric-axioms",
        visual.metric_axiom_violations == 0,
        format!("{} points", visual.points),
    ));
    invariants.push(inv(
        "sandwich",
        visual.sandwich.violations.is_empty(),
        format!(
            "{} pairs at tolerance {}",
            visual.sandwich.pairs_checked, visual.sandwich.tolerance
        ),
    ));
    let tightness: Vec<TightnessRow> = visual
        .sandwich
        .tightness
        .iter()
        .enumerate()
        .map(|(i, &count)| TightnessRow {
            bin_low: i as f64 / 10.0,
            bin_high: (i + 1) as f64 / 10.0,
            count,
        })
        .collect();
    files.insert("sandwich_tightness.csv".into(), csv_bytes(tightness));
    visual.meta = Some(meta.clone());
    files.insert("visual.json".into(), to_json(&visual));
    let cells = at("visual-boundary", cells(&p, cfg, epsilon))?;
    let mut cells_doc = CellsDoc::new(&tag, &cells);
    cells_doc.meta = Some(meta.clone());
    files.insert("cells.json".into(), to_json(&cells_doc));
    let m = cells.metric();
    let rows = (0..m.len()).flat_map(|i| {
        (0..m.len()).map(move |j| MetricRow {
            i,
            j,
            distance: m.get(i, j),
        })
    });
    files.insert("cell_metric.csv".into(), csv_bytes(rows));
    stages.push("visual-boundary".into());

    let mut dim = dimension_report(&tag, &cells);
    dim.meta = Some(meta.clone());
    let kappa = cfg.kappa.unwrap_or(dim.doubling.kappa);
    files.insert("dimension.json".into(), to_json(&dim));
    stages.push("covering-dimension".into());

    let mut census_rows = Vec::new();
    let mut mult_rows = Vec::new();
    let radius = cells.radius();
    for &seed in &cfg.seeds {
        let opts = FaithfulOptions {
            epsilon0: None,
            kappa: cfg.kappa,
            stage_cap: cfg.stage_cap,
            seed,
        };
        let f = at(
            "faithful-spantree",
            build_faithful_tree(&p.graph, &p.dist, &p.table, &cells, opts),
        )?;
        invariants.extend(faithful_invariants(seed, &f));
        for (cell, &multiplicity) in f.census.per_cell.iter().enumerate() {
            census_rows.push(CensusRow {
                tree: "faithful",
                seed,
                cell,
                multiplicity,
            });
        }
        mult_rows.push((seed, f.census.max_multiplicity, f.census.bound_log2));
        let mut doc = TreeDoc::from_faithful(&tag, &f);
        doc.meta = Some(meta.clone());
        files.insert(format!("faithful-seed{seed}.json"), to_json(&doc));
    }
    stages.push("faithful-spantree".into());

    let cover = default_audit_cover(&p.graph, &cells);
    let mut geo = at(
        "geodesic-spantree",
        geodetic_report(&p, &cells, cfg.tie_break, kappa, Some(&cover)),
    )?;
    invariants.push(inv("geodetic-certificate", geo.certified, cfg.tie_break.to_string()));
    if let Some(audit) = &geo.audit {
        let holds = !audit.precondition || (audit.refinement_covers && audit.refinement_refines);
        invariants.push(inv(
            "audit-refinement",
            holds,
            audit.note.clone().unwrap_or_else(|| "refinement checked".into()),
        ));
    }
    for (cell, &multiplicity) in geo.census.per_cell.iter().enumerate() {
        census_rows.push(CensusRow {
            tree: "geodetic",
            seed: 0,
            cell,
            multiplicity,
        });
    }
    let mut mult: Vec<MultiplicityRow> = mult_rows
        .iter()
        .map(|&(seed, max_multiplicity, bound_log2)| MultiplicityRow {
            family: &tag,
            boundary_radius: radius,
            tree: "faithful",
            seed,
            max_multiplicity,
            bound_log2,
        })
        .collect();
    mult.push(MultiplicityRow {
        family: &tag,
        boundary_radius: radius,
        tree: "geodetic",
        seed: 0,
        max_multiplicity: geo.census.max_multiplicity,
        bound_log2: geo.census.bound_log2,
    });
    files.insert("multiplicity.csv".into(), csv_bytes(mult));
    files.insert("census.csv".into(), csv_bytes(census_rows));
    files.insert("audit_cover.json".into(), to_json(&cover));
    geo.meta = Some(meta.clone());
    files.insert("geodetic.json".into(), to_json(&geo));
    stages.push("geodesic-spantree".into());

    let ok = invariants.iter().all(|i| i.holds);
    let summary = SummaryDoc {
        version: FORMAT_VERSION,
        family: tag,
        vertices: p.graph.vertex_count(),
        delta2x: p.table.delta2x(),
        epsilon,
        cells: cells.len(),
        kappa,
        stages,
        invariants,
        ok,
        meta,
    };
    files.insert("summary.json".into(), to_json(&summary));
    files.insert("config.json".into(), cfg.to_json());
    Ok(Bundle { files, ok })
}
