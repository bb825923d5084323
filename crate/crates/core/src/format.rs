//! Serialization: the line-based graph text format and versioned JSON
//! documents for reports, cells, covers and trees.
//!
//! Graph text:
//!
//! ```text
//! graph <family_tag> <V> <E> root=<id> depth=<R>
//! l <v> <layer>      (optional, one per vertex in id order)
//! e <u> <v>          (u < v, sorted)
//! ```

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::covering::{BallCover, CoverCertificate, DoublingReport, PackingReport};
use crate::error::{Error, Result};
use crate::faithful::{
    CompletionReport, DoubleRay, FaithfulParams, FaithfulTree, RayCensus, StageRecord, StarReport, SuffixReport,
    Termination,
};
use crate::geodetic::{AuditReport, LimitSetFamily, SeparatorResult, TieBreak};
use crate::graph::{Graph, TruncatedGraph};
use crate::hyperbolicity::{BasepointReport, ProductGeodesicReport, ThinTriangleReport, Triple};
use crate::metric::FiniteMetric;
use crate::visual::{BoundaryCellSet, Cell, SandwichReport};
use crate::FORMAT_VERSION;

pub fn write_graph(g: &TruncatedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "graph {} {} {} root={} depth={}",
        g.family_tag(),
        g.vertex_count(),
        g.edge_count(),
        g.root(),
        g.depth()
    );
    if let Some(layers) = g.layer_of() {
        for (v, l) in layers.iter().enumerate() {
            let _ = writeln!(out, "l {v} {l}");
        }
    }
    for (u, v) in g.graph().edges() {
        let _ = writeln!(out, "e {u} {v}");
    }
    out
}

struct Lines<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            offset,
            message: message.into(),
        }
    }

    /// Next line (without its newline) and its starting offset.
    fn next(&mut self) -> Result<Option<(usize, &'a str)>> {
        if self.pos == self.text.len() {
            return Ok(None);
        }
        let start = self.pos;
        self.line += 1;
        match self.text[start..].find('\n') {
            Some(i) => {
                self.pos = start + i + 1;
                Ok(Some((start, &self.text[start..start + i])))
            }
            None => Err(Error::Parse {
                line: self.line,
                offset: self.text.len(),
                message: "missing newline at end of input".into(),
            }),
        }
    }
}

fn parse_num(lines: &Lines, start: usize, line: &str, token: &str) -> Result<usize> {
    let offset = start + (token.as_ptr() as usize - line.as_ptr() as usize);
    let canonical =
        token == "0" || (!token.is_empty() && !token.starts_with('0') && token.bytes().all(|b| b.is_ascii_digit()));
    if !canonical {
        return Err(lines.err(offset, format!("expected a number, found `{token}`")));
    }
    token
        .parse()
        .map_err(|_| lines.err(offset, format!("number `{token}` out of range")))
}

fn split_exact<'a>(lines: &Lines, start: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.len() != n || parts.iter().any(|p| p.is_empty()) {
        return Err(lines.err(start, format!("expected {n} single-space separated fields")));
    }
    Ok(parts)
}

/// Parses the graph text format. Only the canonical form written by
/// [`write_graph`] is accepted, so parsing and writing round-trip exactly.
pub fn parse_graph(text: &str) -> Result<TruncatedGraph> {
    let mut lines = Lines { text, pos: 0, line: 0 };
    let (start, header) = lines.next()?.ok_or_else(|| lines.err(0, "empty input"))?;
    let parts = split_exact(&lines, start, header, 6)?;
    if parts[0] != "graph" {
        return Err(lines.err(start, "header must start with `graph`"));
    }
    let tag = parts[1];
    let nv = parse_num(&lines, start, header, parts[2])?;
    let ne = parse_num(&lines, start, header, parts[3])?;
    let field = |p: &'static str, token: &str| -> Result<usize> {
        let v = token
            .strip_prefix(p)
            .ok_or_else(|| lines.err(start, format!("expected `{p}<n>`")))?;
        parse_num(&lines, start, header, v)
    };
    let root = field("root=", parts[4])?;
    let depth = field("depth=", parts[5])?;
    if nv == 0 {
        return Err(lines.err(start, "graph needs at least one vertex"));
    }
    if nv > 1 << 24 || ne > 1 << 28 {
        return Err(lines.err(start, "graph too large"));
    }

    let mut layers: Vec<u32> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(ne.min(1 << 20));
    let mut pending = lines.next()?;
    while let Some((start, line)) = pending {
        if !line.starts_with("l ") {
            break;
        }
        let p = split_exact(&lines, start, line, 3)?;
        let v = parse_num(&lines, start, line, p[1])?;
        let l = parse_num(&lines, start, line, p[2])?;
        if v != layers.len() || v >= nv {
            return Err(lines.err(start, format!("layer line for vertex {v} out of order")));
        }
        layers.push(u32::try_from(l).map_err(|_| lines.err(start, "layer out of range"))?);
        pending = lines.next()?;
    }
    if !layers.is_empty() && layers.len() != nv {
        let offset = pending.map_or(text.len(), |(s, _)| s);
        return Err(lines.err(offset, format!("{} layer lines for {nv} vertices", layers.len())));
    }
    while let Some((start, line)) = pending {
        let p = split_exact(&lines, start, line, 3)?;
        if p[0] != "e" {
            return Err(lines.err(start, format!("unexpected record `{}`", p[0])));
        }
        if edges.len() == ne {
            return Err(lines.err(start, format!("more than {ne} edges")));
        }
        let u = parse_num(&lines, start, line, p[1])?;
        let v = parse_num(&lines, start, line, p[2])?;
        if !(u < v && v < nv) {
            return Err(lines.err(start, format!("edge {u} {v} must satisfy u < v < {nv}")));
        }
        if edges.last().is_some_and(|&last| last >= (u, v)) {
            return Err(lines.err(start, "edges must be sorted and distinct"));
        }
        edges.push((u, v));
        pending = lines.next()?;
    }
    if edges.len() != ne {
        return Err(lines.err(
            text.len(),
            format!("expected {ne} edges, found {} (truncated input?)", edges.len()),
        ));
    }
    let graph = Graph::from_edges(nv, &edges).map_err(|e| lines.err(text.len(), e.to_string()))?;
    let g = TruncatedGraph::new(graph, root, tag, (!layers.is_empty()).then_some(layers))
        .map_err(|e| lines.err(0, e.to_string()))?;
    if g.depth() as usize != depth {
        return Err(lines.err(
            0,
            format!("header depth {depth} differs from the root eccentricity {}", g.depth()),
        ));
    }
    Ok(g)
}

/// A versioned JSON document.
pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;
    fn version(&self) -> u32;
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Document>(doc: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(doc).expect("documents serialize");
    out.push(b'\n');
    out
}

fn json_error(bytes: &[u8], e: serde_json::Error) -> Error {
    let line = e.line().max(1);
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            offset += e.column().saturating_sub(1).min(l.len());
            break;
        }
        offset += l.len() + 1;
    }
    Error::Parse {
        line,
        offset: offset.min(bytes.len()),
        message: e.to_string(),
    }
}

pub fn from_json<T: Document>(bytes: &[u8]) -> Result<T> {
    let probe: VersionProbe = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))?;
    if probe.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            kind: T::KIND,
            found: probe.version,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))
}

/// Scan caps used for a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub basepoint_cap: usize,
    pub basepoint_samples: usize,
    pub thin_triangle_cap: usize,
    pub thin_triangle_samples: usize,
    pub product_cap: usize,
    pub product_samples: usize,
    /// Largest point set of the full visual metric (root ball beyond).
    pub visual_points: usize,
    pub exact_packing_points: usize,
    pub exact_set_cover_candidates: usize,
}

impl Default for Caps {
    fn default() -> Self {
        use crate::hyperbolicity::ScanOptions;
        Self {
            basepoint_cap: ScanOptions::BASEPOINT.exhaustive_cap,
            basepoint_samples: ScanOptions::BASEPOINT.samples,
            thin_triangle_cap: ScanOptions::THIN_TRIANGLE.exhaustive_cap,
            thin_triangle_samples: ScanOptions::THIN_TRIANGLE.samples,
            product_cap: ScanOptions::PRODUCT_GEODESIC.exhaustive_cap,
            product_samples: ScanOptions::PRODUCT_GEODESIC.samples,
            visual_points: 1024,
            exact_packing_points: crate::covering::EXACT_PACKING_MAX_POINTS,
            exact_set_cover_candidates: crate::covering::EXACT_SET_COVER_MAX_CANDIDATES,
        }
    }
}

/// Provenance stamped on reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub config_hash: String,
    pub caps: Caps,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaChecks {
    pub basepoint_transfer: Option<BasepointReport>,
    pub thin_triangle: Option<ThinTriangleReport>,
    pub product_vs_geodesic: Option<ProductGeodesicReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaDoc {
    pub version: u32,
    pub family: String,
    pub base: usize,
    pub delta2x: u32,
    pub witnesses: Vec<Triple>,
    pub checks: DeltaChecks,
    pub meta: Option<Meta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualDoc {
    pub version: u32,
    pub family: String,
    pub base: usize,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub points: usize,
    pub sandwich: SandwichReport,
    pub metric_axiom_violations: usize,
    pub meta: Option<Meta>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEntry {
    pub id: usize,
    pub members: Vec<usize>,
    pub representative: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellsDoc {
    pub version: u32,
    pub family: String,
    #[serde(rename = "R")]
    pub radius: u32,
    pub threshold2x: u32,
    pub epsilon: f64,
    pub vertex_count: usize,
    pub cells: Vec<CellEntry>,
    /// `d_eps` between representatives, lower triangle row by row.
    pub metric: Vec<f64>,
    pub meta: Option<Meta>,
}

impl CellsDoc {
    pub fn new(family: &str, cells: &BoundaryCellSet) -> Self {
        Self {
            version: FORMAT_VERSION,
            family: family.to_string(),
            radius: cells.radius(),
            threshold2x: cells.threshold2x(),
            epsilon: cells.epsilon(),
            vertex_count: cells.vertex_count(),
            cells: cells
                .cells()
                .iter()
                .enumerate()
                .map(|(id, c)| CellEntry {
                    id,
                    members: c.members.clone(),
                    representative: c.representative,
                })
                .collect(),
            metric: cells.metric().lower_triangle(),
            meta: None,
        }
    }

    pub fn to_cells(&self) -> Result<BoundaryCellSet> {
        let n = self.cells.len();
        let metric = FiniteMetric::from_lower_triangle(n, &self.metric).ok_or_else(|| {
            Error::InvalidParameter(format!("metric has {} entries for {n} cells", self.metric.len()))
        })?;
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return Err(Error::InvalidParameter(format!("cell {i} carries id {}", c.id)));
            }
        }
        let cells = self
            .cells
            .iter()
            .map(|c| Cell {
                members: c.members.clone(),
                representative: c.representative,
            })
            .collect();
        BoundaryCellSet::from_parts(
            self.vertex_count,
            self.radius,
            self.threshold2x,
            self.epsilon,
            cells,
            metric,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverDoc {
    pub version: u32,
    pub r: f64,
    pub kappa: u32,
    pub centers: Vec<usize>,
    pub colors: Vec<usize>,
    pub certificates: CoverCertificate,
}

impl CoverDoc {
    pub fn new(cover: &BallCover) -> Self {
        Self {
            version: FORMAT_VERSION,
            r: cover.r,
            kappa: cover.kappa,
            centers: cover.centers.clone(),
            colors: cover.colors.clone(),
            certificates: cover.certificates.clone(),
        }
    }

    pub fn to_cover(&self) -> Result<BallCover> {
        if self.centers.len() != self.colors.len() {
            return Err(Error::InvalidParameter("centers and colors differ in length".into()));
        }
        Ok(BallCover {
            r: self.r,
            kappa: self.kappa,
            centers: self.centers.clone(),
            colors: self.colors.clone(),
            certificates: self.certificates.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionDoc {
    pub version: u32,
    pub family: String,
    pub cells: usize,
    /// Absent when the cell metric has too few scales to fit.
    pub packing: Option<PackingReport>,
    pub packing_note: Option<String>,
    pub doubling: DoublingReport,
    pub cover: Option<CoverDoc>,
    pub meta: Option<Meta>,
}

/// A cover of the cells by cell sets (input of the geodetic audit).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCoverDoc {
    pub version: u32,
    pub claimed_dimension: usize,
    pub sets: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulSection {
    pub params: FaithfulParams,
    pub termination: Termination,
    pub rays: Vec<DoubleRay>,
    pub partial_parents: Vec<Option<usize>>,
    pub star: StarReport,
    pub suffix: SuffixReport,
    pub completion: CompletionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub version: u32,
    pub family: String,
    pub root: usize,
    pub parents: Vec<Option<usize>>,
    pub stages: Vec<StageRecord>,
    pub census: RayCensus,
    pub faithful: Option<FaithfulSection>,
    pub tie_break: Option<TieBreak>,
    pub meta: Option<Meta>,
}

impl TreeDoc {
    pub fn from_faithful(family: &str, f: &FaithfulTree) -> Self {
        Self {
            version: FORMAT_VERSION,
            family: family.to_string(),
            root: f.tree.root(),
            parents: f.tree.parents().to_vec(),
            stages: f.stages.clone(),
            census: f.census.clone(),
            faithful: Some(FaithfulSection {
                params: f.params.clone(),
                termination: f.termination,
                rays: f.rays.clone(),
                partial_parents: f.partial.parents().to_vec(),
                star: f.star.clone(),
                suffix: f.suffix.clone(),
                completion: f.completion.clone(),
            }),
            tie_break: None,
            meta: None,
        }
    }

    pub fn to_tree(&self, g: &Graph) -> Result<crate::tree::RootedTree> {
        crate::tree::RootedTree::from_parents(g, self.root, self.parents.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodeticDoc {
    pub version: u32,
    pub family: String,
    pub tie_break: TieBreak,
    pub certified: bool,
    pub census: RayCensus,
    pub limit_sets: Option<LimitSetFamily>,
    pub separator: Option<SeparatorResult>,
    pub audit: Option<AuditReport>,
    pub meta: Option<Meta>,
}

macro_rules! document {
    ($($t:ty => $kind:literal),* $(,)?) => {
        $(impl Document for $t {
            const KIND: &'static str = $kind;
            fn version(&self) -> u32 {
                self.version
            }
        })*
    };
}

document! {
    DeltaDoc => "delta report",
    VisualDoc => "visual report",
    CellsDoc => "cells",
    CoverDoc => "cover",
    DimensionDoc => "dimension report",
    SetCoverDoc => "set cover",
    TreeDoc => "tree",
    GeodeticDoc => "geodetic report",
}
