use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hypertree::covering::ls23_cover;
use hypertree::faithful::{build_faithful_tree, FaithfulOptions};
use hypertree::format::{
    from_json, parse_graph, to_json, write_graph, CellsDoc, CoverDoc, Document, Meta, SetCoverDoc, TreeDoc,
};
use hypertree::geodetic::TieBreak;
use hypertree::visual::ChainPoints;
use hypertree::{Family, TruncatedGraph};
use hypertree_cli::pipeline::{self, faithful_invariants, Prepared};
use hypertree_cli::{run_pipeline, EpsilonPolicy, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "hypertree",
    version,
    about = "Finite-depth experiments on hyperbolic graphs and their boundaries"
)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "HYPERTREE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyName {
    Example1,
    Example2,
    Tree,
    Cycle,
    Path,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Generator family
    #[arg(long, value_enum, default_value = "example1")]
    family: FamilyName,
    /// Truncation depth (vertex count for cycle and path)
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Branching of the tree family
    #[arg(long, default_value_t = 2)]
    branching: usize,
    /// Read the graph from a text file instead of generating it
    #[arg(long)]
    graph: Option<PathBuf>,
}

impl GraphArgs {
    fn family(&self) -> Family {
        match self.family {
            FamilyName::Example1 => Family::Example1 { depth: self.depth },
            FamilyName::Example2 => Family::Example2 { depth: self.depth },
            FamilyName::Tree => Family::Tree {
                branching: self.branching,
                depth: self.depth,
            },
            FamilyName::Cycle => Family::Cycle { n: self.depth },
            FamilyName::Path => Family::Path { n: self.depth },
        }
    }

    fn load(&self) -> anyhow::Result<TruncatedGraph> {
        match &self.graph {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_graph(&text).with_context(|| format!("parsing {}", path.display()))
            }
            None => Ok(self.family().generate()?),
        }
    }
}

#[derive(Args, Clone)]
struct BoundaryArgs {
    /// Visual parameter: `auto` (ln sqrt 2 / delta) or a positive number
    #[arg(long, default_value = "auto")]
    epsilon: EpsilonPolicy,
    /// Sphere radius of the boundary cells [default: family boundary radius]
    #[arg(long)]
    radius: Option<u32>,
    /// Doubled clustering threshold on Gromov products [default: 2R - 1]
    #[arg(long)]
    threshold2x: Option<u32>,
    /// Points through which cell-metric chains may pass
    #[arg(long, value_enum, default_value = "sphere")]
    chain_points: ChainPointsArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChainPointsArg {
    Sphere,
    AllVertices,
}

impl From<ChainPointsArg> for ChainPoints {
    fn from(c: ChainPointsArg) -> Self {
        match c {
            ChainPointsArg::Sphere => ChainPoints::Sphere,
            ChainPointsArg::AllVertices => ChainPoints::AllVertices,
        }
    }
}

#[derive(Args, Clone)]
struct OutArg {
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph in the text format
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Exact doubled four-point delta with base-point, thin-triangle and product checks
    Delta {
        #[command(flatten)]
        graph: GraphArgs,
        /// Base point [default: root]
        #[arg(long)]
        base: Option<usize>,
        /// Skip the thin-triangle scan
        #[arg(long)]
        no_thin: bool,
        /// Seed of the sampled scans
        #[arg(long, default_value_t = 0)]
        scan_seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Visual metric sandwich check
    Visual {
        #[command(flatten)]
        graph: GraphArgs,
        /// Base point [default: root]
        #[arg(long)]
        base: Option<usize>,
        /// Visual parameter: `auto` or a positive number
        #[arg(long, default_value = "auto")]
        epsilon: EpsilonPolicy,
        /// Largest point set for the full metric
        #[arg(long, default_value_t = 1024)]
        max_points: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Boundary cells and their metric
    Cells {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Also write the cell metric as i,j,distance CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Packing and doubling estimates of the cell metric, optionally with an ls23 cover
    Dimension {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Read the cells from a cells JSON file instead
        #[arg(long)]
        cells: Option<PathBuf>,
        /// Also build a colored cover at this radius
        #[arg(long)]
        cover_radius: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Boundary-faithful spanning tree with its stage records and ray census
    Faithful {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Cell priority seed (0 = least id first)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Doubling exponent [default: estimated]
        #[arg(long)]
        kappa: Option<u32>,
        /// Largest number of stages
        #[arg(long, default_value_t = 32)]
        stage_cap: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Geodetic spanning tree, limit sets and the lower-bound audit
    Geodetic {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// least-id, greatest-id or random:<seed>
        #[arg(long, default_value = "least-id")]
        tie_break: TieBreak,
        /// Set cover JSON to audit; `default` uses the built-in cover
        #[arg(long)]
        audit: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run every stage and write a report bundle
    Pipeline {
        /// Experiment config JSON (flags below are ignored when given)
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Faithful-tree seeds, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "least-id")]
        tie_break: TieBreak,
        /// Bundle directory
        #[arg(long, default_value = "bundle")]
        out_dir: PathBuf,
        /// Write the effective config and exit
        #[arg(long)]
        print_config: bool,
    },
}

fn emit(out: &OutArg, bytes: &[u8]) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn config_from(graph: &GraphArgs, boundary: &BoundaryArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(graph.family());
    cfg.epsilon = boundary.epsilon;
    cfg.radius = boundary.radius;
    cfg.threshold2x = boundary.threshold2x;
    cfg.chain_points = boundary.chain_points.into();
    cfg
}

fn meta(cfg: &ExperimentConfig) -> Meta {
    Meta {
        config_hash: cfg.hash(),
        caps: cfg.caps,
    }
}

fn prepared(graph: &GraphArgs) -> anyhow::Result<Prepared> {
    Ok(pipeline::prepare(graph.load()?)?)
}

fn read_doc<T: Document>(path: &Path) -> anyhow::Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()?;
    }
    match cli.command {
        Command::Generate { graph, out } => emit(&out, write_graph(&graph.load()?).as_bytes())?,
        Command::Delta {
            graph,
            base,
            no_thin,
            scan_seed,
            out,
        } => {
            let p = prepared(&graph)?;
            let mut cfg = ExperimentConfig::new(graph.family());
            cfg.base = base;
            cfg.scan_seed = scan_seed;
            let base = base.unwrap_or(p.graph.root());
            if base >= p.graph.vertex_count() {
                bail!("base {base} out of range");
            }
            let mut doc = pipeline::delta_report(&p, base, &cfg.caps, scan_seed, !no_thin);
            doc.meta = Some(meta(&cfg));
            emit(&out, &to_json(&doc))?;
        }
        Command::Visual {
            graph,
            base,
            epsilon,
            max_points,
            out,
        } => {
            let p = prepared(&graph)?;
            let mut cfg = ExperimentConfig::new(graph.family());
            cfg.base = base;
            cfg.epsilon = epsilon;
            cfg.caps.visual_points = max_points.max(1);
            let base = base.unwrap_or(p.graph.root());
            let eps = epsilon.resolve(p.table.delta2x());
            let mut doc = pipeline::visual_report(&p, base, eps, &cfg.caps)?;
            doc.meta = Some(meta(&cfg));
            emit(&out, &to_json(&doc))?;
            if !doc.sandwich.violations.is_empty() || doc.metric_axiom_violations > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Cells {
            graph,
            boundary,
            csv,
            out,
        } => {
            let p = prepared(&graph)?;
            let cfg = config_from(&graph, &boundary);
            let cells = pipeline::cells(&p, &cfg, cfg.epsilon.resolve(p.table.delta2x()))?;
            let mut doc = CellsDoc::new(p.graph.family_tag(), &cells);
            doc.meta = Some(meta(&cfg));
            if let Some(path) = csv {
                let m = cells.metric();
                let mut w = ::csv::Writer::from_path(&path)?;
                w.write_record(["i", "j", "distance"])?;
                for i in 0..m.len() {
                    for j in 0..m.len() {
                        w.write_record([i.to_string(), j.to_string(), m.get(i, j).to_string()])?;
                    }
                }
                w.flush()?;
            }
            emit(&out, &to_json(&doc))?;
        }
        Command::Dimension {
            graph,
            boundary,
            cells,
            cover_radius,
            out,
        } => {
            let cfg = config_from(&graph, &boundary);
            let (tag, cells) = match cells {
                Some(path) => {
                    let doc: CellsDoc = read_doc(&path)?;
                    (doc.family.clone(), doc.to_cells()?)
                }
                None => {
                    let p = prepared(&graph)?;
                    let c = pipeline::cells(&p, &cfg, cfg.epsilon.resolve(p.table.delta2x()))?;
                    (p.graph.family_tag().to_string(), c)
                }
            };
            let mut doc = pipeline::dimension_report(&tag, &cells);
            if let Some(r) = cover_radius {
                let cover = ls23_cover(cells.metric(), r, doc.doubling.kappa, &[])?;
                doc.cover = Some(CoverDoc::new(&cover));
            }
            doc.meta = Some(meta(&cfg));
            emit(&out, &to_json(&doc))?;
        }
        Command::Faithful {
            graph,
            boundary,
            seed,
            kappa,
            stage_cap,
            out,
        } => {
            let p = prepared(&graph)?;
            let mut cfg = config_from(&graph, &boundary);
            cfg.seeds = vec![seed];
            cfg.kappa = kappa;
            cfg.stage_cap = stage_cap;
            let cells = pipeline::cells(&p, &cfg, cfg.epsilon.resolve(p.table.delta2x()))?;
            let opts = FaithfulOptions {
                epsilon0: None,
                kappa,
                stage_cap,
                seed,
            };
            let f = build_faithful_tree(&p.graph, &p.dist, &p.table, &cells, opts)?;
            let mut doc = TreeDoc::from_faithful(p.graph.family_tag(), &f);
            doc.meta = Some(meta(&cfg));
            emit(&out, &to_json(&doc))?;
            let failed: Vec<String> = faithful_invariants(seed, &f)
                .into_iter()
                .filter(|i| !i.holds)
                .map(|i| i.name)
                .collect();
            if !failed.is_empty() {
                eprintln!("invariants failed: {}", failed.join(", "));
                return Ok(ExitCode::from(1));
            }
        }
        Command::Geodetic {
            graph,
            boundary,
            tie_break,
            audit,
            out,
        } => {
            let p = prepared(&graph)?;
            let mut cfg = config_from(&graph, &boundary);
            cfg.tie_break = tie_break;
            let cells = pipeline::cells(&p, &cfg, cfg.epsilon.resolve(p.table.delta2x()))?;
            let cover: Option<SetCoverDoc> = match audit.as_deref() {
                None => None,
                Some("default") => Some(pipeline::default_audit_cover(&p.graph, &cells)),
                Some(path) => Some(read_doc(Path::new(path))?),
            };
            let kappa = hypertree::covering::doubling_kappa(
                cells.metric(),
                &hypertree::covering::default_radius_grid(cells.metric()),
            )
            .kappa;
            let mut doc = pipeline::geodetic_report(&p, &cells, tie_break, kappa, cover.as_ref())?;
            doc.meta = Some(meta(&cfg));
            emit(&out, &to_json(&doc))?;
        }
        Command::Pipeline {
            config,
            graph,
            boundary,
            seeds,
            tie_break,
            out_dir,
            print_config,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
                    ExperimentConfig::from_json(&bytes).map_err(anyhow::Error::msg)?
                }
                None => {
                    let mut cfg = config_from(&graph, &boundary);
                    cfg.seeds = seeds;
                    cfg.tie_break = tie_break;
                    cfg
                }
            };
            cfg.out_dir = Some(out_dir.clone());
            if print_config {
                std::io::stdout().write_all(&cfg.to_json())?;
                return Ok(ExitCode::SUCCESS);
            }
            let bundle = match run_pipeline(&cfg) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(2));
                }
            };
            bundle
                .write(&out_dir)
                .with_context(|| format!("writing bundle to {}", out_dir.display()))?;
            if !bundle.ok {
                eprintln!("hard invariants failed; see {}", out_dir.join("summary.json").display());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
