//! Finite-depth machinery for locally finite hyperbolic graphs.
//!
//! The crate works on finite truncations (balls around a root) of a few
//! infinite graph families and computes exact hop metrics, Gromov products,
//! 4-point and thin-triangle hyperbolicity constants, the visual metric
//! `d_eps`, a boundary-cell model of the hyperbolic boundary, packing and
//! doubling statistics, colored ball covers with certified multiplicities,
//! plus two spanning-tree constructions audited against the boundary:
//!
//! * [`faithful`]: staged nets on the boundary cells, spliced geodesic
//!   branches, tree completion and a ray census per cell;
//! * [`geodetic`]: breadth-first (distance preserving) spanning trees, limit
//!   sets of separator components and the lower-bound counting chain.
//!
//! Everything is deterministic: ties are broken by least vertex id unless a
//! seed explicitly asks for a shuffled priority.

pub mod covering;
pub mod error;
pub mod faithful;
pub mod format;
pub mod geodetic;
pub mod graph;
pub mod hyperbolicity;
pub mod metric;
pub mod tree;
pub mod unionfind;
pub mod visual;

pub use error::{Error, Result};
pub use graph::{DistanceOracle, Family, Graph, GraphPath, TruncatedGraph};
pub use hyperbolicity::GromovTable;
pub use metric::FiniteMetric;
pub use tree::RootedTree;
pub use visual::{BoundaryCellSet, VisualMetric};

/// Version stamped into every JSON document this crate writes.
pub const FORMAT_VERSION: u32 = 1;
