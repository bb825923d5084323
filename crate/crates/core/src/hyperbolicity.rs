//! Gromov products, the 4-point defect, base-point transfer, thin
//! triangles and the product/geodesic-distance comparison.
//!
//! Products are kept doubled (`2 (x,y)_o`) so that every quantity in this
//! module is an exact integer; a field or value suffixed `2x` is doubled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{lex_geodesic, DistanceOracle, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// All Gromov products at one base vertex plus the tight 4-point defect.
#[derive(Clone, Debug)]
pub struct GromovTable {
    base: usize,
    n: usize,
    prod2x: Vec<u32>,
    delta2x: u32,
    witness: Option<Triple>,
}

impl GromovTable {
    pub fn base(&self) -> usize {
        self.base
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// `2 (x,y)_o = d(x,o) + d(y,o) - d(x,y)`.
    #[inline]
    pub fn prod2x(&self, x: usize, y: usize) -> u32 {
        self.prod2x[x * self.n + y]
    }

    /// `(x,y)_o` as a real number.
    pub fn prod(&self, x: usize, y: usize) -> f64 {
        f64::from(self.prod2x(x, y)) / 2.0
    }

    /// Doubled minimal `delta` with `(x,y) >= min{(x,z),(y,z)} - delta`.
    pub fn delta2x(&self) -> u32 {
        self.delta2x
    }

    pub fn delta(&self) -> f64 {
        f64::from(self.delta2x) / 2.0
    }

    /// A triple attaining the defect (`None` when it is 0).
    pub fn witness(&self) -> Option<Triple> {
        self.witness
    }
}

pub fn gromov_table(d: &DistanceOracle, o: usize) -> GromovTable {
    let n = d.vertex_count();
    let prod2x = products_at(d, o);
    let (delta2x, witness) = max_defect(n, &prod2x);
    GromovTable {
        base: o,
        n,
        prod2x,
        delta2x,
        witness,
    }
}

fn products_at(d: &DistanceOracle, o: usize) -> Vec<u32> {
    let n = d.vertex_count();
    let from_o = d.row(o);
    let mut prod = vec![0u32; n * n];
    prod.par_chunks_mut(n.max(1)).enumerate().for_each(|(x, row)| {
        let dx = d.row(x);
        for (y, cell) in row.iter_mut().enumerate() {
            *cell = from_o[x] + from_o[y] - dx[y];
        }
    });
    prod
}

/// Per-vertex nested level sets `A_x^t = { z : prod2x(x,z) >= t }` for
/// `t = 1..=prod2x(x,x)`, as bitsets. The defect of a pair `(x,y)` is then
/// the largest `t` with `A_x^t ∩ A_y^t` non-empty, minus `prod2x(x,y)`.
struct LevelSets {
    words: usize,
    offset: Vec<usize>,
    top: Vec<u32>,
    bits: Vec<u64>,
}

impl LevelSets {
    fn build(n: usize, prod: &[u32]) -> Self {
        let words = n.div_ceil(64);
        let top: Vec<u32> = (0..n).map(|x| prod[x * n + x]).collect();
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for &t in &top {
            offset.push(total);
            total += t as usize * words;
        }
        offset.push(total);
        let mut bits = vec![0u64; total];
        let mut chunks: Vec<&mut [u64]> = Vec::with_capacity(n);
        let mut rest = bits.as_mut_slice();
        for x in 0..n {
            let (head, tail) = rest.split_at_mut(offset[x + 1] - offset[x]);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().enumerate().for_each(|(x, chunk)| {
            let row = &prod[x * n..(x + 1) * n];
            for (z, &p) in row.iter().enumerate() {
                // z belongs to every level 1..=p.
                for t in 1..=p as usize {
                    chunk[(t - 1) * words + z / 64] |= 1 << (z % 64);
                }
            }
        });
        Self {
            words,
            offset,
            top,
            bits,
        }
    }

    fn level(&self, x: usize, t: u32) -> &[u64] {
        let start = self.offset[x] + (t as usize - 1) * self.words;
        &self.bits[start..start + self.words]
    }

    /// Least `z` in `A_x^t ∩ A_y^t`.
    fn common(&self, x: usize, y: usize, t: u32) -> Option<usize> {
        if t == 0 {
            return Some(0);
        }
        if t > self.top[x] || t > self.top[y] {
            return None;
        }
        let (a, b) = (self.level(x, t), self.level(y, t));
        a.iter().zip(b).enumerate().find_map(|(w, (p, q))| {
            let m = p & q;
            (m != 0).then(|| w * 64 + m.trailing_zeros() as usize)
        })
    }
}

/// Exact `max_{x,y,z} min{p(x,z), p(y,z)} - p(x,y)` over a doubled product
/// matrix, with the lexicographically first maximising pair.
pub(crate) fn max_defect(n: usize, prod: &[u32]) -> (u32, Option<Triple>) {
    if n == 0 {
        return (0, None);
    }
    let levels = LevelSets::build(n, prod);
    let per_x: Vec<(u32, Option<Triple>)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = 0u32;
            let mut witness = None;
            for y in x + 1..n {
                let p = prod[x * n + y];
                loop {
                    let t = p + best + 1;
                    match levels.common(x, y, t) {
                        Some(z) => {
                            best = t - p;
                            witness = Some(Triple { x, y, z });
                        }
                        None => break,
                    }
                }
            }
            (best, witness)
        })
        .collect();
    per_x
        .into_iter()
        .fold((0, None), |acc, cur| if cur.0 > acc.0 { cur } else { acc })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferViolation {
    pub base: usize,
    pub triple: Triple,
    pub slack2x: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Exhaustive scan up to this many vertices.
    pub exhaustive_cap: usize,
    /// Number of sampled items beyond the cap.
    pub samples: usize,
    pub seed: u64,
}

impl ScanOptions {
    pub const BASEPOINT: Self = Self {
        exhaustive_cap: 600,
        samples: 64,
        seed: 0,
    };
    pub const THIN_TRIANGLE: Self = Self {
        exhaustive_cap: 128,
        samples: 20_000,
        seed: 0,
    };
    pub const PRODUCT_GEODESIC: Self = Self {
        exhaustive_cap: 2048,
        samples: 200_000,
        seed: 0,
    };
}

/// Outcome of [`basepoint_transfer_check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasepointReport {
    pub delta2x: u32,
    /// Allowed slack: `2 delta`, doubled.
    pub bound2x: u32,
    pub bases_checked: usize,
    pub exhaustive: bool,
    pub seed: u64,
    /// Largest `min{(x,z)_w,(y,z)_w} - (x,y)_w` seen over all bases.
    pub max_slack2x: u32,
    pub worst: Option<TransferViolation>,
    pub violations: Vec<TransferViolation>,
}

/// Checks `(x,y)_w >= min{(x,z)_w,(y,z)_w} - 2 delta` at every base `w`
/// (or a seeded sample of bases beyond the cap).
pub fn basepoint_transfer_check(d: &DistanceOracle, delta2x: u32, opts: ScanOptions) -> BasepointReport {
    let n = d.vertex_count();
    let exhaustive = n <= opts.exhaustive_cap;
    let bases: Vec<usize> = if exhaustive {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked: Vec<usize> = (0..opts.samples.min(n)).map(|_| rng.gen_range(0..n)).collect();
        picked.sort_unstable();
        picked.dedup();
        picked
    };
    let bound2x = 2 * delta2x;
    let mut max_slack2x = 0;
    let mut worst = None;
    let mut violations = Vec::new();
    for &w in &bases {
        let prod = products_at(d, w);
        let (slack, witness) = max_defect(n, &prod);
        let record = witness.map(|triple| TransferViolation {
            base: w,
            triple,
            slack2x: slack,
        });
        if slack > max_slack2x {
            max_slack2x = slack;
            worst = record.clone();
        }
        if slack > bound2x {
            violations.extend(record);
        }
    }
    BasepointReport {
        delta2x,
        bound2x,
        bases_checked: bases.len(),
        exhaustive,
        seed: opts.seed,
        max_slack2x,
        worst,
        violations,
    }
}

/// Source of the sides of geodesic triangles.
pub trait GeodesicChoice: Sync {
    fn geodesic(&self, x: usize, y: usize) -> Vec<usize>;
}

/// The lexicographically least geodesic (see [`crate::graph::one_geodesic`]).
pub struct LexLeast<'a> {
    pub graph: &'a Graph,
    pub dist: &'a DistanceOracle,
}

impl GeodesicChoice for LexLeast<'_> {
    fn geodesic(&self, x: usize, y: usize) -> Vec<usize> {
        lex_geodesic(self.graph, self.dist, x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinTriangleReport {
    /// Largest hop distance from a side vertex to the union of the other
    /// two sides; an integer, since only vertices are inspected.
    pub value: u32,
    pub witness: Option<Triple>,
    pub exhaustive: bool,
    pub triples_checked: u64,
    pub seed: u64,
}

/// Thinness of the triangle with sides `[x,y]`, `[y,z]`, `[z,x]`.
pub fn triangle_thinness(d: &DistanceOracle, sides: [&[usize]; 3]) -> u32 {
    let mut worst = 0;
    for i in 0..3 {
        let (a, b) = (sides[(i + 1) % 3], sides[(i + 2) % 3]);
        for &u in sides[i] {
            let near = a.iter().chain(b).map(|&w| d.get(u, w)).min().unwrap_or(0);
            worst = worst.max(near);
        }
    }
    worst
}

/// Thin-triangle constant over ordered corner triples, sides taken from
/// `choice`. Exhaustive up to `opts.exhaustive_cap` vertices, otherwise
/// `opts.samples` seeded triples.
pub fn thin_triangle_delta(d: &DistanceOracle, choice: &dyn GeodesicChoice, opts: ScanOptions) -> ThinTriangleReport {
    let n = d.vertex_count();
    let better = |a: (u32, Option<Triple>), b: (u32, Option<Triple>)| if b.0 > a.0 { b } else { a };
    if n <= opts.exhaustive_cap {
        let paths: Vec<Vec<usize>> = (0..n * n)
            .into_par_iter()
            .map(|k| choice.geodesic(k / n, k % n))
            .collect();
        let side = |x: usize, y: usize| paths[x * n + y].as_slice();
        let (value, witness) = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut best = (0u32, None);
                for y in 0..n {
                    for z in 0..n {
                        let v = triangle_thinness(d, [side(x, y), side(y, z), side(z, x)]);
                        if v > best.0 {
                            best = (v, Some(Triple { x, y, z }));
                        }
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0, None), better);
        ThinTriangleReport {
            value,
            witness,
            exhaustive: true,
            triples_checked: (n as u64).pow(3),
            seed: opts.seed,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let triples: Vec<Triple> = (0..opts.samples)
            .map(|_| Triple {
                x: rng.gen_range(0..n),
                y: rng.gen_range(0..n),
                z: rng.gen_range(0..n),
            })
            .collect();
        let (value, witness) = triples
            .par_iter()
            .map(|t| {
                let (a, b, c) = (
                    choice.geodesic(t.x, t.y),
                    choice.geodesic(t.y, t.z),
                    choice.geodesic(t.z, t.x),
                );
                (triangle_thinness(d, [&a, &b, &c]), Some(*t))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0, None), better);
        ThinTriangleReport {
            value,
            witness,
            exhaustive: false,
            triples_checked: opts.samples as u64,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductGeodesicViolation {
    pub x: usize,
    pub y: usize,
    /// `2 d(o, [x,y])`.
    pub dist2x: u32,
    pub prod2x: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductGeodesicReport {
    pub base: usize,
    pub delta2x: u32,
    pub pairs_checked: u64,
    pub exhaustive: bool,
    pub seed: u64,
    pub violations: Vec<ProductGeodesicViolation>,
    /// `(2 (d(o,[x,y]) - (x,y)_o), count)`, ascending.
    pub histogram: Vec<(i64, u64)>,
}

/// Checks `(x,y)_o <= d(o,[x,y]) <= (x,y)_o + 2 delta` with `[x,y]` the
/// lexicographically least geodesic.
pub fn product_vs_geodesic_check(
    g: &Graph,
    d: &DistanceOracle,
    t: &GromovTable,
    opts: ScanOptions,
) -> ProductGeodesicReport {
    let n = d.vertex_count();
    let o = t.base();
    let exhaustive = n <= opts.exhaustive_cap;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..n).flat_map(|x| (x..n).map(move |y| (x, y))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.samples)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect()
    };
    let results: Vec<(i64, Option<ProductGeodesicViolation>)> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let path = lex_geodesic(g, d, x, y);
            let dist2x = 2 * path.iter().map(|&v| d.get(o, v)).min().unwrap();
            let prod2x = t.prod2x(x, y);
            let slack = i64::from(dist2x) - i64::from(prod2x);
            let bad = slack < 0 || slack > 2 * i64::from(t.delta2x());
            (slack, bad.then_some(ProductGeodesicViolation { x, y, dist2x, prod2x }))
        })
        .collect();
    let mut histogram = std::collections::BTreeMap::new();
    let mut violations = Vec::new();
    for (slack, bad) in results {
        *histogram.entry(slack).or_insert(0u64) += 1;
        violations.extend(bad);
    }
    ProductGeodesicReport {
        base: o,
        delta2x: t.delta2x(),
        pairs_checked: pairs.len() as u64,
        exhaustive,
        seed: opts.seed,
        violations,
        histogram: histogram.into_iter().collect(),
    }
}
