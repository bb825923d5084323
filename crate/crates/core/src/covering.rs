//! Packing counts `S(alpha, beta)`, an Assouad exponent fit, the doubling
//! constant, colored ball covers and exact r-multiplicity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::FiniteMetric;

/// Absolute tolerance for comparing `d_eps` values against radii.
pub const RADIUS_TOL: f64 = 1e-12;

pub const EXACT_PACKING_MAX_POINTS: usize = 64;
pub const EXACT_SET_COVER_MAX_CANDIDATES: usize = 24;

#[inline]
fn le(a: f64, b: f64) -> bool {
    a <= b + RADIUS_TOL
}

/// Fixed-width bitset over `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    pub(crate) fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }

    pub(crate) fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub(crate) fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub(crate) fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub(crate) fn and(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }

    pub(crate) fn and_not(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a & !b).collect())
    }

    pub(crate) fn or_assign(&mut self, o: &Self) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
    }

    pub(crate) fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    w * 64 + b
                })
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingCount {
    pub alpha: f64,
    pub beta: f64,
    pub count: usize,
    /// Points with pairwise distances in `[alpha, beta]`.
    pub witness: Vec<usize>,
    /// `false` when `count` is only a greedy lower bound.
    pub exact: bool,
}

/// `S(alpha, beta)`: the largest subset with all pairwise distances in
/// `[alpha, beta]`. Exact (maximum clique) up to 64 points.
pub fn packing_count(m: &FiniteMetric, alpha: f64, beta: f64) -> Result<PackingCount> {
    if !(alpha > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha <= beta, got {alpha}, {beta}"
        )));
    }
    if alpha > beta {
        return Err(Error::ScaleOrder { alpha, beta });
    }
    let n = m.len();
    let ok = |i: usize, j: usize| {
        let d = m.get(i, j);
        le(alpha, d) && le(d, beta)
    };
    if n == 0 {
        return Ok(PackingCount {
            alpha,
            beta,
            count: 0,
            witness: vec![],
            exact: true,
        });
    }
    if n <= EXACT_PACKING_MAX_POINTS {
        let adj: Vec<u64> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && ok(i, j)).fold(0u64, |a, j| a | 1 << j))
            .collect();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut best = 0u64;
        max_clique(&adj, 0, full, &mut best);
        let witness: Vec<usize> = (0..n).filter(|&i| best >> i & 1 == 1).collect();
        return Ok(PackingCount {
            alpha,
            beta,
            count: witness.len(),
            witness,
            exact: true,
        });
    }
    let mut witness: Vec<usize> = Vec::new();
    for i in 0..n {
        if witness.iter().all(|&j| ok(i, j)) {
            witness.push(i);
        }
    }
    Ok(PackingCount {
        alpha,
        beta,
        count: witness.len(),
        witness,
        exact: false,
    })
}

fn max_clique(adj: &[u64], current: u64, candidates: u64, best: &mut u64) {
    if candidates == 0 {
        if current.count_ones() > best.count_ones() {
            *best = current;
        }
        return;
    }
    if current.count_ones() + candidates.count_ones() <= best.count_ones() {
        return;
    }
    let mut p = candidates;
    while p != 0 {
        if current.count_ones() + p.count_ones() <= best.count_ones() {
            return;
        }
        let v = p.trailing_zeros() as usize;
        p &= p - 1;
        max_clique(adj, current | 1 << v, p & adj[v], best);
    }
    if current.count_ones() > best.count_ones() {
        *best = current;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingReport {
    pub pairs: Vec<PackingCount>,
    pub fitted_exponent: f64,
    pub fit_constant: f64,
    /// `log S - (s log(beta/alpha) + log C)` per pair.
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `log S(alpha,beta) = s log(beta/alpha) + log C`.
pub fn assouad_estimate(m: &FiniteMetric, grid: &[(f64, f64)]) -> Result<PackingReport> {
    if grid.len() < 4 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 4 scale pairs, got {}",
            grid.len()
        )));
    }
    let xs: Vec<f64> = grid.iter().map(|&(a, b)| (b / a).ln()).collect();
    if xs.iter().all(|&x| (x - xs[0]).abs() < 1e-12) {
        return Err(Error::DegenerateGrid(
            "all scale pairs share one ratio beta/alpha".into(),
        ));
    }
    let pairs = grid
        .par_iter()
        .map(|&(a, b)| packing_count(m, a, b))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = pairs.iter().map(|p| (p.count.max(1) as f64).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let fitted_exponent = sxy / sxx;
    let log_c = my - fitted_exponent * mx;
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (fitted_exponent * x + log_c))
        .collect();
    Ok(PackingReport {
        pairs,
        fitted_exponent,
        fit_constant: log_c.exp(),
        residuals,
    })
}

/// Scale pairs `(alpha, alpha * 2^k)` with `alpha` on a doubling grid from
/// the minimal positive distance and `k = 1..=3`, kept within the diameter.
pub fn default_packing_grid(m: &FiniteMetric) -> Vec<(f64, f64)> {
    let Some(min) = m.min_positive_distance() else {
        return vec![(1.0, 2.0), (1.0, 4.0), (2.0, 4.0), (2.0, 8.0)];
    };
    let diam = m.diameter();
    let mut grid = Vec::new();
    let mut alpha = min;
    while le(alpha * 2.0, diam) || grid.len() < 4 {
        for k in 1..=3 {
            let beta = alpha * f64::from(1u32 << k);
            if le(beta, diam) || grid.len() < 4 {
                grid.push((alpha, beta));
            }
        }
        alpha *= 2.0;
    }
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfCover {
    pub center: usize,
    pub r: f64,
    /// Centers of radius `r/2` balls covering the closed `r`-ball.
    pub cover: Vec<usize>,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub kappa: u32,
    /// `2^kappa`.
    pub n: u64,
    pub scales: Vec<f64>,
    /// Largest half-radius cover needed.
    pub worst: usize,
    /// `false` if some cover came from the greedy fallback.
    pub exact: bool,
    pub covers: Vec<HalfCover>,
}

/// Radii from the diameter down by factors of `sqrt 2` to the minimal
/// positive distance.
pub fn default_radius_grid(m: &FiniteMetric) -> Vec<f64> {
    let Some(min) = m.min_positive_distance() else {
        return Vec::new();
    };
    let mut r = m.diameter();
    let mut out = Vec::new();
    while r >= min * (1.0 - 1e-12) {
        out.push(r);
        r /= std::f64::consts::SQRT_2;
    }
    out
}

/// Minimal `kappa` with every tested `r`-ball covered by `2^kappa` balls
/// of radius `r/2`.
pub fn doubling_kappa(m: &FiniteMetric, scales: &[f64]) -> DoublingReport {
    let n = m.len();
    let jobs: Vec<(f64, usize)> = scales.iter().flat_map(|&r| (0..n).map(move |c| (r, c))).collect();
    let covers: Vec<HalfCover> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let ball = m.closed_ball(c, r);
            let (cover, exact) = min_half_cover(m, &ball, r / 2.0);
            HalfCover {
                center: c,
                r,
                cover,
                exact,
            }
        })
        .collect();
    let worst = covers.iter().map(|c| c.cover.len()).max().unwrap_or(1).max(1);
    let kappa = (worst as f64).log2().ceil() as u32;
    DoublingReport {
        kappa,
        n: 1u64 << kappa,
        scales: scales.to_vec(),
        worst,
        exact: covers.iter().all(|c| c.exact),
        covers,
    }
}

/// Smallest set of radius-`h` balls (centered anywhere) covering `ball`.
fn min_half_cover(m: &FiniteMetric, ball: &[usize], h: f64) -> (Vec<usize>, bool) {
    if ball.len() <= 1 {
        return (ball.to_vec(), true);
    }
    let k = ball.len();
    // Coverage mask of each candidate center over the ball, dominated
    // candidates removed.
    let mut cands: Vec<(usize, Bits)> = Vec::new();
    for c in 0..m.len() {
        let mut mask = Bits::new(k);
        for (i, &p) in ball.iter().enumerate() {
            if le(m.get(c, p), h) {
                mask.set(i);
            }
        }
        if !mask.is_empty() {
            cands.push((c, mask));
        }
    }
    let mut keep = vec![true; cands.len()];
    for i in 0..cands.len() {
        for j in 0..cands.len() {
            if i != j && keep[j] {
                let sub = cands[i].1.and_not(&cands[j].1).is_empty();
                let equal = cands[i].1 == cands[j].1;
                if sub && (!equal || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    let cands: Vec<(usize, Bits)> = cands
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(c, _)| c)
        .collect();

    let greedy = {
        let mut uncovered = Bits::new(k);
        (0..k).for_each(|i| uncovered.set(i));
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let (best, _) = cands
                .iter()
                .enumerate()
                .max_by_key(|(i, (_, mask))| (mask.and(&uncovered).count(), std::cmp::Reverse(*i)))
                .unwrap();
            uncovered = uncovered.and_not(&cands[best].1);
            chosen.push(best);
        }
        chosen
    };
    if cands.len() > EXACT_SET_COVER_MAX_CANDIDATES {
        let mut out: Vec<usize> = greedy.iter().map(|&i| cands[i].0).collect();
        out.sort_unstable();
        return (out, false);
    }
    let mut best = greedy;
    let mut uncovered = Bits::new(k);
    (0..k).for_each(|i| uncovered.set(i));
    exact_cover(&cands, &uncovered, &mut Vec::new(), &mut best);
    let mut out: Vec<usize> = best.iter().map(|&i| cands[i].0).collect();
    out.sort_unstable();
    (out, true)
}

fn exact_cover(cands: &[(usize, Bits)], uncovered: &Bits, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
    let Some(first) = uncovered.iter().next() else {
        if chosen.len() < best.len() {
            *best = chosen.clone();
        }
        return;
    };
    if chosen.len() + 1 >= best.len() {
        return;
    }
    for (i, (_, mask)) in cands.iter().enumerate() {
        if mask.get(first) {
            chosen.push(i);
            exact_cover(cands, &uncovered.and_not(mask), chosen, best);
            chosen.pop();
        }
    }
}

/// Largest number of family members met by one set of diameter `<= r`,
/// with a witness set and the members it meets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub value: usize,
    pub witness: Vec<usize>,
    pub members: Vec<usize>,
}

/// Exact r-multiplicity of a family of point sets: a maximal
/// `d <= r`-clique search maximizing the number of members met.
pub fn r_multiplicity(m: &FiniteMetric, family: &[Vec<usize>], r: f64) -> Multiplicity {
    let n = m.len();
    let f = family.len();
    let mut hits: Vec<Bits> = vec![Bits::new(f); n];
    for (k, set) in family.iter().enumerate() {
        for &p in set {
            hits[p].set(k);
        }
    }
    let useful: Vec<usize> = (0..n).filter(|&p| !hits[p].is_empty()).collect();
    let mut adj: Vec<Bits> = vec![Bits::new(n); n];
    for &p in &useful {
        for &q in &useful {
            if p != q && le(m.get(p, q), r) {
                adj[p].set(q);
            }
        }
    }
    let mut best = Multiplicity {
        value: 0,
        witness: vec![],
        members: vec![],
    };
    for &p in &useful {
        let v = hits[p].count();
        if v > best.value {
            best = Multiplicity {
                value: v,
                witness: vec![p],
                members: hits[p].iter().collect(),
            };
        }
    }
    let mut cand = Bits::new(n);
    useful.iter().for_each(|&p| cand.set(p));
    let mut search = MultSearch {
        adj: &adj,
        hits: &hits,
        best,
        f,
    };
    search.grow(&mut Vec::new(), &Bits::new(f), cand);
    search.best
}

struct MultSearch<'a> {
    adj: &'a [Bits],
    hits: &'a [Bits],
    best: Multiplicity,
    f: usize,
}

impl MultSearch<'_> {
    fn grow(&mut self, clique: &mut Vec<usize>, met: &Bits, mut cand: Bits) {
        let value = met.count();
        if value > self.best.value {
            self.best = Multiplicity {
                value,
                witness: clique.clone(),
                members: met.iter().collect(),
            };
        }
        let mut bound = met.clone();
        for p in cand.iter() {
            bound.or_assign(&self.hits[p]);
        }
        if bound.count() <= self.best.value || value == self.f {
            return;
        }
        let order: Vec<usize> = cand.iter().collect();
        for p in order {
            if !cand.get(p) {
                continue;
            }
            cand.clear(p);
            if self.hits[p].and_not(met).is_empty() {
                continue;
            }
            let mut next_met = met.clone();
            next_met.or_assign(&self.hits[p]);
            clique.push(p);
            self.grow(clique, &next_met, cand.and(&self.adj[p]));
            clique.pop();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    /// Every point lies in some ball.
    pub cover: bool,
    /// r-multiplicity of each color class.
    pub per_color_mult: Vec<usize>,
    /// r-multiplicity of the whole cover.
    pub total_mult: usize,
    pub total_witness: Vec<usize>,
    /// The requested seed set is among the centers.
    pub seeds_included: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCover {
    pub r: f64,
    pub kappa: u32,
    pub centers: Vec<usize>,
    /// Color of `centers[i]`, in `0..=2^kappa`.
    pub colors: Vec<usize>,
    pub certificates: CoverCertificate,
}

impl BallCover {
    /// Members of the closed ball of each center.
    pub fn balls(&self, m: &FiniteMetric) -> Vec<Vec<usize>> {
        self.centers.iter().map(|&c| ball(m, c, self.r)).collect()
    }

    pub fn color_count(&self) -> usize {
        self.colors.iter().max().map_or(0, |c| c + 1)
    }
}

fn ball(m: &FiniteMetric, c: usize, r: f64) -> Vec<usize> {
    (0..m.len()).filter(|&p| le(m.get(c, p), r)).collect()
}

/// Colored cover by closed `r`-balls: a greedy maximal `r`-separated net
/// grown from `seeds`, colored so that same-color centers are more than
/// `3r` apart, with certified multiplicities.
pub fn ls23_cover(m: &FiniteMetric, r: f64, kappa: u32, seeds: &[usize]) -> Result<BallCover> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cover radius must be positive, got {r}"
        )));
    }
    for (i, &a) in seeds.iter().enumerate() {
        for &b in &seeds[i + 1..] {
            let distance = m.get(a, b);
            if distance <= r {
                return Err(Error::SeedNotSeparated { a, b, distance, r });
            }
        }
    }
    let mut centers: Vec<usize> = seeds.to_vec();
    for p in 0..m.len() {
        if centers.iter().all(|&c| m.get(p, c) > r) {
            centers.push(p);
        }
    }
    let limit = (1usize << kappa) + 1;
    let colors = color_centers(m, &centers, 3.0 * r, limit)?;
    let cover = ls23_from_parts(m, r, kappa, centers, colors, seeds);
    Ok(cover)
}

/// Certifies an explicitly given colored cover.
pub fn ls23_from_parts(
    m: &FiniteMetric,
    r: f64,
    kappa: u32,
    centers: Vec<usize>,
    colors: Vec<usize>,
    seeds: &[usize],
) -> BallCover {
    let mut cover = BallCover {
        r,
        kappa,
        centers,
        colors,
        certificates: CoverCertificate {
            cover: false,
            per_color_mult: vec![],
            total_mult: 0,
            total_witness: vec![],
            seeds_included: false,
        },
    };
    cover.certificates = certify(m, &cover, seeds);
    cover
}

pub fn certify(m: &FiniteMetric, cover: &BallCover, seeds: &[usize]) -> CoverCertificate {
    let balls = cover.balls(m);
    let mut covered = vec![false; m.len()];
    for b in &balls {
        for &p in b {
            covered[p] = true;
        }
    }
    let per_color_mult = (0..cover.color_count())
        .map(|c| {
            let class: Vec<Vec<usize>> = balls
                .iter()
                .zip(&cover.colors)
                .filter(|(_, &col)| col == c)
                .map(|(b, _)| b.clone())
                .collect();
            r_multiplicity(m, &class, cover.r).value
        })
        .collect();
    let total = r_multiplicity(m, &balls, cover.r);
    CoverCertificate {
        cover: covered.iter().all(|&c| c),
        per_color_mult,
        total_mult: total.value,
        total_witness: total.witness,
        seeds_included: seeds.iter().all(|s| cover.centers.contains(s)),
    }
}

/// Colors centers so that equal colors are more than `sep` apart, using
/// at most `limit` colors: greedy first, exact backtracking second.
fn color_centers(m: &FiniteMetric, centers: &[usize], sep: f64, limit: usize) -> Result<Vec<usize>> {
    let k = centers.len();
    let conflict = |i: usize, j: usize| m.get(centers[i], centers[j]) <= sep;
    let mut colors = vec![usize::MAX; k];
    let mut greedy_ok = true;
    for i in 0..k {
        let used: Vec<usize> = (0..i).filter(|&j| conflict(i, j)).map(|j| colors[j]).collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        if c >= limit {
            greedy_ok = false;
            break;
        }
        colors[i] = c;
    }
    if greedy_ok {
        return Ok(colors);
    }
    let neighbors: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i && conflict(i, j)).collect())
        .collect();
    let mut colors = vec![usize::MAX; k];
    let mut fail = None;
    if backtrack_color(&neighbors, &mut colors, 0, limit, &mut fail) {
        return Ok(colors);
    }
    let center = fail.unwrap_or(0);
    Err(Error::ColorOverflow {
        center: centers[center],
        limit,
        conflicts: neighbors[center].iter().map(|&j| centers[j]).collect(),
    })
}

fn backtrack_color(nb: &[Vec<usize>], colors: &mut [usize], i: usize, limit: usize, fail: &mut Option<usize>) -> bool {
    if i == colors.len() {
        return true;
    }
    for c in 0..limit {
        if nb[i].iter().all(|&j| colors[j] != c) {
            colors[i] = c;
            if backtrack_color(nb, colors, i + 1, limit, fail) {
                return true;
            }
        }
    }
    colors[i] = usize::MAX;
    if fail.is_none_or(|f| i > f) {
        *fail = Some(i);
    }
    false
}
