//! Dense finite metric spaces over `0..n`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetric {
    n: usize,
    dist: Vec<f64>,
}

impl FiniteMetric {
    /// Builds the metric from a full row-major matrix. The matrix is taken
    /// as is; use [`FiniteMetric::axiom_violations`] to audit it.
    pub fn from_matrix(n: usize, dist: Vec<f64>) -> Self {
        assert_eq!(dist.len(), n * n, "matrix must be n x n");
        Self { n, dist }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = if i == j { 0.0 } else { f(i, j) };
            }
        }
        Self { n, dist }
    }

    /// Lower-triangular entries `d(i, j)` for `j < i`, row by row.
    pub fn from_lower_triangle(n: usize, lower: &[f64]) -> Option<Self> {
        if lower.len() != n * n.saturating_sub(1) / 2 {
            return None;
        }
        let mut dist = vec![0.0; n * n];
        let mut it = lower.iter();
        for i in 0..n {
            for j in 0..i {
                let v = *it.next()?;
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        Some(Self { n, dist })
    }

    pub fn lower_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in 0..i {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .iter()
            .copied()
            .filter(|&x| x > 0.0)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
    }

    /// Sub-metric on the given points, in the given order.
    pub fn restrict(&self, points: &[usize]) -> Self {
        Self::from_fn(points.len(), |i, j| self.get(points[i], points[j]))
    }

    /// Points of the closed ball `d(center, .) <= r`.
    pub fn closed_ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(center, j) <= r).collect()
    }

    /// Distance from a point to a set (infinity for the empty set).
    pub fn dist_to_set(&self, p: usize, set: &[usize]) -> f64 {
        set.iter().map(|&q| self.get(p, q)).fold(f64::INFINITY, f64::min)
    }

    /// Sorted distinct positive distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lower_triangle().into_iter().filter(|&x| x > 0.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Counts violations of the metric axioms at tolerance `tol`: symmetry,
    /// zero diagonal, positivity off the diagonal and the triangle
    /// inequality (exhaustive over triples).
    pub fn axiom_violations(&self, tol: f64) -> usize {
        let n = self.n;
        let mut bad = 0;
        for i in 0..n {
            if self.get(i, i).abs() > tol {
                bad += 1;
            }
            for j in 0..n {
                if i != j && self.get(i, j) <= 0.0 {
                    bad += 1;
                }
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    bad += 1;
                }
                for k in 0..n {
                    if self.get(i, k) > self.get(i, j) + self.get(j, k) + tol {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}
