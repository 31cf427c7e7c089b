//! Exact nearest-neighbor machinery and the TRUH statistic.
//!
//! `D_i` is the Euclidean distance from case point `V_i` to its nearest
//! baseline point; `C_i` is the distance from that baseline point to its own
//! nearest neighbor among the remaining baseline points. The statistic
//! contrasts the means of the two: `n^{1/d} * |tau_fc * mean(D) - mean(C)|`.
//!
//! Queries go through an exact spatial tree for d <= 15 and a brute-force
//! scan above that (the tree stops paying for itself in high dimension);
//! both paths share the same tie rule and are oracle-tested against each
//! other. Ties break to the lowest row index by default, which keeps results
//! reproducible; randomized tie-breaking is available for fidelity studies.

use rayon::prelude::*;

use crate::data::SampleMatrix;
use crate::error::{Result, TruhError};
use crate::rng::RngStream;

/// Above this dimension `build_index` skips the tree and scans.
const TREE_DIM_LIMIT: usize = 15;
const LEAF_SIZE: usize = 16;

/// Distance used by the index. The flat torus wraps each coordinate with
/// period 1 and exists to estimate boundary-free Poisson constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Torus,
}

impl Metric {
    #[inline]
    fn coord_dist(self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self {
            Metric::Euclidean => d,
            Metric::Torus => d.min(1.0 - d),
        }
    }

    #[inline]
    fn dist_sq(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
            Metric::Torus => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = self.coord_dist(*x, *y);
                    d * d
                })
                .sum(),
        }
    }

    /// Squared distance from a point to an axis-aligned box, respecting wrap.
    #[inline]
    fn box_dist_sq(self, q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..q.len() {
            let x = q[j];
            if x >= lo[j] && x <= hi[j] {
                continue;
            }
            let direct = if x < lo[j] { lo[j] - x } else { x - hi[j] };
            let gap = match self {
                Metric::Euclidean => direct,
                // going around the torus: off the top of the interval or
                // off the bottom, whichever wrap is shorter
                Metric::Torus => {
                    let wrap = if x < lo[j] {
                        (x + 1.0 - hi[j]).max(0.0)
                    } else {
                        (lo[j] + 1.0 - x).max(0.0)
                    };
                    direct.min(wrap)
                }
            };
            acc += gap * gap;
        }
        acc
    }
}

/// How equal-distance candidates are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// Lowest row index wins (default; reproducible).
    LowestIndex,
    /// Uniform choice among tied candidates, as in the original definition.
    Randomized,
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct KdTree {
    // row indices into the point matrix, permuted so leaves are contiguous
    order: Vec<usize>,
    root: Node,
}

/// Exact 1-NN index over the rows of a [`SampleMatrix`].
///
/// `query(x)` returns the row index minimizing the metric distance, ties
/// broken by lowest row index; `query_excluding` skips one forbidden row.
/// Immutable after build and safe for concurrent queries.
pub struct NnIndex<'a> {
    points: &'a SampleMatrix,
    metric: Metric,
    tree: Option<KdTree>,
}

impl<'a> NnIndex<'a> {
    pub fn build(points: &'a SampleMatrix) -> Result<Self> {
        Self::build_with_metric(points, Metric::Euclidean)
    }

    pub fn build_with_metric(points: &'a SampleMatrix, metric: Metric) -> Result<Self> {
        if points.n_rows() == 0 {
            return Err(TruhError::EmptyInput);
        }
        let tree = if points.dim() <= TREE_DIM_LIMIT {
            Some(build_tree(points))
        } else {
            None
        };
        Ok(NnIndex {
            points,
            metric,
            tree,
        })
    }

    pub fn points(&self) -> &SampleMatrix {
        self.points
    }

    /// Nearest row to `x`; returns `(row_index, distance)`.
    pub fn query(&self, x: &[f64]) -> (usize, f64) {
        self.query_impl(x, usize::MAX)
    }

    /// Nearest row to `x` among all rows except `forbidden`.
    pub fn query_excluding(&self, x: &[f64], forbidden: usize) -> (usize, f64) {
        self.query_impl(x, forbidden)
    }

    fn query_impl(&self, x: &[f64], forbidden: usize) -> (usize, f64) {
        debug_assert_eq!(x.len(), self.points.dim());
        let mut best = Best {
            dist_sq: f64::INFINITY,
            index: usize::MAX,
        };
        match &self.tree {
            Some(tree) => {
                search(tree, &tree.root, self.points, self.metric, x, forbidden, &mut best)
            }
            None => {
                for i in 0..self.points.n_rows() {
                    if i == forbidden {
                        continue;
                    }
                    let ds = self.metric.dist_sq(x, self.points.row(i));
                    best.offer(ds, i);
                }
            }
        }
        (best.index, best.dist_sq.sqrt())
    }

    /// All rows (except `forbidden`) whose distance to `x` equals the
    /// minimum exactly. Used for randomized tie-breaking.
    fn tied_minima(&self, x: &[f64], forbidden: usize) -> Vec<usize> {
        let (_, dist) = self.query_impl(x, forbidden);
        let target = dist * dist;
        (0..self.points.n_rows())
            .filter(|&i| i != forbidden && self.metric.dist_sq(x, self.points.row(i)) == target)
            .collect()
    }
}

#[derive(Clone, Copy)]
struct Best {
    dist_sq: f64,
    index: usize,
}

impl Best {
    #[inline]
    fn offer(&mut self, dist_sq: f64, index: usize) {
        if dist_sq < self.dist_sq || (dist_sq == self.dist_sq && index < self.index) {
            self.dist_sq = dist_sq;
            self.index = index;
        }
    }
}

fn build_tree(points: &SampleMatrix) -> KdTree {
    let mut order: Vec<usize> = (0..points.n_rows()).collect();
    let d = points.dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    for r in points.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let n = order.len();
    let root = build_node(points, &mut order, 0, n, lo, hi);
    KdTree { order, root }
}

fn build_node(
    points: &SampleMatrix,
    order: &mut [usize],
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
) -> Node {
    let count = end - start;
    if count <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    // split the widest dimension at its median
    let dim = (0..points.dim())
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[dim] - lo[dim] == 0.0 {
        // all points identical across every dimension
        return Node::Leaf { start, end };
    }
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points.row(a)[dim]
            .total_cmp(&points.row(b)[dim])
            .then(a.cmp(&b))
    });
    let value = points.row(order[mid])[dim];

    let mut left_hi = hi.clone();
    left_hi[dim] = value;
    let mut right_lo = lo.clone();
    right_lo[dim] = value;

    let left = Box::new(build_node(points, order, start, mid, lo.clone(), left_hi));
    let right = Box::new(build_node(points, order, mid, end, right_lo, hi.clone()));
    Node::Split {
        dim,
        value,
        lo,
        hi,
        left,
        right,
    }
}

fn search(
    tree: &KdTree,
    node: &Node,
    points: &SampleMatrix,
    metric: Metric,
    x: &[f64],
    forbidden: usize,
    best: &mut Best,
) {
    match node {
        Node::Leaf { start, end } => {
            for &i in &tree.order[*start..*end] {
                if i == forbidden {
                    continue;
                }
                best.offer(metric.dist_sq(x, points.row(i)), i);
            }
        }
        Node::Split {
            dim,
            value,
            lo,
            hi,
            left,
            right,
        } => {
            // a box at exactly best distance may still hold a lower-index
            // tie, so prune on strict inequality only
            if metric.box_dist_sq(x, lo, hi) > best.dist_sq {
                return;
            }
            let (first, second) = if x[*dim] <= *value {
                (left, right)
            } else {
                (right, left)
            };
            search(tree, first, points, metric, x, forbidden, best);
            search(tree, second, points, metric, x, forbidden, best);
        }
    }
}

/// Per-case-point nearest-neighbor distances.
#[derive(Debug, Clone, PartialEq)]
pub struct NnDistances {
    /// Distance from each case point to its nearest baseline point.
    pub d_values: Vec<f64>,
    /// Distance from that baseline point to its nearest baseline neighbor.
    pub c_values: Vec<f64>,
    /// Row index in the baseline of each case point's nearest neighbor.
    pub nn_indices: Vec<usize>,
}

/// Computes `D_i`, `C_i` and the neighbor indices for every case row.
///
/// The `C_i` exclusion is by the row index of the located neighbor: with
/// duplicate baseline rows this keeps `C_i > 0` whenever a distinct row
/// exists, and is deterministic.
pub fn compute_distances(baseline: &SampleMatrix, cases: &SampleMatrix) -> Result<NnDistances> {
    compute_distances_with(baseline, cases, Metric::Euclidean)
}

pub fn compute_distances_with(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    metric: Metric,
) -> Result<NnDistances> {
    if baseline.dim() != cases.dim() {
        return Err(TruhError::DimensionMismatch {
            expected: baseline.dim(),
            got: cases.dim(),
        });
    }
    if baseline.n_rows() < 2 {
        return Err(TruhError::InsufficientBaseline {
            needed: 2,
            got: baseline.n_rows(),
        });
    }
    let index = NnIndex::build_with_metric(baseline, metric)?;
    let n = cases.n_rows();
    let results: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = cases.row(i);
            let (j, d_i) = index.query(v);
            let (_, c_i) = index.query_excluding(baseline.row(j), j);
            (d_i, c_i, j)
        })
        .collect();

    let mut out = NnDistances {
        d_values: Vec::with_capacity(n),
        c_values: Vec::with_capacity(n),
        nn_indices: Vec::with_capacity(n),
    };
    for (d_i, c_i, j) in results {
        out.d_values.push(d_i);
        out.c_values.push(c_i);
        out.nn_indices.push(j);
    }
    Ok(out)
}

/// Same as [`compute_distances`] but resolving exact distance ties by a
/// uniform random choice instead of lowest index. Sequential.
pub fn compute_distances_randomized(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    rng: &mut RngStream,
) -> Result<NnDistances> {
    if baseline.dim() != cases.dim() {
        return Err(TruhError::DimensionMismatch {
            expected: baseline.dim(),
            got: cases.dim(),
        });
    }
    if baseline.n_rows() < 2 {
        return Err(TruhError::InsufficientBaseline {
            needed: 2,
            got: baseline.n_rows(),
        });
    }
    let index = NnIndex::build(baseline)?;
    let n = cases.n_rows();
    let mut out = NnDistances {
        d_values: Vec::with_capacity(n),
        c_values: Vec::with_capacity(n),
        nn_indices: Vec::with_capacity(n),
    };
    for i in 0..n {
        let v = cases.row(i);
        let ties = index.tied_minima(v, usize::MAX);
        let j = ties[rng.index(ties.len())];
        let d_i = Metric::Euclidean.dist_sq(v, baseline.row(j)).sqrt();
        let ties_c = index.tied_minima(baseline.row(j), j);
        let jc = ties_c[rng.index(ties_c.len())];
        let c_i = Metric::Euclidean
            .dist_sq(baseline.row(j), baseline.row(jc))
            .sqrt();
        out.d_values.push(d_i);
        out.c_values.push(c_i);
        out.nn_indices.push(j);
    }
    Ok(out)
}

/// Mean with compensated (Kahan) summation; n can reach ~1e5 with small
/// per-term differences.
pub fn compensated_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum / values.len() as f64
}

/// The TRUH statistic `n^{1/d} * |tau_fc * mean(D) - mean(C)|`.
/// `tau_fc = 1` gives the plain statistic.
pub fn truh_statistic(distances: &NnDistances, d: usize, tau_fc: f64) -> Result<f64> {
    if tau_fc < 1.0 {
        return Err(TruhError::InvalidTau(tau_fc));
    }
    let n = distances.d_values.len();
    if n == 0 {
        return Err(TruhError::EmptyDistances);
    }
    let d_bar = compensated_mean(&distances.d_values);
    let c_bar = compensated_mean(&distances.c_values);
    Ok((n as f64).powf(1.0 / d as f64) * (tau_fc * d_bar - c_bar).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SampleMatrix;

    fn mat(rows: &[&[f64]]) -> SampleMatrix {
        SampleMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn query_hand_computed() {
        let points = mat(&[&[0.0], &[1.0], &[3.0]]);
        let idx = NnIndex::build(&points).unwrap();
        let (j, _) = idx.query(&[0.9]);
        assert_eq!(j, 1);
    }

    #[test]
    fn query_tie_breaks_to_lowest_index() {
        let points = mat(&[&[0.0], &[2.0]]);
        let idx = NnIndex::build(&points).unwrap();
        let (j, d) = idx.query(&[1.0]);
        assert_eq!(j, 0);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn distances_hand_computed() {
        let u = mat(&[&[0.0], &[1.0], &[3.0]]);
        let v = mat(&[&[0.9]]);
        let nd = compute_distances(&u, &v).unwrap();
        assert!((nd.d_values[0] - 0.1).abs() < 1e-12);
        assert_eq!(nd.c_values[0], 1.0);
        assert_eq!(nd.nn_indices[0], 1);
    }

    #[test]
    fn distances_equal_gaps() {
        let u = mat(&[&[0.0], &[1.0]]);
        let v = mat(&[&[2.0]]);
        let nd = compute_distances(&u, &v).unwrap();
        assert_eq!(nd.d_values, vec![1.0]);
        assert_eq!(nd.c_values, vec![1.0]);
    }

    #[test]
    fn statistic_hand_computed() {
        let nd = NnDistances {
            d_values: vec![0.1],
            c_values: vec![1.0],
            nn_indices: vec![0],
        };
        assert!((truh_statistic(&nd, 1, 1.0).unwrap() - 0.9).abs() < 1e-12);

        let nd = NnDistances {
            d_values: vec![1.0],
            c_values: vec![1.0],
            nn_indices: vec![0],
        };
        assert_eq!(truh_statistic(&nd, 1, 1.0).unwrap(), 0.0);
        assert!((truh_statistic(&nd, 1, 1.1).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn statistic_rejects_bad_tau() {
        let nd = NnDistances {
            d_values: vec![1.0],
            c_values: vec![1.0],
            nn_indices: vec![0],
        };
        assert!(matches!(
            truh_statistic(&nd, 1, 0.9),
            Err(TruhError::InvalidTau(_))
        ));
    }

    // independent brute-force oracle, deliberately separate from the
    // index implementation
    fn brute_force_nn(points: &SampleMatrix, x: &[f64], forbidden: Option<usize>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for i in 0..points.n_rows() {
            if Some(i) == forbidden {
                continue;
            }
            let d: f64 = points
                .row(i)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d < best.1 || (d == best.1 && i < best.0) {
                best = (i, d);
            }
        }
        best
    }

    fn random_matrix(rng: &mut crate::rng::RngStream, n: usize, d: usize) -> SampleMatrix {
        let data: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        SampleMatrix::new(data, n, d).unwrap()
    }

    #[test]
    fn tree_matches_brute_force() {
        let mut rng = crate::rng::RngStream::new(11, &[]);
        let points = random_matrix(&mut rng, 200, 5);
        let idx = NnIndex::build(&points).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
            let (j, d) = idx.query(&q);
            let (bj, bd) = brute_force_nn(&points, &q, None);
            assert_eq!(j, bj);
            assert_eq!(d, bd);
            let (je, de) = idx.query_excluding(&q, j);
            let (bje, bde) = brute_force_nn(&points, &q, Some(j));
            assert_eq!(je, bje);
            assert_eq!(de, bde);
        }
    }

    #[test]
    fn compute_distances_matches_double_loop() {
        let mut rng = crate::rng::RngStream::new(12, &[]);
        let u = random_matrix(&mut rng, 100, 3);
        let v = random_matrix(&mut rng, 100, 3);
        let nd = compute_distances(&u, &v).unwrap();
        for i in 0..v.n_rows() {
            let (j, d) = brute_force_nn(&u, v.row(i), None);
            let (_, c) = brute_force_nn(&u, u.row(j), Some(j));
            assert_eq!(nd.nn_indices[i], j);
            assert_eq!(nd.d_values[i], d);
            assert_eq!(nd.c_values[i], c);
        }
    }

    #[test]
    fn torus_metric_wraps() {
        let points = mat(&[&[0.05], &[0.5]]);
        let idx = NnIndex::build_with_metric(&points, Metric::Torus).unwrap();
        let (j, d) = idx.query(&[0.95]);
        assert_eq!(j, 0); // 0.95 -> 0.05 wraps to distance 0.1
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn torus_tree_matches_brute_force() {
        let mut rng = crate::rng::RngStream::new(13, &[]);
        let data: Vec<f64> = (0..300 * 3).map(|_| rng.uniform()).collect();
        let points = SampleMatrix::new(data, 300, 3).unwrap();
        let idx = NnIndex::build_with_metric(&points, Metric::Torus).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let (j, d) = idx.query(&q);
            // brute force with wrap
            let mut best = (usize::MAX, f64::INFINITY);
            for i in 0..points.n_rows() {
                let ds: f64 = points
                    .row(i)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| {
                        let t = (a - b).abs();
                        let t = t.min(1.0 - t);
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt();
                if ds < best.1 || (ds == best.1 && i < best.0) {
                    best = (i, ds);
                }
            }
            assert_eq!(j, best.0);
            assert_eq!(d, best.1);
        }
    }

    #[test]
    fn duplicate_rows_c_exclusion_by_index() {
        // two identical baseline rows: C_i is 0 via the duplicate, which is
        // a distinct row index
        let u = mat(&[&[1.0], &[1.0], &[5.0]]);
        let v = mat(&[&[1.2]]);
        let nd = compute_distances(&u, &v).unwrap();
        assert_eq!(nd.nn_indices[0], 0);
        assert_eq!(nd.c_values[0], 0.0);
    }

    #[test]
    fn randomized_tie_break_covers_all_ties() {
        let u = mat(&[&[0.0], &[2.0], &[10.0]]);
        let v = mat(&[&[1.0]]);
        let mut seen = std::collections::HashSet::new();
        for s in 0..40 {
            let mut rng = crate::rng::RngStream::new(s, &[]);
            let nd = compute_distances_randomized(&u, &v, &mut rng).unwrap();
            seen.insert(nd.nn_indices[0]);
        }
        assert_eq!(seen, [0usize, 1].into_iter().collect());
    }
}
