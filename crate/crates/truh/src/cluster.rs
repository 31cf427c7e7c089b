//! K-means and prediction-strength estimation of the number of baseline
//! subgroups.
//!
//! Prediction strength repeatedly halves the data, clusters both halves, and
//! measures how well train-half centroids predict the co-membership of
//! test-half pairs. The estimate is the largest k whose averaged strength
//! clears the threshold (0.8 by default, following the usual 0.8-0.9
//! recommendation; the split count and k range are configurable, not fixed
//! constants of the method).

use std::collections::BTreeMap;

use crate::data::SampleMatrix;
use crate::error::{Result, TruhError};
use crate::rng::RngStream;

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_N_SPLITS: usize = 5;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Output of a single k-means run.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    /// Cluster label in `0..k` for each row.
    pub assignments: Vec<usize>,
    /// `k x d` centroid matrix, row-major.
    pub centroids: Vec<f64>,
    pub k: usize,
    pub class_sizes: Vec<usize>,
    /// Within-cluster sum of squares at convergence.
    pub wcss: f64,
}

/// Estimated cluster count with full-data memberships.
#[derive(Debug, Clone)]
pub struct ClusteringEstimate {
    pub k_hat: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<f64>,
    pub class_sizes: Vec<usize>,
    /// Mean prediction strength per evaluated k.
    pub prediction_strengths: BTreeMap<usize, f64>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(x: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, cent) in centroids.chunks_exact(d).enumerate() {
        let ds = sq_dist(x, cent);
        if ds < best.1 {
            best = (c, ds);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids(points: &SampleMatrix, k: usize, rng: &mut RngStream) -> Vec<f64> {
    let n = points.n_rows();
    let d = points.dim();
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.index(n);
    centroids.extend_from_slice(points.row(first));
    let mut dist_sq: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            rng.index(n)
        } else {
            let mut target = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let start = centroids.len();
        centroids.extend_from_slice(points.row(next));
        let new_c = &centroids[start..start + d];
        for i in 0..n {
            let ds = sq_dist(points.row(i), new_c);
            if ds < dist_sq[i] {
                dist_sq[i] = ds;
            }
        }
    }
    centroids
}

/// Lloyd iterations from k-means++ seeding. Stops when assignments no longer
/// change or after `max_iter` rounds. Empty clusters are reseeded to the
/// point farthest from its current centroid.
pub fn kmeans(
    points: &SampleMatrix,
    k: usize,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<KmeansFit> {
    let n = points.n_rows();
    let d = points.dim();
    if k == 0 || k > n {
        return Err(TruhError::KTooLarge { k, n_rows: n });
    }

    let mut centroids = seed_centroids(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut prev_wcss = f64::INFINITY;
    let mut wcss = 0.0;

    for _ in 0..max_iter {
        // assignment step
        let mut changed = false;
        wcss = 0.0;
        for i in 0..n {
            let (c, ds) = nearest_centroid(points.row(i), &centroids, d);
            wcss += ds;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        debug_assert!(wcss <= prev_wcss + 1e-9 * (1.0 + prev_wcss.abs().min(1e100)));
        prev_wcss = wcss;
        if !changed {
            break;
        }

        // update step
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed to the point farthest from its assigned centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), &centroids[assignments[a] * d..(assignments[a] + 1) * d]);
                        let db = sq_dist(points.row(b), &centroids[assignments[b] * d..(assignments[b] + 1) * d]);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                centroids[c * d..(c + 1) * d].copy_from_slice(points.row(far));
                prev_wcss = f64::INFINITY;
            } else {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }

    let mut class_sizes = vec![0usize; k];
    for &a in &assignments {
        class_sizes[a] += 1;
    }
    Ok(KmeansFit {
        assignments,
        centroids,
        k,
        class_sizes,
        wcss,
    })
}

/// Prediction strength of one (train, test) split at a given k: the minimum
/// over test clusters of the fraction of within-cluster pairs that the train
/// centroids co-assign. Clusters with fewer than two points are vacuous and
/// skipped.
fn split_strength(
    points: &SampleMatrix,
    train_idx: &[usize],
    test_idx: &[usize],
    k: usize,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let d = points.dim();
    let train = points.select_rows(train_idx)?;
    let test = points.select_rows(test_idx)?;
    let train_fit = kmeans(&train, k, max_iter, &mut rng.child(0))?;
    let test_fit = kmeans(&test, k, max_iter, &mut rng.child(1))?;

    // label of each test point under the train centroids
    let train_labels: Vec<usize> = (0..test.n_rows())
        .map(|i| nearest_centroid(test.row(i), &train_fit.centroids, d).0)
        .collect();

    let mut min_frac = 1.0f64;
    let mut any = false;
    for c in 0..k {
        let members: Vec<usize> = (0..test.n_rows())
            .filter(|&i| test_fit.assignments[i] == c)
            .collect();
        if members.len() < 2 {
            continue;
        }
        any = true;
        let mut agree = 0usize;
        let mut total = 0usize;
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                total += 1;
                if train_labels[members[a]] == train_labels[members[b]] {
                    agree += 1;
                }
            }
        }
        min_frac = min_frac.min(agree as f64 / total as f64);
    }
    Ok(if any { min_frac } else { 1.0 })
}

/// Estimates the number of subgroups via prediction strength, then fits
/// full-data k-means at the chosen k. `ps(1) = 1` by convention; the chosen
/// k is the largest whose mean strength clears `threshold` (1 if none does).
pub fn prediction_strength(
    points: &SampleMatrix,
    k_max: usize,
    n_splits: usize,
    threshold: f64,
    rng: &mut RngStream,
) -> Result<ClusteringEstimate> {
    let n = points.n_rows();
    if k_max == 0 || 2 * k_max > n {
        return Err(TruhError::KTooLarge {
            k: k_max,
            n_rows: n,
        });
    }

    let mut strengths = BTreeMap::new();
    strengths.insert(1, 1.0);
    for k in 2..=k_max {
        let mut acc = 0.0;
        for s in 0..n_splits {
            let mut split_rng = rng.child(k as u64).child(s as u64);
            let perm = split_rng.sample_without_replacement(n, n);
            let half = n / 2;
            let (train_idx, test_idx) = perm.split_at(half);
            acc += split_strength(
                points,
                train_idx,
                test_idx,
                k,
                DEFAULT_MAX_ITER,
                &mut split_rng,
            )?;
        }
        strengths.insert(k, acc / n_splits as f64);
    }

    let k_hat = strengths
        .iter()
        .filter(|(_, &ps)| ps >= threshold)
        .map(|(&k, _)| k)
        .max()
        .unwrap_or(1);

    let fit = kmeans(points, k_hat, DEFAULT_MAX_ITER, &mut rng.child(0))?;
    Ok(ClusteringEstimate {
        k_hat,
        assignments: fit.assignments,
        centroids: fit.centroids,
        class_sizes: fit.class_sizes,
        prediction_strengths: strengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(rng: &mut RngStream, per_blob: usize, d: usize, centers: &[f64]) -> (SampleMatrix, Vec<usize>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (b, &c) in centers.iter().enumerate() {
            for _ in 0..per_blob {
                for _ in 0..d {
                    data.push(c + rng.normal());
                }
                labels.push(b);
            }
        }
        (
            SampleMatrix::new(data, per_blob * centers.len(), d).unwrap(),
            labels,
        )
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let mut rng = RngStream::new(5, &[]);
        let (points, truth) = blobs(&mut rng, 100, 2, &[0.0, -3.0, 3.0]);
        let fit = kmeans(&points, 3, 100, &mut rng).unwrap();
        // agreement up to label permutation
        let mut best = 0usize;
        let perms = [
            [0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0],
        ];
        for p in perms {
            let agree = fit
                .assignments
                .iter()
                .zip(&truth)
                .filter(|&(&a, &t)| p[a] == t)
                .count();
            best = best.max(agree);
        }
        // adjacent centers sit 4.24 apart with unit variance, so ~2% of
        // points fall on the wrong side of the midplane in expectation
        assert!(best as f64 / truth.len() as f64 >= 0.96, "agreement {best}/300");
    }

    #[test]
    fn kmeans_k1_is_column_means() {
        let mut rng = RngStream::new(6, &[]);
        let (points, _) = blobs(&mut rng, 50, 3, &[0.0, 2.0]);
        let fit = kmeans(&points, 1, 100, &mut rng).unwrap();
        let means = points.column_means();
        for (c, m) in fit.centroids.iter().zip(&means) {
            assert!((c - m).abs() < 1e-10);
        }
    }

    #[test]
    fn kmeans_k_equals_n_zero_wcss() {
        let mut rng = RngStream::new(7, &[]);
        let data: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let points = SampleMatrix::new(data, 10, 2).unwrap();
        let fit = kmeans(&points, 10, 100, &mut rng).unwrap();
        assert!(fit.wcss < 1e-12, "wcss = {}", fit.wcss);
        assert!(fit.class_sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn kmeans_rejects_k_too_large() {
        let points = SampleMatrix::new(vec![0.0, 1.0], 2, 1).unwrap();
        let mut rng = RngStream::new(8, &[]);
        assert!(matches!(
            kmeans(&points, 3, 10, &mut rng),
            Err(TruhError::KTooLarge { .. })
        ));
    }

    #[test]
    fn prediction_strength_kmax_one() {
        let mut rng = RngStream::new(9, &[]);
        let (points, _) = blobs(&mut rng, 30, 2, &[0.0]);
        let est = prediction_strength(&points, 1, 5, 0.8, &mut rng).unwrap();
        assert_eq!(est.k_hat, 1);
        assert_eq!(est.prediction_strengths[&1], 1.0);
    }

    #[test]
    fn prediction_strength_finds_three_blobs() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = RngStream::new(seed, &[17]);
            let (points, _) = blobs(&mut rng, 100, 2, &[0.0, -3.0, 3.0]);
            let est = prediction_strength(&points, 6, 5, 0.8, &mut rng).unwrap();
            if est.k_hat == 3 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "k_hat=3 in only {hits}/100 runs");
    }

    #[test]
    fn prediction_strength_single_cloud_is_one() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = RngStream::new(seed, &[18]);
            let (points, _) = blobs(&mut rng, 200, 2, &[0.0]);
            let est = prediction_strength(&points, 6, 5, 0.8, &mut rng).unwrap();
            if est.k_hat == 1 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "k_hat=1 in only {hits}/100 runs");
    }

    #[test]
    fn strengths_in_unit_interval() {
        let mut rng = RngStream::new(10, &[]);
        let (points, _) = blobs(&mut rng, 40, 2, &[0.0, 5.0]);
        let est = prediction_strength(&points, 5, 3, 0.8, &mut rng).unwrap();
        for (&k, &ps) in &est.prediction_strengths {
            assert!((0.0..=1.0).contains(&ps), "ps({k}) = {ps}");
        }
        assert_eq!(
            est.class_sizes.iter().sum::<usize>(),
            points.n_rows()
        );
        assert!(est.class_sizes.iter().all(|&s| s > 0));
    }
}
