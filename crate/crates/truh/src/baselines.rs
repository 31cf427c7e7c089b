//! Reference two-sample tests: the Friedman–Rafsky edge-count test on the
//! Euclidean minimum spanning tree, and the energy test. Both are used for
//! side-by-side comparisons in the simulation lab.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::SampleMatrix;
use crate::error::{Result, TruhError};
use crate::rng::RngStream;

/// Euclidean minimum spanning tree of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mst {
    pub n_vertices: usize,
    /// Edges (u, v, weight) with u < v, sorted lexicographically.
    pub edges: Vec<(usize, usize, f64)>,
}

impl Mst {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_vertices];
        for &(u, v, _) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// Which reference test produced a [`BaselineResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    EdgecountAsymptotic,
    EdgecountPermutation,
    EnergyPermutation,
}

/// Outcome of a reference test.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub n_permutations: Option<usize>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact Euclidean MST via Prim's algorithm with full O(N^2) distance
/// evaluation. Equal-weight ties resolve to the lowest vertex index, so the
/// result is deterministic.
pub fn build_mst(points: &SampleMatrix) -> Result<Mst> {
    let n = points.n_rows();
    if n < 2 {
        return Err(TruhError::EmptyInput);
    }
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for v in 1..n {
        best_dist[v] = euclid(points.row(0), points.row(v));
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        // lowest index wins ties because strict < never displaces an
        // earlier equal candidate
        let mut pick = usize::MAX;
        let mut pick_dist = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && best_dist[v] < pick_dist {
                pick = v;
                pick_dist = best_dist[v];
            }
        }
        in_tree[pick] = true;
        let u = best_from[pick];
        edges.push((u.min(pick), u.max(pick), pick_dist));
        let p = points.row(pick);
        for v in 0..n {
            if !in_tree[v] {
                let d = euclid(p, points.row(v));
                if d < best_dist[v] {
                    best_dist[v] = d;
                    best_from[v] = pick;
                }
            }
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(Mst {
        n_vertices: n,
        edges,
    })
}

fn pool(baseline: &SampleMatrix, cases: &SampleMatrix) -> Result<SampleMatrix> {
    if baseline.dim() != cases.dim() {
        return Err(TruhError::DimensionMismatch {
            expected: baseline.dim(),
            got: cases.dim(),
        });
    }
    let mut data = baseline.as_slice().to_vec();
    data.extend_from_slice(cases.as_slice());
    SampleMatrix::new(data, baseline.n_rows() + cases.n_rows(), baseline.dim())
}

fn cross_count(mst: &Mst, labels: &[bool]) -> usize {
    mst.edges
        .iter()
        .filter(|&&(u, v, _)| labels[u] != labels[v])
        .count()
}

/// Number of MST edges of the pooled sample that connect a baseline row to
/// a case row.
pub fn edgecount_statistic(baseline: &SampleMatrix, cases: &SampleMatrix) -> Result<usize> {
    let pooled = pool(baseline, cases)?;
    let mst = build_mst(&pooled)?;
    let labels: Vec<bool> = (0..pooled.n_rows()).map(|i| i >= baseline.n_rows()).collect();
    Ok(cross_count(&mst, &labels))
}

/// Asymptotic edge-count cutoff: sigma_d^2 = rho(4 rho + (1-rho)^2 delta_d)
/// / (1+rho)^4 with rho = m/n, and C(alpha) = 2mn/(m+n) - z_{1-alpha}
/// sigma_d sqrt(m+n).
pub fn edgecount_cutoff(m: usize, n: usize, alpha: f64, delta_d: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let rho = mf / nf;
    let sigma_sq = rho * (4.0 * rho + (1.0 - rho).powi(2) * delta_d) / (1.0 + rho).powi(4);
    let z = Normal::standard().inverse_cdf(1.0 - alpha);
    2.0 * mf * nf / (mf + nf) - z * (sigma_sq * (mf + nf)).sqrt()
}

/// Edge-count test with the asymptotic normal cutoff; small R (few
/// cross-sample edges) is evidence against the simple null, so the rejection
/// region is one-sided left. `delta_d` is the MST-degree variance constant
/// for the data dimension (see `constants::estimate_delta_mst`).
pub fn edgecount_test_asymptotic(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    alpha: f64,
    delta_d: f64,
) -> Result<BaselineResult> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(TruhError::InvalidAlpha {
            alpha,
            range: "(0, 0.5)",
        });
    }
    let (m, n) = (baseline.n_rows(), cases.n_rows());
    let r = edgecount_statistic(baseline, cases)? as f64;
    let (mf, nf) = (m as f64, n as f64);
    let rho = mf / nf;
    let sigma_sq = rho * (4.0 * rho + (1.0 - rho).powi(2) * delta_d) / (1.0 + rho).powi(4);
    let mean = 2.0 * mf * nf / (mf + nf);
    let z = (r - mean) / (sigma_sq * (mf + nf)).sqrt();
    let p_value = Normal::standard().cdf(z);
    let cutoff = edgecount_cutoff(m, n, alpha, delta_d);
    Ok(BaselineResult {
        method: BaselineMethod::EdgecountAsymptotic,
        statistic: r,
        p_value,
        reject: r < cutoff,
        n_permutations: None,
    })
}

/// Permutation-calibrated edge-count test. The pooled MST is built once;
/// each permutation only reshuffles the sample labels on its fixed edges.
pub fn edgecount_test_permutation(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    alpha: f64,
    n_perm: usize,
    rng: &RngStream,
) -> Result<BaselineResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TruhError::InvalidAlpha {
            alpha,
            range: "(0, 1)",
        });
    }
    let m = baseline.n_rows();
    let pooled = pool(baseline, cases)?;
    let total = pooled.n_rows();
    let mst = build_mst(&pooled)?;
    let labels: Vec<bool> = (0..total).map(|i| i >= m).collect();
    let observed = cross_count(&mst, &labels);

    let at_most: usize = (1..=n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng.child(p as u64);
            let case_idx = rng.sample_without_replacement(total, total - m);
            let mut perm_labels = vec![false; total];
            for i in case_idx {
                perm_labels[i] = true;
            }
            usize::from(cross_count(&mst, &perm_labels) <= observed)
        })
        .sum();
    let p_value = (1 + at_most) as f64 / (n_perm + 1) as f64;
    Ok(BaselineResult {
        method: BaselineMethod::EdgecountPermutation,
        statistic: observed as f64,
        p_value,
        reject: p_value <= alpha,
        n_permutations: Some(n_perm),
    })
}

/// Energy statistic from a pooled distance matrix and a label split. Means
/// run over all ordered pairs (n^2 convention), so single-point samples are
/// well defined.
fn energy_from_matrix(dist: &[f64], total: usize, labels: &[bool]) -> f64 {
    let mut s_xy = 0.0; // baseline-case
    let mut s_xx = 0.0; // baseline-baseline
    let mut s_yy = 0.0; // case-case
    let mut m = 0usize;
    for i in 0..total {
        if !labels[i] {
            m += 1;
        }
        for j in (i + 1)..total {
            let d = dist[i * total + j];
            match (labels[i], labels[j]) {
                (false, false) => s_xx += d,
                (true, true) => s_yy += d,
                _ => s_xy += d,
            }
        }
    }
    let n = total - m;
    let (mf, nf) = (m as f64, n as f64);
    let mean_xy = s_xy / (mf * nf);
    let mean_xx = 2.0 * s_xx / (mf * mf);
    let mean_yy = 2.0 * s_yy / (nf * nf);
    (nf * mf / (nf + mf)) * (2.0 * mean_xy - mean_yy - mean_xx)
}

/// Energy two-sample test with permutation calibration.
pub fn energy_test(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    alpha: f64,
    n_perm: usize,
    rng: &RngStream,
) -> Result<BaselineResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TruhError::InvalidAlpha {
            alpha,
            range: "(0, 1)",
        });
    }
    let m = baseline.n_rows();
    let pooled = pool(baseline, cases)?;
    let total = pooled.n_rows();
    let mut dist = vec![0.0; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d = euclid(pooled.row(i), pooled.row(j));
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }
    }
    let labels: Vec<bool> = (0..total).map(|i| i >= m).collect();
    let observed = energy_from_matrix(&dist, total, &labels);

    let at_least: usize = (1..=n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng.child(p as u64);
            let case_idx = rng.sample_without_replacement(total, total - m);
            let mut perm_labels = vec![false; total];
            for i in case_idx {
                perm_labels[i] = true;
            }
            usize::from(energy_from_matrix(&dist, total, &perm_labels) >= observed)
        })
        .sum();
    let p_value = (1 + at_least) as f64 / (n_perm + 1) as f64;
    Ok(BaselineResult {
        method: BaselineMethod::EnergyPermutation,
        statistic: observed,
        p_value,
        reject: p_value <= alpha,
        n_permutations: Some(n_perm),
    })
}
