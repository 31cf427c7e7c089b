//! Bootstrap calibration of the TRUH statistic.
//!
//! The baseline sample is partitioned into estimated subgroups; mixing
//! proportions over those subgroups are drawn repeatedly (from the simplex
//! corners, or from a symmetric Dirichlet); for each draw, surrogate case
//! samples are resampled without replacement from the subgroups and the
//! statistic recomputed, giving a per-draw null distribution. The reported
//! cutoff is the maximum of the per-draw level-alpha cutoffs, which makes
//! the test conservative over the whole simplex of possible mixings.

use rayon::prelude::*;

use crate::cluster::{self, prediction_strength};
use crate::data::SampleMatrix;
use crate::error::{Result, TruhError};
use crate::nn::{compensated_mean, compute_distances};
use crate::result::{PerDraw, TruhResult};
use crate::rng::RngStream;
use crate::data::TestDecision;

/// How mixing proportions are sampled from the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingMode {
    /// Unit mass on one subgroup per draw; effective B1 equals the number
    /// of subgroups.
    Corners,
    /// Symmetric Dirichlet(beta, ..., beta); small beta concentrates mass
    /// near the corners.
    Dirichlet { beta: f64 },
}

/// Configuration for [`truh_test`].
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub alpha: f64,
    pub tau_fc: f64,
    /// Outer mixing draws. Ignored in `Corners` mode, where the effective
    /// B1 is the estimated number of subgroups.
    pub b1: usize,
    /// Inner replicates per mixing draw.
    pub b2: usize,
    pub mixing_mode: MixingMode,
    /// Skip subgroup estimation and use this K directly.
    pub k_override: Option<usize>,
    pub seed: u64,
    /// Apply `tau_fc` to the observed statistic as well as the replicates
    /// (default). Setting this false restores the plain observed statistic.
    pub tau_on_observed: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            alpha: 0.05,
            tau_fc: 1.0,
            b1: 100,
            b2: 200,
            mixing_mode: MixingMode::Corners,
            k_override: None,
            seed: 0,
            tau_on_observed: true,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TruhError::InvalidAlpha {
                alpha: self.alpha,
                range: "(0, 1)",
            });
        }
        if self.tau_fc < 1.0 {
            return Err(TruhError::InvalidTau(self.tau_fc));
        }
        // the step-5 quantile must be attainable
        if (self.b2 as f64) < 1.0 / self.alpha {
            return Err(TruhError::InvalidAlpha {
                alpha: self.alpha,
                range: "b2 >= ceil(1/alpha)",
            });
        }
        if let MixingMode::Dirichlet { beta } = self.mixing_mode {
            if beta <= 0.0 {
                return Err(TruhError::InvalidSpec(format!(
                    "dirichlet beta must be positive, got {beta}"
                )));
            }
        }
        Ok(())
    }
}

/// Samples one mixing-proportion vector. `b1_index` is 1-based; in corners
/// mode draw `b1` puts unit mass on subgroup `b1`.
pub fn sample_mixing(
    mode: MixingMode,
    k_hat: usize,
    b1_index: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    match mode {
        MixingMode::Corners => {
            if b1_index == 0 || b1_index > k_hat {
                return Err(TruhError::IndexOutOfRange {
                    index: b1_index,
                    k: k_hat,
                });
            }
            let mut lambda = vec![0.0; k_hat];
            lambda[b1_index - 1] = 1.0;
            Ok(lambda)
        }
        MixingMode::Dirichlet { beta } => {
            let mut lambda: Vec<f64> = (0..k_hat).map(|_| rng.gamma(beta)).collect();
            let total: f64 = lambda.iter().sum();
            if total <= 0.0 {
                // pathologically small gammas can all underflow to zero
                let i = rng.index(k_hat);
                lambda = vec![0.0; k_hat];
                lambda[i] = 1.0;
            } else {
                for l in &mut lambda {
                    *l /= total;
                }
            }
            Ok(lambda)
        }
    }
}

/// Outcome of one bootstrap replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Replicate {
    /// A class cannot supply its ceil(n * lambda_a) surrogate rows.
    Infeasible,
    Feasible {
        statistic: f64,
        d_bar: f64,
        c_bar: f64,
        surrogate_size: usize,
    },
}

fn surrogate_counts(lambda: &[f64], n: usize) -> Vec<usize> {
    lambda
        .iter()
        .map(|&l| (n as f64 * l).ceil() as usize)
        .collect()
}

fn counts_feasible(counts: &[usize], class_sizes: &[usize]) -> bool {
    counts.iter().zip(class_sizes).all(|(&c, &m)| c <= m)
}

/// One replicate: per class, draw `ceil(n * lambda_a)` rows without
/// replacement as surrogate cases and keep the rest as residual baseline,
/// then evaluate the fold-change-adjusted statistic. The statistic is scaled
/// by the nominal `n` (ceiling arithmetic can overshoot the surrogate size
/// by up to K-1 rows; the overshoot is kept).
pub fn bootstrap_replicate(
    classes: &[SampleMatrix],
    lambda: &[f64],
    n: usize,
    tau_fc: f64,
    rng: &mut RngStream,
) -> Result<Replicate> {
    if tau_fc < 1.0 {
        return Err(TruhError::InvalidTau(tau_fc));
    }
    let d = classes[0].dim();
    let counts = surrogate_counts(lambda, n);
    let class_sizes: Vec<usize> = classes.iter().map(|c| c.n_rows()).collect();
    if !counts_feasible(&counts, &class_sizes) {
        return Ok(Replicate::Infeasible);
    }

    let mut surrogate_rows: Vec<f64> = Vec::new();
    let mut residual_rows: Vec<f64> = Vec::new();
    let mut n_surr = 0usize;
    let mut n_resid = 0usize;
    for (a, class) in classes.iter().enumerate() {
        let take = counts[a];
        let picked = rng.sample_without_replacement(class.n_rows(), take);
        let mut in_surrogate = vec![false; class.n_rows()];
        for &i in &picked {
            surrogate_rows.extend_from_slice(class.row(i));
            in_surrogate[i] = true;
        }
        n_surr += take;
        for i in 0..class.n_rows() {
            if !in_surrogate[i] {
                residual_rows.extend_from_slice(class.row(i));
                n_resid += 1;
            }
        }
    }
    if n_resid < 2 {
        return Err(TruhError::InsufficientBaseline {
            needed: 2,
            got: n_resid,
        });
    }

    let surrogate = SampleMatrix::new(surrogate_rows, n_surr, d)?;
    let residual = SampleMatrix::new(residual_rows, n_resid, d)?;
    let distances = compute_distances(&residual, &surrogate)?;
    let d_bar = compensated_mean(&distances.d_values);
    let c_bar = compensated_mean(&distances.c_values);
    let statistic = (n as f64).powf(1.0 / d as f64) * (tau_fc * d_bar - c_bar).abs();
    Ok(Replicate::Feasible {
        statistic,
        d_bar,
        c_bar,
        surrogate_size: n_surr,
    })
}

/// Per-draw level-alpha cutoff: the smallest replicate value such that the
/// fraction of replicates >= it is at most alpha. Falls back to the maximum
/// when ties leave the qualifying set empty.
fn step5_cutoff(sorted: &[f64], alpha: f64) -> f64 {
    let b2 = sorted.len();
    let mut i = 0;
    while i < b2 {
        // first occurrence of this value determines the >= count
        if (b2 - i) as f64 / b2 as f64 <= alpha {
            return sorted[i];
        }
        let v = sorted[i];
        while i < b2 && sorted[i] == v {
            i += 1;
        }
    }
    sorted[b2 - 1]
}

fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((n as f64 - 1.0) * q).round() as usize;
    sorted[idx.min(n - 1)]
}

fn tail_p_value(sorted: &[f64], statistic: f64) -> f64 {
    let ge = sorted.iter().filter(|&&v| v >= statistic).count();
    (1 + ge) as f64 / (sorted.len() + 1) as f64
}

struct RawDraw {
    lambda: Vec<f64>,
    /// (d_bar, c_bar) for each of the B2 replicates.
    reps: Vec<(f64, f64)>,
}

struct RawRun {
    k_hat: usize,
    draws: Vec<RawDraw>,
    observed: (f64, f64),
    m: usize,
    n: usize,
    d: usize,
}

/// Partitions the baseline into class matrices, estimating K via prediction
/// strength unless overridden.
fn partition_baseline(
    baseline: &SampleMatrix,
    config: &BootstrapConfig,
    rng: &RngStream,
) -> Result<(usize, Vec<SampleMatrix>)> {
    let m = baseline.n_rows();
    let (k_hat, assignments) = match config.k_override {
        Some(k) => {
            if k > m {
                return Err(TruhError::KTooLarge { k, n_rows: m });
            }
            if k == 1 {
                (1, vec![0usize; m])
            } else {
                let fit = cluster::kmeans(baseline, k, cluster::DEFAULT_MAX_ITER, &mut rng.child(0))?;
                (k, fit.assignments)
            }
        }
        None => {
            let k_max = cluster::DEFAULT_K_MAX.min(m / 2).max(1);
            let est = prediction_strength(
                baseline,
                k_max,
                cluster::DEFAULT_N_SPLITS,
                cluster::DEFAULT_THRESHOLD,
                &mut rng.child(0),
            )?;
            (est.k_hat, est.assignments)
        }
    };

    let mut classes = Vec::with_capacity(k_hat);
    for a in 0..k_hat {
        let rows: Vec<usize> = (0..m).filter(|&i| assignments[i] == a).collect();
        classes.push(baseline.select_rows(&rows)?);
    }
    Ok((k_hat, classes))
}

fn run_bootstrap(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    config: &BootstrapConfig,
) -> Result<RawRun> {
    config.validate()?;
    if baseline.dim() != cases.dim() {
        return Err(TruhError::DimensionMismatch {
            expected: baseline.dim(),
            got: cases.dim(),
        });
    }
    let m = baseline.n_rows();
    let n = cases.n_rows();
    if m < n + 2 {
        return Err(TruhError::InsufficientBaseline {
            needed: n + 2,
            got: m,
        });
    }

    let root = RngStream::new(config.seed, &[]);
    let (k_hat, classes) = partition_baseline(baseline, config, &root)?;
    let class_sizes: Vec<usize> = classes.iter().map(|c| c.n_rows()).collect();

    // choose the mixing draws up front, skipping/retrying infeasible ones
    let mut lambdas: Vec<Vec<f64>> = Vec::new();
    match config.mixing_mode {
        MixingMode::Corners => {
            for b1 in 1..=k_hat {
                let lambda = sample_mixing(MixingMode::Corners, k_hat, b1, &mut root.child(1))?;
                let counts = surrogate_counts(&lambda, n);
                if counts_feasible(&counts, &class_sizes) {
                    lambdas.push(lambda);
                } else {
                    eprintln!(
                        "warning: corner {b1} skipped (class of {} rows cannot source {} surrogate cases)",
                        class_sizes[b1 - 1], n
                    );
                }
            }
        }
        MixingMode::Dirichlet { .. } => {
            for b1 in 1..=config.b1 {
                let mut draw_rng = root.child(1).child(b1 as u64);
                for _attempt in 0..100 {
                    let lambda = sample_mixing(config.mixing_mode, k_hat, b1, &mut draw_rng)?;
                    let counts = surrogate_counts(&lambda, n);
                    if counts_feasible(&counts, &class_sizes) {
                        lambdas.push(lambda);
                        break;
                    }
                }
            }
        }
    }
    if lambdas.is_empty() {
        return Err(TruhError::AllDrawsInfeasible);
    }

    // replicates are embarrassingly parallel; stream path [2, b1, b2]
    // makes the result independent of worker count
    let draws: Result<Vec<RawDraw>> = lambdas
        .into_iter()
        .enumerate()
        .map(|(b1_idx, lambda)| {
            let reps: Result<Vec<(f64, f64)>> = (1..=config.b2)
                .into_par_iter()
                .map(|b2| {
                    let mut rng = root.child(2).child(b1_idx as u64 + 1).child(b2 as u64);
                    match bootstrap_replicate(&classes, &lambda, n, config.tau_fc, &mut rng)? {
                        Replicate::Feasible { d_bar, c_bar, .. } => Ok((d_bar, c_bar)),
                        // feasibility was checked against class sizes above,
                        // and resampling cannot change them
                        Replicate::Infeasible => unreachable!("draw checked feasible"),
                    }
                })
                .collect();
            Ok(RawDraw {
                lambda,
                reps: reps?,
            })
        })
        .collect();

    let observed_dist = compute_distances(baseline, cases)?;
    let observed = (
        compensated_mean(&observed_dist.d_values),
        compensated_mean(&observed_dist.c_values),
    );

    Ok(RawRun {
        k_hat,
        draws: draws?,
        observed,
        m,
        n,
        d: baseline.dim(),
    })
}

fn assemble(raw: &RawRun, config: &BootstrapConfig, tau_fc: f64) -> TruhResult {
    let scale = (raw.n as f64).powf(1.0 / raw.d as f64);
    let obs_tau = if config.tau_on_observed { tau_fc } else { 1.0 };
    let statistic = scale * (obs_tau * raw.observed.0 - raw.observed.1).abs();

    let mut per_draw = Vec::with_capacity(raw.draws.len());
    for draw in &raw.draws {
        let mut nulls: Vec<f64> = draw
            .reps
            .iter()
            .map(|&(d_bar, c_bar)| scale * (tau_fc * d_bar - c_bar).abs())
            .collect();
        nulls.sort_by(|a, b| a.total_cmp(b));
        per_draw.push(PerDraw {
            lambda: draw.lambda.clone(),
            q025: empirical_quantile(&nulls, 0.025),
            q50: empirical_quantile(&nulls, 0.5),
            q975: empirical_quantile(&nulls, 0.975),
            cutoff: step5_cutoff(&nulls, config.alpha),
            p_value: tail_p_value(&nulls, statistic),
            null_values: nulls,
        });
    }

    let cutoff = per_draw
        .iter()
        .map(|p| p.cutoff)
        .fold(f64::NEG_INFINITY, f64::max);
    let p_value = per_draw
        .iter()
        .map(|p| p.p_value)
        .fold(f64::NEG_INFINITY, f64::max);

    TruhResult {
        statistic,
        cutoff,
        p_value,
        reject: statistic > cutoff,
        alpha: config.alpha,
        tau_fc,
        k_hat: raw.k_hat,
        per_draw,
        m: raw.m,
        n: raw.n,
        d: raw.d,
        seed: config.seed,
    }
}

/// Runs the full calibrated test: estimates subgroups (unless overridden),
/// bootstraps the null per mixing draw, and compares the observed statistic
/// against the max-over-draws cutoff.
pub fn truh_test(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    config: &BootstrapConfig,
) -> Result<TruhResult> {
    let raw = run_bootstrap(baseline, cases, config)?;
    Ok(assemble(&raw, config, config.tau_fc))
}

/// Like [`truh_test`] but evaluates several fold-change values over the
/// same resampled replicates, so a tau sweep shares all the expensive
/// nearest-neighbor work.
pub fn truh_test_taus(
    baseline: &SampleMatrix,
    cases: &SampleMatrix,
    config: &BootstrapConfig,
    taus: &[f64],
) -> Result<Vec<TruhResult>> {
    for &t in taus {
        if t < 1.0 {
            return Err(TruhError::InvalidTau(t));
        }
    }
    let raw = run_bootstrap(baseline, cases, config)?;
    Ok(taus.iter().map(|&t| assemble(&raw, config, t)).collect())
}

/// Re-evaluates an existing result at other significance levels, reusing the
/// stored per-draw null distributions.
pub fn decisions_at_alphas(result: &TruhResult, alphas: &[f64]) -> Vec<TestDecision> {
    alphas
        .iter()
        .map(|&alpha| {
            let cutoff = result
                .per_draw
                .iter()
                .map(|p| step5_cutoff(&p.null_values, alpha))
                .fold(f64::NEG_INFINITY, f64::max);
            TestDecision::new(result.statistic, cutoff, result.p_value, alpha)
        })
        .collect()
}
