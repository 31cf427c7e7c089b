//! Structural invariants of the statistic, the nearest-neighbor and MST
//! machinery, and the calibrated test: brute-force oracle agreement,
//! translation/scale behavior, determinism across thread counts, and
//! permutation-test size under exchangeability.

use truh::baselines::{build_mst, edgecount_test_permutation, energy_test};
use truh::nn::{compute_distances, truh_statistic};
use truh::simlab::{sample_mixture, Component, MixtureSpec};
use truh::{truh_test, BootstrapConfig, RngStream, SampleMatrix};

fn random_matrix(rng: &mut RngStream, n: usize, d: usize, scale: f64) -> SampleMatrix {
    let data: Vec<f64> = (0..n * d).map(|_| scale * rng.normal()).collect();
    SampleMatrix::new(data, n, d).unwrap()
}

fn affine(x: &SampleMatrix, scale: f64, shift: &[f64]) -> SampleMatrix {
    let d = x.dim();
    let data: Vec<f64> = x
        .rows()
        .flat_map(|row| row.iter().zip(shift).map(move |(v, s)| scale * v + s))
        .collect();
    SampleMatrix::new(data, x.n_rows(), d).unwrap()
}

/// O(mn) reference for the two nearest-neighbor distance vectors.
fn brute_force_distances(baseline: &SampleMatrix, cases: &SampleMatrix) -> (Vec<f64>, Vec<f64>) {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut d_values = Vec::new();
    let mut c_values = Vec::new();
    for v in cases.rows() {
        let (j, dj) = baseline
            .rows()
            .enumerate()
            .map(|(j, u)| (j, dist(v, u)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        d_values.push(dj);
        let cj = baseline
            .rows()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, u)| dist(baseline.row(j), u))
            .fold(f64::INFINITY, f64::min);
        c_values.push(cj);
    }
    (d_values, c_values)
}

#[test]
fn nn_distances_match_brute_force() {
    for seed in 0..5 {
        let mut rng = RngStream::new(seed, &[]);
        let d = 1 + (seed as usize % 4) * 5; // 1, 6, 11, 16 — spans the kd-tree dimension limit
        let baseline = random_matrix(&mut rng, 250, d, 2.0);
        let cases = random_matrix(&mut rng, 60, d, 2.0);
        let fast = compute_distances(&baseline, &cases).unwrap();
        let (d_ref, c_ref) = brute_force_distances(&baseline, &cases);
        for i in 0..cases.n_rows() {
            assert!((fast.d_values[i] - d_ref[i]).abs() <= 1e-12 * (1.0 + d_ref[i]));
            assert!((fast.c_values[i] - c_ref[i]).abs() <= 1e-12 * (1.0 + c_ref[i]));
        }
    }
}

#[test]
fn mst_matches_kruskal_on_300_points() {
    struct Dsu(Vec<usize>);
    impl Dsu {
        fn find(&mut self, x: usize) -> usize {
            if self.0[x] != x {
                let r = self.find(self.0[x]);
                self.0[x] = r;
            }
            self.0[x]
        }
    }
    let mut rng = RngStream::new(99, &[]);
    let points = random_matrix(&mut rng, 300, 3, 1.0);
    let mst = build_mst(&points).unwrap();

    let n = points.n_rows();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut dsu = Dsu((0..n).collect());
    let mut kruskal_weight = 0.0;
    let mut taken = 0;
    for (w, i, j) in edges {
        let (ri, rj) = (dsu.find(i), dsu.find(j));
        if ri != rj {
            dsu.0[ri] = rj;
            kruskal_weight += w;
            taken += 1;
        }
    }
    assert_eq!(taken, n - 1);
    assert!((mst.total_weight() - kruskal_weight).abs() <= 1e-9 * kruskal_weight);
}

#[test]
fn statistic_translation_invariance() {
    let mut rng = RngStream::new(7, &[]);
    let d = 4;
    let baseline = random_matrix(&mut rng, 200, d, 1.5);
    let cases = random_matrix(&mut rng, 40, d, 1.5);
    let shift = [12.5, -3.25, 0.75, 1e4];

    let t0 = truh_statistic(&compute_distances(&baseline, &cases).unwrap(), d, 1.0).unwrap();
    let t1 = truh_statistic(
        &compute_distances(&affine(&baseline, 1.0, &shift), &affine(&cases, 1.0, &shift)).unwrap(),
        d,
        1.0,
    )
    .unwrap();
    assert!(
        (t0 - t1).abs() <= 1e-9 * t0.abs().max(1.0),
        "translation changed the statistic: {t0} vs {t1}"
    );
}

#[test]
fn statistic_scale_equivariance() {
    let mut rng = RngStream::new(8, &[]);
    let d = 3;
    let baseline = random_matrix(&mut rng, 200, d, 1.0);
    let cases = random_matrix(&mut rng, 50, d, 1.0);
    let zero = [0.0; 3];
    for &scale in &[0.25, 2.0, 1024.0] {
        let t0 = truh_statistic(&compute_distances(&baseline, &cases).unwrap(), d, 1.3).unwrap();
        let t1 = truh_statistic(
            &compute_distances(&affine(&baseline, scale, &zero), &affine(&cases, scale, &zero))
                .unwrap(),
            d,
            1.3,
        )
        .unwrap();
        // distances scale linearly, so the statistic does too (powers of two
        // keep the float arithmetic exact up to relative rounding)
        assert!(
            (t1 - scale * t0).abs() <= 1e-12 * (scale * t0).abs(),
            "scale {scale}: expected {} got {t1}",
            scale * t0
        );
    }
}

#[test]
fn statistic_invariant_to_row_order() {
    let mut rng = RngStream::new(21, &[]);
    let d = 5;
    let baseline = random_matrix(&mut rng, 150, d, 1.0);
    let cases = random_matrix(&mut rng, 30, d, 1.0);

    let mut baseline_perm: Vec<usize> = (0..baseline.n_rows()).collect();
    baseline_perm.reverse();
    let mut case_perm: Vec<usize> = (0..cases.n_rows()).collect();
    case_perm.rotate_left(13);
    let baseline_shuffled = baseline.select_rows(&baseline_perm).unwrap();
    let cases_shuffled = cases.select_rows(&case_perm).unwrap();

    let t0 = truh_statistic(&compute_distances(&baseline, &cases).unwrap(), d, 1.0).unwrap();
    let t1 =
        truh_statistic(&compute_distances(&baseline_shuffled, &cases_shuffled).unwrap(), d, 1.0)
            .unwrap();
    assert!((t0 - t1).abs() <= 1e-12 * t0.abs().max(1.0));
}

fn mixture_fixture(seed: u64) -> (SampleMatrix, SampleMatrix) {
    let d = 4;
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = 1.0;
    }
    let spec = MixtureSpec {
        d,
        components: vec![
            (0.5, Component::Gaussian { mean: vec![0.0; d], cov: cov.clone() }),
            (0.5, Component::Gaussian { mean: vec![4.0; d], cov }),
        ],
    };
    let mut rng = RngStream::new(seed, &[]);
    let baseline = sample_mixture(&spec, 300, &mut rng).unwrap();
    let cases = sample_mixture(&spec, 40, &mut rng).unwrap();
    (baseline, cases)
}

#[test]
fn full_test_identical_across_thread_counts() {
    let (baseline, cases) = mixture_fixture(3);
    let config = BootstrapConfig { seed: 17, ..BootstrapConfig::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| truh_test(&baseline, &cases, &config).unwrap())
    };
    let single = run(1);
    let quad = run(4);
    assert_eq!(single, quad);
    assert_eq!(
        serde_json::to_string(&single).unwrap(),
        serde_json::to_string(&quad).unwrap(),
        "serialized results must be byte-identical regardless of thread count"
    );
}

#[test]
fn repeated_runs_serialize_byte_identically() {
    let (baseline, cases) = mixture_fixture(4);
    let config = BootstrapConfig { seed: 5, ..BootstrapConfig::default() };
    let a = serde_json::to_string(&truh_test(&baseline, &cases, &config).unwrap()).unwrap();
    let b = serde_json::to_string(&truh_test(&baseline, &cases, &config).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn permutation_tests_hold_size_under_exchangeability() {
    // Both samples from the same distribution: rejection rate must stay
    // within alpha + 3*SE.
    let alpha = 0.05;
    let reps = 200;
    let bound = alpha + 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    let mut edge_rejects = 0;
    let mut energy_rejects = 0;
    for rep in 0..reps {
        let mut rng = RngStream::new(1000 + rep as u64, &[]);
        let baseline = random_matrix(&mut rng, 40, 2, 1.0);
        let cases = random_matrix(&mut rng, 20, 2, 1.0);
        let perm_rng = RngStream::new(rep as u64, &[7]);
        if edgecount_test_permutation(&baseline, &cases, alpha, 99, &perm_rng)
            .unwrap()
            .reject
        {
            edge_rejects += 1;
        }
        if energy_test(&baseline, &cases, alpha, 99, &perm_rng).unwrap().reject {
            energy_rejects += 1;
        }
    }
    let edge_rate = edge_rejects as f64 / reps as f64;
    let energy_rate = energy_rejects as f64 / reps as f64;
    assert!(edge_rate <= bound, "edgecount permutation size {edge_rate} > {bound}");
    assert!(energy_rate <= bound, "energy permutation size {energy_rate} > {bound}");
}

#[test]
fn copula_marginals_are_exponential() {
    // Kolmogorov-Smirnov check of the first coordinate of the exponential
    // copula against Exp(1); critical value 1.63/sqrt(n) ~ level 0.01.
    let spec = MixtureSpec {
        d: 3,
        components: vec![(
            1.0,
            Component::ExpCopula { rate: vec![1.0; 3], corr: truh::simlab::tapering(3, 0.7) },
        )],
    };
    let mut rng = RngStream::new(55, &[]);
    let n = 5000;
    let sample = sample_mixture(&spec, n, &mut rng).unwrap();
    let mut xs: Vec<f64> = sample.rows().map(|r| r[0]).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x).exp();
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks} too large");
}
