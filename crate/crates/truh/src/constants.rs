//! Dimension constants of the limiting theory: the expected scaled
//! nearest-neighbor distances zeta1 and zeta2, their gap Delta_d, the limit
//! functional phi, and the location-family cutoff gamma. Monte-Carlo
//! estimators come in two flavors: `CubeMC` mirrors the reference table
//! (uniform points in the unit cube, boundary bias included) and `TorusMC`
//! removes the boundary so zeta1 matches its closed form.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::data::SampleMatrix;
use crate::error::{Result, TruhError};
use crate::nn::{compensated_mean, compute_distances_with, Metric};
use crate::rng::RngStream;

/// How a [`DimensionConstants`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsMode {
    /// Closed form; only zeta1 is available, zeta2/delta are NaN-free zeros.
    ClosedForm,
    /// Uniform points in the unit cube with Euclidean distances.
    CubeMC,
    /// Uniform points on the flat torus (wrap-around distances).
    TorusMC,
}

/// zeta1, zeta2 and their gap for one dimension, with Monte-Carlo errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionConstants {
    pub d: usize,
    pub zeta1: f64,
    pub zeta2: f64,
    pub delta_d: f64,
    pub se_zeta1: f64,
    pub se_zeta2: f64,
    pub mode: ConstantsMode,
}

/// Unit-ball volume V_d = pi^{d/2} / Gamma(d/2 + 1).
pub fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Closed form zeta1(d) = (1/V_d)^{1/d} * Gamma((d+1)/d): the expected
/// distance from the origin to the nearest point of a rate-1 Poisson
/// process. Equals exactly 0.5 for d = 1 and d = 2.
pub fn zeta1_closed_form(d: usize) -> f64 {
    let df = d as f64;
    (1.0 / unit_ball_volume(d)).powf(1.0 / df) * gamma((df + 1.0) / df)
}

/// One MC replicate: m = n = n_points uniform points for each sample,
/// returning (n^{1/d} Dbar, n^{1/d} Cbar).
fn constants_replicate(d: usize, n_points: usize, metric: Metric, rng: &mut RngStream) -> (f64, f64) {
    let draw = |rng: &mut RngStream| -> SampleMatrix {
        let data: Vec<f64> = (0..n_points * d).map(|_| rng.uniform()).collect();
        SampleMatrix::new(data, n_points, d).expect("uniform draws are finite")
    };
    let u = draw(rng);
    let v = draw(rng);
    let distances = compute_distances_with(&u, &v, metric).expect("matching dimensions");
    let scale = (n_points as f64).powf(1.0 / d as f64);
    (
        scale * compensated_mean(&distances.d_values),
        scale * compensated_mean(&distances.c_values),
    )
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_mean(values);
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimates of zeta1 and zeta2 in dimension `d`, averaged over
/// `reps` independent replicates run in parallel.
pub fn estimate_constants_mc(
    d: usize,
    n_points: usize,
    reps: usize,
    mode: ConstantsMode,
    rng: &RngStream,
) -> Result<DimensionConstants> {
    if d == 0 || n_points < 1000 || reps == 0 {
        return Err(TruhError::InvalidSpec(format!(
            "need d >= 1, n_points >= 1000, reps >= 1 (got d={d}, n_points={n_points}, reps={reps})"
        )));
    }
    let metric = match mode {
        ConstantsMode::CubeMC => Metric::Euclidean,
        ConstantsMode::TorusMC => Metric::Torus,
        ConstantsMode::ClosedForm => {
            return Err(TruhError::InvalidSpec(
                "closed-form mode has no Monte-Carlo estimator".into(),
            ))
        }
    };
    let pairs: Vec<(f64, f64)> = (1..=reps)
        .into_par_iter()
        .map(|r| constants_replicate(d, n_points, metric, &mut rng.child(r as u64)))
        .collect();
    let z1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let z2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (zeta1, se_zeta1) = mean_and_se(&z1);
    let (zeta2, se_zeta2) = mean_and_se(&z2);
    Ok(DimensionConstants {
        d,
        zeta1,
        zeta2,
        delta_d: zeta2 - zeta1,
        se_zeta1,
        se_zeta2,
        mode,
    })
}

/// Closed-form constants: zeta1 exact, zeta2/delta unavailable (zero).
pub fn closed_form_constants(d: usize) -> DimensionConstants {
    let zeta1 = zeta1_closed_form(d);
    DimensionConstants {
        d,
        zeta1,
        zeta2: zeta1,
        delta_d: 0.0,
        se_zeta1: 0.0,
        se_zeta2: 0.0,
        mode: ConstantsMode::ClosedForm,
    }
}

/// Limit of the statistic under the mixture null:
/// phi = rho^{1/d} * Delta_d * integral of g / f0^{1/d}. The integral is
/// caller-supplied (closed form or via [`integrate`]).
pub fn limit_functional(
    density_ratio_integral: f64,
    rho: f64,
    constants: &DimensionConstants,
) -> f64 {
    rho.powf(1.0 / constants.d as f64) * constants.delta_d * density_ratio_integral
}

/// Location-family cutoff gamma = rho^{1/d} * Delta_d * L^{-1/d} *
/// integral of p^{1 - 1/d}; the test "statistic > gamma" has vanishing
/// asymptotic type-I error when every mixture weight is at least L.
pub fn gamma_cutoff(
    d: usize,
    rho: f64,
    weight_lower_bound_l: f64,
    base_density_integral: f64,
    constants: &DimensionConstants,
) -> Result<f64> {
    if !(weight_lower_bound_l > 0.0 && weight_lower_bound_l <= 1.0) {
        return Err(TruhError::InvalidL(weight_lower_bound_l));
    }
    let df = d as f64;
    Ok(rho.powf(1.0 / df)
        * constants.delta_d
        * weight_lower_bound_l.powf(-1.0 / df)
        * base_density_integral)
}

/// MC estimate of delta_d — the variance of the degree of a typical point
/// in the Euclidean MST of a homogeneous Poisson process — together with the
/// standard error of the variance estimate. Each replicate plants a point at
/// the cube center (dodging the boundary) among `n_points` uniform points
/// and records its MST degree.
pub fn estimate_delta_mst_with_se(
    d: usize,
    n_points: usize,
    reps: usize,
    rng: &RngStream,
) -> Result<(f64, f64)> {
    if d == 0 || n_points < 1000 || reps < 2 {
        return Err(TruhError::InvalidSpec(format!(
            "need d >= 1, n_points >= 1000, reps >= 2 (got d={d}, n_points={n_points}, reps={reps})"
        )));
    }
    let degrees: Vec<f64> = (1..=reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng.child(r as u64);
            let mut data: Vec<f64> = (0..n_points * d).map(|_| rng.uniform()).collect();
            data.extend(std::iter::repeat(0.5).take(d));
            let points =
                SampleMatrix::new(data, n_points + 1, d).expect("uniform draws are finite");
            let mst = crate::baselines::build_mst(&points).expect("two or more points");
            mst.degrees()[n_points] as f64
        })
        .collect();
    let n = reps as f64;
    let mean = compensated_mean(&degrees);
    let centered: Vec<f64> = degrees.iter().map(|&x| x - mean).collect();
    let m2 = centered.iter().map(|c| c * c).sum::<f64>() / n;
    let m4 = centered.iter().map(|c| c.powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    // standard error of the sample variance via the fourth moment
    let se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    Ok((var, se))
}

/// MC estimate of delta_d; see [`estimate_delta_mst_with_se`].
pub fn estimate_delta_mst(d: usize, n_points: usize, reps: usize, rng: &RngStream) -> Result<f64> {
    estimate_delta_mst_with_se(d, n_points, reps, rng).map(|(v, _)| v)
}

/// Adaptive Simpson quadrature on [a, b] to relative tolerance `rel_tol`
/// (absolute floor 1e-14 near zero). Convenience for the caller-supplied
/// density integrals.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * eps, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * eps, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let eps = (rel_tol * whole.abs()).max(1e-14);
    recurse(f, a, fa, b, fb, whole, m, fm, eps, 50)
}
