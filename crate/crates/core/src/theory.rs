//! Monte-Carlo and closed-form checks of the ball-policy analysis.
//!
//! For i.i.d. standard-normal reward streams R_1..R_T with S_T = Σ R_i:
//!
//! - `E‖S_T‖₂ = √(2T)·Γ((d+1)/2)/Γ(d/2)` ([`expected_norm_formula`], verified
//!   by [`mc_expected_norm`]);
//! - `E[S_T S_Tᵀ/‖S_T‖₂] = (E‖S_T‖₂/d)·I` by rotational invariance
//!   ([`mc_isotropy`]);
//! - the least-squares optimal score map `Σ_i C R_i` against the
//!   best-in-hindsight ball policy `R_Π·S_T/‖S_T‖` is identity-proportional
//!   ([`empirical_optimal_c`]); the written derivation prints two candidate
//!   constants that disagree by a factor of d, and the Monte-Carlo minimizer
//!   adjudicates between them;
//! - the constant offset minimizing the loss for fixed (A, β, C) is −A·β
//!   ([`delta_condition_check`]);
//! - the vectors `V₁ᵀ(R Rᵀ − I)` span all of R^d for unit-ball samples R
//!   ([`independent_directions`]).
//!
//! All estimators draw per-chunk sub-streams and reduce in fixed chunk order,
//! so results are deterministic for any worker count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::linalg::{dot, l2_norm, Mat};
use crate::rng::stream_rng;

#[derive(Debug, thiserror::Error)]
pub enum TheoryError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("need at least {needed} samples for a well-conditioned solve, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("direction search exhausted {0} attempts")]
    SearchFailure(usize),
    #[error("reference direction must be nonzero")]
    ZeroDirection,
    #[error("normal-equation solve failed (singular Gram matrix)")]
    SingularSystem,
}

const CHUNK: usize = 1 << 14;

/// `E‖S_T‖₂` for S_T ~ N(0, T·I_d): √(2T)·Γ((d+1)/2)/Γ(d/2).
pub fn expected_norm_formula(d: usize, t: usize) -> f64 {
    assert!(d >= 1 && t >= 1);
    let d = d as f64;
    (2.0 * t as f64).sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// The identity-proportional coefficient from the penultimate line of the
/// derivation: (R_Π/(T·d))·(E‖S_T‖/d).
pub fn optimal_c_penultimate(d: usize, t: usize, r_pi: f64) -> f64 {
    r_pi / (t as f64 * d as f64) * expected_norm_formula(d, t) / d as f64
}

/// The coefficient as printed in the final display, one factor of d larger:
/// √2·R_Π·Γ((d+1)/2)/(√T·d·Γ(d/2)).
pub fn optimal_c_final_display(d: usize, t: usize, r_pi: f64) -> f64 {
    r_pi / (t as f64 * d as f64) * expected_norm_formula(d, t)
}

/// A Monte-Carlo scalar estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub sample_count: usize,
}

fn sample_stream_sum(d: usize, t: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s = vec![0.0; d];
    for _ in 0..t {
        for si in s.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *si += z;
        }
    }
    s
}

fn chunk_sizes(n: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(n / CHUNK + 1);
    let mut left = n;
    while left > 0 {
        let take = left.min(CHUNK);
        sizes.push(take);
        left -= take;
    }
    sizes
}

/// Mean of ‖Σ_{i≤T} R_i‖₂ over N i.i.d. standard-normal streams.
pub fn mc_expected_norm(
    d: usize,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<McEstimate, TheoryError> {
    if n < 1 {
        return Err(TheoryError::NoSamples);
    }
    assert!(d >= 1 && t >= 1);
    let partials: Vec<(f64, f64)> = chunk_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(chunk_idx, size)| {
            let mut rng = stream_rng(seed, chunk_idx as u64);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..size {
                let norm = l2_norm(&sample_stream_sum(d, t, &mut rng));
                sum += norm;
                sumsq += norm * norm;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    Ok(McEstimate { value: mean, standard_error: (var / n as f64).sqrt(), sample_count: n })
}

/// Monte-Carlo estimate of E[S_T S_Tᵀ/‖S_T‖₂] with its isotropy verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsotropyEstimate {
    pub matrix: Mat,
    pub entry_standard_error: Mat,
    pub sample_count: usize,
    /// Largest |off-diagonal| entry.
    pub max_offdiag: f64,
    /// max − min of the diagonal.
    pub diag_spread: f64,
    /// The predicted diagonal value E‖S_T‖/d.
    pub predicted_diag: f64,
}

pub fn mc_isotropy(d: usize, t: usize, n: usize, seed: u64) -> Result<IsotropyEstimate, TheoryError> {
    mc_isotropy_rotated(d, t, n, seed, None)
}

/// Same estimator with each stream sum conjugated by a fixed orthogonal
/// matrix; the estimate must be rotation invariant.
pub fn mc_isotropy_rotated(
    d: usize,
    t: usize,
    n: usize,
    seed: u64,
    rotation: Option<&Mat>,
) -> Result<IsotropyEstimate, TheoryError> {
    if n < 1 {
        return Err(TheoryError::NoSamples);
    }
    let dd = d * d;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = chunk_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(chunk_idx, size)| {
            let mut rng = stream_rng(seed, chunk_idx as u64);
            let mut sum = vec![0.0; dd];
            let mut sumsq = vec![0.0; dd];
            for _ in 0..size {
                let mut s = sample_stream_sum(d, t, &mut rng);
                if let Some(q) = rotation {
                    s = q.mat_vec(&s);
                }
                let norm = l2_norm(&s);
                if norm == 0.0 {
                    continue;
                }
                for i in 0..d {
                    for j in 0..d {
                        let v = s[i] * s[j] / norm;
                        sum[i * d + j] += v;
                        sumsq[i * d + j] += v * v;
                    }
                }
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = vec![0.0; dd];
    let mut sumsq = vec![0.0; dd];
    for (ps, pq) in partials {
        for i in 0..dd {
            sum[i] += ps[i];
            sumsq[i] += pq[i];
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se: Vec<f64> = sumsq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (((sq / nf - m * m).max(0.0)) / nf).sqrt())
        .collect();
    let matrix = Mat { d, data: mean };
    let mut max_offdiag: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_offdiag = max_offdiag.max(matrix.get(i, j).abs());
            }
        }
    }
    let diag: Vec<f64> = (0..d).map(|i| matrix.get(i, i)).collect();
    let diag_spread = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IsotropyEstimate {
        matrix,
        entry_standard_error: Mat { d, data: se },
        sample_count: n,
        max_offdiag,
        diag_spread,
        predicted_diag: expected_norm_formula(d, t) / d as f64,
    })
}

/// Least-squares minimizer of E Σ_t ‖C·S_{t−1} − R_Π·S_T/‖S_T‖‖² over d×d
/// matrices C, from N sampled streams (closed-form normal-equation solve).
pub fn empirical_optimal_c(
    d: usize,
    t: usize,
    r_pi: f64,
    n: usize,
    seed: u64,
) -> Result<Mat, TheoryError> {
    let needed = 10 * d * d;
    if n < needed {
        return Err(TheoryError::InsufficientData { needed, got: n });
    }
    let dd = d * d;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = chunk_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(chunk_idx, size)| {
            let mut rng = stream_rng(seed, chunk_idx as u64);
            let mut gram = vec![0.0; dd];
            let mut cross = vec![0.0; dd];
            let mut prefix = vec![0.0; d];
            let mut rewards = vec![0.0; d * t];
            for _ in 0..size {
                for x in rewards.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                prefix.iter_mut().for_each(|x| *x = 0.0);
                let mut s_t = vec![0.0; d];
                for round in 0..t {
                    for i in 0..d {
                        s_t[i] += rewards[round * d + i];
                    }
                }
                let norm = l2_norm(&s_t);
                if norm == 0.0 {
                    continue;
                }
                let target: Vec<f64> = s_t.iter().map(|x| r_pi * x / norm).collect();
                for round in 0..t {
                    // prefix = S_{round}, the sum of the first `round` rewards.
                    for i in 0..d {
                        for j in 0..d {
                            gram[i * d + j] += prefix[i] * prefix[j];
                            cross[i * d + j] += target[i] * prefix[j];
                        }
                    }
                    for i in 0..d {
                        prefix[i] += rewards[round * d + i];
                    }
                }
            }
            (gram, cross)
        })
        .collect();
    let mut gram = Mat::zeros(d);
    let mut cross = Mat::zeros(d);
    for (g, c) in partials {
        for i in 0..dd {
            gram.data[i] += g[i];
            cross.data[i] += c[i];
        }
    }
    // C·G = B row by row: G is symmetric, so solve G·cᵀ_row = b_row.
    let mut c = Mat::zeros(d);
    for i in 0..d {
        let row = gram.solve(cross.row(i)).ok_or(TheoryError::SingularSystem)?;
        c.data[i * d..(i + 1) * d].copy_from_slice(&row);
    }
    Ok(c)
}

/// Fraction of the Frobenius mass sitting off the diagonal.
pub fn offdiag_mass_fraction(m: &Mat) -> f64 {
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..m.d {
        for j in 0..m.d {
            let v = m.get(i, j) * m.get(i, j);
            total += v;
            if i != j {
                off += v;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (off / total).sqrt()
    }
}

/// Outcome of the optimal-offset check for fixed random (A, β, C).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaReport {
    pub fitted_delta: Vec<f64>,
    /// The predicted minimizer −A·β.
    pub predicted_delta: Vec<f64>,
    pub relative_error: f64,
    pub loss_at_fitted: f64,
    pub loss_at_minus_ab: f64,
    pub loss_at_plus_ab: f64,
    pub sample_count: usize,
}

/// Residual trajectory of one stream: for each prefix length 0..t−1 the
/// vector w = Σ_{i<prefix}(A R_i R_iᵀ β + C R_i) − S_T/‖S_T‖, flattened.
fn stream_residuals(
    d: usize,
    t: usize,
    a: &Mat,
    beta: &[f64],
    c: &Mat,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut rewards = vec![0.0; d * t];
    for x in rewards.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    let mut s_t = vec![0.0; d];
    for round in 0..t {
        for i in 0..d {
            s_t[i] += rewards[round * d + i];
        }
    }
    let norm = l2_norm(&s_t);
    let target: Vec<f64> =
        if norm == 0.0 { vec![0.0; d] } else { s_t.iter().map(|x| x / norm).collect() };
    let mut out = vec![0.0; d * t];
    let mut partial = vec![0.0; d];
    for round in 0..t {
        for i in 0..d {
            out[round * d + i] = partial[i] - target[i];
        }
        let r = &rewards[round * d..(round + 1) * d];
        let rb = dot(r, beta);
        let ar = a.mat_vec(r);
        let cr = c.mat_vec(r);
        for i in 0..d {
            partial[i] += ar[i] * rb + cr[i];
        }
    }
    out
}

/// Least-squares fit of the constant offset δ in
/// E Σ_t ‖Σ_{i<t}(A R_i R_iᵀ β + C R_i + δ) − S_T/‖S_T‖‖² for the given
/// (A, β, C), with a paired comparison of the loss at the fitted δ against
/// both signs of A·β.
pub fn delta_condition_check_with(
    a: &Mat,
    beta: &[f64],
    c: &Mat,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<DeltaReport, TheoryError> {
    if n < 1 {
        return Err(TheoryError::NoSamples);
    }
    let d = beta.len();
    let a_beta = a.mat_vec(beta);
    let predicted: Vec<f64> = a_beta.iter().map(|x| -x).collect();
    // A prefix of length `round` enters the loss with weight `round` on δ.
    let weight_sq: f64 = (0..t).map(|round| (round * round) as f64).sum();

    let partials: Vec<(Vec<f64>, [f64; 2])> = chunk_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(chunk_idx, size)| {
            let mut rng = stream_rng(seed, chunk_idx as u64);
            let mut weighted = vec![0.0; d];
            let mut losses = [0.0; 2];
            for _ in 0..size {
                let w = stream_residuals(d, t, a, beta, c, &mut rng);
                for round in 0..t {
                    let weight = round as f64;
                    for i in 0..d {
                        let wi = w[round * d + i];
                        weighted[i] += weight * wi;
                        // Paired losses at δ = −Aβ and δ = +Aβ.
                        let lo = wi - weight * a_beta[i];
                        let hi = wi + weight * a_beta[i];
                        losses[0] += lo * lo;
                        losses[1] += hi * hi;
                    }
                }
            }
            (weighted, losses)
        })
        .collect();
    let mut weighted = vec![0.0; d];
    let mut losses = [0.0; 2];
    for (pw, pl) in &partials {
        for i in 0..d {
            weighted[i] += pw[i];
        }
        losses[0] += pl[0];
        losses[1] += pl[1];
    }
    let fitted: Vec<f64> = if weight_sq == 0.0 {
        vec![0.0; d]
    } else {
        weighted.iter().map(|x| -x / (n as f64 * weight_sq)).collect()
    };

    // Second pass for the loss at the fitted offset (same streams).
    let fitted_loss: f64 = chunk_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(chunk_idx, size)| {
            let mut rng = stream_rng(seed, chunk_idx as u64);
            let mut loss = 0.0;
            for _ in 0..size {
                let w = stream_residuals(d, t, a, beta, c, &mut rng);
                for round in 0..t {
                    let weight = round as f64;
                    for i in 0..d {
                        let v = w[round * d + i] + weight * fitted[i];
                        loss += v * v;
                    }
                }
            }
            loss
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();

    let nf = n as f64;
    let diff: f64 =
        fitted.iter().zip(&predicted).map(|(f, p)| (f - p) * (f - p)).sum::<f64>().sqrt();
    let scale = l2_norm(&a_beta).max(1e-12);
    Ok(DeltaReport {
        fitted_delta: fitted,
        predicted_delta: predicted,
        relative_error: diff / scale,
        loss_at_fitted: fitted_loss / nf,
        loss_at_minus_ab: losses[0] / nf,
        loss_at_plus_ab: losses[1] / nf,
        sample_count: n,
    })
}

/// [`delta_condition_check_with`] on a random (A, β, C) drawn from the seed.
pub fn delta_condition_check(
    d: usize,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<DeltaReport, TheoryError> {
    let mut setup_rng = stream_rng(seed, u64::MAX);
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len).map(|_| StandardNormal.sample(&mut setup_rng)).collect()
    };
    let a = Mat { d, data: draw(d * d) };
    let beta = draw(d);
    let c = Mat { d, data: draw(d * d) };
    delta_condition_check_with(&a, &beta, &c, t, n, seed)
}

/// Sample a point uniformly from the d-dimensional unit ball.
fn unit_ball_sample(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = l2_norm(&z);
    if norm == 0.0 {
        return vec![0.0; d];
    }
    let u: f64 = rng.gen();
    let scale = u.powf(1.0 / d as f64) / norm;
    z.into_iter().map(|x| scale * x).collect()
}

pub const DIRECTION_ATTEMPT_BUDGET: usize = 1000;

/// Find d unit-ball samples R_j whose images `V₁ᵀ(R_j R_jᵀ − I)` are linearly
/// independent (|det| > 1e-8), retrying within a bounded attempt budget.
pub fn independent_directions(
    d: usize,
    v1: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, TheoryError> {
    assert_eq!(v1.len(), d);
    if l2_norm(v1) == 0.0 {
        return Err(TheoryError::ZeroDirection);
    }
    for _ in 0..DIRECTION_ATTEMPT_BUDGET {
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let r = unit_ball_sample(d, rng);
                let vr = dot(v1, &r);
                (0..d).map(|k| vr * r[k] - v1[k]).collect()
            })
            .collect();
        let det = Mat::from_rows(&rows).det();
        if det.abs() > 1e-8 {
            return Ok(rows);
        }
    }
    Err(TheoryError::SearchFailure(DIRECTION_ATTEMPT_BUDGET))
}

/// Orthonormalize a random Gaussian matrix (Gram–Schmidt).
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let mut ok = true;
        for i in 0..d {
            for j in 0..i {
                let proj = dot(&rows[i], &rows[j]);
                let prev = rows[j].clone();
                for (x, p) in rows[i].iter_mut().zip(&prev) {
                    *x -= proj * p;
                }
            }
            let norm = l2_norm(&rows[i]);
            if norm < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            return Mat::from_rows(&rows);
        }
    }
}

// ---------------------------------------------------------------------------
// Aggregate verification report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub r_pi: f64,
    pub norm_samples: usize,
    pub isotropy_samples: usize,
    pub c_samples: usize,
    pub delta_samples: usize,
    pub seed: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            d: 3,
            horizon: 25,
            r_pi: 1.0,
            norm_samples: 1_000_000,
            isotropy_samples: 1_000_000,
            c_samples: 100_000,
            delta_samples: 100_000,
            seed: 0,
        }
    }
}

/// JSON verification report: estimates, standard errors, the competing
/// predictions, and verdict booleans.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: TheoryConfig,
    pub norm_formula: f64,
    pub norm_estimate: McEstimate,
    pub norm_within_one_percent: bool,
    pub isotropy: IsotropyEstimate,
    pub isotropy_offdiag_below_one_percent: bool,
    pub fitted_c: Mat,
    pub fitted_c_scalar: f64,
    pub fitted_c_offdiag_fraction: f64,
    pub c_identity_proportional: bool,
    pub c_prediction_penultimate: f64,
    pub c_prediction_final_display: f64,
    pub c_matches_penultimate: bool,
    pub c_matches_final_display: bool,
    pub delta: DeltaReport,
    pub delta_matches_minus_ab: bool,
}

pub fn verify_all(config: &TheoryConfig) -> Result<TheoryReport, TheoryError> {
    let TheoryConfig { d, horizon: t, r_pi, .. } = *config;
    let norm_formula = expected_norm_formula(d, t);
    let norm_estimate = mc_expected_norm(d, t, config.norm_samples, crate::rng::mix(config.seed, 1))?;
    let isotropy = mc_isotropy(d, t, config.isotropy_samples, crate::rng::mix(config.seed, 2))?;
    let fitted_c = empirical_optimal_c(d, t, r_pi, config.c_samples, crate::rng::mix(config.seed, 3))?;
    let delta = delta_condition_check(d, t.min(5), config.delta_samples, crate::rng::mix(config.seed, 4))?;

    let fitted_c_scalar = fitted_c.diag_mean();
    let fitted_c_offdiag_fraction = offdiag_mass_fraction(&fitted_c);
    let c_pen = optimal_c_penultimate(d, t, r_pi);
    let c_fin = optimal_c_final_display(d, t, r_pi);
    let diag_mean = isotropy.matrix.diag_mean();
    Ok(TheoryReport {
        config: config.clone(),
        norm_formula,
        norm_within_one_percent: (norm_estimate.value - norm_formula).abs()
            < 0.01 * norm_formula,
        norm_estimate,
        isotropy_offdiag_below_one_percent: isotropy.max_offdiag < 0.01 * diag_mean,
        isotropy,
        fitted_c,
        fitted_c_scalar,
        fitted_c_offdiag_fraction,
        c_identity_proportional: fitted_c_offdiag_fraction < 0.02,
        c_prediction_penultimate: c_pen,
        c_prediction_final_display: c_fin,
        c_matches_penultimate: (fitted_c_scalar - c_pen).abs() < 0.02 * c_pen.abs(),
        c_matches_final_display: (fitted_c_scalar - c_fin).abs() < 0.02 * c_fin.abs(),
        delta_matches_minus_ab: delta.relative_error < 0.02,
        delta,
    })
}
