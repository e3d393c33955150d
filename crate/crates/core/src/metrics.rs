//! Regret computation, sublinearity regression, exploration metrics, and a
//! one-sided distribution comparison.
//!
//! Regret notions per environment:
//! - FOL: against the best fixed policy, evaluated on each prefix by default
//!   (the curve is then nonnegative at every round).
//! - MAB: against the best arm of the stationary mean vector, either in
//!   expectation over the policy or on realized pulls.
//! - NS-MAB: dynamic regret against the per-round best arm.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::env::{EnvKind, PolicySpace};
use crate::linalg::{dot, l2_norm};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("sequence lengths do not match: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("log-log fit needs at least 3 rounds with positive regret, found {0}")]
    InsufficientData(usize),
    #[error("samples must be nonempty")]
    EmptySample,
}

/// Which benchmark a regret curve is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// Best fixed policy of each prefix (regret-over-time plots).
    BestFixedPrefix,
    /// Best fixed policy of the full horizon, evaluated on each prefix.
    BestFixedFinal,
    /// Best arm of the stationary mean vector.
    BestArm,
    /// Per-round best arm (dynamic regret).
    BestArmPerRound,
}

/// Cumulative regret at each round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub values: Vec<f64>,
    pub env_kind: EnvKind,
    pub comparator: Comparator,
}

impl RegretCurve {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("curves have at least one round")
    }
}

/// Best fixed-policy payoff for a cumulative reward vector `s`.
fn best_fixed_payoff(space: &PolicySpace, s: &[f64]) -> f64 {
    match space {
        PolicySpace::Simplex => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PolicySpace::L2Ball { radius } => radius * l2_norm(s),
    }
}

/// FOL regret for a realized reward stream and the algorithm's policies.
pub fn fol_regret(
    rewards: &[Vec<f64>],
    policies: &[Vec<f64>],
    space: &PolicySpace,
    comparator: Comparator,
) -> Result<RegretCurve, MetricsError> {
    if rewards.len() != policies.len() {
        return Err(MetricsError::LengthMismatch(rewards.len(), policies.len()));
    }
    debug_assert!(matches!(comparator, Comparator::BestFixedPrefix | Comparator::BestFixedFinal));
    let t_max = rewards.len();
    let d = rewards.first().map_or(0, Vec::len);
    let mut cum_alg = 0.0;
    let mut s = vec![0.0; d];
    let mut values = Vec::with_capacity(t_max);
    match comparator {
        Comparator::BestFixedPrefix => {
            for (r, pi) in rewards.iter().zip(policies) {
                cum_alg += dot(pi, r);
                for (si, ri) in s.iter_mut().zip(r) {
                    *si += ri;
                }
                values.push(best_fixed_payoff(space, &s) - cum_alg);
            }
        }
        _ => {
            // Fix the comparator at the horizon, then replay the prefixes.
            let mut s_final = vec![0.0; d];
            for r in rewards {
                for (si, ri) in s_final.iter_mut().zip(r) {
                    *si += ri;
                }
            }
            let pi_star = match space {
                PolicySpace::Simplex => {
                    let mut v = vec![0.0; d];
                    v[crate::linalg::argmax(&s_final)] = 1.0;
                    v
                }
                PolicySpace::L2Ball { radius } => {
                    let n = l2_norm(&s_final);
                    if n == 0.0 {
                        vec![0.0; d]
                    } else {
                        s_final.iter().map(|x| radius * x / n).collect()
                    }
                }
            };
            for (r, pi) in rewards.iter().zip(policies) {
                cum_alg += dot(pi, r);
                for (si, ri) in s.iter_mut().zip(r) {
                    *si += ri;
                }
                values.push(dot(&pi_star, &s) - cum_alg);
            }
        }
    }
    Ok(RegretCurve { values, env_kind: EnvKind::Fol, comparator })
}

/// Expected MAB regret: `t·max_a r(a) − Σ_{τ≤t} ⟨π_τ, r⟩`.
pub fn mab_expected_regret(means: &[f64], policies: &[Vec<f64>]) -> RegretCurve {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = 0.0;
    let values = policies
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            cum += dot(pi, means);
            (i + 1) as f64 * best - cum
        })
        .collect();
    RegretCurve { values, env_kind: EnvKind::Mab, comparator: Comparator::BestArm }
}

/// Realized MAB regret: `t·max_a r(a) − Σ_{τ≤t} R_τ(a_τ)`.
pub fn mab_realized_regret(
    means: &[f64],
    actions: &[usize],
    realized: &[f64],
) -> Result<RegretCurve, MetricsError> {
    if actions.len() != realized.len() {
        return Err(MetricsError::LengthMismatch(actions.len(), realized.len()));
    }
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = 0.0;
    let values = realized
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cum += r;
            (i + 1) as f64 * best - cum
        })
        .collect();
    Ok(RegretCurve { values, env_kind: EnvKind::Mab, comparator: Comparator::BestArm })
}

/// Dynamic regret against the per-round best arm.
pub fn dynamic_regret(
    mean_sequence: &[Vec<f64>],
    policies: &[Vec<f64>],
) -> Result<RegretCurve, MetricsError> {
    if mean_sequence.len() != policies.len() {
        return Err(MetricsError::LengthMismatch(mean_sequence.len(), policies.len()));
    }
    let mut cum_best = 0.0;
    let mut cum_alg = 0.0;
    let values = mean_sequence
        .iter()
        .zip(policies)
        .map(|(r, pi)| {
            cum_best += r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            cum_alg += dot(pi, r);
            cum_best - cum_alg
        })
        .collect();
    Ok(RegretCurve { values, env_kind: EnvKind::NsMab, comparator: Comparator::BestArmPerRound })
}

/// Result of regressing `log Regret(t)` on `log t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Fitted exponent β̂ (slope on the log-log scale).
    pub beta_hat: f64,
    /// Fitted intercept α̂.
    pub alpha_hat: f64,
    /// Two-sided p-value of the slope under the classical t-test.
    pub p_reg: f64,
    /// Rounds with positive regret that entered the fit.
    pub points_used: usize,
}

/// Threshold below which regret values are dropped before the log-log fit.
pub const POSITIVE_REGRET_EPS: f64 = 1e-6;

/// Ordinary least squares of `log Regret(t)` on `log t`, dropping rounds with
/// nonpositive regret.
pub fn fit_regret_growth(curve: &RegretCurve) -> Result<GrowthFit, MetricsError> {
    let points: Vec<(f64, f64)> = curve
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > POSITIVE_REGRET_EPS)
        .map(|(i, v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(MetricsError::InsufficientData(n));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let beta = sxy / sxx;
    let alpha = mean_y - beta * mean_x;
    let rss: f64 = points.iter().map(|p| (p.1 - alpha - beta * p.0).powi(2)).sum();
    let p_reg = if rss <= 1e-24 {
        // Perfect power law: the slope estimate has zero standard error.
        if beta.abs() > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t_stat = beta / se;
        let dist = StudentsT::new(0.0, 1.0, nf - 2.0).expect("valid dof");
        (2.0 * (1.0 - dist.cdf(t_stat.abs()))).clamp(0.0, 1.0)
    };
    Ok(GrowthFit { beta_hat: beta, alpha_hat: alpha, p_reg, points_used: n })
}

/// Fraction of replicates that never select the best arm from round `t`
/// (1-based) through the horizon.
pub fn suff_fail_freq(
    replicate_actions: &[Vec<usize>],
    best_arm_per_round: &[usize],
    t: usize,
) -> f64 {
    let horizon = best_arm_per_round.len();
    debug_assert!(t >= 1 && t <= horizon);
    let failures = replicate_actions
        .iter()
        .filter(|actions| {
            (t..=horizon).all(|round| actions[round - 1] != best_arm_per_round[round - 1])
        })
        .count();
    failures as f64 / replicate_actions.len() as f64
}

/// Mean over replicates of the least-pulled arm's selection fraction up to
/// round `t`, scaled by `d` so the uniform policy maps to 1.
pub fn min_frac(replicate_actions: &[Vec<usize>], t: usize, d: usize) -> f64 {
    debug_assert!(t >= 1);
    let mut total = 0.0;
    for actions in replicate_actions {
        let mut counts = vec![0usize; d];
        for &a in &actions[..t] {
            counts[a] += 1;
        }
        let min = counts.iter().copied().min().unwrap_or(0);
        total += min as f64 / t as f64;
    }
    d as f64 * total / replicate_actions.len() as f64
}

/// The exploration metrics over every round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub suff_fail_freq: Vec<f64>,
    /// Already multiplied by d.
    pub min_frac_scaled: Vec<f64>,
}

pub fn exploration_report(
    replicate_actions: &[Vec<usize>],
    best_arm_per_round: &[usize],
    d: usize,
) -> ExplorationReport {
    let horizon = best_arm_per_round.len();
    ExplorationReport {
        suff_fail_freq: (1..=horizon)
            .map(|t| suff_fail_freq(replicate_actions, best_arm_per_round, t))
            .collect(),
        min_frac_scaled: (1..=horizon).map(|t| min_frac(replicate_actions, t, d)).collect(),
    }
}

/// One-sided two-sample Kolmogorov–Smirnov test that `sample_a` is
/// stochastically smaller than `sample_b`.
///
/// The statistic is `D⁺ = sup_x (F_a(x) − F_b(x))`; small samples entirely
/// below the comparison set give D⁺ = 1. The p-value is the asymptotic bound
/// `exp(−2 D² mn/(m+n))`, clamped to `[0, 1]`.
pub fn ks_one_sided(sample_a: &[f64], sample_b: &[f64]) -> Result<(f64, f64), MetricsError> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite regrets"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite regrets"));
    let m = a.len() as f64;
    let n = b.len() as f64;
    let ecdf = |sorted: &[f64], x: f64| {
        sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
    };
    let mut d_plus: f64 = 0.0;
    for x in a.iter().chain(b.iter()) {
        d_plus = d_plus.max(ecdf(&a, *x) - ecdf(&b, *x));
    }
    let p = (-2.0 * d_plus * d_plus * m * n / (m + n)).exp().clamp(0.0, 1.0);
    Ok((d_plus, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::PolicySpace;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn simplex_curve(rewards: &[Vec<f64>], policies: &[Vec<f64>]) -> RegretCurve {
        fol_regret(rewards, policies, &PolicySpace::Simplex, Comparator::BestFixedPrefix).unwrap()
    }

    #[test]
    fn fol_regret_two_round_example() {
        let rewards = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let policies = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let curve = simplex_curve(&rewards, &policies);
        assert_relative_eq!(curve.values[0], 0.5);
        assert_relative_eq!(curve.values[1], 0.0);
    }

    #[test]
    fn fol_regret_single_round() {
        let curve = simplex_curve(&[vec![3.0, 1.0]], &[vec![0.0, 1.0]]);
        assert_relative_eq!(curve.values[0], 2.0);
    }

    #[test]
    fn fol_regret_zero_when_playing_the_dominant_vertex() {
        // Arm 0 dominates every prefix, and the algorithm plays it throughout.
        let rewards = vec![vec![5.0, 1.0], vec![4.0, 2.0], vec![6.0, 0.0]];
        let policies = vec![vec![1.0, 0.0]; 3];
        let curve = simplex_curve(&rewards, &policies);
        for v in curve.values {
            assert_relative_eq!(v, 0.0);
        }
    }

    #[test]
    fn fol_regret_length_mismatch() {
        assert!(matches!(
            fol_regret(
                &[vec![1.0, 0.0]],
                &[],
                &PolicySpace::Simplex,
                Comparator::BestFixedPrefix
            ),
            Err(MetricsError::LengthMismatch(1, 0))
        ));
    }

    #[test]
    fn prefix_comparator_dominates_and_agrees_at_horizon() {
        let mut rng = crate::rng::stream_rng(3, 0);
        for _ in 0..20 {
            let t = 8;
            let rewards: Vec<Vec<f64>> =
                (0..t).map(|_| (0..3).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
            let policies: Vec<Vec<f64>> = (0..t)
                .map(|_| {
                    let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / s).collect()
                })
                .collect();
            for space in [PolicySpace::Simplex, PolicySpace::L2Ball { radius: 1.0 }] {
                let prefix =
                    fol_regret(&rewards, &policies, &space, Comparator::BestFixedPrefix).unwrap();
                let fin =
                    fol_regret(&rewards, &policies, &space, Comparator::BestFixedFinal).unwrap();
                for (p, f) in prefix.values.iter().zip(&fin.values) {
                    assert!(*p >= *f - 1e-9);
                }
                assert_relative_eq!(
                    prefix.values[t - 1],
                    fin.values[t - 1],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn fol_simplex_comparator_matches_grid_brute_force() {
        // Exhaustive maximization over a dense simplex grid can never beat the
        // best vertex by more than the grid resolution; for linear payoffs the
        // optimum is a vertex, itself a grid point.
        let mut rng = crate::rng::stream_rng(11, 0);
        for _ in 0..10 {
            let t = 4;
            let d = 3;
            let rewards: Vec<Vec<f64>> =
                (0..t).map(|_| (0..d).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
            let mut s = vec![0.0; d];
            for r in &rewards {
                for (si, ri) in s.iter_mut().zip(r) {
                    *si += ri;
                }
            }
            let vertex_best = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let grid_best = simplex_grid_max(&s, 140);
            assert!((vertex_best - grid_best).abs() < 1e-3);
        }
    }

    /// Brute-force oracle: maximize ⟨π, s⟩ over the resolution-m simplex grid.
    fn simplex_grid_max(s: &[f64], m: usize) -> f64 {
        assert_eq!(s.len(), 3);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=m {
            for j in 0..=(m - i) {
                let k = m - i - j;
                let val = (i as f64 * s[0] + j as f64 * s[1] + k as f64 * s[2]) / m as f64;
                best = best.max(val);
            }
        }
        best
    }

    #[test]
    fn mab_expected_regret_examples() {
        let zero = mab_expected_regret(&[1.0, 0.0, 0.0], &vec![vec![1.0, 0.0, 0.0]; 5]);
        assert!(zero.values.iter().all(|v| v.abs() < 1e-12));

        let uniform = mab_expected_regret(&[1.0, 0.0], &vec![vec![0.5, 0.5]; 4]);
        assert_relative_eq!(uniform.values[3], 2.0);

        let mut rng = crate::rng::stream_rng(5, 0);
        let policies: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let curve = mab_expected_regret(&[3.0, 1.0, 2.0], &policies);
        for w in curve.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "expected regret must be nondecreasing");
        }
    }

    #[test]
    fn mab_realized_regret_examples() {
        let curve = mab_realized_regret(&[5.0, 0.0], &[1, 1], &[0.0, 0.0]).unwrap();
        assert_eq!(curve.values, vec![5.0, 10.0]);

        let optimal = mab_realized_regret(&[5.0, 0.0], &[0, 0], &[5.0, 5.0]).unwrap();
        assert!(optimal.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn realized_regret_expectation_matches_expected_regret() {
        // Resample Bernoulli rewards and actions at fixed policies; the mean
        // realized regret must approach the expected regret. Bernoulli means
        // are exact (no clipping), so the two notions coincide.
        let means = [6.0 * 0.7 + 2.0 * 0.3, 6.0 * 0.4 + 2.0 * 0.6, 6.0 * 0.5 + 2.0 * 0.5];
        let p = [0.7, 0.4, 0.5];
        let t = 10;
        let mut rng = crate::rng::stream_rng(21, 0);
        let policies: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let expected = mab_expected_regret(&means, &policies).final_value();

        let resamples = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..resamples {
            let mut actions = Vec::with_capacity(t);
            let mut realized = Vec::with_capacity(t);
            for pi in &policies {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut a = 0;
                for (i, w) in pi.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        a = i;
                        break;
                    }
                    a = i;
                }
                let reward = if rng.gen::<f64>() < p[a] { 6.0 } else { 2.0 };
                actions.push(a);
                realized.push(reward);
            }
            let r = mab_realized_regret(&means, &actions, &realized).unwrap().final_value();
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / resamples as f64;
        let var = (sumsq / resamples as f64 - mean * mean).max(0.0);
        let se = (var / resamples as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "mean {mean} vs expected {expected} (se {se})"
        );
    }

    #[test]
    fn dynamic_regret_examples() {
        let means = vec![vec![3.0, 1.0], vec![3.0, 1.0], vec![3.0, 1.0]];
        let policies = vec![vec![0.5, 0.5]; 3];
        let dyn_curve = dynamic_regret(&means, &policies).unwrap();
        let stat_curve = mab_expected_regret(&means[0], &policies);
        for (a, b) in dyn_curve.values.iter().zip(&stat_curve.values) {
            assert_relative_eq!(a, b);
        }

        let alternating: Vec<Vec<f64>> = (0..10)
            .map(|t| if t % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let fixed = vec![vec![1.0, 0.0]; 10];
        let curve = dynamic_regret(&alternating, &fixed).unwrap();
        for (i, v) in curve.values.iter().enumerate() {
            let t = i + 1;
            assert_relative_eq!(*v, (t / 2) as f64);
        }

        let oracle: Vec<Vec<f64>> = alternating
            .iter()
            .map(|r| {
                let mut pi = vec![0.0; 2];
                pi[crate::linalg::argmax(r)] = 1.0;
                pi
            })
            .collect();
        let zero = dynamic_regret(&alternating, &oracle).unwrap();
        assert!(zero.values.iter().all(|v| v.abs() < 1e-12));
    }

    fn curve_from(values: Vec<f64>) -> RegretCurve {
        RegretCurve { values, env_kind: EnvKind::Fol, comparator: Comparator::BestFixedPrefix }
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let linear = curve_from((1..=50).map(|t| t as f64).collect());
        let fit = fit_regret_growth(&linear).unwrap();
        assert_relative_eq!(fit.beta_hat, 1.0, epsilon = 1e-9);
        assert_eq!(fit.p_reg, 0.0);
        assert_eq!(fit.points_used, 50);

        let sqrt = curve_from((1..=50).map(|t| (t as f64).sqrt()).collect());
        let fit = fit_regret_growth(&sqrt).unwrap();
        assert_relative_eq!(fit.beta_hat, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn fit_requires_three_positive_points() {
        // Nonpositive rounds are dropped first; three positives remain here.
        let curve = curve_from(vec![0.0, 0.0, 1.0, 2.0, 3.0]);
        let fit = fit_regret_growth(&curve).unwrap();
        assert_eq!(fit.points_used, 3);
        let too_flat = curve_from(vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(
            fit_regret_growth(&too_flat),
            Err(MetricsError::InsufficientData(2))
        ));
    }

    #[test]
    fn suff_fail_freq_counting() {
        let best = vec![0; 4];
        let always = vec![vec![0, 0, 0, 0]; 3];
        for t in 1..=4 {
            assert_relative_eq!(suff_fail_freq(&always, &best, t), 0.0);
        }
        let never = vec![vec![1, 1, 1, 1]; 3];
        for t in 1..=4 {
            assert_relative_eq!(suff_fail_freq(&never, &best, t), 1.0);
        }
        let quarter = vec![vec![0, 0, 0, 0], vec![0, 1, 1, 1], vec![0, 0, 0, 0], vec![0, 0, 0, 0]];
        assert_relative_eq!(suff_fail_freq(&quarter, &best, 2), 0.25);
    }

    #[test]
    fn suff_fail_freq_nondecreasing_in_t() {
        // Shrinking the tail window [t, T] can only make "never plays the
        // best arm" easier to satisfy.
        let mut rng = crate::rng::stream_rng(8, 0);
        let best = vec![1usize; 30];
        let reps: Vec<Vec<usize>> =
            (0..50).map(|_| (0..30).map(|_| rng.gen_range(0..3usize)).collect()).collect();
        let series: Vec<f64> = (1..=30).map(|t| suff_fail_freq(&reps, &best, t)).collect();
        for w in series.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn min_frac_counting() {
        let round_robin = vec![vec![0, 1, 2, 0, 1, 2]];
        assert_relative_eq!(min_frac(&round_robin, 6, 3), 1.0);
        let starved = vec![vec![0, 0, 0, 0]];
        assert_relative_eq!(min_frac(&starved, 4, 2), 0.0);
        let uneven = vec![vec![0, 0, 1]];
        assert_relative_eq!(min_frac(&uneven, 3, 2), 2.0 / 3.0);
    }

    #[test]
    fn ks_one_sided_examples() {
        let (d, p) = ks_one_sided(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(d, 0.0);
        assert_relative_eq!(p, 1.0);

        let (d, _) = ks_one_sided(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_relative_eq!(d, 1.0);
        // p from the asymptotic bound exp(−2·D²·mn/(m+n)) with m = n = 2.
        let (_, p) = ks_one_sided(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_relative_eq!(p, (-2.0f64).exp(), epsilon = 1e-12);

        assert!(ks_one_sided(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_statistic_matches_exhaustive_ecdf_oracle() {
        let mut rng = crate::rng::stream_rng(13, 0);
        for _ in 0..50 {
            let a: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..5.0)).collect();
            let b: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..5.0)).collect();
            let (d, _) = ks_one_sided(&a, &b).unwrap();
            // Oracle: evaluate both ECDFs on a fine sweep of evaluation points.
            let mut oracle: f64 = 0.0;
            let mut grid: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            grid.extend((0..500).map(|i| i as f64 * 0.01));
            for x in grid {
                let fa = a.iter().filter(|v| **v <= x).count() as f64 / a.len() as f64;
                let fb = b.iter().filter(|v| **v <= x).count() as f64 / b.len() as f64;
                oracle = oracle.max(fa - fb);
            }
            assert_relative_eq!(d, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn ks_exact_enumeration_oracle_small_samples() {
        // Under H0 every interleaving of the pooled sample is equally likely;
        // enumerate all (m+n choose m) assignments and compare the exact tail
        // probability with the asymptotic bound. The bound is approximate, so
        // only sanity relations are asserted.
        let a = [1.0, 2.0, 5.0];
        let b = [3.0, 4.0, 6.0, 7.0];
        let (d_obs, p_asym) = ks_one_sided(&a, &b).unwrap();
        let m = a.len();
        let n = b.len();
        let total = m + n;
        let mut exact_count = 0usize;
        let mut arrangements = 0usize;
        // Iterate over bitmasks choosing which pooled ranks belong to sample a.
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != m {
                continue;
            }
            arrangements += 1;
            // Pooled values are distinct; ranks are the sorted positions.
            let mut d_plus: f64 = 0.0;
            let mut ca = 0.0;
            let mut cb = 0.0;
            for rank in 0..total {
                if mask & (1 << rank) != 0 {
                    ca += 1.0 / m as f64;
                } else {
                    cb += 1.0 / n as f64;
                }
                d_plus = d_plus.max(ca - cb);
            }
            if d_plus >= d_obs - 1e-12 {
                exact_count += 1;
            }
        }
        let p_exact = exact_count as f64 / arrangements as f64;
        assert!(p_exact > 0.0 && p_exact <= 1.0);
        assert!(p_asym > 0.0 && p_asym <= 1.0);
        // The asymptotic bound should be within an order of magnitude here.
        assert!(p_asym < 10.0 * p_exact && p_exact < 10.0 * p_asym.max(1e-3));
    }

    proptest! {
        #[test]
        fn scaling_a_curve_only_shifts_the_intercept(c in 0.05f64..20.0) {
            let base: Vec<f64> = (1..=40).map(|t| (t as f64).powf(0.7) * 2.5).collect();
            let fit0 = fit_regret_growth(&curve_from(base.clone())).unwrap();
            let fit1 = fit_regret_growth(&curve_from(base.iter().map(|v| c * v).collect())).unwrap();
            prop_assert!((fit0.beta_hat - fit1.beta_hat).abs() < 1e-9);
            prop_assert!((fit0.p_reg - fit1.p_reg).abs() < 1e-9);
            prop_assert!(((fit1.alpha_hat - fit0.alpha_hat) - c.ln()).abs() < 1e-9);
            prop_assert_eq!(fit0.points_used, fit1.points_used);
        }
    }
}
