//! A numerical laboratory for online decision-making.
//!
//! The crate bundles everything needed to study regret minimization with
//! small, fully deterministic experiments:
//!
//! - [`env`] — full-information online learning (FOL), multi-armed bandits
//!   (MAB), and non-stationary bandits (NS-MAB), together with the nine
//!   reward generation processes used for training and evaluation.
//! - [`baselines`] — FTL, FTRL with ℓ2 regularization, Hedge, UCB, EXP3,
//!   Rexp3, Greedy, and a uniform-random reference.
//! - [`metrics`] — regret curves for all three environments, the log-log
//!   growth-rate regression, exploration metrics, and a one-sided
//!   Kolmogorov–Smirnov comparison.
//! - [`attn`] — a single-layer linear-attention decision model with exact
//!   gradients, its reparameterization, and convergence diagnostics.
//! - [`trainer`] — the iterative regret-ranked self-imitation loop:
//!   perturbation rollouts, top-k selection, and mini-batch ℓ2 fitting.
//! - [`theory`] — Monte-Carlo and closed-form verification of the
//!   FTRL-recovery analysis for the ℓ2-ball policy space.
//! - [`runner`] — glue for running agents against scenarios and collecting
//!   replicated regret curves.
//!
//! All randomness flows through seed-derived ChaCha streams ([`rng`]), so
//! every experiment is bitwise reproducible regardless of worker count.

pub mod attn;
pub mod baselines;
pub mod env;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod theory;
pub mod trainer;
