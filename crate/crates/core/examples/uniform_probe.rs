use regret_lab::baselines::AlgorithmId;
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind};
use regret_lab::metrics::fit_regret_growth;
use regret_lab::runner::{run_replicated, AgentSpec, ScenarioTemplate};

fn main() {
    for (label, spec) in [
        ("uniform", AgentSpec::Baseline(AlgorithmId::Uniform)),
        ("ftl", AgentSpec::Baseline(AlgorithmId::Ftl)),
        ("hedge", AgentSpec::Baseline(AlgorithmId::Hedge { stepsize: regret_lab::baselines::Stepsize::Anytime })),
    ] {
        println!("== {label} ==");
        for kind in [ProcessKind::Gaussian, ProcessKind::Uniform, ProcessKind::Bernoulli,
                     ProcessKind::SineTrend, ProcessKind::Alternating, ProcessKind::NoisyAlternating,
                     ProcessKind::Adaptive] {
            let tpl = ScenarioTemplate { env_kind: EnvKind::Fol, d: 3, horizon: 100,
                policy_space: PolicySpace::Simplex, process_kind: kind };
            let out = run_replicated(&tpl, &spec, 100, 31).unwrap();
            let fit = fit_regret_growth(&out.mean_curve).unwrap();
            println!("  {kind:?}: beta {:.3} p {:.1e} final {:.1}", fit.beta_hat, fit.p_reg, out.mean_curve.final_value());
        }
    }
}
