use regret_lab::attn::{ModelParams, OperatorKind};
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind};
use regret_lab::metrics::fit_regret_growth;
use regret_lab::runner::{run_replicated, AgentSpec, ScenarioTemplate};

// Hand-built exact FTRL-form model: score = c * S (V = (c/s)I, b = 0 path).
fn pure_model(c: f64) -> ModelParams {
    let d = 3;
    let s = 1.0;
    let mut p = ModelParams::zeros(d);
    for i in 0..d {
        p.value_mut()[i * d + i] = c / s;
        p.query_bias_mut()[i] = 1.0;
    }
    p.key_bias_mut()[0] = s;
    p
}

fn main() {
    println!("c      | gauss   unif    bern    sine    alt     noisy   adapt  (beta, worst-p)");
    for c in [0.0, 0.002, 0.004, 0.006, 0.008, 0.010, 0.012, 0.016, 0.05, 0.15] {
        let spec = AgentSpec::Model { params: pure_model(c), operator: OperatorKind::Softmax };
        let mut line = format!("{c:.3}  |");
        let mut worst_p: f64 = 0.0;
        let mut betas = Vec::new();
        for kind in [ProcessKind::Gaussian, ProcessKind::Uniform, ProcessKind::Bernoulli,
                     ProcessKind::SineTrend, ProcessKind::Alternating, ProcessKind::NoisyAlternating,
                     ProcessKind::Adaptive] {
            let tpl = ScenarioTemplate { env_kind: EnvKind::Fol, d: 3, horizon: 100,
                policy_space: PolicySpace::Simplex, process_kind: kind };
            let out = run_replicated(&tpl, &spec, 100, 31).unwrap();
            let fit = fit_regret_growth(&out.mean_curve).unwrap();
            line += &format!(" {:+.2}", fit.beta_hat);
            worst_p = worst_p.max(fit.p_reg);
            betas.push(fit.beta_hat);
        }
        let pass = betas.iter().all(|b| *b < 1.0) && worst_p < 0.05 && betas[4] < 0.5;
        println!("{line}  p_max {:.1e} {}", worst_p, if pass { "PASS" } else { "FAIL" });
    }
}
