use regret_lab::attn::{ftrl_equivalence_gap, OperatorKind};
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind};
use regret_lab::metrics::fit_regret_growth;
use regret_lab::runner::{process_probe_histories, run_replicated, AgentSpec, ScenarioTemplate};
use regret_lab::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let init_sd: f64 = args[1].parse().unwrap();
    let epochs: usize = args[2].parse().unwrap();
    let tail: usize = args[3].parse().unwrap();
    let seed: u64 = args[4].parse().unwrap();
    let policy_noise = args.get(5).map(|s| s == "policy").unwrap_or(false);
    let perturbation = if policy_noise {
        regret_lab::trainer::PerturbationPoint::Policy
    } else {
        regret_lab::trainer::PerturbationPoint::Score
    };
    let config = TrainConfig { init_sd, epochs, tail_average: tail, perturbation, ..TrainConfig::default() };
    let (params, _log) = train(&config, seed, None).unwrap();

    let fresh = regret_lab::attn::ModelParams::random_init(
        config.d, config.init_sd, &mut regret_lab::rng::stream_rng(seed, 1));
    let d0 = fresh.diagnostics(config.operator).as_array();
    let dt = params.diagnostics(config.operator).as_array();
    let drops = [dt[0]/d0[0], dt[1]/d0[1], dt[2]/d0[2]];
    let rp = params.reparam();
    let probes = process_probe_histories(ProcessKind::Gaussian, 3, 100, 24, 777);
    let gap = ftrl_equivalence_gap(&params, OperatorKind::Softmax, &probes);
    let spec = AgentSpec::Model { params: params.clone(), operator: OperatorKind::Softmax };
    let mut betas = Vec::new();
    let mut max_p: f64 = 0.0;
    for kind in [ProcessKind::Gaussian, ProcessKind::Uniform, ProcessKind::Bernoulli,
                 ProcessKind::SineTrend, ProcessKind::Alternating, ProcessKind::NoisyAlternating,
                 ProcessKind::Adaptive] {
        let tpl = ScenarioTemplate { env_kind: EnvKind::Fol, d: 3, horizon: 100,
            policy_space: PolicySpace::Simplex, process_kind: kind };
        let out = run_replicated(&tpl, &spec, 100, 31).unwrap();
        let fit = fit_regret_growth(&out.mean_curve).unwrap();
        betas.push(fit.beta_hat);
        max_p = max_p.max(fit.p_reg);
    }
    let pass_drop = drops.iter().all(|d| *d <= 0.1);
    let pass_gap = gap < 0.05;
    let pass_alt = betas[4] < 0.5;
    let pass_all_sub = betas.iter().all(|b| *b < 1.0) && max_p < 0.05;
    println!("sd {init_sd} ep {epochs} tail {tail} seed {seed} | c {:+.4} ab {:.4} cdev {:.4} ddev {:.4} | drops [{:.3} {:.3} {:.3}] {} | gap {:.3} {} | alt {:.2} {} | adapt {:.2} | betas {:?} all<1:{} maxp {:.1e}",
        rp.c.diag_mean(), dt[0], dt[1], dt[2],
        drops[0], drops[1], drops[2], ok(pass_drop), gap, ok(pass_gap),
        betas[4], ok(pass_alt), betas[6],
        betas.iter().map(|b| (b * 100.0).round() / 100.0).collect::<Vec<f64>>(),
        ok(pass_all_sub), max_p);
}
fn ok(b: bool) -> &'static str { if b { "PASS" } else { "FAIL" } }
