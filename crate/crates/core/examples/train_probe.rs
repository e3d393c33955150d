use regret_lab::attn::{ftrl_equivalence_gap, OperatorKind};
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind};
use regret_lab::metrics::fit_regret_growth;
use regret_lab::runner::{process_probe_histories, run_replicated, AgentSpec, ScenarioTemplate};
use regret_lab::trainer::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let config = TrainConfig::default(); // FOL Env II: d=3 T=25 Gaussian softmax
    let (params, log) = train(&config, 2024, None).unwrap();
    println!("training took {:?}", t0.elapsed());

    let init = &log.entries[0].diagnostics;
    println!("iter 0    diag: {:?}", init.as_array());
    for i in [9, 49, 99, 249, 499, 749, 999] {
        let e = &log.entries[i];
        println!(
            "iter {:4} diag: [{:.5}, {:.5}, {:.5}] loss {:.5} sel_regret {:.3}",
            i + 1,
            e.diagnostics.a_b_norm,
            e.diagnostics.c_dev,
            e.diagnostics.d_dev,
            e.loss,
            e.mean_selected_regret
        );
    }
    // Initialization diagnostics (before any update): recompute from a fresh init.
    let fresh = regret_lab::attn::ModelParams::random_init(
        config.d, config.init_sd, &mut regret_lab::rng::stream_rng(2024, 1));
    let d0 = fresh.diagnostics(config.operator);
    let dt = params.diagnostics(config.operator);
    println!("init diag:  {:?}", d0.as_array());
    println!("final diag: {:?}", dt.as_array());
    println!("drop fractions: {:?}",
        [dt.a_b_norm / d0.a_b_norm, dt.c_dev / d0.c_dev, dt.d_dev / d0.d_dev]);

    let probes = process_probe_histories(ProcessKind::Gaussian, 3, 100, 24, 777);
    let gap = ftrl_equivalence_gap(&params, OperatorKind::Softmax, &probes);
    println!("ftrl gap on gaussian probes: {gap:.5}");

    // Reparam picture
    let rp = params.reparam();
    println!("C = {:?}", rp.c.data);
    println!("b = {:?}, dvec = {:?}", rp.b, rp.dvec);

    // Criterion 5 quick check: eval at T=100 on all seven processes
    let spec = AgentSpec::Model { params: params.clone(), operator: OperatorKind::Softmax };
    for kind in [ProcessKind::Gaussian, ProcessKind::Uniform, ProcessKind::Bernoulli,
                 ProcessKind::SineTrend, ProcessKind::Alternating, ProcessKind::NoisyAlternating,
                 ProcessKind::Adaptive] {
        let tpl = ScenarioTemplate { env_kind: EnvKind::Fol, d: 3, horizon: 100,
            policy_space: PolicySpace::Simplex, process_kind: kind };
        let out = run_replicated(&tpl, &spec, 100, 31).unwrap();
        let fit = fit_regret_growth(&out.mean_curve).unwrap();
        println!("{kind:?}: beta {:.3} p {:.2e} final {:.2}", fit.beta_hat, fit.p_reg, out.mean_curve.final_value());
    }
    println!("total {:?}", t0.elapsed());
}
