use regret_lab::attn::OperatorKind;
use regret_lab::baselines::AlgorithmId;
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind};
use regret_lab::metrics::fit_regret_growth;
use regret_lab::runner::{run_replicated, AgentSpec, ScenarioTemplate};
use regret_lab::trainer::{train, PerturbationPoint, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args[1].parse().unwrap();
    let seed: u64 = args[2].parse().unwrap();
    let pert = if args.get(3).map(|s| s == "score").unwrap_or(false) {
        PerturbationPoint::Score } else { PerturbationPoint::Policy };
    let t0 = Instant::now();
    let config = TrainConfig {
        epochs,
        perturbation: pert,
        tail_average: 300,
        ..TrainConfig::default_mab()
    };
    let (params, _log) = train(&config, seed, None).unwrap();
    println!("== MAB ep {epochs} seed {seed} {pert:?} ({:?}) ==", t0.elapsed());
    let rp = params.reparam();
    println!("c_eff {:.4} ab {:.4} cdev {:.4}", rp.c.diag_mean(),
        params.diagnostics(config.operator).a_b_norm, rp.c.deviation_from_scaled_identity());

    let tpl = ScenarioTemplate { env_kind: EnvKind::Mab, d: 3, horizon: 100,
        policy_space: PolicySpace::Simplex, process_kind: ProcessKind::Gaussian };
    let model = AgentSpec::Model { params: params.clone(), operator: OperatorKind::Softmax };
    let out = run_replicated(&tpl, &model, 100, 57).unwrap();
    let expl = out.exploration.as_ref().unwrap();
    let mf = &expl.min_frac_scaled;
    let max_mid = mf[4..50].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("minfrac(1) {:.3} max[5,50] {:.3} minfrac(100) {:.3} riseFall {}",
        mf[0], max_mid, mf[99], max_mid > mf[0] && max_mid > mf[99]);
    let sff_model = expl.suff_fail_freq[89];
    let fit = fit_regret_growth(&out.mean_curve).unwrap();
    println!("model: beta {:.3} p {:.1e} final {:.1} sff(0.9T) {:.3}",
        fit.beta_hat, fit.p_reg, out.mean_curve.final_value(), sff_model);

    for (name, algo) in [("greedy", AlgorithmId::Greedy), ("ucb", AlgorithmId::Ucb { scale: 1.0 }),
                         ("exp3", AlgorithmId::Exp3)] {
        let out_b = run_replicated(&tpl, &AgentSpec::Baseline(algo), 100, 57).unwrap();
        let e = out_b.exploration.as_ref().unwrap();
        let fit_b = fit_regret_growth(&out_b.mean_curve).unwrap();
        println!("{name}: beta {:.3} final {:.1} sff(0.9T) {:.3} minfrac100 {:.3}",
            fit_b.beta_hat, out_b.mean_curve.final_value(), e.suff_fail_freq[89], e.min_frac_scaled[99]);
    }
}
