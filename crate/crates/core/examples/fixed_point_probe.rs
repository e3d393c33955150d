use rand_distr::{Distribution, StandardNormal};
use regret_lab::attn::softmax;
use regret_lab::env::{EnvKind, PolicySpace, ProcessKind, Scenario};
use regret_lab::linalg::dot;

// For a model score(h) = c * S(h), simulate one Algorithm-2-style iteration:
// L perturbed rollouts per scenario, select max cumulative reward, and return
// the best-fitting c' for the selected policies. Where c' = c is the training
// fixed point.
fn fitted_c(c: f64, sigma: f64, l: usize, t_max: usize, scenarios: usize, seed: u64) -> f64 {
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (S_{t-1}, target policy)
    for i in 0..scenarios {
        let scenario = Scenario::sample(
            EnvKind::Fol, 3, PolicySpace::Simplex, t_max, ProcessKind::Gaussian,
            regret_lab::rng::mix(seed, i as u64)).unwrap();
        let prepared = scenario.prepare();
        let rewards = prepared.rewards.as_ref().unwrap();
        let mut prefix_sums = vec![vec![0.0; 3]];
        for r in rewards {
            let mut s = prefix_sums.last().unwrap().clone();
            for (si, ri) in s.iter_mut().zip(r) { *si += ri; }
            prefix_sums.push(s);
        }
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for l_idx in 0..l {
            let mut rng = regret_lab::rng::stream_rng(
                regret_lab::rng::mix(seed, i as u64), 100 + l_idx as u64);
            let mut cum = 0.0;
            let mut policies = Vec::new();
            for t in 1..=t_max {
                let mut score: Vec<f64> = prefix_sums[t - 1].iter().map(|s| c * s).collect();
                for s in score.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *s += sigma * z;
                }
                let pi = softmax(&score);
                cum += dot(&pi, &rewards[t - 1]);
                policies.push(pi);
            }
            if best.as_ref().map_or(true, |(b, _)| cum > *b) {
                best = Some((cum, policies));
            }
        }
        let (_, policies) = best.unwrap();
        for t in 1..=t_max {
            pairs.push((prefix_sums[t - 1].clone(), policies[t - 1].clone()));
        }
    }
    // Golden-section search for argmin_c' sum ||softmax(c' S) - target||^2.
    let loss = |cp: f64| -> f64 {
        pairs.iter().map(|(s, y)| {
            let p = softmax(&s.iter().map(|x| cp * x).collect::<Vec<f64>>());
            p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }).sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (loss(x1), loss(x2));
    for _ in 0..60 {
        if f1 < f2 { hi = x2; x2 = x1; f2 = f1; x1 = hi - phi * (hi - lo); f1 = loss(x1); }
        else { lo = x1; x1 = x2; f1 = f2; x2 = lo + phi * (hi - lo); f2 = loss(x2); }
    }
    0.5 * (lo + hi)
}

fn main() {
    for c in [0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5] {
        let chat = fitted_c(c, 1.0, 10, 25, 2000, 900);
        println!("c = {c:.3} -> c_hat = {chat:.4}   (ratchet: {})", if chat > c {"UP"} else {"down"});
    }
}
