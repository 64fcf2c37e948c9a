use dvao_core::rng;
use dvao_core::sim::*;
use dvao_core::{Method, QueryId};
use rand::Rng;

fn accuracy_length() -> ToyEnv {
    ToyEnv::new(ToyKind::AccuracyLength { length_target: 2 }, 5, 0)
}

#[test]
fn uniform_policy_length_distribution() {
    let policy = PolicyTable::new(1, 4, 3).unwrap();
    let env = ToyEnv::new(ToyKind::AccuracyLength { length_target: 2 }, 4, 0);
    let n = 10_000;
    let rollouts = sample_group(&policy, QueryId(0), n, &env, 77).unwrap();
    // Stop with probability 1/4 at each position, forced stop at L = 3.
    let expected = [0.25, 0.75 * 0.25, 0.75 * 0.75];
    let mut counts = [0usize; 3];
    for r in &rollouts {
        counts[r.len() - 1] += 1;
    }
    for (c, p) in counts.iter().zip(expected) {
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let dev = (*c as f64 - n as f64 * p).abs();
        assert!(dev <= 3.0 * sigma, "count {c}, expected {}", n as f64 * p);
    }
}

#[test]
fn stop_heavy_policy_gives_length_one() {
    let mut policy = PolicyTable::new(1, 4, 3).unwrap();
    policy.set_logit(0, 0, STOP, 1e4);
    let rollouts = sample_group(&policy, QueryId(0), 50, &accuracy_length(), 3).unwrap();
    assert!(rollouts.iter().all(|r| r.tokens == [STOP]));
}

#[test]
fn sampling_is_deterministic() {
    let policy = PolicyTable::new(2, 5, 4).unwrap();
    let env = ToyEnv::new(ToyKind::Correlated { noise_scale: 0.3 }, 5, 9);
    let a = sample_group(&policy, QueryId(1), 64, &env, 5).unwrap();
    let b = sample_group(&policy, QueryId(1), 64, &env, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let report = gradient_check_suite(&GradientCheckConfig::default()).unwrap();
    let worst = report.worst.unwrap();
    println!(
        "gradient check: {} cases, {} with clipping, {} redraws, worst rel error {:.3e} (case {})",
        report.cases, report.cases_with_clipping, report.redraws, worst.rel_error, worst.case
    );
    assert!(report.passed);
    assert!(report.cases_with_clipping > 0);
}

fn random_policy(seed: u64, queries: usize, vocab: usize, length: usize) -> PolicyTable {
    let mut p = PolicyTable::new(queries, vocab, length).unwrap();
    let mut r = rng::stream(seed, 0);
    for z in p.logits_mut() {
        *z = r.gen_range(-1.5..1.5);
    }
    p
}

#[test]
fn exact_expectation_matches_monte_carlo() {
    let policy = random_policy(31, 3, 5, 4);
    let n = 20_000;
    for env in [
        accuracy_length(),
        ToyEnv::new(ToyKind::Correlated { noise_scale: 0.4 }, 5, 17),
    ] {
        for q in 0..3 {
            let exact = expected_rewards(&policy, QueryId(q), &env).unwrap();
            let rollouts = sample_group(&policy, QueryId(q), n, &env, 1000 + q).unwrap();
            for (k, &p) in exact.iter().enumerate() {
                let values: Vec<f64> = rollouts.iter().map(|r| r.rewards[k]).collect();
                let mean = values.iter().sum::<f64>() / n as f64;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                // Rewards lie in [0, 1], so p(1 - p) bounds the variance of the binary ones.
                let sigma = (var.max(p * (1.0 - p)) / n as f64).sqrt();
                assert!(
                    (mean - p).abs() <= 3.0 * sigma,
                    "{:?} q={q} k={k}: mc {mean} exact {}",
                    env.kind,
                    p
                );
            }
        }
    }
}

#[test]
fn enumeration_probabilities_sum_to_one() {
    let policy = random_policy(8, 2, 5, 4);
    for q in 0..2 {
        let seqs = policy.enumerate(q);
        assert!(seqs.iter().all(|(s, _)| env::is_terminal(s, 4)));
        let total: f64 = seqs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn paired_magnitudes_during_training() {
    let env = ToyEnv::new(ToyKind::Correlated { noise_scale: 0.3 }, 5, 4);
    for method in Method::ALL {
        let cfg = TrainConfig {
            combiner: method,
            steps: 40,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &env).unwrap();
        assert!(out.abort.is_none());
        for r in &out.records {
            assert!(r.paired_abs_dvao <= r.paired_abs_rc + 1e-9, "{method} step {}", r.step);
        }
    }
}

#[test]
fn single_objective_combiners_train_identically() {
    struct Single(ToyEnv);
    impl Environment for Single {
        fn num_objectives(&self) -> usize {
            1
        }
        fn rewards(&self, q: QueryId, t: &[Symbol], r: &mut dyn rand::RngCore) -> Vec<f64> {
            self.0.rewards(q, t, r)[..1].to_vec()
        }
        fn expected_rewards(&self, q: QueryId, t: &[Symbol]) -> Vec<f64> {
            self.0.expected_rewards(q, t)[..1].to_vec()
        }
    }
    let env = Single(accuracy_length());
    let run = |m| {
        let cfg = TrainConfig {
            combiner: m,
            weights: dvao_core::WeightVector::uniform(1).unwrap(),
            steps: 20,
            ..TrainConfig::default()
        };
        train(&cfg, &env).unwrap()
    };
    let rc = run(Method::RewardCombination);
    assert_eq!(rc, run(Method::AdvantageCombination));
    assert_eq!(rc, run(Method::Dvao));
}

#[test]
fn reference_run_learns_the_dominant_sequence() {
    let env = accuracy_length();
    let cfg = TrainConfig::default();
    let out = train(&cfg, &env).unwrap();
    for &q in &cfg.queries {
        let target = env.target_symbol(q);
        let p: f64 = out
            .policy
            .enumerate(q.0 as usize)
            .into_iter()
            .filter(|(s, _)| s == &[target, STOP])
            .map(|(_, p)| p)
            .sum();
        assert!(p > 0.95, "query {} dominant probability {p}", q.0);
    }
}
