mod common;

use coa_core::policy::{sft_step, Choice, PolicyParams, LOGIT_CLAMP};
use coa_core::reward::TaskMetric;
use coa_core::{PolicyKind, SeedTree};
use proptest::prelude::*;

use common::{endovis_vocab, letters_vocab};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn subset_probabilities_sum_to_one(theta in prop::collection::vec(-6.0f64..6.0, 1..=12), t in 0.3f64..3.0) {
        let k = theta.len();
        let v = letters_vocab(k);
        let p = PolicyParams::from_theta(PolicyKind::SubsetBernoulli, v.clone(), 1, theta).unwrap();
        let total: f64 = (0u32..1 << k)
            .map(|mask| {
                let set = v.entity_set((0..k).filter(|i| mask >> i & 1 == 1)).unwrap();
                p.logprob(&Choice::Subset(set), t).unwrap().exp()
            })
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn sequence_probabilities_sum_to_one(
        k in 2usize..=5,
        positions in 1usize..=3,
        seed in any::<u64>(),
        t in 0.3f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..k * positions).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = PolicyParams::from_theta(PolicyKind::CategoricalSequence, letters_vocab(k), positions, theta).unwrap();
        let mut total = 0.0;
        for code in 0..k.pow(positions as u32) {
            let seq: Vec<usize> = (0..positions).map(|i| code / k.pow(i as u32) % k).collect();
            total += p.logprob(&Choice::Sequence(seq), t).unwrap().exp();
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn extreme_parameters_stay_finite(theta in prop::collection::vec(-1e6f64..1e6, 4)) {
        let p = PolicyParams::from_theta(PolicyKind::SubsetBernoulli, letters_vocab(4), 1, theta).unwrap();
        prop_assert!(p.theta().iter().all(|x| x.abs() <= LOGIT_CLAMP));
        let mut rng = SeedTree::new(0).stream("probe", 0);
        for c in p.sample(8, 1.0, &mut rng).unwrap() {
            let (lp, g) = p.logprob_and_grad(&c, 1.0).unwrap();
            prop_assert!(lp.is_finite() && lp <= 0.0);
            prop_assert!(g.iter().all(|x| x.is_finite()));
        }
    }
}

#[test]
fn sft_converges_to_the_reference() {
    let v = endovis_vocab();
    let target = v.set_from_labels(["grasper", "hook", "clamp"]).unwrap();
    let reference = Choice::Subset(target.clone());
    let mut p = PolicyParams::subset_bernoulli(v.clone());
    for _ in 0..1000 {
        p = sft_step(&p, &reference, 0.5).unwrap();
    }
    assert_eq!(p.mode_choice(), reference);
    let f1 = p.expected_set_reward(&target, TaskMetric::F1, 1.0).unwrap();
    assert!(f1 > 0.99, "{f1}");

    let mut seq = PolicyParams::categorical_sequence(v, 2);
    let reference = Choice::Sequence(vec![3, 7]);
    for _ in 0..1000 {
        seq = sft_step(&seq, &reference, 0.5).unwrap();
    }
    assert_eq!(seq.mode_choice(), reference);
}

#[test]
fn sampling_frequency_matches_probability() {
    let v = letters_vocab(3);
    let p = PolicyParams::from_theta(PolicyKind::SubsetBernoulli, v, 1, vec![1.0, -0.5, 0.0]).unwrap();
    let mut rng = SeedTree::new(11).stream("freq", 0);
    let n = 100_000;
    let draws = p.sample(n, 1.0, &mut rng).unwrap();
    let probs = p.probabilities(1.0);
    for (k, q) in probs.iter().enumerate() {
        let hits = draws.iter().filter(|c| matches!(c, Choice::Subset(s) if s.contains(k))).count();
        // about 4.5 standard deviations at n = 1e5
        assert!((hits as f64 / n as f64 - q).abs() < 0.007, "class {k}");
    }
}
