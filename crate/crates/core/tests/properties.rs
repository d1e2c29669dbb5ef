mod common;

use std::collections::BTreeSet;

use convsql::episode::{validate_trajectory, Action, Origin, Segment, Trajectory};
use convsql::grpo::{build_loss_mask, group_advantages, masked_objective, RewardGroup};
use convsql::pipeline::{curriculum_bins, SuccessProfile};
use convsql::sql::{clause_f1, decompose_str, normalize_sql};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generated(seed: u64) -> common::Generated {
    common::generate(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Pads every space with extra whitespace and flips keyword case.
fn reformat(sql: &str, pad: &[u8]) -> String {
    sql.split(' ')
        .enumerate()
        .map(|(i, tok)| {
            let tok = if i % 2 == 0 && tok.chars().all(|c| c.is_ascii_alphabetic()) {
                tok.to_ascii_lowercase()
            } else {
                tok.to_string()
            };
            let gap = match pad.get(i).copied().unwrap_or(0) % 3 {
                0 => " ",
                1 => "  ",
                _ => "\n\t",
            };
            format!("{tok}{gap}")
        })
        .collect()
}

proptest! {
    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let q = generated(seed).sql;
        let once = normalize_sql(&q).unwrap();
        let twice = normalize_sql(once.text()).unwrap();
        prop_assert_eq!(once.text(), twice.text());
    }

    #[test]
    fn normalization_ignores_layout(seed in any::<u64>(), pad in prop::collection::vec(any::<u8>(), 64)) {
        let q = generated(seed).sql;
        let variant = reformat(&q, &pad);
        let (a, b) = (normalize_sql(&q).unwrap(), normalize_sql(&variant).unwrap());
        prop_assert_eq!(a.text(), b.text(), "{}", variant);
    }

    #[test]
    fn clause_f1_matches_oracle(a in any::<u64>(), b in any::<u64>()) {
        let (p, g) = (generated(a), generated(b));
        let dp = decompose_str(&p.sql, None).unwrap();
        let dg = decompose_str(&g.sql, None).unwrap();
        let f = clause_f1(&dp, &dg);
        prop_assert!((f - common::oracle_clause_f1(&p, &g)).abs() <= 1e-12);
        prop_assert!((f - clause_f1(&dg, &dp)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn grammar_matches_automaton(seed in any::<u64>(), bias in 0.5f64..1.0) {
        let seq = common::random_sequence(&mut ChaCha8Rng::seed_from_u64(seed), bias);
        let actions = seq.iter().map(|&(k, v)| { let mut a = Action::new(k); a.verdict = v; a }).collect();
        let ours = validate_trajectory(&Trajectory::from_actions(actions)).is_empty();
        prop_assert_eq!(ours, common::oracle_accepts(&seq, 4), "sequence {:?}", seq);
    }

    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(0u32..=16, 2..=16), shift in -16i32..=16) {
        let rewards: Vec<f64> = rewards.into_iter().map(|r| f64::from(r) / 4.0).collect();
        let a = group_advantages(&RewardGroup { rewards: rewards.clone(), epsilon: 1e-8 });
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() <= 1e-9);
        if rewards.iter().any(|r| *r != rewards[0]) {
            let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((sd - 1.0).abs() <= 1e-5);
        } else {
            prop_assert!(a.iter().all(|x| *x == 0.0));
        }
        let shifted = RewardGroup { rewards: rewards.iter().map(|r| r + f64::from(shift)).collect(), epsilon: 1e-8 };
        prop_assert_eq!(group_advantages(&shifted), a.clone());
        // Higher reward never gets a lower advantage.
        for i in 0..rewards.len() {
            for j in 0..rewards.len() {
                if rewards[i] > rewards[j] {
                    prop_assert!(a[i] > a[j]);
                }
            }
        }
    }

    #[test]
    fn loss_mask_covers_exactly_model_text(parts in prop::collection::vec((0u8..3, "[a-z<>/ é\n]{0,12}"), 0..12)) {
        let mut t = Trajectory::from_actions(Vec::new());
        t.segments = parts
            .iter()
            .map(|(o, text)| {
                let origin = match o { 0 => Origin::Prompt, 1 => Origin::Model, _ => Origin::Environment };
                Segment { origin, text: text.clone() }
            })
            .collect();
        let mut want = Vec::new();
        for s in &t.segments {
            want.extend(std::iter::repeat_n(s.origin == Origin::Model, s.text.chars().count()));
        }
        let mask = build_loss_mask(&t);
        prop_assert_eq!(mask.to_flags(want.len()), want.clone());
        prop_assert_eq!(mask.covered(), want.iter().filter(|f| **f).count());
    }

    #[test]
    fn curriculum_partitions_unsolved(successes in prop::collection::vec(0u32..=8, 0..300), bin in 1usize..64) {
        let profiles: Vec<SuccessProfile> = successes
            .iter()
            .enumerate()
            .map(|(i, s)| SuccessProfile { task_id: format!("t{i:04}"), successes: *s, rollouts: 8 })
            .collect();
        let bins = curriculum_bins(&profiles, bin);
        let flat: Vec<&SuccessProfile> = bins.iter().flatten().collect();
        let ids: BTreeSet<&str> = flat.iter().map(|p| p.task_id.as_str()).collect();
        let want: BTreeSet<&str> = profiles.iter().filter(|p| p.successes < 8).map(|p| p.task_id.as_str()).collect();
        prop_assert_eq!(ids.len(), flat.len());
        prop_assert_eq!(ids, want);
        prop_assert!(flat.windows(2).all(|w| w[0].successes >= w[1].successes));
        if let Some((last, rest)) = bins.split_last() {
            prop_assert!(rest.iter().all(|b| b.len() == bin));
            prop_assert!(!last.is_empty() && last.len() <= bin);
        }
    }

    #[test]
    fn objective_matches_clip_formula(
        ratios in prop::collection::vec(-0.5f64..0.5, 1..20),
        adv in -3.0f64..3.0,
        clip in prop::sample::select(vec![0.1, 0.2, 0.28]),
    ) {
        let old = vec![-1.0; ratios.len()];
        let new: Vec<f64> = ratios.iter().map(|d| -1.0 + d).collect();
        let mask: Vec<bool> = (0..ratios.len()).map(|i| i % 3 != 1).collect();
        let got = masked_objective(&new, &old, &new, adv, &mask, clip, 0.5).unwrap();
        let terms: Vec<f64> = ratios
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(d, _)| {
                let r = d.exp();
                let c = if r < 1.0 - clip { 1.0 - clip } else if r > 1.0 + clip { 1.0 + clip } else { r };
                if r * adv < c * adv { r * adv } else { c * adv }
            })
            .collect();
        let want = terms.iter().sum::<f64>() / terms.len() as f64;
        prop_assert!((got.value - want).abs() <= 1e-12, "{} vs {}", got.value, want);
        prop_assert!(!got.empty_mask);
    }
}

#[test]
fn objective_on_empty_mask_is_flagged() {
    let v = masked_objective(
        &[0.0, 0.0],
        &[0.0, 0.0],
        &[0.0, 0.0],
        1.0,
        &[false, false],
        0.2,
        0.1,
    )
    .unwrap();
    assert!(v.empty_mask);
    assert_eq!(v.value, 0.0);
    assert!(masked_objective(&[0.0], &[0.0, 0.0], &[0.0], 1.0, &[true], 0.2, 0.1).is_err());
}

#[test]
fn kl_penalty_is_nonnegative() {
    for d in [-2.0, -0.5, 0.0, 0.3, 1.5] {
        let with = masked_objective(&[0.0], &[0.0], &[d], 0.0, &[true], 0.2, 1.0)
            .unwrap()
            .value;
        assert!(with <= 1e-15, "penalty for {d} went negative: {with}");
    }
}
