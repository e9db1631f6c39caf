mod common;

use common::*;
use swan_core::decoder::{beam_search, beam_search_full, BeamOptions, FinishedPolicy};
use swan_core::oracle;
use swan_core::{log_likelihood, InputSeq, OutputSeq, SegmentScorerParams};

/// Exact argmax over every output of length ≤ T'·L (ties → lexicographically smaller).
fn exhaustive_argmax(x: &InputSeq, p: &SegmentScorerParams) -> (OutputSeq, f64) {
    oracle::exhaustive_argmax(x, p).unwrap()
}

#[test]
fn saturated_beam_finds_exact_argmax() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let p = SegmentScorerParams::init_uniform(tiny_config(2, 2), 10_000 + seed, 1.5).unwrap();
        let x = random_input(&mut r, 2, 2);
        let (best, best_ll) = exhaustive_argmax(&x, &p);
        let (out, score) = beam_search(&x, &p, &BeamOptions::new(64)).unwrap();
        assert_eq!(out, best, "seed {seed}");
        // with no pruning the merged beam score is the exact sequence probability
        assert!((score - best_ll).abs() < 1e-10, "seed {seed}: {score} vs {best_ll}");
    }
}

#[test]
fn saturated_beam_scores_every_output_exactly() {
    let mut r = rng(5);
    let p = SegmentScorerParams::init_uniform(tiny_config(2, 2), 5, 1.0).unwrap();
    let x = random_input(&mut r, 2, 2);
    let beam = beam_search_full(&x, &p, &BeamOptions::new(1000)).unwrap();
    assert_eq!(beam.hypotheses.len(), 31);
    for h in &beam.hypotheses {
        let ll = log_likelihood(&x, &OutputSeq::new(h.output.clone()), &p).unwrap();
        assert!((h.score - ll).abs() < 1e-10);
    }
    let total: f64 = beam.hypotheses.iter().map(|h| h.score.exp()).sum();
    assert!(total < 1.0);
}

#[test]
fn saturated_beam_with_three_tokens() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let p = SegmentScorerParams::init_uniform(tiny_config(3, 2), seed, 1.5).unwrap();
        let x = random_input(&mut r, 2, 2);
        let (best, _) = exhaustive_argmax(&x, &p);
        let (out, _) = beam_search(&x, &p, &BeamOptions::new(400)).unwrap();
        assert_eq!(out, best);
    }
}

#[test]
fn greedy_recovers_deterministic_emission() {
    let cfg = tiny_config(3, 2);
    let mut p = SegmentScorerParams::init_uniform(cfg, 1, 0.01).unwrap();
    p.output_bias = vec![0.0, 40.0, 0.0, 0.0];
    let x = random_input(&mut rng(1), 3, 2);
    let (out, _) = beam_search(&x, &p, &BeamOptions::new(1)).unwrap();
    assert_eq!(out.ids, vec![1; 6]);

    p.output_bias = vec![0.0, 0.0, 0.0, 40.0];
    let (out, score) = beam_search(&x, &p, &BeamOptions::new(1)).unwrap();
    assert!(out.is_empty());
    assert!(score > -1e-12);
}

#[test]
fn best_score_is_monotone_in_beam_size() {
    for seed in 0..30 {
        let mut r = rng(40 + seed);
        let p = SegmentScorerParams::init_uniform(tiny_config(2, 2), 40 + seed, 1.5).unwrap();
        let x = random_input(&mut r, 3, 2);
        let mut prev = f64::NEG_INFINITY;
        for b in [1, 2, 4, 8, 16, 64, 512] {
            let (_, score) = beam_search(&x, &p, &BeamOptions::new(b)).unwrap();
            assert!(score >= prev - 1e-12, "seed {seed}, B={b}: {score} < {prev}");
            prev = score;
        }
    }
}

#[test]
fn merging_never_hurts() {
    for seed in 0..30 {
        let mut r = rng(70 + seed);
        let p = SegmentScorerParams::init_uniform(tiny_config(2, 2), 70 + seed, 1.5).unwrap();
        let x = random_input(&mut r, 2, 2);
        let merged = BeamOptions::new(64);
        let unmerged = BeamOptions {
            merge: false,
            ..merged
        };
        let (ym, _) = beam_search(&x, &p, &merged).unwrap();
        let (yu, _) = beam_search(&x, &p, &unmerged).unwrap();
        let pm = log_likelihood(&x, &ym, &p).unwrap();
        let pu = log_likelihood(&x, &yu, &p).unwrap();
        assert!(pm >= pu - 1e-12, "seed {seed}");
    }
}

#[test]
fn beam_outputs_are_distinct_and_bounded() {
    let mut r = rng(12);
    let p = SegmentScorerParams::init_uniform(tiny_config(3, 3), 12, 1.0).unwrap();
    let x = random_input(&mut r, 4, 2);
    for policy in [FinishedPolicy::Literal, FinishedPolicy::Rerank] {
        let opts = BeamOptions {
            finished: policy,
            ..BeamOptions::new(8)
        };
        let beam = beam_search_full(&x, &p, &opts).unwrap();
        assert!(beam.hypotheses.len() <= 8);
        let mut outs: Vec<_> = beam.hypotheses.iter().map(|h| h.output.clone()).collect();
        outs.sort();
        outs.dedup();
        assert_eq!(outs.len(), beam.hypotheses.len());
        for h in &beam.hypotheses {
            assert!(h.score <= 0.0);
            assert!(h.output.len() <= 4 * 3);
        }
    }
}

#[test]
fn length_normalization_flag_changes_ranking_only() {
    let mut r = rng(3);
    let p = SegmentScorerParams::init_uniform(tiny_config(2, 2), 3, 1.0).unwrap();
    let x = random_input(&mut r, 2, 2);
    let opts = BeamOptions {
        length_normalize: true,
        ..BeamOptions::new(64)
    };
    let (out, score) = beam_search(&x, &p, &opts).unwrap();
    let ll = log_likelihood(&x, &out, &p).unwrap();
    assert!((score - ll).abs() < 1e-10);
}

#[test]
fn zero_beam_rejected() {
    let p = SegmentScorerParams::init(tiny_config(2, 2), 0).unwrap();
    let x = random_input(&mut rng(0), 2, 2);
    assert!(beam_search(&x, &p, &BeamOptions::new(0)).is_err());
}
