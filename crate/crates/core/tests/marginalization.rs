mod common;

use common::*;
use proptest::prelude::*;
use swan_core::marginal::{best_segmentation, case1_log_likelihood, AlphaBeta};
use swan_core::model::{case1_lattice, naive_segment_lattice, segment_lattice};
use swan_core::oracle::{
    all_outputs, brute_force_best, brute_force_likelihood, enumerate_compositions, EnumerationSpec,
};
use swan_core::{logsumexp, Case, InputSeq, OutputSeq, SegmentScorerParams, SegmentTable};

#[test]
fn dp_matches_enumeration_on_random_models() {
    for seed in 0..100 {
        let inst = random_instance(seed, 6, 4, 3, 3);
        let lat = segment_lattice(&inst.x, &inst.y, &inst.params).unwrap();
        let ab = AlphaBeta::compute(lat.scores(), inst.cfg.max_seg_len);
        let brute = brute_force_likelihood(&inst.x, &inst.y, &inst.params, Case::Sequence).unwrap();
        assert!(
            (ab.log_likelihood() - brute).abs() <= 1e-10,
            "seed {seed}: dp {} vs brute {brute}",
            ab.log_likelihood()
        );
    }
}

#[test]
fn case1_dp_matches_enumeration() {
    for seed in 0..40 {
        let mut r = rng(1000 + seed);
        let l = 1 + (seed as usize % 3);
        let cfg = tiny_config(2, l);
        let p = SegmentScorerParams::init_uniform(cfg, seed, 1.0).unwrap();
        let x = random_input(&mut r, 1, 2);
        let y = random_target(&mut r, 1 + (seed as usize % 5), 2);
        let lat = case1_lattice(&x, &y, &p).unwrap();
        let dp = case1_log_likelihood(&lat.scores().input_row(0), y.len(), l).unwrap();
        let brute = brute_force_likelihood(&x, &y, &p, Case::NonSequence).unwrap();
        assert!((dp - brute).abs() <= 1e-10, "seed {seed}");
    }
}

#[test]
fn viterbi_matches_brute_force_argmax() {
    for seed in 0..60 {
        let inst = random_instance(500 + seed, 5, 3, 3, 3);
        let lat = segment_lattice(&inst.x, &inst.y, &inst.params).unwrap();
        let (seg, score) = best_segmentation(lat.scores(), &inst.y, inst.cfg.max_seg_len).unwrap();
        let (bseg, bscore) = brute_force_best(&inst.x, &inst.y, &inst.params).unwrap();
        assert!((score - bscore).abs() < 1e-10, "seed {seed}");
        assert_eq!(seg, bseg, "seed {seed}");
        seg.validate(&inst.y, inst.cfg.max_seg_len, Case::Sequence, inst.x.len())
            .unwrap();
        let ll = AlphaBeta::compute(lat.scores(), inst.cfg.max_seg_len).log_likelihood();
        assert!(score <= ll + 1e-12);
    }
}

#[test]
fn viterbi_on_random_tables_matches_enumeration() {
    let mut r = rng(77);
    for _ in 0..50 {
        let tp = 1 + (r.next_u32() % 3) as usize;
        let l = 1 + (r.next_u32() % 3) as usize;
        let t = (r.next_u32() as usize) % (tp * l + 1);
        let tab = random_table(&mut r, tp, t, l);
        let y = random_target(&mut r, t, 2);
        let (seg, score) = best_segmentation(&tab, &y, l).unwrap();
        let comps = enumerate_compositions(&EnumerationSpec::sequence(t, tp, l)).unwrap();
        let path = |c: &Vec<usize>| {
            let mut j = 0;
            let mut s = 0.0;
            for (ti, &len) in c.iter().enumerate() {
                s += tab.get(ti, j, len);
                j += len;
            }
            s
        };
        let best = comps.iter().map(path).fold(f64::NEG_INFINITY, f64::max);
        assert!((score - best).abs() < 1e-12);
        assert!((path(&seg.lengths()) - score).abs() < 1e-12);
        let total = logsumexp(&comps.iter().map(path).collect::<Vec<_>>());
        let ab = AlphaBeta::compute(&tab, l);
        assert!((ab.log_likelihood() - total).abs() < 1e-10);
    }
}

use rand::RngCore;

#[test]
fn uniform_model_closed_forms() {
    // zero output layer ⇒ every class has probability 1/3
    let cfg = tiny_config(2, 2);
    let p = SegmentScorerParams::zeros(cfg);
    let x = InputSeq::new(vec![vec![0.3, -0.1], vec![0.7, 0.2]]).unwrap();
    let y = OutputSeq::new(vec![0, 1]);
    let ll = swan_core::log_likelihood(&x, &y, &p).unwrap();
    assert!((ll.exp() - 1.0 / 27.0).abs() < 1e-12);
    assert!((brute_force_likelihood(&x, &y, &p, Case::Sequence).unwrap() - (1.0f64 / 27.0).ln()).abs() < 1e-12);

    // non-sequence, T = 3, L = 3
    let p3 = SegmentScorerParams::zeros(tiny_config(2, 3));
    let x1 = InputSeq::new(vec![vec![0.5, 0.5]]).unwrap();
    let y3 = OutputSeq::new(vec![1, 0, 1]);
    let lat = case1_lattice(&x1, &y3, &p3).unwrap();
    let c1 = case1_log_likelihood(&lat.scores().input_row(0), 3, 3).unwrap();
    assert!((c1.exp() - 16.0 / 729.0).abs() < 1e-12);

    // truncated total mass over every output of length ≤ T'·L
    let mass: f64 = all_outputs(2, 4)
        .iter()
        .map(|y| swan_core::log_likelihood(&x, y, &p).unwrap().exp())
        .sum();
    assert!((mass - 361.0 / 729.0).abs() < 1e-10, "{mass}");
}

#[test]
fn larger_cap_never_loses_mass() {
    for seed in 0..20 {
        let inst = random_instance(900 + seed, 6, 3, 3, 3);
        let lat = segment_lattice(&inst.x, &inst.y, &inst.params).unwrap();
        let l = inst.cfg.max_seg_len;
        let full = AlphaBeta::compute(lat.scores(), l).log_likelihood();
        for smaller in 1..l {
            let masked = AlphaBeta::compute(lat.scores(), smaller).log_likelihood();
            assert!(masked <= full + 1e-12);
        }
    }
}

#[test]
fn shared_pass_equals_naive_on_random_instances() {
    for seed in 0..40 {
        let inst = random_instance(300 + seed, 8, 4, 4, 3);
        let shared = segment_lattice(&inst.x, &inst.y, &inst.params).unwrap();
        let naive = naive_segment_lattice(&inst.x, &inst.y, &inst.params).unwrap();
        for ((_, _, _, a), (_, _, _, b)) in shared.scores().cells().zip(naive.cells()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

fn table_strategy() -> impl Strategy<Value = (SegmentTable, usize)> {
    (1usize..=4, 1usize..=3, any::<u64>()).prop_flat_map(|(tp, l, seed)| {
        (0..=(tp * l).min(6)).prop_map(move |t| {
            let mut r = rng(seed);
            (random_table(&mut r, tp, t, l), l)
        })
    })
}

proptest! {
    #[test]
    fn partition_identity_and_weight_sums((tab, l) in table_strategy()) {
        let ab = AlphaBeta::compute(&tab, l);
        let ll = ab.log_likelihood();
        prop_assert!(ll.is_finite());
        for t in 0..=tab.input_len() {
            prop_assert!((ab.check_partition(t) - ll).abs() <= 1e-10);
        }
        let w = ab.gradient_weights(&tab).unwrap();
        for t in 0..tab.input_len() {
            prop_assert!((w.row_sum(t) - 1.0).abs() <= 1e-9);
        }
        for (_, _, _, v) in w.table().cells() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn beta_at_origin_equals_alpha_at_end((tab, l) in table_strategy()) {
        let ab = AlphaBeta::compute(&tab, l);
        prop_assert!((ab.beta(0, 0) - ab.log_likelihood()).abs() <= 1e-10);
    }
}
