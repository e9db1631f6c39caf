#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swan_core::{InputSeq, ModelConfig, OutputSeq, SegmentScorerParams, SegmentTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config(vocab_size: usize, max_seg_len: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        input_dim: 2,
        hidden: 3,
        connector_hidden: 2,
        max_seg_len,
        embed_dim: 2,
        layers: 1,
    }
}

pub fn random_input(r: &mut ChaCha8Rng, len: usize, dim: usize) -> InputSeq {
    let data = (0..len * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    InputSeq::from_flat(dim, data).unwrap()
}

pub fn random_target(r: &mut ChaCha8Rng, len: usize, vocab: usize) -> OutputSeq {
    OutputSeq::new((0..len).map(|_| r.gen_range(0..vocab)).collect())
}

/// Random instance with `T ≤ T'·L`.
pub struct Instance {
    pub cfg: ModelConfig,
    pub params: SegmentScorerParams,
    pub x: InputSeq,
    pub y: OutputSeq,
}

pub fn random_instance(seed: u64, max_t: usize, max_tp: usize, max_l: usize, max_v: usize) -> Instance {
    let mut r = rng(seed);
    let v = r.gen_range(1..=max_v);
    let l = r.gen_range(1..=max_l);
    let tp = r.gen_range(1..=max_tp);
    let t = r.gen_range(0..=max_t.min(tp * l));
    let cfg = tiny_config(v, l);
    let params = SegmentScorerParams::init_uniform(cfg, r.gen(), 1.0).unwrap();
    let x = random_input(&mut r, tp, cfg.input_dim);
    let y = random_target(&mut r, t, v);
    Instance { cfg, params, x, y }
}

/// Lattice of arbitrary (unnormalized) negative log-scores.
pub fn random_table(r: &mut ChaCha8Rng, tp: usize, t: usize, l: usize) -> SegmentTable {
    let mut tab = SegmentTable::new(tp, t, l, f64::NEG_INFINITY);
    for ti in 0..tp {
        for j in 0..=t {
            for len in 0..=tab.max_len_at(j) {
                tab.set(ti, j, len, -r.gen_range(0.05..4.0));
            }
        }
    }
    tab
}
