//! Timing of the naive per-segment lattice against the shared longest pass.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swan_core::model::naive_segment_lattice;
use swan_core::{segment_lattice, InputSeq, ModelConfig, OutputSeq, SegmentScorerParams};

use crate::error::{CliError, Result};

const BENCH_VOCAB: usize = 4;
const BENCH_INPUT_DIM: usize = 8;

/// One `(T, T', L, H)` configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSize {
    pub target_len: usize,
    pub input_len: usize,
    pub max_seg_len: usize,
    pub hidden: usize,
}

impl FromStr for BenchSize {
    type Err = CliError;

    /// `T,T',L,H`
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Config(format!("bad size {s:?}, expected T,T',L,H")))?;
        match v[..] {
            [t, tp, l, h] if tp > 0 && l > 0 && h > 0 && t <= tp * l => Ok(BenchSize {
                target_len: t,
                input_len: tp,
                max_seg_len: l,
                hidden: h,
            }),
            _ => Err(CliError::Config(format!(
                "bad size {s:?}: need T,T',L,H with T' > 0, L > 0, H > 0 and T <= T'·L"
            ))),
        }
    }
}

pub fn default_sizes() -> Vec<BenchSize> {
    [(16, 16, 1, 32), (32, 16, 2, 32), (32, 16, 4, 32), (64, 16, 8, 32)]
        .into_iter()
        .map(|(t, tp, l, h)| BenchSize {
            target_len: t,
            input_len: tp,
            max_seg_len: l,
            hidden: h,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: BenchSize,
    pub naive: Duration,
    pub shared: Duration,
    pub max_abs_diff: f64,
    /// Recurrent passes: one per segment (naive) or per `(t, j)` (shared).
    pub naive_passes: usize,
    pub shared_passes: usize,
    /// Segment-cell steps, counting the begin-of-segment step.
    pub naive_steps: usize,
    pub shared_steps: usize,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.naive.as_secs_f64() / self.shared.as_secs_f64()
    }
}

fn instance(size: BenchSize, seed: u64) -> Result<(SegmentScorerParams, InputSeq, OutputSeq)> {
    let cfg = ModelConfig {
        vocab_size: BENCH_VOCAB,
        input_dim: BENCH_INPUT_DIM,
        hidden: size.hidden,
        connector_hidden: size.hidden,
        max_seg_len: size.max_seg_len,
        embed_dim: 16,
        layers: 1,
    };
    let params = SegmentScorerParams::init(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x = InputSeq::new(
        (0..size.input_len)
            .map(|_| (0..BENCH_INPUT_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    )?;
    let y = OutputSeq::new((0..size.target_len).map(|_| rng.gen_range(0..BENCH_VOCAB)).collect());
    Ok((params, x, y))
}

fn fastest<F: FnMut() -> Result<()>>(mut f: F) -> Result<Duration> {
    let mut best = Duration::MAX;
    let start = Instant::now();
    let mut runs = 0;
    while runs < 3 || (start.elapsed() < Duration::from_millis(200) && runs < 1000) {
        let t = Instant::now();
        f()?;
        best = best.min(t.elapsed());
        runs += 1;
    }
    Ok(best)
}

pub fn bench_one(size: BenchSize, seed: u64) -> Result<BenchRow> {
    let (params, x, y) = instance(size, seed)?;
    let shared = segment_lattice(&x, &y, &params)?;
    let naive = naive_segment_lattice(&x, &y, &params)?;
    let max_abs_diff = shared
        .scores()
        .cells()
        .map(|(t, j, l, v)| (v - naive.get(t, j, l)).abs())
        .fold(0.0, f64::max);
    let (mut naive_passes, mut naive_steps, mut shared_steps) = (0, 0, 0);
    for _ in 0..size.input_len {
        for j in 0..=size.target_len {
            let lmax = size.max_seg_len.min(size.target_len - j);
            naive_passes += lmax + 1;
            naive_steps += (lmax + 1) * (lmax + 2) / 2;
            shared_steps += lmax + 1;
        }
    }
    let t_naive = fastest(|| naive_segment_lattice(&x, &y, &params).map(|_| ()).map_err(Into::into))?;
    let t_shared = fastest(|| segment_lattice(&x, &y, &params).map(|_| ()).map_err(Into::into))?;
    Ok(BenchRow {
        size,
        naive: t_naive,
        shared: t_shared,
        max_abs_diff,
        naive_passes,
        shared_passes: shared.passes(),
        naive_steps,
        shared_steps,
    })
}

pub const BENCH_HEADER: &str =
    "T\tT'\tL\tH\tnaive_ms\tshared_ms\tspeedup\tmax_abs_diff\tnaive_passes\tshared_passes\tnaive_steps\tshared_steps";

pub fn render(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.2}\t{:.3e}\t{}\t{}\t{}\t{}",
            r.size.target_len,
            r.size.input_len,
            r.size.max_seg_len,
            r.size.hidden,
            r.naive.as_secs_f64() * 1e3,
            r.shared.as_secs_f64() * 1e3,
            r.speedup(),
            r.max_abs_diff,
            r.naive_passes,
            r.shared_passes,
            r.naive_steps,
            r.shared_steps
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sizes() {
        let s: BenchSize = "64,16,8,32".parse().unwrap();
        assert_eq!((s.target_len, s.input_len, s.max_seg_len, s.hidden), (64, 16, 8, 32));
        assert!("65,8,8,4".parse::<BenchSize>().is_err());
        assert!("1,2,3".parse::<BenchSize>().is_err());
    }

    #[test]
    fn default_sizes_are_feasible() {
        for s in default_sizes() {
            assert!(s.target_len <= s.input_len * s.max_seg_len);
        }
    }

    #[test]
    fn pass_counts() {
        let r = bench_one("6,3,2,4".parse().unwrap(), 1).unwrap();
        assert_eq!(r.shared_passes, 3 * 7);
        // rows j = 0..=4 allow ℓ ≤ 2, j = 5 allows ℓ ≤ 1, j = 6 only ℓ = 0
        assert_eq!(r.naive_passes, 3 * (5 * 3 + 2 + 1));
        assert_eq!(r.max_abs_diff, 0.0);
    }
}
