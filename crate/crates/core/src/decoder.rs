//! Beam search over outputs of the sleep-wake model.
//!
//! Each input element runs a small left-to-right search that grows the
//! current segment of every hypothesis one symbol at a time. A hypothesis
//! that picks end-of-segment leaves the inner search and shrinks the local
//! budget; at length `L` every survivor is forced to end its segment. After
//! each input element, hypotheses that spell the same output are merged by
//! adding their probabilities.

use std::cmp::Ordering;

use crate::error::{Result, SwanError};
use crate::logspace::logsumexp;
use crate::model::{connector_step, SegmentCursor};
use crate::params::SegmentScorerParams;
use crate::vocab::{InputSeq, OutputSeq};

/// What happens to hypotheses that finish a segment before `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinishedPolicy {
    /// Finished hypotheses leave the inner pool and each one reduces the
    /// local budget.
    #[default]
    Literal,
    /// Finished hypotheses are pooled without touching the budget; the pool
    /// is cut to the best `B` once the inner search ends.
    Rerank,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamOptions {
    pub beam_size: usize,
    /// Merge hypotheses with identical outputs after each input element.
    pub merge: bool,
    /// Rank final hypotheses by score divided by `max(1, output length)`.
    pub length_normalize: bool,
    pub finished: FinishedPolicy,
}

impl BeamOptions {
    pub fn new(beam_size: usize) -> Self {
        Self {
            beam_size,
            merge: true,
            length_normalize: false,
            finished: FinishedPolicy::Literal,
        }
    }
}

/// A partial output after some number of input elements.
#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    pub output: Vec<usize>,
    /// Log-probability (merged over segmentations when merging is on).
    pub score: f64,
    /// Connector state after consuming `output`.
    pub connector: Vec<f64>,
}

/// Set of hypotheses after an input element.
#[derive(Debug, Clone, Default)]
pub struct Beam {
    pub hypotheses: Vec<BeamHypothesis>,
}

/// Higher score first; equal scores put the lexicographically smaller output first.
fn rank(a: f64, a_out: &[usize], b: f64, b_out: &[usize]) -> Ordering {
    b.partial_cmp(&a)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_out.cmp(b_out))
}

/// Merges hypotheses with equal outputs, adding probabilities.
///
/// The first member of each group provides the connector state (all members
/// carry the same state because it depends only on the output). Groups keep
/// the order of their first appearance.
pub fn merge_duplicates(beam: Beam) -> Beam {
    let mut groups: Vec<(BeamHypothesis, Vec<f64>)> = Vec::new();
    let mut index: std::collections::HashMap<Vec<usize>, usize> = Default::default();
    for h in beam.hypotheses {
        match index.get(&h.output) {
            Some(&g) => groups[g].1.push(h.score),
            None => {
                index.insert(h.output.clone(), groups.len());
                let s = h.score;
                groups.push((h, vec![s]));
            }
        }
    }
    Beam {
        hypotheses: groups
            .into_iter()
            .map(|(mut h, scores)| {
                if scores.len() > 1 {
                    h.score = logsumexp(&scores);
                }
                h
            })
            .collect(),
    }
}

struct Live {
    parent: usize,
    segment: Vec<usize>,
    score: f64,
    cursor: SegmentCursor,
}

struct Finished {
    parent: usize,
    segment: Vec<usize>,
    score: f64,
}

/// Runs the inner search for one input element, returning finished
/// `(parent, segment, score)` triples.
fn expand_input(
    params: &SegmentScorerParams,
    x_t: &[f64],
    beam: &Beam,
    opts: &BeamOptions,
) -> Vec<Finished> {
    let cfg = params.config;
    let eos = cfg.vocab_size;
    let mut budget = opts.beam_size;
    let mut finished = Vec::new();
    let mut live: Vec<Live> = beam
        .hypotheses
        .iter()
        .enumerate()
        .map(|(i, h)| Live {
            parent: i,
            segment: Vec::new(),
            score: h.score,
            cursor: SegmentCursor::start(params, x_t, &h.connector),
        })
        .collect();

    for step in 0..=cfg.max_seg_len {
        if live.is_empty() {
            break;
        }
        if step == cfg.max_seg_len {
            let mut forced: Vec<Finished> = live
                .into_iter()
                .map(|c| Finished {
                    parent: c.parent,
                    score: c.score + c.cursor.log_probs()[eos],
                    segment: c.segment,
                })
                .collect();
            forced.sort_by(|a, b| {
                rank(a.score, &a.segment, b.score, &b.segment)
                    .then_with(|| a.parent.cmp(&b.parent))
            });
            let keep = match opts.finished {
                FinishedPolicy::Literal => budget,
                FinishedPolicy::Rerank => forced.len(),
            };
            forced.truncate(keep);
            finished.extend(forced);
            break;
        }

        // (candidate index, symbol, extended score)
        let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(live.len() * (eos + 1));
        for (ci, c) in live.iter().enumerate() {
            for (sym, &lp) in c.cursor.log_probs().iter().enumerate() {
                pairs.push((ci, sym, c.score + lp));
            }
        }
        pairs.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
                .then_with(|| a.1.cmp(&b.1))
        });
        pairs.truncate(budget);

        let mut next = Vec::with_capacity(pairs.len());
        for (ci, sym, score) in pairs {
            let c = &live[ci];
            if sym == eos {
                finished.push(Finished {
                    parent: c.parent,
                    segment: c.segment.clone(),
                    score,
                });
                if opts.finished == FinishedPolicy::Literal {
                    budget -= 1;
                }
            } else {
                let mut segment = c.segment.clone();
                segment.push(sym);
                next.push(Live {
                    parent: c.parent,
                    segment,
                    score,
                    cursor: c.cursor.push(params, sym),
                });
            }
        }
        live = next;
        if budget == 0 {
            break;
        }
    }

    if opts.finished == FinishedPolicy::Rerank {
        finished.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal).reverse());
        finished.truncate(opts.beam_size);
    }
    finished
}

/// Decodes `x`, returning the best output and its beam score.
pub fn beam_search(
    x: &InputSeq,
    params: &SegmentScorerParams,
    opts: &BeamOptions,
) -> Result<(OutputSeq, f64)> {
    let beam = beam_search_full(x, params, opts)?;
    let best = beam
        .hypotheses
        .into_iter()
        .min_by(|a, b| {
            let (sa, sb) = if opts.length_normalize {
                (
                    a.score / a.output.len().max(1) as f64,
                    b.score / b.output.len().max(1) as f64,
                )
            } else {
                (a.score, b.score)
            };
            rank(sa, &a.output, sb, &b.output)
        })
        .ok_or_else(|| SwanError::InvalidInput("beam emptied during decoding".into()))?;
    Ok((OutputSeq::new(best.output), best.score))
}

/// Decodes `x` and returns the final beam, best first.
pub fn beam_search_full(
    x: &InputSeq,
    params: &SegmentScorerParams,
    opts: &BeamOptions,
) -> Result<Beam> {
    if opts.beam_size == 0 {
        return Err(SwanError::InvalidConfig("beam size must be at least 1".into()));
    }
    if x.dim() != params.config.input_dim {
        return Err(SwanError::ShapeMismatch(format!(
            "input dimension {} does not match model input dimension {}",
            x.dim(),
            params.config.input_dim
        )));
    }
    let mut beam = Beam {
        hypotheses: vec![BeamHypothesis {
            output: Vec::new(),
            score: 0.0,
            connector: vec![0.0; params.config.connector_hidden],
        }],
    };
    for t in 0..x.len() {
        let finished = expand_input(params, x.get(t), &beam, opts);
        let hypotheses = finished
            .into_iter()
            .map(|f| {
                let parent = &beam.hypotheses[f.parent];
                let mut output = parent.output.clone();
                output.extend_from_slice(&f.segment);
                let mut connector = parent.connector.clone();
                for &tok in &f.segment {
                    connector = connector_step(params, &connector, tok);
                }
                BeamHypothesis {
                    output,
                    score: f.score,
                    connector,
                }
            })
            .collect();
        let next = Beam { hypotheses };
        beam = if opts.merge { merge_duplicates(next) } else { next };
    }
    beam.hypotheses
        .sort_by(|a, b| rank(a.score, &a.output, b.score, &b.output));
    Ok(beam)
}
