//! Evaluation metrics, decoding and segmentation reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use swan_core::decoder::BeamOptions;
use swan_core::feasible;
use swan_core::vocab::Case;

use crate::error::Result;
use crate::model::SwanModel;
use crate::task::{Dataset, Example};

/// Token-level Levenshtein distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean negative log-likelihood of the references.
    pub nll: f64,
    pub exact_acc: f64,
    /// Total edit distance over total reference length.
    pub edit_rate: f64,
    /// Decoded tokens per non-empty segment of their best segmentation.
    pub avg_seg_len: f64,
}

impl Metrics {
    pub fn report(&self) -> String {
        format!(
            "nll\t{:.6}\nexact_acc\t{:.6}\nedit_rate\t{:.6}\navg_seg_len\t{:.6}\n",
            self.nll, self.exact_acc, self.edit_rate, self.avg_seg_len
        )
    }
}

struct ItemScore {
    nll: f64,
    exact: bool,
    edits: usize,
    ref_len: usize,
    tokens: usize,
    segments: usize,
}

fn score_item(model: &SwanModel, ex: &Example, opts: &BeamOptions) -> Result<ItemScore> {
    let nll = model.nll(&ex.input, &ex.output)?;
    let (hyp, _) = model.decode(&ex.input, opts)?;
    let (tokens, segments) = if hyp.is_empty() {
        (0, 0)
    } else {
        let (seg, _) = model.best_segmentation(&ex.input, &hyp)?;
        (hyp.len(), seg.non_empty_count())
    };
    Ok(ItemScore {
        nll,
        exact: hyp == ex.output,
        edits: levenshtein(&hyp.ids, &ex.output.ids),
        ref_len: ex.output.len(),
        tokens,
        segments,
    })
}

/// Scores every example; decoding runs in parallel, reduction is in order.
pub fn evaluate(model: &SwanModel, data: &Dataset, opts: &BeamOptions) -> Result<Metrics> {
    model.check_vocab(&data.input_vocab, &data.output_vocab)?;
    let items: Vec<ItemScore> = data
        .examples
        .par_iter()
        .map(|ex| score_item(model, ex, opts))
        .collect::<Result<_>>()?;
    let n = items.len().max(1) as f64;
    let (mut nll, mut exact, mut edits, mut ref_len, mut tokens, mut segments) = (0.0, 0, 0, 0, 0, 0);
    for it in &items {
        nll += it.nll;
        exact += usize::from(it.exact);
        edits += it.edits;
        ref_len += it.ref_len;
        tokens += it.tokens;
        segments += it.segments;
    }
    let ratio = |a: usize, b: usize| if b == 0 { if a == 0 { 0.0 } else { 1.0 } } else { a as f64 / b as f64 };
    Ok(Metrics {
        nll: nll / n,
        exact_acc: exact as f64 / n,
        edit_rate: ratio(edits, ref_len),
        avg_seg_len: if segments == 0 { 0.0 } else { tokens as f64 / segments as f64 },
    })
}

/// Beam outputs, one line of output tokens per example.
pub fn decode_report(model: &SwanModel, data: &Dataset, opts: &BeamOptions) -> Result<String> {
    model.check_vocab(&data.input_vocab, &data.output_vocab)?;
    let outs = data
        .examples
        .par_iter()
        .map(|ex| model.decode(&ex.input, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut s = String::new();
    for (hyp, score) in outs {
        let toks = model.output_vocab.decode(&hyp)?;
        let _ = writeln!(s, "{}\t{score:.6}", toks.join(" "));
    }
    Ok(s)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentReport {
    pub lines: Vec<String>,
    /// Examples skipped because no segmentation exists.
    pub skipped: Vec<usize>,
    /// Items carrying ground truth / items whose best segmentation equals it.
    pub with_truth: usize,
    pub recovered: usize,
}

impl SegmentReport {
    pub fn recovery_rate(&self) -> f64 {
        if self.with_truth == 0 {
            0.0
        } else {
            self.recovered as f64 / self.with_truth as f64
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        if self.with_truth > 0 {
            let _ = writeln!(
                s,
                "# recovered {}/{} ({:.4})",
                self.recovered,
                self.with_truth,
                self.recovery_rate()
            );
        }
        s
    }
}

/// Bracketed max-probability segmentation of every reference.
///
/// With `pooled` the input is collapsed to one vector and segmented without
/// alignment.
pub fn segment_report(model: &SwanModel, data: &Dataset, pooled: bool) -> Result<SegmentReport> {
    model.check_vocab(&data.input_vocab, &data.output_vocab)?;
    let l = model.config().max_seg_len;
    let results = data
        .examples
        .par_iter()
        .map(|ex| {
            let ok = if pooled {
                !ex.output.is_empty()
            } else {
                feasible(model.config(), ex.output.len(), ex.input.len(), Case::Sequence)
            };
            if !ok {
                return Ok(None);
            }
            let (seg, _) = if pooled {
                model.best_segmentation_pooled(&ex.input, &ex.output)?
            } else {
                model.best_segmentation(&ex.input, &ex.output)?
            };
            Ok(Some(seg))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SegmentReport::default();
    for (i, (ex, seg)) in data.examples.iter().zip(results).enumerate() {
        let Some(seg) = seg else {
            report.skipped.push(i);
            report.lines.push(format!("# skipped example {i}: infeasible with L = {l}"));
            continue;
        };
        report
            .lines
            .push(seg.display_with(&model.output_vocab).to_string());
        if let (Some(truth), false) = (&ex.segments, pooled) {
            report.with_truth += 1;
            if &seg.lengths() == truth {
                report.recovered += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(levenshtein::<u8>(&[], &[1, 2]), 2);
        assert_eq!(levenshtein(&[1, 2, 3], &[2, 3, 4]), 2);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
    }
}
