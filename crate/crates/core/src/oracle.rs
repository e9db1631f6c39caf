//! Brute-force references for small instances.
//!
//! Nothing here is used for training. Segment scoring in this module is a
//! separate implementation that only shares the recurrent-cell arithmetic
//! with [`crate::model`].

use crate::config::ModelConfig;
use crate::error::{Result, SwanError};
use crate::logspace::logsumexp;
use crate::params::SegmentScorerParams;
use crate::vocab::{Case, InputSeq, OutputSeq, Segmentation};

pub const DEFAULT_CAP: u128 = 1_000_000;

/// What to enumerate: compositions of `T` into segment lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationSpec {
    pub target_len: usize,
    /// `T'`; ignored when `allow_empty` is false.
    pub input_len: usize,
    pub max_seg_len: usize,
    /// `true` for sequence inputs (exactly `T'` parts in `[0, L]`), `false`
    /// for a single vector input (any number of parts in `[1, L]`).
    pub allow_empty: bool,
    pub cap: u128,
}

impl EnumerationSpec {
    pub fn sequence(target_len: usize, input_len: usize, max_seg_len: usize) -> Self {
        Self {
            target_len,
            input_len,
            max_seg_len,
            allow_empty: true,
            cap: DEFAULT_CAP,
        }
    }

    pub fn non_sequence(target_len: usize, max_seg_len: usize) -> Self {
        Self {
            target_len,
            input_len: 0,
            max_seg_len,
            allow_empty: false,
            cap: DEFAULT_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    fn case(&self) -> Case {
        if self.allow_empty {
            Case::Sequence
        } else {
            Case::NonSequence
        }
    }
}

/// Number of segmentations, by counting DP (saturating).
pub fn count_segmentations(spec: &EnumerationSpec) -> u128 {
    let tl = spec.target_len;
    let l = spec.max_seg_len;
    if spec.allow_empty {
        // ways[j]: compositions of j into the inputs processed so far
        let mut ways = vec![0u128; tl + 1];
        ways[0] = 1;
        for _ in 0..spec.input_len {
            let mut next = vec![0u128; tl + 1];
            for (j, n) in next.iter_mut().enumerate() {
                for len in 0..=l.min(j) {
                    *n = n.saturating_add(ways[j - len]);
                }
            }
            ways = next;
        }
        ways[tl]
    } else {
        if tl == 0 {
            return 0;
        }
        let mut ways = vec![0u128; tl + 1];
        ways[0] = 1;
        for j in 1..=tl {
            for len in 1..=l.min(j) {
                ways[j] = ways[j].saturating_add(ways[j - len]);
            }
        }
        ways[tl]
    }
}

/// All segment-length vectors admitted by `spec`, in lexicographic order.
pub fn enumerate_compositions(spec: &EnumerationSpec) -> Result<Vec<Vec<usize>>> {
    let count = count_segmentations(spec);
    if count > spec.cap {
        return Err(SwanError::CapExceeded {
            count,
            cap: spec.cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = Vec::new();
    if spec.allow_empty {
        fill_fixed(spec, spec.target_len, &mut cur, &mut out);
    } else if spec.target_len > 0 {
        fill_free(spec, spec.target_len, &mut cur, &mut out);
    }
    Ok(out)
}

fn fill_fixed(spec: &EnumerationSpec, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let slots = spec.input_len - cur.len();
    if slots == 0 {
        if left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for len in 0..=spec.max_seg_len.min(left) {
        if left - len > (slots - 1) * spec.max_seg_len {
            continue;
        }
        cur.push(len);
        fill_fixed(spec, left - len, cur, out);
        cur.pop();
    }
}

fn fill_free(spec: &EnumerationSpec, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if left == 0 {
        out.push(cur.clone());
        return;
    }
    for len in 1..=spec.max_seg_len.min(left) {
        cur.push(len);
        fill_free(spec, left - len, cur, out);
        cur.pop();
    }
}

/// Every segmentation of `y` admitted by `spec`.
pub fn enumerate_segmentations(spec: &EnumerationSpec, y: &OutputSeq) -> Result<Vec<Segmentation>> {
    if y.len() != spec.target_len {
        return Err(SwanError::ShapeMismatch(
            "target length differs from the enumeration spec".into(),
        ));
    }
    let comps = enumerate_compositions(spec)?;
    let mut segs = comps
        .iter()
        .map(|c| Segmentation::from_lengths(y, c))
        .collect::<Result<Vec<_>>>()?;
    for s in &segs {
        s.validate(y, spec.max_seg_len, spec.case(), spec.input_len)?;
    }
    segs.sort();
    Ok(segs)
}

fn softmax_log(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
    logits.iter().map(|v| v - m - z.ln()).collect()
}

fn project(rows: usize, cols: usize, m: &[f64], v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| (0..cols).map(|c| m[r * cols + c] * v[c]).sum())
        .collect()
}

/// `log p(segment, $ | x_t, prefix)` evaluated from scratch: the connector
/// is re-run over `prefix` and the segment cell over `segment`.
pub fn segment_log_prob(
    params: &SegmentScorerParams,
    x_t: &[f64],
    prefix: &[usize],
    segment: &[usize],
) -> f64 {
    let cfg: &ModelConfig = &params.config;
    let (e, h, hc, d) = (cfg.embed_dim, cfg.hidden, cfg.connector_hidden, cfg.input_dim);
    let emb = |tok: usize| &params.embedding.data[tok * e..(tok + 1) * e];

    let mut conn = vec![0.0; hc];
    for &tok in prefix {
        conn = params.connector.step(emb(tok), &conn);
    }
    let mut states: Vec<Vec<f64>> = params
        .layers
        .iter()
        .map(|layer| {
            let a = project(h, d, &layer.init_from_input.data, x_t);
            let b = project(h, hc, &layer.init_from_connector.data, &conn);
            a.iter().zip(&b).map(|(p, q)| p + q).collect()
        })
        .collect();

    let eos = cfg.vocab_size;
    let mut total = 0.0;
    let inputs = std::iter::once(eos).chain(segment.iter().copied());
    let targets = segment.iter().copied().chain(std::iter::once(eos));
    for (inp, target) in inputs.zip(targets) {
        let mut below = emb(inp).to_vec();
        for (layer, state) in params.layers.iter().zip(states.iter_mut()) {
            *state = layer.cell.step(&below, state);
            below = state.clone();
        }
        let logits: Vec<f64> = (0..cfg.classes())
            .map(|c| {
                params.output_bias[c]
                    + (0..h).map(|k| params.output.data[c * h + k] * below[k]).sum::<f64>()
            })
            .collect();
        total += softmax_log(&logits)[target];
    }
    total
}

/// Log-probability of one segmentation, scoring each segment independently.
pub fn segmentation_log_prob(
    x: &InputSeq,
    seg: &Segmentation,
    params: &SegmentScorerParams,
    case: Case,
) -> f64 {
    let mut prefix: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for (t, s) in seg.segments.iter().enumerate() {
        let x_t = match case {
            Case::Sequence => x.get(t),
            Case::NonSequence => x.get(0),
        };
        total += segment_log_prob(params, x_t, &prefix, s);
        prefix.extend_from_slice(s);
    }
    total
}

/// `log p(y | x)` as an explicit sum over enumerated segmentations.
pub fn brute_force_likelihood(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
    case: Case,
) -> Result<f64> {
    let l = params.config.max_seg_len;
    let spec = match case {
        Case::Sequence => EnumerationSpec::sequence(y.len(), x.len(), l),
        Case::NonSequence => {
            if y.is_empty() {
                return Err(SwanError::EmptyCase1Target);
            }
            if x.len() != 1 {
                return Err(SwanError::InvalidInput(
                    "a non-sequence input must be a single vector".into(),
                ));
            }
            EnumerationSpec::non_sequence(y.len(), l)
        }
    };
    let terms: Vec<f64> = enumerate_segmentations(&spec, y)?
        .iter()
        .map(|s| segmentation_log_prob(x, s, params, case))
        .collect();
    Ok(logsumexp(&terms))
}

/// Brute-force argmax segmentation (first in sorted order on ties).
pub fn brute_force_best(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<(Segmentation, f64)> {
    let spec = EnumerationSpec::sequence(y.len(), x.len(), params.config.max_seg_len);
    let mut best: Option<(Segmentation, f64)> = None;
    for s in enumerate_segmentations(&spec, y)? {
        let lp = segmentation_log_prob(x, &s, params, Case::Sequence);
        if best.as_ref().is_none_or(|(_, b)| lp > *b) {
            best = Some((s, lp));
        }
    }
    best.ok_or(SwanError::InfeasibleTarget)
}

/// Every output sequence over `vocab_size` tokens of length `0..=max_len`,
/// shortest first, then lexicographic.
pub fn all_outputs(vocab_size: usize, max_len: usize) -> Vec<OutputSeq> {
    let mut out = vec![OutputSeq::default()];
    let mut frontier = vec![Vec::<usize>::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * vocab_size);
        for p in &frontier {
            for v in 0..vocab_size {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned().map(OutputSeq::new));
        frontier = next;
    }
    out
}

/// Central-difference gradient of `f` at `theta`.
pub fn finite_diff_gradient<F>(mut f: F, theta: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + step;
            let plus = f(&work);
            work[i] = orig - step;
            let minus = f(&work);
            work[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Relative discrepancy used by the gradient checks:
/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    let diff = (analytic - numeric).abs();
    if diff.is_nan() || denom.is_nan() {
        f64::INFINITY
    } else {
        diff / denom
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Most probable output over every string of length `0..=T'·L`, by exact
/// likelihood; ties go to the lexicographically smaller string.
pub fn exhaustive_argmax(x: &InputSeq, params: &SegmentScorerParams) -> Result<(OutputSeq, f64)> {
    let max_len = x.len() * params.config.max_seg_len;
    let mut best = (OutputSeq::default(), f64::NEG_INFINITY);
    for y in all_outputs(params.config.vocab_size, max_len) {
        let ll = crate::model::log_likelihood(x, &y, params)?;
        if ll > best.1 || (ll == best.1 && y.ids < best.0.ids) {
            best = (y, ll);
        }
    }
    Ok(best)
}

/// Floor applied to the denominator of [`relative_error`]; entries below it
/// are compared on an absolute scale.
pub const GRADIENT_FLOOR: f64 = 1e-5;

/// Outcome of comparing analytic gradients of `log p(y|x)` with central
/// differences, per named tensor.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    /// `(tensor name, worst relative error, analytic norm)`; the input
    /// gradient appears as `input`.
    pub groups: Vec<(String, f64, f64)>,
}

impl GradientCheck {
    pub fn worst(&self) -> (&str, f64) {
        self.groups
            .iter()
            .map(|(n, e, _)| (n.as_str(), *e))
            .fold(("", 0.0), |acc, g| if g.1 > acc.1 || g.1.is_nan() { g } else { acc })
    }

    /// False when any group exceeds `tol` or is NaN.
    pub fn passes(&self, tol: f64) -> bool {
        self.groups.iter().all(|(_, e, _)| *e <= tol)
    }
}

/// Compares [`crate::model::log_likelihood_and_gradients`] against central
/// differences of `log p(y|x)` for every parameter and input coordinate.
pub fn check_gradients(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
    step: f64,
) -> Result<GradientCheck> {
    let analytic = crate::model::log_likelihood_and_gradients(x, y, params)?;
    let mut groups = Vec::new();

    let base = params.to_flat();
    let mut work = params.clone();
    let numeric = finite_diff_gradient(
        |theta| {
            work.set_flat(theta).expect("same shape");
            crate::model::log_likelihood(x, y, &work).unwrap_or(f64::NAN)
        },
        &base,
        step,
    );
    let mut off = 0;
    for t in analytic.grads.params.tensors() {
        let n = &numeric[off..off + t.data.len()];
        off += t.data.len();
        let worst = t
            .data
            .iter()
            .zip(n)
            .map(|(&a, &b)| relative_error(a, b, GRADIENT_FLOOR))
            .fold(0.0, nan_max);
        let norm = t.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        groups.push((t.name, worst, norm));
    }

    let dim = x.dim();
    let numeric_x = finite_diff_gradient(
        |flat| {
            let xi = InputSeq::from_flat(dim, flat.to_vec()).expect("same shape");
            crate::model::log_likelihood(&xi, y, params).unwrap_or(f64::NAN)
        },
        x.as_flat(),
        step,
    );
    let worst = analytic
        .grads
        .input
        .iter()
        .zip(&numeric_x)
        .map(|(&a, &b)| relative_error(a, b, GRADIENT_FLOOR))
        .fold(0.0, nan_max);
    let norm = analytic.grads.input.iter().map(|v| v * v).sum::<f64>().sqrt();
    groups.push(("input".into(), worst, norm));
    Ok(GradientCheck { groups })
}
