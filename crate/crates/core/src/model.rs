//! Neural segment scorer.
//!
//! Builds the lattice of segment log-probabilities
//! `log p(y_{j+1:j+ℓ} $ | x_t, y_{1:j})` with one recurrent pass per
//! `(t, j)` over the longest admissible segment, and back-propagates
//! posterior-weighted segment gradients into the parameters and inputs.

use crate::config::{feasible, ModelConfig};
use crate::error::{Result, SwanError};
use crate::gru::{GruCell, GruStep};
use crate::logspace::log_softmax_in_place;
use crate::params::SegmentScorerParams;
use crate::table::SegmentTable;
use crate::vocab::{Case, InputSeq, OutputSeq};

/// Connector hidden states `c[0..=T]`; `c[j]` summarizes `y_{1:j}`.
#[derive(Debug, Clone)]
pub struct ConnectorStates {
    states: Vec<Vec<f64>>,
    steps: Vec<GruStep>,
}

impl ConnectorStates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.states[j]
    }
}

/// Runs the connector network over `y`, returning `T + 1` states.
pub fn connector_states(y: &OutputSeq, params: &SegmentScorerParams) -> ConnectorStates {
    let mut states = Vec::with_capacity(y.len() + 1);
    let mut steps = Vec::with_capacity(y.len());
    states.push(vec![0.0; params.config.connector_hidden]);
    for &tok in &y.ids {
        let step = params
            .connector
            .forward(params.embedding.row(tok), states.last().unwrap());
        states.push(step.h.clone());
        steps.push(step);
    }
    ConnectorStates { states, steps }
}

/// Advances a connector state by one emitted token.
pub fn connector_step(params: &SegmentScorerParams, state: &[f64], token: usize) -> Vec<f64> {
    params.connector.step(params.embedding.row(token), state)
}

/// Per-layer initial segment state: `P_x x_t + P_c c`.
pub fn initial_state(params: &SegmentScorerParams, x_t: &[f64], conn: &[f64]) -> Vec<Vec<f64>> {
    params
        .layers
        .iter()
        .map(|layer| {
            let mut h = vec![0.0; params.config.hidden];
            layer.init_from_input.matvec_acc(x_t, &mut h);
            layer.init_from_connector.matvec_acc(conn, &mut h);
            h
        })
        .collect()
}

/// Cached activations of one segment-cell step (all layers).
#[derive(Debug, Clone)]
struct CellStep {
    token: usize,
    layers: Vec<GruStep>,
    log_probs: Vec<f64>,
}

/// Feeds `token` through the stacked segment cell and returns the step cache.
fn cell_forward(params: &SegmentScorerParams, state: &[Vec<f64>], token: usize) -> CellStep {
    let mut layers = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let input: &[f64] = if k == 0 {
            params.embedding.row(token)
        } else {
            layers.last().map(|s: &GruStep| s.h.as_slice()).unwrap()
        };
        let step = layer.cell.forward(input, &state[k]);
        layers.push(step);
    }
    let mut logits = params.output_bias.clone();
    params
        .output
        .matvec_acc(&layers.last().unwrap().h, &mut logits);
    log_softmax_in_place(&mut logits);
    CellStep {
        token,
        layers,
        log_probs: logits,
    }
}

/// Incremental segment-cell state used by the decoder.
#[derive(Debug, Clone)]
pub struct SegmentCursor {
    state: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
}

impl SegmentCursor {
    /// Starts a segment for input `x_t` after the prefix summarized by `conn`;
    /// the begin-of-segment symbol is consumed immediately.
    pub fn start(params: &SegmentScorerParams, x_t: &[f64], conn: &[f64]) -> Self {
        let init = initial_state(params, x_t, conn);
        Self::advance(params, &init, params.config.vocab_size)
    }

    fn advance(params: &SegmentScorerParams, state: &[Vec<f64>], token: usize) -> Self {
        let step = cell_forward(params, state, token);
        Self {
            state: step.layers.into_iter().map(|s| s.h).collect(),
            log_probs: step.log_probs,
        }
    }

    /// Log-distribution over the next symbol (`V` tokens, then end-of-segment).
    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn push(&self, params: &SegmentScorerParams, token: usize) -> Self {
        Self::advance(params, &self.state, token)
    }
}

/// One shared pass for a fixed `(t, j)`.
#[derive(Debug, Clone)]
struct RowPass {
    steps: Vec<CellStep>,
}

/// Runs the segment cell over `tail` (the longest admissible segment) and
/// fills `out[ℓ]` with the log-probability of the length-`ℓ` prefix of
/// `tail` followed by end-of-segment.
fn run_row(
    params: &SegmentScorerParams,
    x_t: &[f64],
    conn: &[f64],
    tail: &[usize],
    out: &mut [f64],
) -> RowPass {
    let eos = params.config.vocab_size;
    let init = initial_state(params, x_t, conn);
    let mut steps: Vec<CellStep> = Vec::with_capacity(tail.len() + 1);
    let mut tokens = 0.0;
    for s in 0..=tail.len() {
        let input = if s == 0 { eos } else { tail[s - 1] };
        let step = {
            let state: Vec<Vec<f64>> = match steps.last() {
                Some(prev) => prev.layers.iter().map(|g| g.h.clone()).collect(),
                None => init.clone(),
            };
            cell_forward(params, &state, input)
        };
        out[s] = tokens + step.log_probs[eos];
        if s < tail.len() {
            tokens += step.log_probs[tail[s]];
        }
        steps.push(step);
    }
    RowPass { steps }
}

/// Log-probabilities of every candidate segment plus the activations needed
/// to back-propagate through them.
#[derive(Debug, Clone)]
pub struct SegmentLattice {
    scores: SegmentTable,
    connector: ConnectorStates,
    rows: Vec<RowPass>,
}

impl SegmentLattice {
    /// `logp[t][j][ℓ]` table (`-inf` outside the admissible region).
    pub fn scores(&self) -> &SegmentTable {
        &self.scores
    }

    pub fn into_scores(self) -> SegmentTable {
        self.scores
    }

    pub fn connector(&self) -> &ConnectorStates {
        &self.connector
    }

    /// Number of recurrent passes performed (one per `(t, j)`).
    pub fn passes(&self) -> usize {
        self.rows.len()
    }

    fn row(&self, t: usize, j: usize) -> &RowPass {
        &self.rows[t * (self.scores.target_len() + 1) + j]
    }
}

fn check_shapes(x: &InputSeq, y: &OutputSeq, cfg: &ModelConfig) -> Result<()> {
    if x.dim() != cfg.input_dim {
        return Err(SwanError::ShapeMismatch(format!(
            "input dimension {} does not match model input dimension {}",
            x.dim(),
            cfg.input_dim
        )));
    }
    y.validate(cfg.vocab_size)
}

fn build_lattice(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
    max_seg_len: usize,
) -> Result<SegmentLattice> {
    let tp = x.len();
    let tlen = y.len();
    let connector = connector_states(y, params);
    let mut scores = SegmentTable::new(tp, tlen, max_seg_len, f64::NEG_INFINITY);
    let mut rows = Vec::with_capacity(tp * (tlen + 1));
    let mut buf = vec![0.0; max_seg_len + 1];
    for t in 0..tp {
        for j in 0..=tlen {
            let lmax = max_seg_len.min(tlen - j);
            let tail = &y.ids[j..j + lmax];
            let pass = run_row(params, x.get(t), connector.get(j), tail, &mut buf);
            for (len, &v) in buf[..=lmax].iter().enumerate() {
                if !v.is_finite() {
                    return Err(SwanError::NonFinite { t, j });
                }
                scores.set(t, j, len, v);
            }
            rows.push(pass);
        }
    }
    Ok(SegmentLattice {
        scores,
        connector,
        rows,
    })
}

/// Segment lattice for a sequence input, using the shared longest-segment pass.
pub fn segment_lattice(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<SegmentLattice> {
    let cfg = &params.config;
    check_shapes(x, y, cfg)?;
    if !feasible(cfg, y.len(), x.len(), Case::Sequence) {
        return Err(SwanError::Infeasible {
            target_len: y.len(),
            input_len: x.len(),
            max_seg_len: cfg.max_seg_len,
        });
    }
    build_lattice(x, y, params, cfg.max_seg_len)
}

/// Segment lattice for a single input vector (`x` of length one). Length-0
/// entries are present but unused by the non-sequence recursion.
pub fn case1_lattice(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<SegmentLattice> {
    let cfg = &params.config;
    check_shapes(x, y, cfg)?;
    if x.len() != 1 {
        return Err(SwanError::InvalidInput(format!(
            "a non-sequence input must be a single vector, got {} elements",
            x.len()
        )));
    }
    if y.is_empty() {
        return Err(SwanError::EmptyCase1Target);
    }
    build_lattice(x, y, params, cfg.max_seg_len)
}

/// Same table as [`segment_lattice`] but every segment is scored with its own
/// recurrent pass (`O(T'·T·L²)` cell steps). Connector states are shared.
pub fn naive_segment_lattice(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<SegmentTable> {
    let cfg = &params.config;
    check_shapes(x, y, cfg)?;
    if !feasible(cfg, y.len(), x.len(), Case::Sequence) {
        return Err(SwanError::Infeasible {
            target_len: y.len(),
            input_len: x.len(),
            max_seg_len: cfg.max_seg_len,
        });
    }
    let tlen = y.len();
    let connector = connector_states(y, params);
    let mut scores = SegmentTable::new(x.len(), tlen, cfg.max_seg_len, f64::NEG_INFINITY);
    let mut buf = vec![0.0; cfg.max_seg_len + 1];
    for t in 0..x.len() {
        for j in 0..=tlen {
            for len in 0..=cfg.max_seg_len.min(tlen - j) {
                run_row(params, x.get(t), connector.get(j), &y.ids[j..j + len], &mut buf);
                if !buf[len].is_finite() {
                    return Err(SwanError::NonFinite { t, j });
                }
                scores.set(t, j, len, buf[len]);
            }
        }
    }
    Ok(scores)
}

/// Gradients of `log p(y|x)` with respect to the parameters and the inputs.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: SegmentScorerParams,
    /// `T' × d`, row-major.
    pub input: Vec<f64>,
}

/// Back-propagates `Σ_{t,j,ℓ} w[t][j][ℓ] · ∂ logp[t][j][ℓ]` through the lattice.
///
/// Each `(t, j)` row is differentiated once: the softmax at step `s` receives
/// weight `Σ_{ℓ>s} w[ℓ]` on the emitted token and `w[s]` on end-of-segment.
pub fn accumulate_gradients(
    lattice: &SegmentLattice,
    weights: &SegmentTable,
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<Gradients> {
    let mut grad = params.zeros_like();
    let mut dx = vec![0.0; x.len() * x.dim()];
    accumulate_gradients_into(lattice, weights, x, y, params, &mut grad, &mut dx)?;
    Ok(Gradients {
        params: grad,
        input: dx,
    })
}

/// As [`accumulate_gradients`], adding into caller-owned buffers.
pub fn accumulate_gradients_into(
    lattice: &SegmentLattice,
    weights: &SegmentTable,
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
    grad: &mut SegmentScorerParams,
    dx: &mut [f64],
) -> Result<()> {
    let scores = lattice.scores();
    if !weights.same_shape(scores) {
        return Err(SwanError::ShapeMismatch(format!(
            "weights are {}x{}x{} but lattice is {}x{}x{}",
            weights.input_len(),
            weights.target_len() + 1,
            weights.max_seg_len() + 1,
            scores.input_len(),
            scores.target_len() + 1,
            scores.max_seg_len() + 1
        )));
    }
    if x.len() != scores.input_len() || y.len() != scores.target_len() {
        return Err(SwanError::ShapeMismatch(
            "input/target lengths differ from the lattice".into(),
        ));
    }
    if dx.len() != x.len() * x.dim() {
        return Err(SwanError::ShapeMismatch("input gradient buffer has wrong size".into()));
    }
    let cfg = params.config;
    let tlen = y.len();
    let mut d_conn = vec![vec![0.0; cfg.connector_hidden]; tlen + 1];
    let mut any_conn = false;

    for t in 0..x.len() {
        for j in 0..=tlen {
            let w = weights.row(t, j);
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            let pass = lattice.row(t, j);
            let d_init = backprop_row(params, grad, pass, w, &y.ids[j..j + w.len() - 1]);
            let x_t = x.get(t);
            let dx_t = &mut dx[t * x.dim()..(t + 1) * x.dim()];
            for (k, (layer, dh0)) in params.layers.iter().zip(&d_init).enumerate() {
                grad.layers[k].init_from_input.add_outer(dh0, x_t);
                layer.init_from_input.matvec_t_acc(dh0, dx_t);
                grad.layers[k]
                    .init_from_connector
                    .add_outer(dh0, lattice.connector.get(j));
                layer.init_from_connector.matvec_t_acc(dh0, &mut d_conn[j]);
            }
            any_conn |= j > 0;
        }
    }

    if any_conn {
        let conn = &lattice.connector;
        let mut carry = vec![0.0; cfg.connector_hidden];
        for j in (1..=tlen).rev() {
            let dh: Vec<f64> = carry.iter().zip(&d_conn[j]).map(|(a, b)| a + b).collect();
            let tok = y.ids[j - 1];
            let mut d_emb = vec![0.0; cfg.embed_dim];
            let mut d_prev = vec![0.0; cfg.connector_hidden];
            params.connector.backward(
                &conn.steps[j - 1],
                params.embedding.row(tok),
                &dh,
                &mut grad.connector,
                &mut d_emb,
                &mut d_prev,
            );
            add_into(grad.embedding.row_mut(tok), &d_emb);
            carry = d_prev;
        }
    }
    Ok(())
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Backward through one shared row; returns gradients w.r.t. the per-layer
/// initial states.
fn backprop_row(
    params: &SegmentScorerParams,
    grad: &mut SegmentScorerParams,
    pass: &RowPass,
    w: &[f64],
    tail: &[usize],
) -> Vec<Vec<f64>> {
    let cfg = params.config;
    let eos = cfg.vocab_size;
    let nl = params.layers.len();
    let lmax = tail.len();

    // token weights: a_s = Σ_{ℓ > s} w[ℓ]
    let mut token_w = vec![0.0; lmax + 1];
    let mut acc = 0.0;
    for s in (0..lmax).rev() {
        acc += w[s + 1];
        token_w[s] = acc;
    }

    let mut carry: Vec<Vec<f64>> = vec![vec![0.0; cfg.hidden]; nl];
    let mut dlogits = vec![0.0; cfg.classes()];
    for s in (0..=lmax).rev() {
        let step = &pass.steps[s];
        let (a, e) = (token_w[s], w[s]);
        let total = a + e;
        for (c, d) in dlogits.iter_mut().enumerate() {
            *d = -total * step.log_probs[c].exp();
        }
        dlogits[eos] += e;
        if s < lmax {
            dlogits[tail[s]] += a;
        }
        let top_h = &step.layers[nl - 1].h;
        grad.output.add_outer(&dlogits, top_h);
        add_into(&mut grad.output_bias, &dlogits);
        params.output.matvec_t_acc(&dlogits, &mut carry[nl - 1]);

        let mut d_below: Option<Vec<f64>> = None;
        for k in (0..nl).rev() {
            let mut dh = std::mem::replace(&mut carry[k], vec![0.0; cfg.hidden]);
            if let Some(extra) = d_below.take() {
                add_into(&mut dh, &extra);
            }
            let cell: &GruCell = &params.layers[k].cell;
            let input: &[f64] = if k == 0 {
                params.embedding.row(step.token)
            } else {
                &step.layers[k - 1].h
            };
            let mut din = vec![0.0; cell.input];
            let mut dprev = vec![0.0; cfg.hidden];
            cell.backward(
                &step.layers[k],
                input,
                &dh,
                &mut grad.layers[k].cell,
                &mut din,
                &mut dprev,
            );
            carry[k] = dprev;
            if k == 0 {
                add_into(grad.embedding.row_mut(step.token), &din);
            } else {
                d_below = Some(din);
            }
        }
    }
    carry
}

/// `log p(y | x)` together with its gradients, through the lattice and the
/// exact marginalization.
#[derive(Debug, Clone)]
pub struct LossAndGradients {
    pub log_likelihood: f64,
    pub grads: Gradients,
}

/// Convenience: lattice → forward/backward → weights → gradients.
pub fn log_likelihood_and_gradients(
    x: &InputSeq,
    y: &OutputSeq,
    params: &SegmentScorerParams,
) -> Result<LossAndGradients> {
    let lattice = segment_lattice(x, y, params)?;
    let l = params.config.max_seg_len;
    let ab = crate::marginal::AlphaBeta::compute(lattice.scores(), l);
    let ll = ab.log_likelihood();
    let weights = ab.gradient_weights(lattice.scores())?;
    let grads = accumulate_gradients(&lattice, weights.table(), x, y, params)?;
    Ok(LossAndGradients {
        log_likelihood: ll,
        grads,
    })
}

/// `log p(y | x)` for a sequence input.
pub fn log_likelihood(x: &InputSeq, y: &OutputSeq, params: &SegmentScorerParams) -> Result<f64> {
    let cfg = &params.config;
    if !feasible(cfg, y.len(), x.len(), Case::Sequence) {
        check_shapes(x, y, cfg)?;
        return Ok(f64::NEG_INFINITY);
    }
    let lattice = segment_lattice(x, y, params)?;
    Ok(crate::marginal::AlphaBeta::compute(lattice.scores(), cfg.max_seg_len).log_likelihood())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::uniform_vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(v: usize, l: usize, layers: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: v,
            input_dim: 2,
            hidden: 3,
            connector_hidden: 2,
            max_seg_len: l,
            embed_dim: 2,
            layers,
        }
    }

    fn random_x(tp: usize, d: usize, seed: u64) -> InputSeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        InputSeq::from_flat(d, uniform_vec(tp * d, 1.0, &mut rng)).unwrap()
    }

    #[test]
    fn connector_empty_target() {
        let p = SegmentScorerParams::init(cfg(2, 2, 1), 0).unwrap();
        let c = connector_states(&OutputSeq::default(), &p);
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(0), &[0.0, 0.0]);
    }

    #[test]
    fn connector_zero_weights_constant() {
        let p = SegmentScorerParams::zeros(cfg(2, 2, 1));
        let c = connector_states(&OutputSeq::new(vec![0, 1, 1, 0]), &p);
        let fixed = c.get(0).to_vec();
        for j in 0..c.len() {
            assert_eq!(c.get(j), fixed.as_slice());
        }
    }

    #[test]
    fn connector_prefix_property() {
        let p = SegmentScorerParams::init_uniform(cfg(3, 2, 1), 5, 0.5).unwrap();
        let full = connector_states(&OutputSeq::new(vec![2, 0, 1]), &p);
        let pre = connector_states(&OutputSeq::new(vec![2, 0]), &p);
        assert_eq!(full.get(2), pre.get(2));
    }

    #[test]
    fn zero_output_layer_gives_uniform_segments() {
        let mut p = SegmentScorerParams::init_uniform(cfg(2, 2, 1), 9, 0.5).unwrap();
        p.output.data.iter_mut().for_each(|v| *v = 0.0);
        p.output_bias.iter_mut().for_each(|v| *v = 0.0);
        let x = random_x(2, 2, 1);
        let y = OutputSeq::new(vec![1, 0]);
        let lat = segment_lattice(&x, &y, &p).unwrap();
        let ln3 = 3f64.ln();
        for (_, _, len, v) in lat.scores().cells() {
            assert!((v + (len as f64 + 1.0) * ln3).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_equals_naive_exactly() {
        for layers in [1, 2] {
            let p = SegmentScorerParams::init_uniform(cfg(3, 3, layers), 11, 0.6).unwrap();
            let x = random_x(3, 2, 2);
            let y = OutputSeq::new(vec![2, 0, 1, 1, 0]);
            let shared = segment_lattice(&x, &y, &p).unwrap();
            let naive = naive_segment_lattice(&x, &y, &p).unwrap();
            assert_eq!(shared.scores(), &naive);
            assert_eq!(shared.passes(), 3 * 6);
        }
    }

    #[test]
    fn entries_are_log_probabilities() {
        let p = SegmentScorerParams::init_uniform(cfg(2, 2, 1), 3, 0.5).unwrap();
        let x = random_x(2, 2, 3);
        let y = OutputSeq::new(vec![0, 1]);
        let lat = segment_lattice(&x, &y, &p).unwrap();
        assert_eq!(lat.scores().cells().count(), 2 * (3 + 2 + 1));
        for (_, _, _, v) in lat.scores().cells() {
            assert!(v < 0.0 && v.exp() > 0.0);
        }
    }

    #[test]
    fn lattice_rows_ignore_later_tokens() {
        let p = SegmentScorerParams::init_uniform(cfg(3, 2, 1), 8, 0.5).unwrap();
        let x = random_x(3, 2, 4);
        let a = segment_lattice(&x, &OutputSeq::new(vec![0, 1, 2, 2, 1]), &p).unwrap();
        let b = segment_lattice(&x, &OutputSeq::new(vec![0, 1, 2, 0, 0]), &p).unwrap();
        for t in 0..3 {
            for j in 0..=5 {
                for len in 0..=2 {
                    if j + len + 1 < 4 {
                        assert_eq!(a.scores().get(t, j, len), b.scores().get(t, j, len));
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_rows_normalized() {
        let p = SegmentScorerParams::init_uniform(cfg(4, 2, 2), 1, 1.0).unwrap();
        let cur = SegmentCursor::start(&p, &[0.3, -0.2], &[0.1, 0.4]);
        let s: f64 = cur.log_probs().iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let next = cur.push(&p, 2);
        let s: f64 = next.log_probs().iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_shape_errors() {
        let p = SegmentScorerParams::init(cfg(2, 1, 1), 0).unwrap();
        let x = random_x(2, 2, 0);
        assert!(matches!(
            segment_lattice(&x, &OutputSeq::new(vec![0, 0, 0]), &p),
            Err(SwanError::Infeasible { .. })
        ));
        assert!(segment_lattice(&random_x(2, 3, 0), &OutputSeq::new(vec![0]), &p).is_err());
        assert!(segment_lattice(&x, &OutputSeq::new(vec![2]), &p).is_err());
        assert_eq!(
            log_likelihood(&x, &OutputSeq::new(vec![0, 0, 0]), &p).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            case1_lattice(&random_x(1, 2, 0), &OutputSeq::default(), &p),
            Err(SwanError::EmptyCase1Target)
        ));
    }

    #[test]
    fn nan_weights_reported_with_position() {
        let mut p = SegmentScorerParams::init(cfg(2, 2, 1), 0).unwrap();
        p.output_bias[0] = f64::NAN;
        let err = segment_lattice(&random_x(2, 2, 0), &OutputSeq::new(vec![1]), &p).unwrap_err();
        assert!(matches!(err, SwanError::NonFinite { t: 0, j: 0 }));
    }

    #[test]
    fn zero_weights_zero_gradients() {
        let p = SegmentScorerParams::init_uniform(cfg(2, 2, 1), 2, 0.5).unwrap();
        let x = random_x(2, 2, 2);
        let y = OutputSeq::new(vec![0, 1, 1]);
        let lat = segment_lattice(&x, &y, &p).unwrap();
        let w = SegmentTable::new(2, 3, 2, 0.0);
        let g = accumulate_gradients(&lat, &w, &x, &y, &p).unwrap();
        assert!(g.params.to_flat().iter().all(|&v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
        let bad = SegmentTable::new(2, 2, 2, 0.0);
        assert!(accumulate_gradients(&lat, &bad, &x, &y, &p).is_err());
    }
}
