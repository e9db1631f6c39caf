//! Exact marginalization over segmentations and monotonic alignments.
//!
//! All recursions run in natural-log space. With `logp[t][j][ℓ]` the log
//! probability that input `t` (1-based below) emits `y_{j+1:j+ℓ}`:
//!
//! ```text
//! α_0(0) = 0,  α_t(j) = lse_{ℓ ≤ min(L, j)} α_{t−1}(j−ℓ) + logp[t][j−ℓ][ℓ]
//! β_T'(T) = 0, β_t(j) = lse_{ℓ ≤ min(L, T−j)} β_{t+1}(j+ℓ) + logp[t+1][j][ℓ]
//! ```

use crate::error::{Result, SwanError};
use crate::logspace::{logsumexp, LogAccumulator};
use crate::table::SegmentTable;
use crate::vocab::{OutputSeq, Segmentation};


/// Log-domain `α`/`β` tables of shape `(T' + 1) × (T + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBeta {
    input_len: usize,
    target_len: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn effective_len(lattice: &SegmentTable, max_seg_len: usize) -> usize {
    max_seg_len.min(lattice.max_seg_len())
}

/// Forward table, row-major `(T' + 1) × (T + 1)`. `max_seg_len` may mask a
/// lattice built with a larger cap.
pub fn forward(lattice: &SegmentTable, max_seg_len: usize) -> Vec<f64> {
    let tp = lattice.input_len();
    let tl = lattice.target_len();
    let l = effective_len(lattice, max_seg_len);
    let w = tl + 1;
    let mut alpha = vec![f64::NEG_INFINITY; (tp + 1) * w];
    alpha[0] = 0.0;
    for t in 1..=tp {
        for j in 0..=tl {
            let mut acc = LogAccumulator::default();
            for len in 0..=l.min(j) {
                let prev = alpha[(t - 1) * w + j - len];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                acc.add(prev + lattice.get(t - 1, j - len, len));
            }
            alpha[t * w + j] = acc.value();
        }
    }
    alpha
}

/// Backward table, row-major `(T' + 1) × (T + 1)`.
pub fn backward(lattice: &SegmentTable, max_seg_len: usize) -> Vec<f64> {
    let tp = lattice.input_len();
    let tl = lattice.target_len();
    let l = effective_len(lattice, max_seg_len);
    let w = tl + 1;
    let mut beta = vec![f64::NEG_INFINITY; (tp + 1) * w];
    beta[tp * w + tl] = 0.0;
    for t in (0..tp).rev() {
        for j in 0..=tl {
            let mut acc = LogAccumulator::default();
            for len in 0..=l.min(tl - j) {
                let next = beta[(t + 1) * w + j + len];
                if next == f64::NEG_INFINITY {
                    continue;
                }
                acc.add(next + lattice.get(t, j, len));
            }
            beta[t * w + j] = acc.value();
        }
    }
    beta
}

impl AlphaBeta {
    /// Runs both recursions over `lattice`, masking segments longer than
    /// `max_seg_len`.
    pub fn compute(lattice: &SegmentTable, max_seg_len: usize) -> Self {
        Self {
            input_len: lattice.input_len(),
            target_len: lattice.target_len(),
            alpha: forward(lattice, max_seg_len),
            beta: backward(lattice, max_seg_len),
        }
    }

    pub fn alpha(&self, t: usize, j: usize) -> f64 {
        self.alpha[t * (self.target_len + 1) + j]
    }

    pub fn beta(&self, t: usize, j: usize) -> f64 {
        self.beta[t * (self.target_len + 1) + j]
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    /// `log p(y | x) = log α_{T'}(T)`; `-inf` when the target is infeasible.
    pub fn log_likelihood(&self) -> f64 {
        self.alpha(self.input_len, self.target_len)
    }

    /// `log Σ_j α_t(j) β_t(j)`, which equals the log-likelihood for every `t`.
    pub fn check_partition(&self, t: usize) -> f64 {
        let terms: Vec<f64> = (0..=self.target_len)
            .map(|j| self.alpha(t, j) + self.beta(t, j))
            .collect();
        logsumexp(&terms)
    }

    /// Posterior weight of every segment:
    /// `w[t][j][ℓ] = exp(α_{t}(j) + logp[t][j][ℓ] + β_{t+1}(j+ℓ) − log p)` with
    /// `t` the zero-based lattice row.
    pub fn gradient_weights(&self, lattice: &SegmentTable) -> Result<GradientWeights> {
        let ll = self.log_likelihood();
        if !ll.is_finite() {
            return Err(SwanError::InfeasibleTarget);
        }
        if lattice.input_len() != self.input_len || lattice.target_len() != self.target_len {
            return Err(SwanError::ShapeMismatch(
                "lattice does not match the forward/backward tables".into(),
            ));
        }
        let mut w = SegmentTable::new(
            lattice.input_len(),
            lattice.target_len(),
            lattice.max_seg_len(),
            0.0,
        );
        for t in 0..self.input_len {
            for j in 0..=self.target_len {
                let a = self.alpha(t, j);
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for len in 0..=lattice.max_len_at(j) {
                    let b = self.beta(t + 1, j + len);
                    let lp = lattice.get(t, j, len);
                    if b == f64::NEG_INFINITY || lp == f64::NEG_INFINITY {
                        continue;
                    }
                    w.set(t, j, len, (a + lp + b - ll).exp());
                }
            }
        }
        Ok(GradientWeights(w))
    }
}

/// Posterior segment weights, shaped like the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientWeights(SegmentTable);

impl GradientWeights {
    pub fn table(&self) -> &SegmentTable {
        &self.0
    }

    pub fn get(&self, t: usize, j: usize, len: usize) -> f64 {
        self.0.get(t, j, len)
    }

    /// `Σ_{j,ℓ} w[t][j][ℓ]`.
    pub fn row_sum(&self, t: usize) -> f64 {
        (0..=self.0.target_len())
            .flat_map(|j| self.0.row(t, j).iter().copied())
            .sum()
    }
}

/// `log Σ_a Π p(a_i)` over segmentations into any number of non-empty
/// segments of length at most `max_seg_len`. `lattice1[j][ℓ]` scores the
/// segment `y_{j+1:j+ℓ}`; entries with `ℓ = 0` are ignored.
pub fn case1_log_likelihood(lattice1: &[Vec<f64>], target_len: usize, max_seg_len: usize) -> Result<f64> {
    Ok(*case1_forward(lattice1, target_len, max_seg_len)?.last().unwrap())
}

fn case1_check(lattice1: &[Vec<f64>], target_len: usize) -> Result<()> {
    if target_len == 0 {
        return Err(SwanError::EmptyCase1Target);
    }
    if lattice1.len() < target_len {
        return Err(SwanError::ShapeMismatch(format!(
            "lattice has {} segment starts for a target of length {target_len}",
            lattice1.len()
        )));
    }
    Ok(())
}

fn case1_entry(lattice1: &[Vec<f64>], j: usize, len: usize) -> f64 {
    lattice1[j].get(len).copied().unwrap_or(f64::NEG_INFINITY)
}

/// Forward table `log A(0..=T)` of the non-sequence recursion.
pub fn case1_forward(lattice1: &[Vec<f64>], target_len: usize, max_seg_len: usize) -> Result<Vec<f64>> {
    case1_check(lattice1, target_len)?;
    let mut a = vec![f64::NEG_INFINITY; target_len + 1];
    a[0] = 0.0;
    for j in 1..=target_len {
        let mut acc = LogAccumulator::default();
        for len in 1..=max_seg_len.min(j) {
            if a[j - len] == f64::NEG_INFINITY {
                continue;
            }
            acc.add(a[j - len] + case1_entry(lattice1, j - len, len));
        }
        a[j] = acc.value();
    }
    Ok(a)
}

/// Max-probability non-sequence segmentation.
pub fn case1_best_segmentation(
    lattice1: &[Vec<f64>],
    y: &OutputSeq,
    max_seg_len: usize,
) -> Result<(Segmentation, f64)> {
    let tl = y.len();
    case1_check(lattice1, tl)?;
    let mut best = vec![f64::NEG_INFINITY; tl + 1];
    let mut back = vec![0usize; tl + 1];
    best[0] = 0.0;
    for j in 1..=tl {
        for len in 1..=max_seg_len.min(j) {
            let cand = best[j - len] + case1_entry(lattice1, j - len, len);
            if cand > best[j] {
                best[j] = cand;
                back[j] = len;
            }
        }
    }
    if best[tl] == f64::NEG_INFINITY {
        return Err(SwanError::InfeasibleTarget);
    }
    let mut lengths = Vec::new();
    let mut j = tl;
    while j > 0 {
        lengths.push(back[j]);
        j -= back[j];
    }
    lengths.reverse();
    Ok((Segmentation::from_lengths(y, &lengths)?, best[tl]))
}

/// Viterbi version of the forward recursion with backpointers.
///
/// On ties the shorter segment for the later input wins, i.e. the
/// backpointer keeps the smallest `ℓ`.
pub fn best_segmentation(
    lattice: &SegmentTable,
    y: &OutputSeq,
    max_seg_len: usize,
) -> Result<(Segmentation, f64)> {
    let tp = lattice.input_len();
    let tl = lattice.target_len();
    if y.len() != tl {
        return Err(SwanError::ShapeMismatch(
            "target length differs from the lattice".into(),
        ));
    }
    let l = effective_len(lattice, max_seg_len);
    if tl > tp * l {
        return Err(SwanError::Infeasible {
            target_len: tl,
            input_len: tp,
            max_seg_len: l,
        });
    }
    let w = tl + 1;
    let mut best = vec![f64::NEG_INFINITY; (tp + 1) * w];
    let mut back = vec![0usize; (tp + 1) * w];
    best[0] = 0.0;
    for t in 1..=tp {
        for j in 0..=tl {
            let mut top = f64::NEG_INFINITY;
            let mut arg = 0;
            for len in 0..=l.min(j) {
                let prev = best[(t - 1) * w + j - len];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + lattice.get(t - 1, j - len, len);
                if cand > top {
                    top = cand;
                    arg = len;
                }
            }
            best[t * w + j] = top;
            back[t * w + j] = arg;
        }
    }
    let score = best[tp * w + tl];
    if score == f64::NEG_INFINITY {
        return Err(SwanError::InfeasibleTarget);
    }
    let mut lengths = vec![0; tp];
    let mut j = tl;
    for t in (1..=tp).rev() {
        let len = back[t * w + j];
        lengths[t - 1] = len;
        j -= len;
    }
    Ok((Segmentation::from_lengths(y, &lengths)?, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_lattice(tp: usize, tl: usize, l: usize, v: usize) -> SegmentTable {
        let mut tab = SegmentTable::new(tp, tl, l, f64::NEG_INFINITY);
        let lc = ((v + 1) as f64).ln();
        for t in 0..tp {
            for j in 0..=tl {
                for len in 0..=tab.max_len_at(j) {
                    tab.set(t, j, len, -(len as f64 + 1.0) * lc);
                }
            }
        }
        tab
    }

    #[test]
    fn uniform_forward_backward() {
        let lat = uniform_lattice(2, 2, 2, 2);
        let ab = AlphaBeta::compute(&lat, 2);
        let expect = (1.0f64 / 27.0).ln();
        assert_eq!(ab.alpha(0, 0), 0.0);
        assert!((ab.log_likelihood() - expect).abs() < 1e-12);
        assert!((ab.beta(0, 0) - expect).abs() < 1e-12);
        assert_eq!(ab.beta(2, 2), 0.0);
        assert_eq!(ab.beta(2, 0), f64::NEG_INFINITY);
        assert_eq!(ab.beta(2, 1), f64::NEG_INFINITY);
        assert_eq!(ab.alpha(0, 1), f64::NEG_INFINITY);
        for t in 0..=2 {
            assert!((ab.check_partition(t) - expect).abs() < 1e-12);
        }
        let w = ab.gradient_weights(&lat).unwrap();
        for len in 0..=2 {
            assert!((w.get(0, 0, len) - 1.0 / 3.0).abs() < 1e-12);
        }
        for t in 0..2 {
            assert!((w.row_sum(t) - 1.0).abs() < 1e-12);
        }
        assert_eq!(w.get(0, 1, 2), 0.0);
    }

    #[test]
    fn sleep_only_chain() {
        let mut lat = SegmentTable::new(2, 0, 2, f64::NEG_INFINITY);
        lat.set(0, 0, 0, 0.5f64.ln());
        lat.set(1, 0, 0, 0.5f64.ln());
        let ab = AlphaBeta::compute(&lat, 2);
        assert!((ab.alpha(2, 0) - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn infeasible_is_neg_inf_and_weights_error() {
        let lat = uniform_lattice(1, 3, 3, 2);
        let ab = AlphaBeta::compute(&lat, 2);
        assert_eq!(ab.log_likelihood(), f64::NEG_INFINITY);
        assert!(matches!(
            ab.gradient_weights(&lat),
            Err(SwanError::InfeasibleTarget)
        ));
        let y = OutputSeq::new(vec![0, 0, 0]);
        assert!(best_segmentation(&lat, &y, 2).is_err());
    }

    #[test]
    fn case1_examples() {
        let lat = uniform_lattice(1, 3, 3, 2).input_row(0);
        let ll = case1_log_likelihood(&lat, 3, 3).unwrap();
        assert!((ll - (16.0f64 / 729.0).ln()).abs() < 1e-12);

        let one = uniform_lattice(1, 1, 3, 2).input_row(0);
        assert_eq!(case1_log_likelihood(&one, 1, 3).unwrap(), one[0][1]);

        let mut forced = SegmentTable::new(1, 3, 1, f64::NEG_INFINITY);
        for (j, v) in [-0.5, -1.25, -2.0].into_iter().enumerate() {
            forced.set(0, j, 1, v);
            forced.set(0, j, 0, -9.0);
        }
        let ll = case1_log_likelihood(&forced.input_row(0), 3, 1).unwrap();
        assert!((ll - (-3.75)).abs() < 1e-15);

        assert!(matches!(
            case1_log_likelihood(&[vec![0.0]], 0, 2),
            Err(SwanError::EmptyCase1Target)
        ));
    }

    #[test]
    fn case1_best_picks_single_segment_when_favoured() {
        let lat = uniform_lattice(1, 3, 3, 2).input_row(0);
        let y = OutputSeq::new(vec![0, 1, 0]);
        let (seg, score) = case1_best_segmentation(&lat, &y, 3).unwrap();
        assert_eq!(seg.lengths(), vec![3]);
        assert!((score - 4.0 * -(3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn forced_segmentation_when_saturated() {
        // T = T'·L leaves exactly one alignment
        let mut lat = uniform_lattice(3, 6, 2, 2);
        lat.set(0, 0, 0, -0.001);
        let y = OutputSeq::new(vec![0, 1, 1, 0, 1, 0]);
        let (seg, score) = best_segmentation(&lat, &y, 2).unwrap();
        assert_eq!(seg.lengths(), vec![2, 2, 2]);
        let ll = AlphaBeta::compute(&lat, 2).log_likelihood();
        assert!((score - ll).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_leftmost_shortest_for_later_inputs() {
        // uniform lattice: (0,2), (1,1), (2,0) all tie
        let lat = uniform_lattice(2, 2, 2, 2);
        let y = OutputSeq::new(vec![0, 0]);
        let (seg, _) = best_segmentation(&lat, &y, 2).unwrap();
        assert_eq!(seg.lengths(), vec![2, 0]);
    }

    #[test]
    fn smaller_cap_never_increases_likelihood() {
        let lat = uniform_lattice(3, 4, 3, 2);
        let l3 = AlphaBeta::compute(&lat, 3).log_likelihood();
        let l2 = AlphaBeta::compute(&lat, 2).log_likelihood();
        assert!(l2 <= l3);
    }
}
