//! Log-domain arithmetic helpers.

/// Stable `ln(Σ exp(v))`, shifting by the maximum.
///
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Running log-sum-exp accumulator. Accumulates in a fixed order so results
/// are reproducible.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    value: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self {
            value: f64::NEG_INFINITY,
        }
    }
}

impl LogAccumulator {
    pub fn add(&mut self, v: f64) {
        self.value = log_add(self.value, v);
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// In-place log-softmax over `logits`.
pub fn log_softmax_in_place(logits: &mut [f64]) {
    let lse = logsumexp(logits);
    for v in logits.iter_mut() {
        *v -= lse;
    }
}
