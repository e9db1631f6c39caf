use serde::{Deserialize, Serialize};

use crate::error::{Result, SwanError};
use crate::vocab::Case;

/// Shape of a segment scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output vocabulary size `V` (the end-of-segment class is extra).
    pub vocab_size: usize,
    /// Input feature dimension `d`.
    pub input_dim: usize,
    /// Hidden width of the segment recurrent cell.
    pub hidden: usize,
    /// Hidden width of the connector network.
    pub connector_hidden: usize,
    /// Maximum segment length `L`.
    pub max_seg_len: usize,
    /// Token embedding width.
    pub embed_dim: usize,
    /// Number of stacked segment cells.
    #[serde(default = "default_layers")]
    pub layers: usize,
}

fn default_layers() -> usize {
    1
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("connector_hidden", self.connector_hidden),
            ("max_seg_len", self.max_seg_len),
            ("embed_dim", self.embed_dim),
            ("layers", self.layers),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(SwanError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Number of softmax classes (tokens plus end-of-segment).
    pub fn classes(&self) -> usize {
        self.vocab_size + 1
    }

    pub fn end_of_segment(&self) -> usize {
        self.vocab_size
    }
}

/// Whether a target of `target_len` tokens has any segmentation.
///
/// Sequence inputs need `T ≤ T'·L`; a non-sequence input needs `T ≥ 1` and
/// ignores `input_len`.
pub fn feasible(cfg: &ModelConfig, target_len: usize, input_len: usize, case: Case) -> bool {
    match case {
        Case::Sequence => target_len <= input_len.saturating_mul(cfg.max_seg_len),
        Case::NonSequence => target_len >= 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: 2,
            input_dim: 2,
            hidden: 3,
            connector_hidden: 2,
            max_seg_len: l,
            embed_dim: 2,
            layers: 1,
        }
    }

    #[test]
    fn feasibility_examples() {
        assert!(feasible(&cfg(3), 3, 2, Case::Sequence));
        assert!(!feasible(&cfg(2), 5, 2, Case::Sequence));
        assert!(feasible(&cfg(1), 4, 4, Case::Sequence));
        assert!(feasible(&cfg(1), 0, 4, Case::Sequence));
        assert!(!feasible(&cfg(1), 0, 4, Case::NonSequence));
        assert!(feasible(&cfg(1), 9, 0, Case::NonSequence));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(cfg(0).validate().is_err());
        assert!(cfg(2).validate().is_ok());
    }
}
