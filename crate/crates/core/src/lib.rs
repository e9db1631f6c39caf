//! Sequence modeling via segmentations.
//!
//! The probability of an output sequence is the sum, over every way of
//! splitting it into segments (and, for sequence inputs, every monotonic
//! assignment of segments to input elements), of the product of segment
//! probabilities. Segments are scored by a recurrent cell whose initial state
//! combines the input element with a connector network run over the output
//! emitted so far. The sum is computed exactly by dynamic programming.
//!
//! * [`model`] builds the segment lattice and back-propagates through it.
//! * [`marginal`] holds the forward/backward recursions, posterior weights,
//!   the non-sequence recursion and max-probability segmentation.
//! * [`decoder`] is the beam search with duplicate merging.
//! * [`oracle`] contains brute-force references for small instances.

pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod error;
pub mod gru;
pub mod linalg;
pub mod logspace;
pub mod marginal;
pub mod model;
pub mod oracle;
pub mod params;
pub mod table;
pub mod vocab;

pub use config::{feasible, ModelConfig};
pub use decoder::{beam_search, merge_duplicates, Beam, BeamHypothesis, BeamOptions, FinishedPolicy};
pub use error::{Result, SwanError};
pub use logspace::logsumexp;
pub use marginal::{best_segmentation, case1_log_likelihood, AlphaBeta, GradientWeights};
pub use model::{
    accumulate_gradients, connector_states, log_likelihood, segment_lattice, ConnectorStates,
    Gradients, SegmentLattice,
};
pub use params::SegmentScorerParams;
pub use table::SegmentTable;
pub use vocab::{decode_tokens, encode_tokens, Case, InputSeq, OutputSeq, Segmentation, Vocab};
