//! Trainable parameters of the segment scorer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Result, SwanError};
use crate::gru::GruCell;
use crate::linalg::{uniform_vec, Matrix};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

/// One stacked segment cell plus the projections that build its initial state
/// from the input element and the connector state.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLayer {
    pub cell: GruCell,
    /// `H × d`
    pub init_from_input: Matrix,
    /// `H × Hc`
    pub init_from_connector: Matrix,
}

/// All parameters of the segment scorer.
///
/// The embedding table has `V + 1` rows: rows `0..V` embed tokens (shared by
/// the segment cell and the connector network) and row `V` is the
/// begin-of-segment input fed at the first step of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentScorerParams {
    pub config: ModelConfig,
    /// `(V + 1) × E`
    pub embedding: Matrix,
    pub layers: Vec<SegmentLayer>,
    /// `(V + 1) × H`
    pub output: Matrix,
    /// `V + 1`
    pub output_bias: Vec<f64>,
    /// Connector network over emitted tokens, input `E`, hidden `Hc`.
    pub connector: GruCell,
}

/// Borrowed view of one named parameter tensor.
#[derive(Debug)]
pub struct TensorView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn mat(name: String, m: &Matrix) -> TensorView<'_> {
    TensorView {
        name,
        shape: vec![m.rows, m.cols],
        data: &m.data,
    }
}

impl SegmentScorerParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let ModelConfig {
            vocab_size,
            input_dim,
            hidden,
            connector_hidden,
            embed_dim,
            layers,
            ..
        } = config;
        let layers = (0..layers)
            .map(|k| SegmentLayer {
                cell: GruCell::zeros(if k == 0 { embed_dim } else { hidden }, hidden),
                init_from_input: Matrix::zeros(hidden, input_dim),
                init_from_connector: Matrix::zeros(hidden, connector_hidden),
            })
            .collect();
        Self {
            config,
            embedding: Matrix::zeros(vocab_size + 1, embed_dim),
            layers,
            output: Matrix::zeros(vocab_size + 1, hidden),
            output_bias: vec![0.0; vocab_size + 1],
            connector: GruCell::zeros(embed_dim, connector_hidden),
        }
    }

    /// Uniform `[-scale, scale]` initialization from a seeded generator.
    pub fn init_uniform(config: ModelConfig, seed: u64, scale: f64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(config);
        for data in p.tensors_mut() {
            data.1.copy_from_slice(&uniform_vec(data.1.len(), scale, &mut rng));
        }
        Ok(p)
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::init_uniform(config, seed, INIT_SCALE)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config)
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::new();
        out.push(mat("embedding".into(), &self.embedding));
        for (k, layer) in self.layers.iter().enumerate() {
            out.push(mat(format!("segment.{k}.w_input"), &layer.cell.w));
            out.push(mat(format!("segment.{k}.w_hidden"), &layer.cell.u));
            out.push(TensorView {
                name: format!("segment.{k}.bias"),
                shape: vec![layer.cell.b.len()],
                data: &layer.cell.b,
            });
            out.push(mat(format!("segment.{k}.init_from_input"), &layer.init_from_input));
            out.push(mat(
                format!("segment.{k}.init_from_connector"),
                &layer.init_from_connector,
            ));
        }
        out.push(mat("output.weight".into(), &self.output));
        out.push(TensorView {
            name: "output.bias".into(),
            shape: vec![self.output_bias.len()],
            data: &self.output_bias,
        });
        out.push(mat("connector.w_input".into(), &self.connector.w));
        out.push(mat("connector.w_hidden".into(), &self.connector.u));
        out.push(TensorView {
            name: "connector.bias".into(),
            shape: vec![self.connector.b.len()],
            data: &self.connector.b,
        });
        out
    }

    /// Mutable buffers in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        out.push(("embedding".into(), &mut self.embedding.data));
        for (k, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("segment.{k}.w_input"), &mut layer.cell.w.data));
            out.push((format!("segment.{k}.w_hidden"), &mut layer.cell.u.data));
            out.push((format!("segment.{k}.bias"), &mut layer.cell.b));
            out.push((format!("segment.{k}.init_from_input"), &mut layer.init_from_input.data));
            out.push((
                format!("segment.{k}.init_from_connector"),
                &mut layer.init_from_connector.data,
            ));
        }
        out.push(("output.weight".into(), &mut self.output.data));
        out.push(("output.bias".into(), &mut self.output_bias));
        out.push(("connector.w_input".into(), &mut self.connector.w.data));
        out.push(("connector.w_hidden".into(), &mut self.connector.u.data));
        out.push(("connector.bias".into(), &mut self.connector.b));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            v.extend_from_slice(t.data);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(SwanError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut off = 0;
        for (_, data) in self.tensors_mut() {
            data.copy_from_slice(&flat[off..off + data.len()]);
            off += data.len();
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &SegmentScorerParams, scale: f64) {
        let src = other.tensors();
        for ((_, dst), s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s.data) {
                *d += scale * v;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, d) in self.tensors_mut() {
            d.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }

    /// Rebuilds parameters from named tensors, checking names and shapes.
    pub fn from_named(
        config: ModelConfig,
        tensors: &[(String, Vec<usize>, Vec<f64>)],
    ) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let expected: Vec<(String, Vec<usize>)> = p
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.shape))
            .collect();
        for ((name, shape), (dst_name, dst)) in expected.iter().zip(p.tensors_mut()) {
            debug_assert_eq!(name, &dst_name);
            let (_, got_shape, data) = tensors
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| SwanError::Checkpoint(format!("missing tensor {name}")))?;
            if got_shape != shape || data.len() != dst.len() {
                return Err(SwanError::Checkpoint(format!(
                    "tensor {name} has shape {got_shape:?}, expected {shape:?}"
                )));
            }
            dst.copy_from_slice(data);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            vocab_size: 2,
            input_dim: 2,
            hidden: 3,
            connector_hidden: 2,
            max_seg_len: 2,
            embed_dim: 2,
            layers: 1,
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = SegmentScorerParams::init(tiny(), 3).unwrap();
        let b = SegmentScorerParams::init(tiny(), 3).unwrap();
        let c = SegmentScorerParams::init(tiny(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.to_flat().iter().all(|v| v.abs() <= INIT_SCALE));
    }

    #[test]
    fn flat_roundtrip_and_count() {
        let a = SegmentScorerParams::init(tiny(), 1).unwrap();
        // emb 3x2, gru 9x2 + 9x3 + 9, proj 3x2 + 3x2, out 3x3 + 3, conn 6x2 + 6x2 + 6
        assert_eq!(a.num_params(), 6 + 18 + 27 + 9 + 6 + 6 + 9 + 3 + 12 + 12 + 6);
        let mut b = a.zeros_like();
        b.set_flat(&a.to_flat()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_named_checks_shapes() {
        let a = SegmentScorerParams::init(tiny(), 1).unwrap();
        let named: Vec<_> = a
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.shape, t.data.to_vec()))
            .collect();
        assert_eq!(SegmentScorerParams::from_named(tiny(), &named).unwrap(), a);
        let mut bad = named.clone();
        bad[0].1 = vec![2, 3];
        assert!(SegmentScorerParams::from_named(tiny(), &bad).is_err());
        assert!(SegmentScorerParams::from_named(tiny(), &named[1..]).is_err());
    }
}
