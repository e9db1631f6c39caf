//! Trainable model as used by the command-line tools: the segment scorer,
//! an optional recurrent encoder over one-hot input symbols, and the two
//! vocabularies.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swan_core::checkpoint::Checkpoint;
use swan_core::decoder::{beam_search, BeamOptions};
use swan_core::gru::{GruCell, GruStep};
use swan_core::marginal::{best_segmentation, case1_best_segmentation, AlphaBeta};
use swan_core::model::{accumulate_gradients_into, case1_lattice, segment_lattice};
use swan_core::params::INIT_SCALE;
use swan_core::{InputSeq, ModelConfig, OutputSeq, SegmentScorerParams, Segmentation, Vocab};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SwanModel {
    pub scorer: SegmentScorerParams,
    /// One-hot symbols → features of width `scorer.config.input_dim`.
    pub encoder: Option<GruCell>,
    pub input_vocab: Vocab,
    pub output_vocab: Vocab,
}

/// Shape options chosen at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub hidden: usize,
    pub connector_hidden: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub max_seg_len: usize,
    /// Width of the optional input encoder; `None` feeds one-hot symbols.
    pub encoder_hidden: Option<usize>,
}

impl SwanModel {
    pub fn init(shape: ModelShape, input_vocab: Vocab, output_vocab: Vocab, seed: u64) -> Result<Self> {
        let input_dim = shape.encoder_hidden.unwrap_or(input_vocab.size());
        let cfg = ModelConfig {
            vocab_size: output_vocab.size(),
            input_dim,
            hidden: shape.hidden,
            connector_hidden: shape.connector_hidden,
            max_seg_len: shape.max_seg_len,
            embed_dim: shape.embed_dim,
            layers: shape.layers,
        };
        let scorer = SegmentScorerParams::init(cfg, seed)?;
        let encoder = shape.encoder_hidden.map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0065_6e63_6f64_6572);
            GruCell::uniform(input_vocab.size(), h, INIT_SCALE, &mut rng)
        });
        Ok(Self {
            scorer,
            encoder,
            input_vocab,
            output_vocab,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.scorer.config
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            scorer: self.scorer.zeros_like(),
            encoder: self.encoder.as_ref().map(|e| GruCell::zeros(e.input, e.hidden)),
            input_vocab: self.input_vocab.clone(),
            output_vocab: self.output_vocab.clone(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut t = self.scorer.tensors_mut();
        if let Some(e) = self.encoder.as_mut() {
            t.push(("encoder.w_input".into(), &mut e.w.data));
            t.push(("encoder.w_hidden".into(), &mut e.u.data));
            t.push(("encoder.bias".into(), &mut e.b));
        }
        t
    }

    pub fn flat_values(&self) -> Vec<f64> {
        let mut v = self.scorer.to_flat();
        if let Some(e) = &self.encoder {
            v.extend_from_slice(&e.w.data);
            v.extend_from_slice(&e.u.data);
            v.extend_from_slice(&e.b);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for (_, dst) in self.tensors_mut() {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.scorer.first_non_finite().or_else(|| {
            let e = self.encoder.as_ref()?;
            [("encoder.w_input", &e.w.data), ("encoder.w_hidden", &e.u.data), ("encoder.bias", &e.b)]
                .into_iter()
                .find(|(_, d)| d.iter().any(|v| !v.is_finite()))
                .map(|(n, _)| n.to_string())
        })
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &SwanModel, scale: f64) {
        self.scorer.add_scaled(&other.scorer, scale);
        if let (Some(a), Some(b)) = (self.encoder.as_mut(), other.encoder.as_ref()) {
            for (x, y) in a
                .w
                .data
                .iter_mut()
                .chain(a.u.data.iter_mut())
                .chain(a.b.iter_mut())
                .zip(b.w.data.iter().chain(&b.u.data).chain(&b.b))
            {
                *x += scale * y;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat_values().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn one_hot(&self, input: &[usize]) -> Result<InputSeq> {
        Ok(InputSeq::one_hot(input, self.input_vocab.size())?)
    }

    /// Features for an input symbol string, plus encoder activations.
    pub fn featurize_with_cache(&self, input: &[usize]) -> Result<(InputSeq, Vec<GruStep>)> {
        let onehot = self.one_hot(input)?;
        match &self.encoder {
            None => Ok((onehot, Vec::new())),
            Some(enc) => {
                let mut h = vec![0.0; enc.hidden];
                let mut steps = Vec::with_capacity(input.len());
                let mut rows = Vec::with_capacity(input.len());
                for t in 0..onehot.len() {
                    let step = enc.forward(onehot.get(t), &h);
                    h = step.h.clone();
                    rows.push(step.h.clone());
                    steps.push(step);
                }
                Ok((InputSeq::new(rows)?, steps))
            }
        }
    }

    pub fn featurize(&self, input: &[usize]) -> Result<InputSeq> {
        Ok(self.featurize_with_cache(input)?.0)
    }

    /// Negative log-likelihood of `y` given `input`, accumulating its gradient
    /// into `grad`.
    pub fn nll_and_grad(&self, input: &[usize], y: &OutputSeq, grad: &mut SwanModel) -> Result<f64> {
        let (x, enc_steps) = self.featurize_with_cache(input)?;
        let lattice = segment_lattice(&x, y, &self.scorer)?;
        let ab = AlphaBeta::compute(lattice.scores(), self.config().max_seg_len);
        let ll = ab.log_likelihood();
        let weights = ab.gradient_weights(lattice.scores())?;
        // accumulate ∂(−log p)
        let mut g = self.scorer.zeros_like();
        let mut dx = vec![0.0; x.len() * x.dim()];
        accumulate_gradients_into(&lattice, weights.table(), &x, y, &self.scorer, &mut g, &mut dx)?;
        grad.scorer.add_scaled(&g, -1.0);
        if let (Some(enc), Some(genc)) = (&self.encoder, grad.encoder.as_mut()) {
            let onehot = self.one_hot(input)?;
            let mut carry = vec![0.0; enc.hidden];
            for t in (0..x.len()).rev() {
                let dh: Vec<f64> = dx[t * x.dim()..(t + 1) * x.dim()]
                    .iter()
                    .zip(&carry)
                    .map(|(a, b)| -a + b)
                    .collect();
                let mut din = vec![0.0; enc.input];
                let mut dprev = vec![0.0; enc.hidden];
                enc.backward(&enc_steps[t], onehot.get(t), &dh, genc, &mut din, &mut dprev);
                carry = dprev;
            }
        }
        Ok(-ll)
    }

    pub fn nll(&self, input: &[usize], y: &OutputSeq) -> Result<f64> {
        let x = self.featurize(input)?;
        Ok(-swan_core::log_likelihood(&x, y, &self.scorer)?)
    }

    pub fn decode(&self, input: &[usize], opts: &BeamOptions) -> Result<(OutputSeq, f64)> {
        let x = self.featurize(input)?;
        Ok(beam_search(&x, &self.scorer, opts)?)
    }

    /// Max-probability segmentation of `y` aligned against `input`.
    pub fn best_segmentation(&self, input: &[usize], y: &OutputSeq) -> Result<(Segmentation, f64)> {
        let x = self.featurize(input)?;
        let lattice = segment_lattice(&x, y, &self.scorer)?;
        Ok(best_segmentation(lattice.scores(), y, self.config().max_seg_len)?)
    }

    /// Max-probability segmentation treating the mean-pooled input as a single
    /// vector (no alignment, no empty segments).
    pub fn best_segmentation_pooled(&self, input: &[usize], y: &OutputSeq) -> Result<(Segmentation, f64)> {
        let x = self.featurize(input)?.mean_pooled();
        let lattice = case1_lattice(&x, y, &self.scorer)?;
        Ok(case1_best_segmentation(
            &lattice.scores().input_row(0),
            y,
            self.config().max_seg_len,
        )?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_params(&self.scorer);
        ck.meta.insert("input_vocab".into(), self.input_vocab.tokens().join(" "));
        ck.meta.insert("output_vocab".into(), self.output_vocab.tokens().join(" "));
        match &self.encoder {
            Some(e) => {
                ck.meta.insert("encoder_hidden".into(), e.hidden.to_string());
                ck.tensors.push(("encoder.w_input".into(), vec![e.w.rows, e.w.cols], e.w.data.clone()));
                ck.tensors.push(("encoder.w_hidden".into(), vec![e.u.rows, e.u.cols], e.u.data.clone()));
                ck.tensors.push(("encoder.bias".into(), vec![e.b.len()], e.b.clone()));
            }
            None => {
                ck.meta.insert("encoder_hidden".into(), "none".into());
            }
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let vocab = |key: &str| -> Result<Vocab> {
            let v = ck
                .meta
                .get(key)
                .ok_or_else(|| CliError::Config(format!("checkpoint lacks {key}")))?;
            Ok(Vocab::new(v.split_whitespace())?)
        };
        let input_vocab = vocab("input_vocab")?;
        let output_vocab = vocab("output_vocab")?;
        let scorer = ck.params()?;
        let encoder = match ck.meta.get("encoder_hidden").map(String::as_str) {
            None | Some("none") => None,
            Some(h) => {
                let h: usize = h
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad encoder_hidden {h}")))?;
                let mut e = GruCell::zeros(input_vocab.size(), h);
                for (name, dst) in [
                    ("encoder.w_input", &mut e.w.data),
                    ("encoder.w_hidden", &mut e.u.data),
                    ("encoder.bias", &mut e.b),
                ] {
                    let t = ck
                        .tensor(name)
                        .ok_or_else(|| CliError::Config(format!("checkpoint lacks {name}")))?;
                    if t.2.len() != dst.len() {
                        return Err(CliError::Config(format!("tensor {name} has the wrong size")));
                    }
                    dst.copy_from_slice(&t.2);
                }
                Some(e)
            }
        };
        let expected_dim = encoder.as_ref().map_or(input_vocab.size(), |e| e.hidden);
        if scorer.config.input_dim != expected_dim || scorer.config.vocab_size != output_vocab.size() {
            return Err(CliError::VocabMismatch(
                "checkpoint vocabularies do not match its model shape".into(),
            ));
        }
        Ok(Self {
            scorer,
            encoder,
            input_vocab,
            output_vocab,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Errors unless `ds` uses this model's vocabularies.
    pub fn check_vocab(&self, input: &Vocab, output: &Vocab) -> Result<()> {
        if input != &self.input_vocab {
            return Err(CliError::VocabMismatch(format!(
                "dataset input vocabulary [{}] differs from the model's [{}]",
                input.tokens().join(" "),
                self.input_vocab.tokens().join(" ")
            )));
        }
        if output != &self.output_vocab {
            return Err(CliError::VocabMismatch(format!(
                "dataset output vocabulary [{}] differs from the model's [{}]",
                output.tokens().join(" "),
                self.output_vocab.tokens().join(" ")
            )));
        }
        Ok(())
    }
}
