//! Training with the exact marginal likelihood.

use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swan_core::decoder::BeamOptions;
use swan_core::{feasible, SwanError};
use swan_core::vocab::Case;

use crate::error::{CliError, Result};
use crate::eval::{evaluate, Metrics};
use crate::model::{ModelShape, SwanModel};
use crate::task::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
    pub max_seg_len: usize,
    pub hidden: usize,
    pub connector_hidden: usize,
    pub embed_dim: usize,
    pub layers: usize,
    /// Recurrent encoder width over one-hot inputs; absent feeds one-hot vectors.
    pub encoder_hidden: Option<usize>,
    /// Beam used for dev decoding.
    pub beam: usize,
    /// Stop once dev exact accuracy reaches this value.
    pub target_dev_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 30,
            clip_norm: 5.0,
            seed: 0,
            checkpoint: None,
            max_seg_len: 3,
            hidden: 64,
            connector_hidden: 32,
            embed_dim: 16,
            layers: 1,
            encoder_hidden: None,
            beam: 8,
            target_dev_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.beam == 0 {
            return bad("beam must be at least 1");
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return bad("clip_norm must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("adam moments must lie in [0, 1) and epsilon must be positive");
        }
        if self.encoder_hidden == Some(0) {
            return bad("encoder_hidden must be positive");
        }
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            hidden: self.hidden,
            connector_hidden: self.connector_hidden,
            embed_dim: self.embed_dim,
            layers: self.layers,
            max_seg_len: self.max_seg_len,
            encoder_hidden: self.encoder_hidden,
        }
    }

    pub fn beam_options(&self) -> BeamOptions {
        BeamOptions::new(self.beam)
    }
}

/// Adam or plain SGD over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl OptimizerState {
    pub fn new(cfg: &TrainConfig, num_params: usize) -> Self {
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    /// Descends along `grad` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam => {
                self.step += 1;
                let c1 = 1.0 - self.beta1.powi(self.step);
                let c2 = 1.0 - self.beta2.powi(self.step);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}

/// Scales `grad` so its Euclidean norm is at most `max_norm`.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Errors on the first example that no segmentation can explain.
pub fn check_feasible(model: &SwanModel, data: &Dataset) -> Result<()> {
    let cfg = model.config();
    for (index, ex) in data.examples.iter().enumerate() {
        if !feasible(cfg, ex.output.len(), ex.input.len(), Case::Sequence) {
            return Err(CliError::InfeasibleExample {
                index,
                target_len: ex.output.len(),
                input_len: ex.input.len(),
                max_seg_len: cfg.max_seg_len,
            });
        }
        ex.output.validate(cfg.vocab_size)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training NLL over the epoch's updates.
    pub nll: f64,
    pub dev: Option<Metrics>,
}

impl EpochMetrics {
    /// `epoch NLL dev_acc edit_rate avg_seg_len`, tab separated.
    pub fn log_line(&self) -> String {
        let (acc, edit, seg) = self
            .dev
            .map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.exact_acc, d.edit_rate, d.avg_seg_len));
        format!("{}\t{:.9}\t{:.6}\t{:.6}\t{:.6}", self.epoch, self.nll, acc, edit, seg)
    }
}

/// Mean NLL over `batch` and the matching gradient, reduced in batch order.
pub fn batch_gradient(model: &SwanModel, data: &Dataset, batch: &[usize]) -> Result<(f64, SwanModel)> {
    let parts = batch
        .par_iter()
        .map(|&i| {
            let ex = &data.examples[i];
            let mut g = model.zeros_like();
            let nll = model.nll_and_grad(&ex.input, &ex.output, &mut g)?;
            Ok((nll, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut total = model.zeros_like();
    let mut nll = 0.0;
    for (l, g) in &parts {
        nll += l;
        total.add_scaled(g, scale);
    }
    Ok((nll * scale, total))
}

pub struct Trainer<'a> {
    pub config: TrainConfig,
    pub model: SwanModel,
    pub optimizer: OptimizerState,
    pub train: &'a Dataset,
    pub dev: Option<&'a Dataset>,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    /// Fresh model sized for `train`'s vocabularies.
    pub fn new(config: TrainConfig, train: &'a Dataset, dev: Option<&'a Dataset>) -> Result<Self> {
        config.validate()?;
        let model = SwanModel::init(
            config.shape(),
            train.input_vocab.clone(),
            train.output_vocab.clone(),
            config.seed,
        )?;
        Self::with_model(config, model, train, dev)
    }

    pub fn with_model(
        config: TrainConfig,
        model: SwanModel,
        train: &'a Dataset,
        dev: Option<&'a Dataset>,
    ) -> Result<Self> {
        config.validate()?;
        model.check_vocab(&train.input_vocab, &train.output_vocab)?;
        check_feasible(&model, train)?;
        if let Some(d) = dev {
            model.check_vocab(&d.input_vocab, &d.output_vocab)?;
        }
        let optimizer = OptimizerState::new(&config, model.flat_values().len());
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        Ok(Self {
            config,
            model,
            optimizer,
            train,
            dev,
            rng,
            epoch: 0,
        })
    }

    fn abort(&self, epoch: usize) -> CliError {
        let last_good = self
            .config
            .checkpoint
            .as_ref()
            .filter(|p| self.model.save(p).is_ok())
            .cloned();
        CliError::NonFiniteLoss { epoch, last_good }
    }

    /// One pass over the shuffled training set.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let (nll, grad) = match batch_gradient(&self.model, self.train, batch) {
                Err(CliError::Core(SwanError::NonFinite { .. })) => return Err(self.abort(epoch)),
                r => r?,
            };
            let mut g = grad.flat_values();
            if !nll.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(self.abort(epoch));
            }
            clip_global_norm(&mut g, self.config.clip_norm);
            let before = self.model.flat_values();
            let mut p = before.clone();
            self.optimizer.update(&mut p, &g);
            self.model.set_flat(&p);
            if self.model.first_non_finite().is_some() {
                self.model.set_flat(&before);
                return Err(self.abort(epoch));
            }
            total += nll * batch.len() as f64;
        }
        let nll = if self.train.is_empty() {
            0.0
        } else {
            total / self.train.len() as f64
        };
        let dev = match self.dev {
            Some(d) if !d.is_empty() => Some(evaluate(&self.model, d, &self.config.beam_options())?),
            _ => None,
        };
        if let Some(path) = &self.config.checkpoint {
            self.model.save(path)?;
        }
        Ok(EpochMetrics { epoch, nll, dev })
    }

    /// Runs all epochs, writing one metrics line per epoch to `log`.
    pub fn run<W: Write>(&mut self, mut log: W) -> Result<Vec<EpochMetrics>> {
        let mut out = Vec::new();
        for _ in 0..self.config.epochs {
            let m = self.run_epoch()?;
            writeln!(log, "{}", m.log_line())?;
            log.flush()?;
            out.push(m);
            let reached = matches!(
                (self.config.target_dev_acc, m.dev),
                (Some(t), Some(d)) if d.exact_acc >= t
            );
            if reached {
                break;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{generate_dataset, SyntheticTaskSpec};

    fn small() -> TrainConfig {
        TrainConfig {
            hidden: 8,
            connector_hidden: 4,
            embed_dim: 4,
            max_seg_len: 2,
            batch_size: 4,
            beam: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg = TrainConfig::from_toml("optimizer = \"sgd\"\nlearning_rate = 0.5\nhidden = 12\n").unwrap();
        assert_eq!(cfg.optimizer, Optimizer::Sgd);
        assert_eq!(cfg.hidden, 12);
        assert_eq!(cfg.batch_size, 32);
        assert!(TrainConfig::from_toml("bogus = 1").is_err());
        assert!(TrainConfig { batch_size: 0, ..small() }.validate().is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let data = generate_dataset(&SyntheticTaskSpec::grouped_copy(3, 2, 5), 12).unwrap();
        for opt in [Optimizer::Adam, Optimizer::Sgd] {
            let cfg = TrainConfig { learning_rate: 0.0, optimizer: opt, ..small() };
            let mut t = Trainer::new(cfg, &data, None).unwrap();
            let before = t.model.clone();
            t.run_epoch().unwrap();
            assert_eq!(t.model, before);
        }
    }

    #[test]
    fn single_example_nll_decreases() {
        let data = generate_dataset(&SyntheticTaskSpec::grouped_copy(3, 2, 9), 1).unwrap();
        let cfg = TrainConfig { max_seg_len: 2, ..TrainConfig::default() };
        let mut t = Trainer::new(cfg, &data, None).unwrap();
        let nll0 = t.model.nll(&data.examples[0].input, &data.examples[0].output).unwrap();
        let mut prev = nll0;
        for _ in 0..5 {
            t.run_epoch().unwrap();
            let nll = t.model.nll(&data.examples[0].input, &data.examples[0].output).unwrap();
            assert!(nll < prev, "{nll} !< {prev}");
            prev = nll;
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = vec![0.3, 0.4];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }

    #[test]
    fn infeasible_example_rejected_up_front() {
        let mut data = generate_dataset(&SyntheticTaskSpec::grouped_copy(3, 2, 5), 4).unwrap();
        data.examples[2].input.clear();
        data.examples[2].output = swan_core::OutputSeq::new(vec![0]);
        let err = Trainer::new(small(), &data, None).err().unwrap();
        assert!(matches!(err, CliError::InfeasibleExample { index: 2, .. }));
    }

    #[test]
    fn nan_weights_abort_with_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let data = generate_dataset(&SyntheticTaskSpec::grouped_copy(3, 2, 5), 4).unwrap();
        let cfg = TrainConfig { checkpoint: Some(path.clone()), ..small() };
        let mut t = Trainer::new(cfg, &data, None).unwrap();
        t.model.scorer.output_bias[0] = f64::NAN;
        let err = t.run_epoch().err().unwrap();
        assert!(matches!(err, CliError::NonFiniteLoss { epoch: 1, last_good: Some(_) }), "{err}");
        assert!(path.exists());
    }
}
