use super::model::{Mode, Model, ModelConfig};
use super::vocab::Vocabulary;
use super::optim::AdamW;
use super::graph::Graph;
use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::metrics::cer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Momentum for batch-norm running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

/// Owns a model and its optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: Model,
    opt: AdamW,
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        let opt = AdamW::new(model.config().lr, model.config().weight_decay);
        Trainer { model, opt }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn steps(&self) -> u64 {
        self.opt.steps()
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.opt.lr = lr;
    }

    /// One optimizer step on a batch; returns the loss before the update.
    pub fn train_step(&mut self, images: &[RasterImage], labels: &[String]) -> Result<f64> {
        if images.is_empty() || images.len() != labels.len() {
            return Err(Error::InvalidParameter("train_step needs matching, non-empty images and labels".into()));
        }
        let tokens = labels
            .iter()
            .map(|l| self.model.vocab().encode(l))
            .collect::<Result<Vec<_>>>()?;
        let batch = self.model.batch_tensor(images)?;
        let step = self.opt.steps();
        let g = if self.model.config().dropout > 0.0 {
            Graph::with_dropout_rng(self.model.dropout_rng(step))
        } else {
            Graph::new()
        };
        let (g, loss_var, stats) = self.model.loss_graph(g, batch, &tokens, Mode::Train)?;
        let loss = g.value(loss_var).data()[0];
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step: step as usize });
        }
        let grads = g.backward(loss_var);
        drop(g);
        self.opt.step(self.model.params_mut(), &grads);
        self.model.update_running_stats(&stats, BN_MOMENTUM);
        Ok(loss)
    }
}

/// Settings of a training run: the model configuration plus loop limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    /// Stop after this many optimizer steps; 0 runs every epoch.
    pub max_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::toy(),
            max_steps: 0,
        }
    }
}

/// Trains a fresh model on labeled lines. Each epoch visits the samples in
/// a seeded shuffle; `on_step(step, loss)` sees every step.
pub fn train_samples(
    config: &TrainConfig,
    vocab: Vocabulary,
    images: &[RasterImage],
    labels: &[String],
    mut on_step: impl FnMut(u64, f64),
) -> Result<Model> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::InvalidParameter("training needs matching, non-empty images and labels".into()));
    }
    let mut trainer = Trainer::new(Model::new(config.model.clone(), vocab)?);
    let bs = config.model.batch_size;
    let mut order: Vec<usize> = (0..images.len()).collect();
    'epochs: for epoch in 0..config.model.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.model.seed.wrapping_add(epoch as u64)));
        for chunk in order.chunks(bs) {
            if config.max_steps > 0 && trainer.steps() >= config.max_steps as u64 {
                break 'epochs;
            }
            let imgs: Vec<RasterImage> = chunk.iter().map(|&i| images[i].clone()).collect();
            let labs: Vec<String> = chunk.iter().map(|&i| labels[i].clone()).collect();
            let loss = trainer.train_step(&imgs, &labs)?;
            on_step(trainer.steps(), loss);
        }
    }
    Ok(trainer.into_model())
}

/// Exact-match rate and mean CER of `model` on labeled lines.
pub fn evaluate(model: &Model, images: &[RasterImage], labels: &[String], batch: usize) -> Result<(f64, f64)> {
    let mut exact = 0;
    let mut total_cer = 0.0;
    for (imgs, labs) in images.chunks(batch.max(1)).zip(labels.chunks(batch.max(1))) {
        let max_out = labs.iter().map(|l| l.chars().count()).max().unwrap_or(0) + 4;
        let outs = model.recognize_batch(imgs, max_out)?;
        for (o, l) in outs.iter().zip(labs) {
            if &o.text == l {
                exact += 1;
            }
            total_cer += cer(l, &o.text)?;
        }
    }
    let n = images.len().max(1) as f64;
    Ok((exact as f64 / n, total_cer / n))
}
