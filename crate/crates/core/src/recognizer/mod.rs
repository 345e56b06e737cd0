//! CNN-Transformer line recognizer.
//!
//! A three-block CNN turns a 1024x64 line into 128 column features, a
//! post-norm Transformer encoder contextualizes them, and a causal decoder
//! emits characters greedily. Everything runs on a small reverse-mode
//! autograd in `f64`, which keeps finite-difference checks meaningful.

pub mod graph;
mod model;
mod optim;
mod params;
pub mod tensor;
mod train;
mod vocab;

pub use graph::{BatchStats, Graph, Var};
pub use model::{teacher_forcing, Mode, Model, ModelConfig};
pub use optim::AdamW;
pub use params::{ParamEntry, ParamStore};
pub use tensor::Tensor;
pub use train::{evaluate, train_samples, TrainConfig, Trainer, BN_MOMENTUM};
pub use vocab::{Vocabulary, EOS, PAD, SOS};

use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Decoded text and the log-probability of each emitted character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerOutput {
    pub text: String,
    pub token_logprobs: Vec<f64>,
}

/// Anything that reads a single text line.
pub trait Recognizer: Send + Sync {
    fn recognize(&self, line: &RasterImage) -> Result<RecognizerOutput>;
}

/// Longest output produced by [`Recognizer::recognize`] on a [`Model`].
pub const DEFAULT_MAX_OUT: usize = 128;

impl Recognizer for Model {
    fn recognize(&self, line: &RasterImage) -> Result<RecognizerOutput> {
        let mut out = self.recognize_batch(std::slice::from_ref(line), DEFAULT_MAX_OUT)?;
        Ok(out.pop().expect("one output per image"))
    }
}

/// Fixed sinusoidal position table `[max_len, d_model]`:
/// `PE[p, 2i] = sin(p / 10000^(2i/d))`, `PE[p, 2i+1] = cos(p / 10000^(2i/d))`.
pub fn sinusoidal_pe(max_len: usize, d_model: usize) -> Result<Tensor> {
    if d_model == 0 || d_model % 2 != 0 {
        return Err(Error::InvalidParameter(format!("d_model must be even, got {d_model}")));
    }
    let mut data = vec![0.0; max_len * d_model];
    for pos in 0..max_len {
        for i in 0..d_model / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data[pos * d_model + 2 * i] = angle.sin();
            data[pos * d_model + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::new(&[max_len, d_model], data)
}

/// Vocabulary file stored next to a checkpoint.
pub fn vocab_path_for(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab")
}

impl Model {
    /// Writes the checkpoint (config in the header) and its vocabulary file.
    pub fn save(&self, checkpoint: impl AsRef<Path>) -> Result<()> {
        let checkpoint = checkpoint.as_ref();
        let meta = serde_json::json!({ "config": self.config() });
        self.params().save_checkpoint(checkpoint, &meta)?;
        self.vocab().save(vocab_path_for(checkpoint))
    }

    pub fn load(checkpoint: impl AsRef<Path>) -> Result<Model> {
        let checkpoint = checkpoint.as_ref();
        let bytes = std::fs::read(checkpoint)?;
        let (meta, tensors) = ParamStore::read_checkpoint_bytes(&bytes)?;
        let config: ModelConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint config: {e}")))?;
        let vocab = Vocabulary::load(vocab_path_for(checkpoint))?;
        let mut model = Model::new(config, vocab)?;
        model.load_tensors(tensors)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pe_values() {
        let pe = sinusoidal_pe(4, 6).unwrap();
        assert_eq!(pe.shape(), &[4, 6]);
        for i in 0..3 {
            assert_eq!(pe.row(0)[2 * i], 0.0);
            assert_eq!(pe.row(0)[2 * i + 1], 1.0);
        }
        assert!((pe.row(1)[0] - 0.8415).abs() < 1e-4);
        assert!((pe.row(1)[1] - 0.5403).abs() < 1e-4);
        assert!(sinusoidal_pe(4, 5).is_err());
        assert_eq!(sinusoidal_pe(10, 256).unwrap().shape(), &[10, 256]);
    }
}
