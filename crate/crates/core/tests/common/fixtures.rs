//! Small rendered inputs and a desk-scale overfitting loop.

use invizo::imaging::RasterImage;
use invizo::recognizer::{Model, ModelConfig, Recognizer, Trainer, Vocabulary};
use invizo::synthesis::compose::compose_line;
use invizo::synthesis::digits::digit_pool;
use invizo::synthesis::ARABIC_INDIC_DIGITS;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// "٤٢" as a tight 64 px high strip, first digit rightmost.
pub fn forty_two() -> RasterImage {
    let pool = digit_pool(1, &mut ChaCha8Rng::seed_from_u64(42));
    let four = pool[4].image.clone();
    let two = pool[2].image.clone();
    let width = [&four, &two]
        .iter()
        .map(|g| (g.width() as f64 * 64.0 / g.height() as f64).round() as usize)
        .sum();
    compose_line(&[four, two], 64, width).unwrap()
}

/// Small model for single-sample overfitting.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        enc_layers: 1,
        dec_layers: 1,
        heads: 2,
        ff_dim: 32,
        dropout: 0.0,
        lr: 3e-3,
        input_width: 64,
        input_height: 16,
        max_len: 64,
        conv_channels: [4, 8, 8],
        seed: 5,
        ..ModelConfig::default()
    }
}

/// Trains on `(image, label)` alone until greedy decoding reproduces the
/// label. Returns the model and the steps taken, or `None` past `max_steps`.
pub fn overfit(cfg: ModelConfig, image: &RasterImage, label: &str, max_steps: usize) -> Option<(Model, usize)> {
    let vocab = Vocabulary::new(ARABIC_INDIC_DIGITS).unwrap();
    let mut trainer = Trainer::new(Model::new(cfg, vocab).unwrap());
    let (images, labels) = (vec![image.clone(); 2], vec![label.to_string(); 2]);
    for step in 1..=max_steps {
        trainer.train_step(&images, &labels).unwrap();
        if step % 10 == 0 && trainer.model().recognize(image).unwrap().text == label {
            return Some((trainer.into_model(), step));
        }
    }
    None
}
