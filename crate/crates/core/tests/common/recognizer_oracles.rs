//! Independent reference computations for the recognizer tests.

use invizo::imaging::RasterImage;
use invizo::recognizer::*;
use invizo::synthesis::ARABIC_INDIC_DIGITS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        enc_layers: 1,
        dec_layers: 1,
        heads: 2,
        ff_dim: 16,
        dropout: 0.0,
        input_width: 48,
        input_height: 16,
        max_len: 64,
        conv_channels: [2, 3, 4],
        seed: 3,
        ..ModelConfig::default()
    }
}

pub fn digit_vocab() -> Vocabulary {
    Vocabulary::new(ARABIC_INDIC_DIGITS).unwrap()
}

fn loss_value(model: &Model, images: &Tensor, labels: &[Vec<usize>]) -> f64 {
    let (g, loss, _) = model.loss_graph(Graph::new(), images.clone(), labels, Mode::Train).unwrap();
    g.value(loss).data()[0]
}

/// Central-difference check of every trainable tensor. Returns, per tensor
/// name, `|analytic - numeric| / max(|analytic|, |numeric|)` in the L2 norm.
pub fn gradient_check_worst(cfg: &ModelConfig, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(cfg.clone(), digit_vocab()).unwrap();
    let images: Vec<RasterImage> = (0..2)
        .map(|_| RasterImage::from_fn(cfg.input_width, cfg.input_height, |_, _| rng.random_range(0..=255u8)))
        .collect();
    let images = model.batch_tensor(&images).unwrap();
    // Five labels plus SOS gives a decoder sequence of 6.
    let labels = vec![vec![3, 7, 4, 9, 1], vec![5, 2]];
    let (g, loss, _) = model.loss_graph(Graph::new(), images.clone(), &labels, Mode::Train).unwrap();
    let analytic = g.backward(loss);
    let h = 1e-5;
    let mut report = Vec::new();
    for (idx, grad) in analytic {
        let name = model.params().entry(idx).name.clone();
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for (j, &a) in grad.iter().enumerate() {
            let orig = model.params().tensor(idx).data()[j];
            model.params_mut().tensor_mut(idx).data_mut()[j] = orig + h;
            let up = loss_value(&model, &images, &labels);
            model.params_mut().tensor_mut(idx).data_mut()[j] = orig - h;
            let down = loss_value(&model, &images, &labels);
            model.params_mut().tensor_mut(idx).data_mut()[j] = orig;
            let n = (up - down) / (2.0 * h);
            diff2 += (a - n) * (a - n);
            a2 += a * a;
            n2 += n * n;
        }
        // Gradients that vanish analytically (conv bias ahead of batch norm)
        // are compared in absolute terms.
        let denom = a2.sqrt().max(n2.sqrt()).max(1e-6);
        report.push((name, diff2.sqrt() / denom));
    }
    report
}

fn param<'a>(model: &'a Model, name: &str) -> &'a [f64] {
    let id = model.params().find(name).unwrap_or_else(|| panic!("missing parameter {name}"));
    model.params().tensor(id).data()
}

/// `x W + b` for row-major `x` of `rows x din` and `W` of `din x dout`.
fn affine(x: &[f64], rows: usize, din: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let dout = b.len();
    let mut y = vec![0.0; rows * dout];
    for r in 0..rows {
        for o in 0..dout {
            let mut s = b[o];
            for i in 0..din {
                s += x[r * din + i] * w[i * dout + o];
            }
            y[r * dout + o] = s;
        }
    }
    y
}

fn layer_norm(x: &mut [f64], d: usize, gamma: &[f64], beta: &[f64]) {
    for row in x.chunks_exact_mut(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) / (var + 1e-5).sqrt() * gamma[j] + beta[j];
        }
    }
}

/// One sequence through the encoder, written out loop by loop.
fn encoder_reference(model: &Model, seq: &[f64], s: usize) -> Vec<f64> {
    let cfg = model.config();
    let (d, heads) = (cfg.d_model, cfg.heads);
    let dh = d / heads;
    let mut x = seq.to_vec();
    for pos in 0..s {
        for i in 0..d {
            let k = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * k / d as f64);
            x[pos * d + i] += if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    for l in 0..cfg.enc_layers {
        let p = |n: &str| param(model, &format!("enc.{l}.{n}"));
        let q = affine(&x, s, d, p("attn.q.weight"), p("attn.q.bias"));
        let k = affine(&x, s, d, p("attn.k.weight"), p("attn.k.bias"));
        let v = affine(&x, s, d, p("attn.v.weight"), p("attn.v.bias"));
        let mut ctx = vec![0.0; s * d];
        for hd in 0..heads {
            for i in 0..s {
                let scores: Vec<f64> = (0..s)
                    .map(|j| (0..dh).map(|c| q[i * d + hd * dh + c] * k[j * d + hd * dh + c]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in 0..dh {
                    ctx[i * d + hd * dh + c] = (0..s).map(|j| e[j] / z * v[j * d + hd * dh + c]).sum();
                }
            }
        }
        let a = affine(&ctx, s, d, p("attn.o.weight"), p("attn.o.bias"));
        let mut h: Vec<f64> = x.iter().zip(&a).map(|(u, w)| u + w).collect();
        layer_norm(&mut h, d, p("ln1.gamma"), p("ln1.beta"));
        let mut f = affine(&h, s, d, p("ff1.weight"), p("ff1.bias"));
        f.iter_mut().for_each(|v| *v = v.max(0.0));
        let f = affine(&f, s, cfg.ff_dim, p("ff2.weight"), p("ff2.bias"));
        x = h.iter().zip(&f).map(|(u, w)| u + w).collect();
        layer_norm(&mut x, d, p("ln2.gamma"), p("ln2.beta"));
    }
    x
}

/// Largest deviation between the model encoder and the loop reference.
pub fn encoder_oracle_max_diff(cfg: &ModelConfig) -> f64 {
    let model = Model::new(cfg.clone(), digit_vocab()).unwrap();
    let (s, d) = (cfg.seq_len(), cfg.d_model);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let feats = Tensor::from_fn(&[2, s, d], |_| rng.random_range(-2.0..2.0));
    let (out, _) = model.encode_features(feats.clone(), false).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..2 {
        let reference = encoder_reference(&model, &feats.data()[n * s * d..(n + 1) * s * d], s);
        for (a, b) in out.data()[n * s * d..(n + 1) * s * d].iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Replaces every token after position `t` and measures how far logits at
/// positions `<= t` move. Also checks the probe is live: later logits must
/// move.
pub fn causal_probe_max_diff(cfg: &ModelConfig, len: usize) -> f64 {
    let model = Model::new(cfg.clone(), digit_vocab()).unwrap();
    let (s, d, v) = (cfg.seq_len(), cfg.d_model, model.vocab().len());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let memory = Tensor::from_fn(&[1, s, d], |_| rng.random_range(-1.0..1.0));
    let mut base = vec![SOS];
    base.extend((1..len).map(|_| rng.random_range(3..v)));
    let ref_logits = model.decoder_logits(&memory, &[base.clone()]).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..len - 1 {
        let mut probe = base.clone();
        for tok in probe.iter_mut().skip(t + 1) {
            *tok = 3 + (*tok - 3 + 1 + rng.random_range(0..v - 4)) % (v - 3);
        }
        let logits = model.decoder_logits(&memory, &[probe]).unwrap();
        for (a, b) in ref_logits.data()[..(t + 1) * v].iter().zip(&logits.data()[..(t + 1) * v]) {
            worst = worst.max((a - b).abs());
        }
        let later_moved = ref_logits.data()[(t + 1) * v..]
            .iter()
            .zip(&logits.data()[(t + 1) * v..])
            .any(|(a, b)| a != b);
        assert!(later_moved, "probe at {t} changed nothing");
    }
    worst
}
