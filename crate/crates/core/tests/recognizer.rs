mod common;

use common::recognizer_oracles::*;
use invizo::imaging::RasterImage;
use invizo::recognizer::*;

#[test]
fn gradients_match_finite_differences() {
    let worst = gradient_check_worst(&tiny_config(), 7);
    for (group, err) in &worst {
        assert!(*err < 1e-3, "{group}: relative error {err:e}");
    }
    for g in ["cnn", "bn", "proj", "enc", "dec.0.self", "dec.0.cross", "ff", "ln", "embed", "out"] {
        assert!(worst.iter().any(|(n, _)| n.contains(g)), "group {g} not checked");
    }
}

#[test]
fn encoder_matches_step_by_step_oracle() {
    assert!(encoder_oracle_max_diff(&tiny_config()) < 1e-6);
}

#[test]
fn decoder_is_causal() {
    assert!(causal_probe_max_diff(&tiny_config(), 10) == 0.0);
}

#[test]
fn attention_rows_sum_to_one_everywhere() {
    let cfg = ModelConfig {
        enc_layers: 2,
        ..tiny_config()
    };
    let model = Model::new(cfg.clone(), digit_vocab()).unwrap();
    let feats = Tensor::from_fn(&[2, cfg.seq_len(), cfg.d_model], |i| ((i * 37) % 11) as f64 - 5.0);
    let (_, g) = model.encode_features(feats, true).unwrap();
    assert_eq!(g.attention_records().len(), 2);
    for (shape, p) in g.attention_records() {
        for row in p.chunks_exact(shape[3]) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn feature_shape_for_paper_geometry() {
    let model = Model::new(ModelConfig::default(), digit_vocab()).unwrap();
    let t = model.batch_tensor(&[RasterImage::filled(1024, 64, 255)]).unwrap();
    let f = model.features(t, Mode::Eval).unwrap();
    assert_eq!(f.shape(), &[1, 128, 256]);
}

#[test]
fn zero_image_batch_norm_is_zero_mean() {
    let mut model = Model::new(ModelConfig::toy(), digit_vocab()).unwrap();
    // Non-zero conv biases so the normalization has something to remove.
    for i in 0..3 {
        let id = model.params().find(&format!("cnn.{i}.bias")).unwrap();
        model.params_mut().tensor_mut(id).data_mut().iter_mut().enumerate().for_each(|(j, v)| *v = 0.5 + j as f64);
    }
    let t = model.batch_tensor(&[RasterImage::filled(1024, 64, 0), RasterImage::filled(1024, 64, 0)]).unwrap();
    for out in model.batch_norm_outputs(t, Mode::Train).unwrap() {
        let (n, c, hw) = (out.shape()[0], out.shape()[1], out.shape()[2] * out.shape()[3]);
        for ch in 0..c {
            let sum: f64 = (0..n).map(|i| out.data()[(i * c + ch) * hw..(i * c + ch + 1) * hw].iter().sum::<f64>()).sum();
            assert!((sum / (n * hw) as f64).abs() < 1e-5);
        }
    }
}

#[test]
fn right_edge_only_reaches_last_columns() {
    let model = Model::new(ModelConfig::toy(), digit_vocab()).unwrap();
    let a = RasterImage::from_fn(1024, 64, |x, y| ((x * 7 + y * 3) % 256) as u8);
    let mut b = a.clone();
    for y in 0..64 {
        for x in 1016..1024 {
            b.set(x, y, 0);
        }
    }
    let fa = model.features(model.batch_tensor(&[a]).unwrap(), Mode::Eval).unwrap();
    let fb = model.features(model.batch_tensor(&[b]).unwrap(), Mode::Eval).unwrap();
    let d = 64;
    let diff = |r: usize| {
        (0..d)
            .map(|j| (fa.data()[r * d + j] - fb.data()[r * d + j]).abs())
            .fold(0.0, f64::max)
    };
    for r in 0..126 {
        assert!(diff(r) < 1e-6, "row {r} changed by {}", diff(r));
    }
    assert!(diff(127) > 1e-6);
}

#[test]
fn forward_is_deterministic() {
    let model = Model::new(tiny_config(), digit_vocab()).unwrap();
    let img = RasterImage::from_fn(48, 16, |x, y| ((x * 13 + y * 5) % 256) as u8);
    let a = model.memory(&[img.clone(), img.clone()]).unwrap();
    let b = Model::new(tiny_config(), digit_vocab()).unwrap().memory(&[img]).unwrap();
    let half = a.len() / 2;
    assert_eq!(&a.data()[..half], &a.data()[half..]);
    assert_eq!(&a.data()[..half], b.data());
}

#[test]
fn untrained_decoding_terminates() {
    let model = Model::new(tiny_config(), digit_vocab()).unwrap();
    let img = RasterImage::filled(48, 16, 255);
    let out = model.recognize_batch(&[img.clone()], 5).unwrap();
    assert!(out[0].text.chars().count() <= 5);
    assert_eq!(out[0].text.chars().count(), out[0].token_logprobs.len());
    assert!(out[0].text.chars().all(|c| model.vocab().token(c).is_some()));
    assert!(model.memory(&[img]).is_ok());
    let mem = model.memory(&[RasterImage::filled(48, 16, 0)]).unwrap();
    assert!(model.decode_greedy(&mem, 0).is_err());
}

#[test]
fn loss_decreases_on_repeated_sample() {
    let cfg = ModelConfig {
        lr: 1e-4,
        ..tiny_config()
    };
    let mut tr = Trainer::new(Model::new(cfg, digit_vocab()).unwrap());
    let img = RasterImage::from_fn(48, 16, |x, y| if (10..30).contains(&x) && (4..12).contains(&y) { 0 } else { 255 });
    let label = vec!["٤٢".to_string()];
    let mut prev = f64::INFINITY;
    for step in 0..20 {
        let l = tr.train_step(std::slice::from_ref(&img), &label).unwrap();
        assert!(l <= prev, "step {step}: {l} > {prev}");
        prev = l;
    }
}

#[test]
fn all_pad_targets_have_zero_loss_and_gradient() {
    let model = Model::new(tiny_config(), digit_vocab()).unwrap();
    let t = model.batch_tensor(&[RasterImage::filled(48, 16, 255)]).unwrap();
    let inputs = vec![vec![SOS, PAD, PAD]];
    let targets = vec![vec![PAD, PAD, PAD]];
    let (g, loss, _) = model.loss_from_tokens(Graph::new(), t, &inputs, &targets, Mode::Train).unwrap();
    assert_eq!(g.value(loss).data()[0], 0.0);
    assert!(g.backward(loss).iter().all(|(_, grad)| grad.iter().all(|&v| v == 0.0)));
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::new(tiny_config(), digit_vocab()).unwrap();
    let path = dir.path().join("model.ckpt");
    model.save(&path).unwrap();
    assert!(vocab_path_for(&path).exists());
    let back = Model::load(&path).unwrap();
    let img = RasterImage::from_fn(48, 16, |x, y| ((x + y) * 9 % 256) as u8);
    let a = model.memory(&[img.clone()]).unwrap();
    let b = back.memory(&[img]).unwrap();
    // Parameters pass through f32 on disk.
    let max = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(max < 1e-4);
}

#[test]
fn config_validation() {
    assert!(Model::new(ModelConfig { heads: 3, ..tiny_config() }, digit_vocab()).is_err());
    assert!(Model::new(ModelConfig { input_width: 50, ..tiny_config() }, digit_vocab()).is_err());
    let cfg: ModelConfig = serde_json::from_str(r#"{"d_model": 64}"#).unwrap();
    assert_eq!(cfg.heads, 8);
    assert_eq!(cfg.d_model, 64);
}

#[test]
fn overfits_a_single_line() {
    let img = common::fixtures::forty_two();
    let (model, steps) = common::fixtures::overfit(common::fixtures::small_config(), &img, "٤٢", 600).expect("did not converge");
    assert!(steps <= 600);
    assert_eq!(model.recognize(&img).unwrap().text, "٤٢");
}
