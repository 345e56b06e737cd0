use super::graph::{BatchStats, Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use super::vocab::{Vocabulary, EOS, PAD, SOS};
use super::{sinusoidal_pe, RecognizerOutput};
use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, RasterImage};
use crate::synthesis::compose_line;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub input_width: usize,
    pub input_height: usize,
    pub input_channels: usize,
    pub max_len: usize,
    pub conv_channels: [usize; 3],
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 256,
            enc_layers: 6,
            dec_layers: 6,
            heads: 8,
            ff_dim: 512,
            dropout: 0.1,
            batch_size: 16,
            lr: 1e-4,
            epochs: 55,
            input_width: 1024,
            input_height: 64,
            input_channels: 3,
            max_len: 2048,
            conv_channels: [32, 64, 128],
            weight_decay: 0.01,
            seed: 42,
        }
    }
}

impl ModelConfig {
    /// Desk-scale configuration used for CPU training runs.
    pub fn toy() -> Self {
        ModelConfig {
            d_model: 64,
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            ff_dim: 128,
            dropout: 0.0,
            lr: 1e-3,
            max_len: 256,
            conv_channels: [8, 16, 32],
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        if self.d_model % 2 != 0 {
            return bad(format!("d_model {} must be even", self.d_model));
        }
        if self.input_width % 8 != 0 || self.input_height % 8 != 0 || self.input_width == 0 || self.input_height == 0 {
            return bad(format!(
                "input {}x{} must be a positive multiple of 8",
                self.input_width, self.input_height
            ));
        }
        if !(self.input_channels == 1 || self.input_channels == 3) {
            return bad(format!("input_channels must be 1 or 3, got {}", self.input_channels));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.conv_channels.contains(&0) || self.ff_dim == 0 || self.batch_size == 0 {
            return bad("conv channels, ff_dim and batch_size must be positive".into());
        }
        if self.seq_len() > self.max_len {
            return bad(format!("encoder sequence {} exceeds max_len {}", self.seq_len(), self.max_len));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay non-negative".into());
        }
        Ok(())
    }

    /// Encoder sequence length: one position per 8 input columns.
    pub fn seq_len(&self) -> usize {
        self.input_width / 8
    }
}

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; dropout if the graph has an rng.
    Train,
    /// Running statistics; no dropout.
    Eval,
}

#[derive(Debug, Clone)]
struct ConvIds {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    running_mean: usize,
    running_var: usize,
}

#[derive(Debug, Clone)]
struct AttnIds {
    q: (usize, usize),
    k: (usize, usize),
    v: (usize, usize),
    o: (usize, usize),
}

#[derive(Debug, Clone)]
struct EncIds {
    attn: AttnIds,
    ln1: (usize, usize),
    ff1: (usize, usize),
    ff2: (usize, usize),
    ln2: (usize, usize),
}

#[derive(Debug, Clone)]
struct DecIds {
    self_attn: AttnIds,
    ln1: (usize, usize),
    cross: AttnIds,
    ln2: (usize, usize),
    ff1: (usize, usize),
    ff2: (usize, usize),
    ln3: (usize, usize),
}

#[derive(Debug, Clone)]
struct Layout {
    conv: Vec<ConvIds>,
    proj: (usize, usize),
    enc: Vec<EncIds>,
    dec: Vec<DecIds>,
    embed: usize,
    out: (usize, usize),
}

/// CNN-Transformer line recognizer.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    params: ParamStore,
    layout: Layout,
    pe: Tensor,
}

/// Lazily binds parameters into a graph so each is copied at most once.
struct Binder<'a> {
    params: &'a ParamStore,
    vars: Vec<Option<Var>>,
}

impl<'a> Binder<'a> {
    fn new(params: &'a ParamStore) -> Self {
        Binder {
            params,
            vars: vec![None; params.len()],
        }
    }

    fn get(&mut self, g: &mut Graph, i: usize) -> Var {
        if let Some(v) = self.vars[i] {
            return v;
        }
        let e = self.params.entry(i);
        let v = if e.trainable {
            g.param(i, e.tensor.clone())
        } else {
            g.input(e.tensor.clone())
        };
        self.vars[i] = Some(v);
        v
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn xavier(&mut self, din: usize, dout: usize) -> Tensor {
        let limit = (6.0 / (din + dout) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        Tensor::from_fn(&[din, dout], |_| dist.sample(&mut self.rng))
    }

    fn kaiming_conv(&mut self, cout: usize, cin: usize) -> Tensor {
        let std = (2.0 / (cin * 9) as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("positive std");
        Tensor::from_fn(&[cout, cin, 3, 3], |_| dist.sample(&mut self.rng))
    }

    fn normal(&mut self, shape: &[usize], std: f64) -> Tensor {
        let dist = Normal::new(0.0, std).expect("positive std");
        Tensor::from_fn(shape, |_| dist.sample(&mut self.rng))
    }
}

fn add_linear(p: &mut ParamStore, init: &mut Init, name: &str, din: usize, dout: usize) -> (usize, usize) {
    let w = p.add(format!("{name}.weight"), init.xavier(din, dout), true);
    let b = p.add(format!("{name}.bias"), Tensor::zeros(&[dout]), true);
    (w, b)
}

fn add_norm(p: &mut ParamStore, name: &str, d: usize) -> (usize, usize) {
    let g = p.add(format!("{name}.gamma"), Tensor::from_fn(&[d], |_| 1.0), true);
    let b = p.add(format!("{name}.beta"), Tensor::zeros(&[d]), true);
    (g, b)
}

fn add_attn(p: &mut ParamStore, init: &mut Init, name: &str, d: usize) -> AttnIds {
    AttnIds {
        q: add_linear(p, init, &format!("{name}.q"), d, d),
        k: add_linear(p, init, &format!("{name}.k"), d, d),
        v: add_linear(p, init, &format!("{name}.v"), d, d),
        o: add_linear(p, init, &format!("{name}.o"), d, d),
    }
}

impl Model {
    /// A freshly initialized model; initialization is seeded by `config.seed`.
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Model> {
        config.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let mut p = ParamStore::new();
        let d = config.d_model;
        let mut conv = Vec::new();
        let mut cin = config.input_channels;
        for (i, &cout) in config.conv_channels.iter().enumerate() {
            let w = p.add(format!("cnn.{i}.weight"), init.kaiming_conv(cout, cin), true);
            let b = p.add(format!("cnn.{i}.bias"), Tensor::zeros(&[cout]), true);
            let (gamma, beta) = add_norm(&mut p, &format!("cnn.{i}.bn"), cout);
            let running_mean = p.add(format!("cnn.{i}.bn.running_mean"), Tensor::zeros(&[cout]), false);
            let running_var = p.add(format!("cnn.{i}.bn.running_var"), Tensor::from_fn(&[cout], |_| 1.0), false);
            conv.push(ConvIds {
                w,
                b,
                gamma,
                beta,
                running_mean,
                running_var,
            });
            cin = cout;
        }
        let feat = config.conv_channels[2] * config.input_height / 8;
        let proj = add_linear(&mut p, &mut init, "proj", feat, d);
        let enc = (0..config.enc_layers)
            .map(|l| EncIds {
                attn: add_attn(&mut p, &mut init, &format!("enc.{l}.attn"), d),
                ln1: add_norm(&mut p, &format!("enc.{l}.ln1"), d),
                ff1: add_linear(&mut p, &mut init, &format!("enc.{l}.ff1"), d, config.ff_dim),
                ff2: add_linear(&mut p, &mut init, &format!("enc.{l}.ff2"), config.ff_dim, d),
                ln2: add_norm(&mut p, &format!("enc.{l}.ln2"), d),
            })
            .collect();
        let dec = (0..config.dec_layers)
            .map(|l| DecIds {
                self_attn: add_attn(&mut p, &mut init, &format!("dec.{l}.self"), d),
                ln1: add_norm(&mut p, &format!("dec.{l}.ln1"), d),
                cross: add_attn(&mut p, &mut init, &format!("dec.{l}.cross"), d),
                ln2: add_norm(&mut p, &format!("dec.{l}.ln2"), d),
                ff1: add_linear(&mut p, &mut init, &format!("dec.{l}.ff1"), d, config.ff_dim),
                ff2: add_linear(&mut p, &mut init, &format!("dec.{l}.ff2"), config.ff_dim, d),
                ln3: add_norm(&mut p, &format!("dec.{l}.ln3"), d),
            })
            .collect();
        let embed = p.add("embed.weight", init.normal(&[vocab.len(), d], 1.0 / (d as f64).sqrt()), true);
        let out = add_linear(&mut p, &mut init, "out", d, vocab.len());
        let pe = sinusoidal_pe(config.max_len, d)?;
        Ok(Model {
            layout: Layout {
                conv,
                proj,
                enc,
                dec,
                embed,
                out,
            },
            config,
            vocab,
            params: p,
            pe,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Converts a line image into the `[C, H, W]` input layout: composed to
    /// the input size (right-aligned, aspect kept) and scaled to [0, 1].
    pub fn preprocess(&self, img: &RasterImage) -> Result<Vec<f64>> {
        let (w, h) = (self.config.input_width, self.config.input_height);
        let gray = to_grayscale(img);
        let line = if gray.width() == w && gray.height() == h {
            gray
        } else {
            compose_line(&[gray], h, w)?
        };
        let plane: Vec<f64> = line.data().iter().map(|&v| v as f64 / 255.0).collect();
        Ok(plane.repeat(self.config.input_channels))
    }

    /// Stacks preprocessed images into a `[N, C, H, W]` tensor.
    pub fn batch_tensor(&self, images: &[RasterImage]) -> Result<Tensor> {
        let mut data = Vec::new();
        for img in images {
            data.extend(self.preprocess(img)?);
        }
        let c = &self.config;
        Tensor::new(&[images.len(), c.input_channels, c.input_height, c.input_width], data)
    }

    /// Feature extractor: three conv/BN/ReLU/pool blocks, flattened per
    /// column and projected to `d_model`. Returns `[N, W/8, d_model]` and,
    /// in training mode, each block's batch statistics.
    fn cnn(
        &self,
        g: &mut Graph,
        b: &mut Binder,
        images: Tensor,
        mode: Mode,
        mut bn_out: Option<&mut Vec<Var>>,
    ) -> Result<(Var, Vec<BatchStats>)> {
        let c = &self.config;
        let s = images.shape().to_vec();
        if s.len() != 4 || s[1] != c.input_channels || s[2] != c.input_height || s[3] != c.input_width {
            return Err(Error::InvalidParameter(format!(
                "expected images [N, {}, {}, {}], got {s:?}",
                c.input_channels, c.input_height, c.input_width
            )));
        }
        let mut x = g.input(images);
        let mut stats = Vec::new();
        for ids in &self.layout.conv {
            let (w, bias) = (b.get(g, ids.w), b.get(g, ids.b));
            let conv = g.conv2d(x, w, bias)?;
            let (gamma, beta) = (b.get(g, ids.gamma), b.get(g, ids.beta));
            let running = match mode {
                Mode::Train => None,
                Mode::Eval => Some((
                    self.params.tensor(ids.running_mean).data(),
                    self.params.tensor(ids.running_var).data(),
                )),
            };
            let (bn, st) = g.batch_norm(conv, gamma, beta, running)?;
            stats.extend(st);
            if let Some(v) = bn_out.as_mut() {
                v.push(bn);
            }
            let r = g.relu(bn);
            x = g.max_pool(r)?;
        }
        let seq = g.to_sequence(x)?;
        let (pw, pb) = (b.get(g, self.layout.proj.0), b.get(g, self.layout.proj.1));
        Ok((g.linear(seq, pw, Some(pb))?, stats))
    }

    fn lin(&self, g: &mut Graph, b: &mut Binder, x: Var, ids: (usize, usize)) -> Result<Var> {
        let (w, bias) = (b.get(g, ids.0), b.get(g, ids.1));
        g.linear(x, w, Some(bias))
    }

    fn norm(&self, g: &mut Graph, b: &mut Binder, x: Var, ids: (usize, usize)) -> Result<Var> {
        let (gamma, beta) = (b.get(g, ids.0), b.get(g, ids.1));
        g.layer_norm(x, gamma, beta)
    }

    fn mha(&self, g: &mut Graph, b: &mut Binder, q_in: Var, kv_in: Var, ids: &AttnIds, causal: bool) -> Result<Var> {
        let q = self.lin(g, b, q_in, ids.q)?;
        let k = self.lin(g, b, kv_in, ids.k)?;
        let v = self.lin(g, b, kv_in, ids.v)?;
        let a = g.attention(q, k, v, self.config.heads, causal)?;
        self.lin(g, b, a, ids.o)
    }

    fn ffn(&self, g: &mut Graph, b: &mut Binder, x: Var, ff1: (usize, usize), ff2: (usize, usize)) -> Result<Var> {
        let h = self.lin(g, b, x, ff1)?;
        let h = g.relu(h);
        let h = g.dropout(h, self.config.dropout);
        self.lin(g, b, h, ff2)
    }

    /// Residual connection followed by layer norm.
    fn residual(&self, g: &mut Graph, b: &mut Binder, x: Var, sub: Var, ln: (usize, usize)) -> Result<Var> {
        let sub = g.dropout(sub, self.config.dropout);
        let s = g.add(x, sub)?;
        self.norm(g, b, s, ln)
    }

    fn add_pe(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.value(x).shape()[1];
        let d = self.config.d_model;
        if s > self.config.max_len {
            return Err(Error::InvalidParameter(format!("sequence {s} exceeds max_len {}", self.config.max_len)));
        }
        let pe = g.input(Tensor::new(&[s, d], self.pe.data()[..s * d].to_vec())?);
        let y = g.add_broadcast(x, pe)?;
        Ok(g.dropout(y, self.config.dropout))
    }

    /// Encoder stack over `[N, S, d]` features.
    fn encode(&self, g: &mut Graph, b: &mut Binder, x: Var) -> Result<Var> {
        let mut h = self.add_pe(g, x)?;
        for l in &self.layout.enc {
            let a = self.mha(g, b, h, h, &l.attn, false)?;
            h = self.residual(g, b, h, a, l.ln1)?;
            let f = self.ffn(g, b, h, l.ff1, l.ff2)?;
            h = self.residual(g, b, h, f, l.ln2)?;
        }
        Ok(h)
    }

    /// Decoder logits `[N, T, V]` for teacher-forced `tokens` (`N` rows of `T`).
    fn decode(&self, g: &mut Graph, b: &mut Binder, memory: Var, tokens: &[Vec<usize>]) -> Result<Var> {
        let n = tokens.len();
        let t = tokens.first().map_or(0, |r| r.len());
        if n == 0 || t == 0 || tokens.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidParameter("decoder tokens must be a non-empty rectangle".into()));
        }
        let d = self.config.d_model;
        let flat: Vec<usize> = tokens.iter().flatten().copied().collect();
        let table = b.get(g, self.layout.embed);
        let e = g.embedding(table, &flat)?;
        let e = g.reshape(e, &[n, t, d])?;
        let e = g.scale(e, (d as f64).sqrt());
        let mut h = self.add_pe(g, e)?;
        for l in &self.layout.dec {
            let a = self.mha(g, b, h, h, &l.self_attn, true)?;
            h = self.residual(g, b, h, a, l.ln1)?;
            let c = self.mha(g, b, h, memory, &l.cross, false)?;
            h = self.residual(g, b, h, c, l.ln2)?;
            let f = self.ffn(g, b, h, l.ff1, l.ff2)?;
            h = self.residual(g, b, h, f, l.ln3)?;
        }
        self.lin(g, b, h, self.layout.out)
    }

    /// Teacher-forced loss on a batch; returns the graph, the loss node and
    /// batch-norm statistics (training mode).
    pub fn loss_graph(
        &self,
        g: Graph,
        images: Tensor,
        labels: &[Vec<usize>],
        mode: Mode,
    ) -> Result<(Graph, Var, Vec<BatchStats>)> {
        if images.shape()[0] != labels.len() {
            return Err(Error::InvalidParameter("one label per image required".into()));
        }
        let (inputs, targets) = teacher_forcing(labels);
        self.loss_from_tokens(g, images, &inputs, &targets, mode)
    }

    /// Cross-entropy of decoder predictions for explicit input and target
    /// token rows; `PAD` targets are ignored.
    pub fn loss_from_tokens(
        &self,
        mut g: Graph,
        images: Tensor,
        inputs: &[Vec<usize>],
        targets: &[Vec<usize>],
        mode: Mode,
    ) -> Result<(Graph, Var, Vec<BatchStats>)> {
        let mut b = Binder::new(&self.params);
        let (feat, stats) = self.cnn(&mut g, &mut b, images, mode, None)?;
        let memory = self.encode(&mut g, &mut b, feat)?;
        let logits = self.decode(&mut g, &mut b, memory, inputs)?;
        let flat_targets: Vec<usize> = targets.iter().flatten().copied().collect();
        let loss = g.cross_entropy(logits, &flat_targets, PAD)?;
        Ok((g, loss, stats))
    }

    /// Output of each batch-norm layer (before ReLU) for a batch.
    pub fn batch_norm_outputs(&self, images: Tensor, mode: Mode) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let mut b = Binder::new(&self.params);
        let mut vars = Vec::new();
        self.cnn(&mut g, &mut b, images, mode, Some(&mut vars))?;
        Ok(vars.into_iter().map(|v| g.value(v).clone()).collect())
    }

    /// Features and encoder memory for a batch in inference mode.
    pub fn memory(&self, images: &[RasterImage]) -> Result<Tensor> {
        let t = self.batch_tensor(images)?;
        let mut g = Graph::new();
        let mut b = Binder::new(&self.params);
        let (feat, _) = self.cnn(&mut g, &mut b, t, Mode::Eval, None)?;
        let m = self.encode(&mut g, &mut b, feat)?;
        Ok(g.value(m).clone())
    }

    /// CNN features for a batch in the given mode (`[N, W/8, d_model]`).
    pub fn features(&self, images: Tensor, mode: Mode) -> Result<Tensor> {
        let mut g = Graph::new();
        let mut b = Binder::new(&self.params);
        let (f, _) = self.cnn(&mut g, &mut b, images, mode, None)?;
        Ok(g.value(f).clone())
    }

    /// Encoder output for `[N, S, d]` features, optionally recording
    /// attention probabilities.
    pub fn encode_features(&self, features: Tensor, record_attention: bool) -> Result<(Tensor, Graph)> {
        let mut g = Graph::new();
        g.record_attention(record_attention);
        let mut b = Binder::new(&self.params);
        let x = g.input(features);
        let m = self.encode(&mut g, &mut b, x)?;
        Ok((g.value(m).clone(), g))
    }

    /// Decoder logits `[N, T, V]` for given memory and input tokens.
    pub fn decoder_logits(&self, memory: &Tensor, tokens: &[Vec<usize>]) -> Result<Tensor> {
        let mut g = Graph::new();
        let mut b = Binder::new(&self.params);
        let m = g.input(memory.clone());
        let l = self.decode(&mut g, &mut b, m, tokens)?;
        Ok(g.value(l).clone())
    }

    /// Greedy decoding from `[N, S, d]` memory, at most `max_out` tokens each.
    pub fn decode_greedy(&self, memory: &Tensor, max_out: usize) -> Result<Vec<RecognizerOutput>> {
        if max_out == 0 {
            return Err(Error::InvalidParameter("max_out must be positive".into()));
        }
        let n = memory.shape()[0];
        let max_out = max_out.min(self.config.max_len - 1);
        let mut tokens: Vec<Vec<usize>> = vec![vec![SOS]; n];
        let mut outputs: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n];
        let mut done = vec![false; n];
        for _ in 0..max_out {
            if done.iter().all(|&d| d) {
                break;
            }
            let logits = self.decoder_logits(memory, &tokens)?;
            let (t, v) = (tokens[0].len(), self.vocab.len());
            for i in 0..n {
                let row = &logits.data()[(i * t + t - 1) * v..(i * t + t) * v];
                let (best, &best_v) = row
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |a, b| if *b.1 > *a.1 { b } else { a });
                let lse = best_v + row.iter().map(|x| (x - best_v).exp()).sum::<f64>().ln();
                let next = if done[i] { PAD } else { best };
                if !done[i] {
                    if best == EOS || self.vocab.char(best).is_none() {
                        done[i] = true;
                    } else {
                        outputs[i].0.push(best);
                        outputs[i].1.push(best_v - lse);
                    }
                }
                tokens[i].push(next);
            }
        }
        Ok(outputs
            .into_iter()
            .map(|(toks, lp)| RecognizerOutput {
                text: self.vocab.decode(&toks),
                token_logprobs: lp,
            })
            .collect())
    }

    /// Recognizes a batch of single-line images.
    pub fn recognize_batch(&self, images: &[RasterImage], max_out: usize) -> Result<Vec<RecognizerOutput>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let memory = self.memory(images)?;
        self.decode_greedy(&memory, max_out)
    }

    /// Replaces parameters from checkpoint tensors.
    pub fn load_tensors(&mut self, tensors: Vec<(String, Tensor)>) -> Result<()> {
        self.params.load_tensors(tensors)
    }

    /// Blends batch statistics into the running estimates.
    pub fn update_running_stats(&mut self, stats: &[BatchStats], momentum: f64) {
        let ids: Vec<(usize, usize)> = self.layout.conv.iter().map(|c| (c.running_mean, c.running_var)).collect();
        for ((rm, rv), s) in ids.into_iter().zip(stats) {
            for (r, v) in self.params.tensor_mut(rm).data_mut().iter_mut().zip(&s.mean) {
                *r = (1.0 - momentum) * *r + momentum * v;
            }
            for (r, v) in self.params.tensor_mut(rv).data_mut().iter_mut().zip(&s.var) {
                *r = (1.0 - momentum) * *r + momentum * v;
            }
        }
    }

    /// Random generator for dropout masks at a training step.
    pub(crate) fn dropout_rng(&self, step: u64) -> ChaCha8Rng {
        let mut seed_rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x9E37_79B9_7F4A_7C15);
        seed_rng.set_stream(step);
        ChaCha8Rng::seed_from_u64(seed_rng.random())
    }
}

/// Decoder inputs `[SOS, y.., PAD..]` and targets `[y.., EOS, PAD..]`,
/// padded to the longest label plus one.
pub fn teacher_forcing(labels: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let t = labels.iter().map(|l| l.len()).max().unwrap_or(0) + 1;
    let mut inputs = Vec::with_capacity(labels.len());
    let mut targets = Vec::with_capacity(labels.len());
    for l in labels {
        let mut i = vec![SOS];
        i.extend_from_slice(l);
        i.resize(t, PAD);
        let mut o = l.clone();
        o.push(EOS);
        o.resize(t, PAD);
        inputs.push(i);
        targets.push(o);
    }
    (inputs, targets)
}
