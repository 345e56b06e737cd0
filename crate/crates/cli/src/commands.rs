//! Subcommands of the `invizo` binary.

use crate::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use invizo::geometry::Point;
use invizo::imaging::io as imgio;
use invizo::metrics::{detection_prf, EvalReport};
use invizo::pipeline::{predictions_to_json, run_pipeline, PipelineConfig};
use invizo::recognizer::{train_samples, Model, TrainConfig, Vocabulary};
use invizo::synthesis::{read_manifest, write_digit_dataset, write_text_dataset, Charset, LineFont};
use invizo::template::load_template;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "invizo", version, about = "Template-driven Arabic document OCR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read every field of a template from a test image.
    Run(RunArgs),
    /// Generate a synthetic line dataset.
    Synth(SynthArgs),
    /// CER/WER of hypotheses against references.
    Eval(EvalArgs),
    /// Precision/recall/F-measure of detected line quads.
    EvalDet(EvalDetArgs),
    /// Train the line recognizer on a manifest.
    Train(TrainArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the RANSAC seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use template quads as-is when registration fails.
    #[arg(long)]
    pub fallback_on_registration_fail: bool,
    /// Recognizer checkpoint; defaults to `checkpoint` in the config.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    /// Random 1-8 digit sequences from procedural digit glyphs.
    Digits,
    /// Corpus lines rendered with fonts.
    Text,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "digits")]
    pub kind: SynthKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub augment: bool,
    /// Text corpus, one line per sample (text kind).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Font files used in turn (text kind).
    #[arg(long = "font")]
    pub fonts: Vec<PathBuf>,
    /// Charset file; defaults to the built-in Arabic set.
    #[arg(long)]
    pub charset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// References: `id<TAB>text` or plain text per line.
    #[arg(long)]
    pub refs: PathBuf,
    /// Hypotheses in the same layout.
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long)]
    pub report_tsv: Option<PathBuf>,
    #[arg(long)]
    pub report_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    /// Ground-truth quads as JSON (see README).
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON training config (model settings plus `max_steps`).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Log the loss every N steps.
    #[arg(long, default_value_t = 50)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Append-only corrections log.
    #[arg(long, default_value = "corrections.ndjson")]
    pub corrections: PathBuf,
}

fn load_config() -> Result<PipelineConfig, CliError> {
    PipelineConfig::from_env().map_err(|e| CliError::Input(format!("{}: {e}", invizo::pipeline::CONFIG_ENV)))
}

/// Loads the recognizer named on the command line or in the config.
pub fn load_model(explicit: Option<&Path>, config: &PipelineConfig) -> Result<Model, CliError> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| CliError::Input("no recognizer checkpoint: pass --checkpoint or set `checkpoint` in the config".into()))?;
    Model::load(&path).map_err(|e| CliError::input_at(&path, e))
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let mut config = load_config()?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    config.fallback_on_registration_fail |= args.fallback_on_registration_fail;
    let template = load_template(&args.template).map_err(|e| CliError::input_at(&args.template, e))?;
    let image = imgio::load(&args.image).map_err(|e| CliError::input_at(&args.image, e))?;
    let model = load_model(args.checkpoint.as_deref(), &config)?;
    let preds = run_pipeline(&image, &template, &model, &config)
        .map_err(|e| CliError::Processing(format!("{}: {e}", e.stage)))?;
    std::fs::write(&args.out, predictions_to_json(&preds)).map_err(|e| CliError::input_at(&args.out, e))?;
    println!("{} predictions written to {}", preds.len(), args.out.display());
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let entries = match args.kind {
        SynthKind::Digits => write_digit_dataset(&args.out, args.count, args.seed, args.augment)
            .map_err(|e| CliError::from_engine(&args.out, e))?,
        SynthKind::Text => {
            let corpus_path = args
                .corpus
                .as_ref()
                .ok_or_else(|| CliError::Input("--corpus is required for --kind text".into()))?;
            let corpus = std::fs::read_to_string(corpus_path).map_err(|e| CliError::input_at(corpus_path, e))?;
            let lines: Vec<String> = corpus.lines().take(args.count).map(str::to_string).collect();
            let charset = match &args.charset {
                Some(p) => Charset::load(p).map_err(|e| CliError::input_at(p, e))?,
                None => Charset::default_arabic(),
            };
            if args.fonts.is_empty() {
                return Err(CliError::Input("--font is required for --kind text".into()));
            }
            let fonts = args
                .fonts
                .iter()
                .map(|p| LineFont::load(p).map_err(|e| CliError::input_at(p, e)))
                .collect::<Result<Vec<_>, _>>()?;
            write_text_dataset(&args.out, &lines, &charset, &fonts, args.seed, args.augment)
                .map_err(|e| CliError::from_engine(corpus_path, e))?
        }
    };
    println!("{} samples written to {}", entries.len(), args.out.display());
    Ok(())
}

/// Lines of an eval input as `(id, text)`; ids default to line numbers.
fn read_texts(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input_at(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| match l.split_once('\t') {
            Some((id, t)) => (id.to_string(), t.to_string()),
            None => ((i + 1).to_string(), l.to_string()),
        })
        .collect())
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let refs = read_texts(&args.refs)?;
    let hyps: BTreeMap<String, String> = read_texts(&args.hyps)?.into_iter().collect();
    let mut triples = Vec::with_capacity(refs.len());
    for (id, r) in &refs {
        let h = hyps
            .get(id)
            .ok_or_else(|| CliError::Input(format!("{}: no hypothesis for id {id:?}", args.hyps.display())))?;
        triples.push((id.clone(), r.as_str(), h.as_str()));
    }
    let report = EvalReport::from_pairs(triples).map_err(|e| CliError::input_at(&args.refs, e))?;
    if let Some(p) = &args.report_tsv {
        std::fs::write(p, report.to_tsv()).map_err(|e| CliError::input_at(p, e))?;
    }
    if let Some(p) = &args.report_json {
        std::fs::write(p, report.to_json()).map_err(|e| CliError::input_at(p, e))?;
    }
    println!("samples\t{}", report.samples.len());
    println!("cer\t{:.6}", report.corpus_cer);
    println!("wer\t{:.6}", report.corpus_wer);
    Ok(report)
}

type Quad = [[f64; 2]; 4];

/// Detection file: either one list of quads or quads keyed by image.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum QuadFile {
    Single(Vec<Quad>),
    ByImage(BTreeMap<String, Vec<Quad>>),
}

impl QuadFile {
    fn into_map(self) -> BTreeMap<String, Vec<Quad>> {
        match self {
            QuadFile::Single(q) => BTreeMap::from([(String::new(), q)]),
            QuadFile::ByImage(m) => m,
        }
    }
}

fn read_quads(path: &Path) -> Result<BTreeMap<String, Vec<Quad>>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input_at(path, e))?;
    let f: QuadFile = serde_json::from_slice(&bytes).map_err(|e| CliError::input_at(path, e))?;
    Ok(f.into_map())
}

fn to_points(q: &[Quad]) -> Vec<[Point; 4]> {
    q.iter().map(|q| q.map(|[x, y]| Point::new(x, y))).collect()
}

/// Detection scores pooled over all images.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    pub ground_truth: usize,
    pub predicted: usize,
}

pub fn eval_det(args: &EvalDetArgs) -> Result<DetReport, CliError> {
    if !(0.0..=1.0).contains(&args.iou) {
        return Err(CliError::Input(format!("--iou must be in [0, 1], got {}", args.iou)));
    }
    let gt = read_quads(&args.gt)?;
    let pred = read_quads(&args.pred)?;
    let keys: BTreeSet<&String> = gt.keys().chain(pred.keys()).collect();
    let (mut tp, mut ng, mut np) = (0, 0, 0);
    for k in keys {
        let g = to_points(gt.get(k).map_or(&[][..], Vec::as_slice));
        let p = to_points(pred.get(k).map_or(&[][..], Vec::as_slice));
        tp += detection_prf(&g, &p, args.iou).true_positives;
        ng += g.len();
        np += p.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (precision, recall) = (ratio(tp, np), ratio(tp, ng));
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let report = DetReport {
        precision,
        recall,
        f_measure,
        true_positives: tp,
        ground_truth: ng,
        predicted: np,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(report)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg_bytes = std::fs::read(&args.config).map_err(|e| CliError::input_at(&args.config, e))?;
    let config: TrainConfig = serde_json::from_slice(&cfg_bytes).map_err(|e| CliError::input_at(&args.config, e))?;
    config.model.validate().map_err(|e| CliError::input_at(&args.config, e))?;
    let entries = read_manifest(&args.manifest).map_err(|e| CliError::input_at(&args.manifest, e))?;
    if entries.is_empty() {
        return Err(CliError::input_at(&args.manifest, "manifest is empty"));
    }
    let mut images = Vec::with_capacity(entries.len());
    for e in &entries {
        images.push(imgio::load(&e.image_path).map_err(|err| CliError::input_at(&e.image_path, err))?);
    }
    let labels: Vec<String> = entries.iter().map(|e| e.label.clone()).collect();
    let chars: BTreeSet<char> = labels.iter().flat_map(|l| l.chars()).collect();
    let vocab = Vocabulary::new(chars).map_err(|e| CliError::input_at(&args.manifest, e))?;
    let every = args.log_every.max(1);
    let model = train_samples(&config, vocab, &images, &labels, |step, loss| {
        if step % every == 0 {
            eprintln!("step {step} loss {loss:.4}");
        }
    })
    .map_err(|e| CliError::Processing(format!("training: {e}")))?;
    model.save(&args.checkpoint).map_err(|e| CliError::input_at(&args.checkpoint, e))?;
    println!("checkpoint written to {}", args.checkpoint.display());
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = load_config()?;
    let model = load_model(args.checkpoint.as_deref(), &config)?;
    let state = crate::service::AppState::new(std::sync::Arc::new(model), config, args.corrections.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Processing(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .map_err(|e| CliError::Input(format!("{}: {e}", args.addr)))?;
        eprintln!("listening on {}", args.addr);
        axum::serve(listener, crate::service::router(state))
            .await
            .map_err(|e| CliError::Processing(e.to_string()))
    })
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a).map(drop),
        Command::EvalDet(a) => eval_det(a).map(drop),
        Command::Train(a) => train(a),
        Command::Serve(a) => serve(a),
    }
}
