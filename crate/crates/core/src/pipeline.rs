//! End-to-end field extraction: preprocess, register, crop, recognize and
//! enhance every shape of a template.
//!
//! Stages run sequentially and each field is processed independently, so
//! one bad field never aborts the others. Failures that make the whole
//! request meaningless (undecodable input, failed registration without
//! fallback) are reported as a [`StageError`] naming the stage.

use crate::enhancement::{enhance, Prediction, RegistrationMode};
use crate::error::Error;
use crate::geometry::{bounds, Point};
use crate::imaging::{binarize, fnlm_denoise, invert, open, to_grayscale, BinarizeMode, FnlmParams, RasterImage};
use crate::recognizer::{Recognizer, DEFAULT_MAX_OUT};
use crate::registration::{project_points, register, warp_extract, Homography, RegistrationParams};
use crate::segmentation::segment_lines_projection;
use crate::template::{FieldShape, FieldType, Template};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming a JSON config file.
pub const CONFIG_ENV: &str = "INVIZO_CONFIG";

/// Flag added to every prediction when template quads were used as-is.
pub const FLAG_REGISTRATION_FALLBACK: &str = "RegistrationFallback";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub fnlm: FnlmParams,
    pub binarize: BinarizeMode,
    pub registration: RegistrationParams,
    /// Overrides the RANSAC seed when set.
    pub seed: Option<u64>,
    /// Use template quads directly when registration fails.
    pub fallback_on_registration_fail: bool,
    /// Recognize grayscale crops instead of the binarized ones.
    pub recognize_raw_crops: bool,
    pub max_output_len: usize,
    /// Recognizer checkpoint used by the CLI and the service.
    pub checkpoint: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fnlm: FnlmParams::default(),
            binarize: BinarizeMode::Otsu,
            registration: RegistrationParams::default(),
            seed: None,
            fallback_on_registration_fail: false,
            recognize_raw_crops: false,
            max_output_len: DEFAULT_MAX_OUT,
            checkpoint: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Config from the file named by `INVIZO_CONFIG`, or defaults when unset.
    pub fn from_env() -> crate::Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(p),
            _ => Ok(Self::default()),
        }
    }

    fn registration_params(&self) -> RegistrationParams {
        let mut p = self.registration;
        if let Some(seed) = self.seed {
            p.ransac.seed = seed;
        }
        p
    }
}

/// Pipeline stage, used to attribute failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preprocess,
    Registration,
    Extraction,
    Segmentation,
    Recognition,
    Enhancement,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Registration => "registration",
            Stage::Extraction => "extraction",
            Stage::Segmentation => "segmentation",
            Stage::Recognition => "recognition",
            Stage::Enhancement => "enhancement",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn at(stage: Stage) -> impl FnOnce(Error) -> StageError {
    move |source| StageError { stage, source }
}

/// The test image in both forms the later stages need.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub gray: RasterImage,
    /// Denoised, binarized and opened; ink 0 on 255.
    pub binary: RasterImage,
}

/// Grayscale, denoise, binarize, then open the ink to drop specks.
pub fn preprocess(img: &RasterImage, config: &PipelineConfig) -> crate::Result<Preprocessed> {
    let gray = to_grayscale(img);
    let denoised = fnlm_denoise(&gray, &config.fnlm)?;
    let bin = binarize(&denoised, config.binarize)?.image;
    // Morphology treats non-zero as foreground, so open the inverted image.
    let binary = invert(&open(&invert(&bin)));
    Ok(Preprocessed { gray, binary })
}

/// Field quads in test-image coordinates.
#[derive(Debug, Clone)]
pub struct FieldLayout {
    pub quads: Vec<[Point; 4]>,
    pub registration: RegistrationMode,
    /// Template-to-test mapping; identity in fallback mode.
    pub homography: Homography,
}

/// Registers the template against the grayscale test image and projects
/// every shape. A shape whose projection fails keeps its template quad.
pub fn locate_fields(template: &Template, test_gray: &RasterImage, config: &PipelineConfig) -> Result<FieldLayout, StageError> {
    let (homography, registration) = match register(&template.image, test_gray, &config.registration_params()) {
        Ok(r) => (r.homography, RegistrationMode::Matched),
        Err(e @ (Error::RegistrationFailed { .. } | Error::InsufficientCorrespondences { .. })) => {
            if !config.fallback_on_registration_fail {
                return Err(StageError {
                    stage: Stage::Registration,
                    source: e,
                });
            }
            (Homography::IDENTITY, RegistrationMode::Fallback)
        }
        Err(e) => return Err(at(Stage::Registration)(e)),
    };
    let quads = template
        .shapes
        .iter()
        .map(|s| match project_points(&homography, &s.points) {
            Ok(p) => [p[0], p[1], p[2], p[3]],
            Err(_) => s.points,
        })
        .collect();
    Ok(FieldLayout {
        quads,
        registration,
        homography,
    })
}

fn field_error(pred: &mut Prediction, stage: Stage, e: &Error) {
    pred.flags.push(format!("Error:{stage}: {e}"));
}

fn recognize_one(recognizer: &dyn Recognizer, img: &RasterImage) -> crate::Result<String> {
    Ok(recognizer.recognize(img)?.text)
}

/// Reads one field crop: either a single line, or each detected line in
/// top-to-bottom order for multi-line fields.
fn read_field(shape: &FieldShape, crop: &RasterImage, binary_crop: &RasterImage, recognizer: &dyn Recognizer) -> Result<(String, Vec<String>), StageError> {
    if shape.field_type != FieldType::MultipleLines {
        let text = recognize_one(recognizer, crop).map_err(at(Stage::Recognition))?;
        return Ok((text, Vec::new()));
    }
    let lines = segment_lines_projection(binary_crop);
    let mut texts = Vec::with_capacity(lines.len());
    for line in &lines {
        let (x0, y0, x1, y1) = bounds(&line.quad);
        let (x0, y0) = (x0.max(0.0) as usize, y0.max(0.0) as usize);
        let img = crop
            .crop(x0, y0, (x1 as usize).saturating_sub(x0), (y1 as usize).saturating_sub(y0))
            .map_err(at(Stage::Segmentation))?;
        texts.push(recognize_one(recognizer, &img).map_err(at(Stage::Recognition))?);
    }
    Ok((texts.join("\n"), texts))
}

/// Runs every stage and returns one prediction per template shape, in
/// template order. Per-field failures are recorded as `Error:<stage>: ...`
/// flags on the affected prediction.
pub fn run_pipeline(
    test_image: &RasterImage,
    template: &Template,
    recognizer: &dyn Recognizer,
    config: &PipelineConfig,
) -> Result<Vec<Prediction>, StageError> {
    let pre = preprocess(test_image, config).map_err(at(Stage::Preprocess))?;
    let layout = locate_fields(template, &pre.gray, config)?;
    let mut out = Vec::with_capacity(template.shapes.len());
    for (shape, quad) in template.shapes.iter().zip(&layout.quads) {
        let mut pred = Prediction::new(shape.id.clone(), shape.field_type, "");
        pred.registration = layout.registration;
        if layout.registration == RegistrationMode::Fallback {
            pred.flags.push(FLAG_REGISTRATION_FALLBACK.to_string());
        }
        let crops = warp_extract(&pre.binary, quad).and_then(|b| {
            let g = if config.recognize_raw_crops {
                warp_extract(&pre.gray, quad)?
            } else {
                b.clone()
            };
            Ok((g, b))
        });
        let (crop, binary_crop) = match crops {
            Ok(c) => c,
            Err(e) => {
                field_error(&mut pred, Stage::Extraction, &e);
                out.push(pred);
                continue;
            }
        };
        match read_field(shape, &crop, &binary_crop, recognizer) {
            Ok((text, lines)) => {
                pred.raw_text = text;
                pred.line_texts = lines;
                let flags = std::mem::take(&mut pred.flags);
                pred = enhance(&pred, &shape.possibilities);
                let mut merged = flags;
                merged.append(&mut pred.flags);
                pred.flags = merged;
            }
            Err(e) => field_error(&mut pred, e.stage, &e.source),
        }
        out.push(pred);
    }
    Ok(out)
}

/// Predictions as pretty JSON with a trailing newline. Key order follows
/// the struct, so equal predictions always give equal bytes.
pub fn predictions_to_json(preds: &[Prediction]) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(preds).expect("predictions serialize");
    v.push(b'\n');
    v
}
