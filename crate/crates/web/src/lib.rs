//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Images cross the boundary as RGBA bytes (what a canvas hands out) and
//! come back the same way.

use invizo::enhancement::{enhance, levenshtein as edit_distance, Prediction};
use invizo::geometry::Point;
use invizo::imaging::{FnlmParams, RasterImage};
use invizo::pipeline::{preprocess, PipelineConfig};
use invizo::registration::warp_extract;
use invizo::template::FieldType;
use wasm_bindgen::prelude::*;

/// An RGBA image returned to JavaScript.
#[wasm_bindgen]
pub struct Rgba {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

#[wasm_bindgen]
impl Rgba {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel bytes, four per pixel.
    pub fn data(&self) -> Vec<u8> {
        self.data.clone()
    }
}

fn from_rgba(rgba: &[u8], width: usize, height: usize) -> Result<RasterImage, String> {
    if rgba.len() != width * height * 4 {
        return Err(format!("expected {} RGBA bytes for {width}x{height}, got {}", width * height * 4, rgba.len()));
    }
    let rgb: Vec<u8> = rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
    RasterImage::new(width, height, 3, rgb).map_err(|e| e.to_string())
}

fn to_rgba(img: &RasterImage) -> Rgba {
    let data = (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .flat_map(|(x, y)| {
            if img.is_gray() {
                let v = img.get(x, y);
                [v, v, v, 255]
            } else {
                [img.get_channel(x, y, 0), img.get_channel(x, y, 1), img.get_channel(x, y, 2), 255]
            }
        })
        .collect();
    Rgba {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Denoise, binarize and open, as the pipeline does before extraction.
/// `h` is the non-local means filter strength.
#[wasm_bindgen]
pub fn preprocess_preview(rgba: &[u8], width: usize, height: usize, h: f64) -> Result<Rgba, String> {
    let img = from_rgba(rgba, width, height)?;
    let config = PipelineConfig {
        fnlm: FnlmParams {
            h,
            ..FnlmParams::default()
        },
        ..PipelineConfig::default()
    };
    let pre = preprocess(&img, &config).map_err(|e| e.to_string())?;
    Ok(to_rgba(&pre.binary))
}

/// Rectifies the quad `[x0, y0, ..., x3, y3]` (clockwise from top-left)
/// into an upright crop.
#[wasm_bindgen]
pub fn rectify_quad(rgba: &[u8], width: usize, height: usize, quad: &[f64]) -> Result<Rgba, String> {
    let img = from_rgba(rgba, width, height)?;
    if quad.len() != 8 {
        return Err(format!("a quad needs 8 coordinates, got {}", quad.len()));
    }
    let q = [0, 1, 2, 3].map(|i| Point::new(quad[2 * i], quad[2 * i + 1]));
    let crop = warp_extract(&img, &q).map_err(|e| e.to_string())?;
    Ok(to_rgba(&crop))
}

/// Applies the correction rule of `field_type` to `raw`. `possibilities`
/// is a JSON array of strings (used by `DefinedLabel`). Returns the
/// enhanced prediction as JSON.
#[wasm_bindgen]
pub fn enhance_text(field_type: &str, raw: &str, possibilities: &str) -> Result<String, String> {
    let ft = FieldType::parse(field_type).ok_or_else(|| format!("unknown field type {field_type:?}"))?;
    let options: Vec<String> = if possibilities.trim().is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(possibilities).map_err(|e| format!("possibilities: {e}"))?
    };
    let pred = enhance(&Prediction::new("demo", ft, raw), &options);
    serde_json::to_string(&pred).map_err(|e| e.to_string())
}

/// Character edit distance.
#[wasm_bindgen]
pub fn levenshtein(a: &str, b: &str) -> usize {
    edit_distance(a, b)
}
