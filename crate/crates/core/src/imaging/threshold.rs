use super::RasterImage;
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Threshold applied when Otsu finds no between-class variance.
pub const OTSU_FALLBACK_THRESHOLD: u8 = 127;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "threshold", rename_all = "lowercase")]
pub enum BinarizeMode {
    Fixed(f64),
    Otsu,
}

impl Default for BinarizeMode {
    fn default() -> Self {
        BinarizeMode::Otsu
    }
}

/// A binarized image and the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Binarized {
    pub image: RasterImage,
    pub threshold: f64,
    /// Set when Otsu met a constant image and used [`OTSU_FALLBACK_THRESHOLD`].
    pub fallback: bool,
}

/// Otsu's threshold over the 256-bin histogram. Pixels `>= t` form the upper
/// class. Returns `None` when no threshold separates two non-empty classes.
pub fn otsu_threshold(img: &RasterImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in img.data().iter().step_by(img.channels()) {
        hist[v as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    let total_mass: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best: Option<(u8, f64)> = None;
    let mut below = 0u64;
    let mut below_mass = 0.0;
    for t in 1..256usize {
        below += hist[t - 1];
        below_mass += (t - 1) as f64 * hist[t - 1] as f64;
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        let m0 = below_mass / below as f64;
        let m1 = (total_mass - below_mass) / above as f64;
        let between = below as f64 * above as f64 * (m0 - m1).powi(2);
        if best.map_or(true, |(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

/// Maps pixels `>= threshold` to 255 and the rest to 0.
pub fn binarize(img: &RasterImage, mode: BinarizeMode) -> Result<Binarized> {
    img.require_gray("binarize")?;
    let (threshold, fallback) = match mode {
        BinarizeMode::Fixed(t) => {
            if !(0.0..=255.0).contains(&t) {
                return invalid(format!("fixed threshold must be in [0, 255], got {t}"));
            }
            (t, false)
        }
        BinarizeMode::Otsu => match otsu_threshold(img) {
            Some(t) => (t as f64, false),
            None => (OTSU_FALLBACK_THRESHOLD as f64, true),
        },
    };
    let image = img.map(|v| if v as f64 >= threshold { 255 } else { 0 });
    Ok(Binarized {
        image,
        threshold,
        fallback,
    })
}
