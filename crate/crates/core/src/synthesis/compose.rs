use crate::error::{invalid, Result};
use crate::imaging::{resize_bilinear, to_grayscale, RasterImage, BACKGROUND};
use rand::Rng;

pub const LINE_HEIGHT: usize = 64;
pub const LINE_WIDTH: usize = 1024;

/// A glyph or word image with its text.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: RasterImage,
    pub label: String,
}

/// Lays word images out right-to-left on a `target_w` x `target_h` canvas.
///
/// Words are scaled to `target_h` keeping their aspect ratio. A short line
/// is padded on the left; a long one is scaled down to `target_w` and
/// centered vertically.
pub fn compose_line(words: &[RasterImage], target_h: usize, target_w: usize) -> Result<RasterImage> {
    if words.is_empty() {
        return invalid("compose_line needs at least one word image");
    }
    if target_h == 0 || target_w == 0 {
        return invalid("compose_line target must be non-empty");
    }
    let scaled: Vec<RasterImage> = words
        .iter()
        .map(|w| {
            let g = to_grayscale(w);
            let new_w = ((g.width() as f64 * target_h as f64 / g.height() as f64).round() as usize).max(1);
            resize_bilinear(&g, new_w, target_h)
        })
        .collect();
    let total: usize = scaled.iter().map(|w| w.width()).sum();
    let mut strip = RasterImage::filled(total, target_h, BACKGROUND);
    let mut right = total;
    for w in &scaled {
        right -= w.width();
        strip.blit(w, right as isize, 0);
    }
    if total <= target_w {
        let mut canvas = RasterImage::filled(target_w, target_h, BACKGROUND);
        canvas.blit(&strip, (target_w - total) as isize, 0);
        return Ok(canvas);
    }
    let new_h = ((target_h as f64 * target_w as f64 / total as f64).round() as usize).max(1);
    let shrunk = resize_bilinear(&strip, target_w, new_h);
    let mut canvas = RasterImage::filled(target_w, target_h, BACKGROUND);
    canvas.blit(&shrunk, 0, ((target_h - new_h) / 2) as isize);
    Ok(canvas)
}

/// Draws `n` digits (with replacement) from `pool` and composes them into a
/// recognizer line. The first label character is drawn rightmost.
pub fn compose_digit_sequence(pool: &[LabeledImage], n: usize, rng: &mut impl Rng) -> Result<LabeledImage> {
    if !(1..=8).contains(&n) {
        return invalid(format!("digit sequence length must be in 1..=8, got {n}"));
    }
    if pool.is_empty() {
        return invalid("digit pool is empty");
    }
    let picks: Vec<&LabeledImage> = (0..n).map(|_| &pool[rng.random_range(0..pool.len())]).collect();
    let images: Vec<RasterImage> = picks.iter().map(|p| p.image.clone()).collect();
    let label: String = picks.iter().map(|p| p.label.as_str()).collect();
    Ok(LabeledImage {
        image: compose_line(&images, LINE_HEIGHT, LINE_WIDTH)?,
        label,
    })
}
