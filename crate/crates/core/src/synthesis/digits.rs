//! Procedural handwriting-like Arabic-Indic digits.
//!
//! Each digit is a small set of strokes in a unit box; every rendering
//! jitters the control points, slant, scale, position and pen width, so a
//! seeded generator yields an unlimited, reproducible digit corpus.

use super::charset::ARABIC_INDIC_DIGITS;
use super::compose::LabeledImage;
use crate::imaging::RasterImage;
use rand::Rng;

type Stroke = &'static [(f64, f64)];

fn strokes(digit: usize) -> &'static [Stroke] {
    match digit {
        0 => &[&[(0.5, 0.48), (0.6, 0.58), (0.5, 0.68), (0.4, 0.58), (0.5, 0.48)]],
        1 => &[&[(0.55, 0.1), (0.5, 0.9)]],
        2 => &[&[(0.8, 0.1), (0.72, 0.3), (0.5, 0.3), (0.42, 0.18), (0.45, 0.9)]],
        3 => &[&[
            (0.88, 0.1),
            (0.82, 0.3),
            (0.68, 0.28),
            (0.63, 0.12),
            (0.56, 0.3),
            (0.42, 0.26),
            (0.38, 0.14),
            (0.42, 0.9),
        ]],
        4 => &[&[(0.72, 0.1), (0.38, 0.3), (0.66, 0.46), (0.32, 0.66), (0.72, 0.9)]],
        5 => &[&[
            (0.5, 0.3),
            (0.75, 0.6),
            (0.68, 0.85),
            (0.5, 0.9),
            (0.32, 0.85),
            (0.25, 0.6),
            (0.5, 0.3),
        ]],
        6 => &[&[(0.25, 0.12), (0.62, 0.2), (0.6, 0.9)]],
        7 => &[&[(0.18, 0.12), (0.5, 0.9), (0.82, 0.12)]],
        8 => &[&[(0.18, 0.9), (0.5, 0.12), (0.82, 0.9)]],
        9 => &[&[
            (0.62, 0.3),
            (0.5, 0.12),
            (0.3, 0.16),
            (0.28, 0.36),
            (0.48, 0.46),
            (0.62, 0.3),
            (0.6, 0.9),
        ]],
        _ => panic!("not a digit: {digit}"),
    }
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (px - a.0 - t * dx).hypot(py - a.1 - t * dy)
}

/// Draws antialiased polylines of pen width `pen` onto a white canvas.
pub fn draw_strokes(width: usize, height: usize, lines: &[Vec<(f64, f64)>], pen: f64) -> RasterImage {
    let half = pen / 2.0;
    RasterImage::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut d = f64::INFINITY;
        for line in lines {
            for seg in line.windows(2) {
                d = d.min(segment_distance(px, py, seg[0], seg[1]));
            }
        }
        let coverage = (half - d + 0.5).clamp(0.0, 1.0);
        (255.0 * (1.0 - coverage)).round() as u8
    })
}

/// One jittered rendering of `digit` (0..=9), 64 px tall.
pub fn render_digit(digit: usize, rng: &mut impl Rng) -> RasterImage {
    let height = 64usize;
    let width = match digit {
        0 | 1 => rng.random_range(22..30),
        _ => rng.random_range(36..46),
    };
    let scale = rng.random_range(0.72..0.92);
    let slant = rng.random_range(-0.18..0.18);
    let pen = rng.random_range(2.6..4.6);
    let box_w = width as f64 * scale;
    let box_h = height as f64 * scale;
    let ox = (width as f64 - box_w) / 2.0 + rng.random_range(-2.0..2.0);
    let oy = (height as f64 - box_h) / 2.0 + rng.random_range(-3.0..3.0);
    let lines: Vec<Vec<(f64, f64)>> = strokes(digit)
        .iter()
        .map(|stroke| {
            stroke
                .iter()
                .map(|&(u, v)| {
                    let u = u + rng.random_range(-0.035..0.035);
                    let v = v + rng.random_range(-0.035..0.035);
                    let x = ox + u * box_w + slant * (0.5 - v) * box_h;
                    (x, oy + v * box_h)
                })
                .collect()
        })
        .collect();
    draw_strokes(width, height, &lines, pen)
}

/// `per_digit` renderings of each of the ten digits, labeled.
pub fn digit_pool(per_digit: usize, rng: &mut impl Rng) -> Vec<LabeledImage> {
    let mut pool = Vec::with_capacity(per_digit * 10);
    for _ in 0..per_digit {
        for d in 0..10 {
            pool.push(LabeledImage {
                image: render_digit(d, rng),
                label: ARABIC_INDIC_DIGITS[d].to_string(),
            });
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn digits_have_ink_and_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let imgs: Vec<RasterImage> = (0..10).map(|d| render_digit(d, &mut rng)).collect();
        for img in &imgs {
            assert_eq!(img.height(), 64);
            assert!(img.data().iter().any(|&v| v < 64));
            assert!(img.data().iter().filter(|&&v| v > 200).count() > img.data().len() / 2);
        }
        assert_ne!(imgs[7], imgs[8]);
    }

    #[test]
    fn seeded_pool_is_reproducible() {
        let a = digit_pool(2, &mut ChaCha8Rng::seed_from_u64(5));
        let b = digit_pool(2, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }
}
