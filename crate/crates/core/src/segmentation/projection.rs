use super::LineBox;
use crate::geometry::rect_quad;
use crate::imaging::RasterImage;

const SMOOTH_WINDOW: usize = 5;
const MIN_DENSITY: f64 = 0.02;
const MIN_GAP_ROWS: usize = 3;
const EXPAND_PX: usize = 2;

/// Splits a binarized field (ink 0 on 255) into text lines with a
/// horizontal ink-density profile.
///
/// Rows are smoothed with a centered window of 5; lines are maximal runs
/// above 2% density, with gaps shorter than 3 rows bridged. Each box is
/// the tight ink bounds of its rows, grown by 2 px and clamped.
pub fn segment_lines_projection(binary_field: &RasterImage) -> Vec<LineBox> {
    let (w, h) = (binary_field.width(), binary_field.height());
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let ink = |x: usize, y: usize| binary_field.get(x, y) < 128;
    let density: Vec<f64> = (0..h)
        .map(|y| (0..w).filter(|&x| ink(x, y)).count() as f64 / w as f64)
        .collect();
    let half = SMOOTH_WINDOW / 2;
    let smooth: Vec<f64> = (0..h)
        .map(|y| {
            let (lo, hi) = (y.saturating_sub(half), (y + half).min(h - 1));
            density[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut y = 0;
    while y < h {
        if smooth[y] > MIN_DENSITY {
            let start = y;
            while y < h && smooth[y] > MIN_DENSITY {
                y += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 < MIN_GAP_ROWS => last.1 = y,
                _ => runs.push((start, y)),
            }
        } else {
            y += 1;
        }
    }

    runs.into_iter()
        .filter_map(|(r0, r1)| {
            let rows: Vec<usize> = (r0..r1).filter(|&y| density[y] > 0.0).collect();
            let (y0, y1) = (*rows.first()?, *rows.last()? + 1);
            let cols: Vec<usize> = (0..w).filter(|&x| rows.iter().any(|&y| ink(x, y))).collect();
            let (x0, x1) = (*cols.first()?, *cols.last()? + 1);
            Some(LineBox {
                quad: rect_quad(
                    x0.saturating_sub(EXPAND_PX) as f64,
                    y0.saturating_sub(EXPAND_PX) as f64,
                    (x1 + EXPAND_PX).min(w) as f64,
                    (y1 + EXPAND_PX).min(h) as f64,
                ),
                score: 1.0,
            })
        })
        .collect()
}
