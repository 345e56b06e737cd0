//! Line segmentation inside multi-line fields.
//!
//! Two routes produce [`LineBox`]es: a classical horizontal projection
//! profile over the binarized field, and DB-style post-processing of a
//! probability map supplied by an external [`Detector`].

mod boxes;
mod probability;
mod projection;

pub use boxes::{box_formation, BoxParams};
pub use probability::{approx_binary_map, ProbabilityMap};
pub use projection::segment_lines_projection;

use crate::error::Result;
use crate::geometry::Point;
use crate::imaging::RasterImage;
use serde::{Deserialize, Serialize};

/// A detected text line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineBox {
    /// Corners clockwise from top-left, in field pixels.
    pub quad: [Point; 4],
    pub score: f64,
}

/// A text detector producing a per-pixel text probability map.
pub trait Detector {
    fn detect(&self, img: &RasterImage) -> Result<ProbabilityMap>;
}

/// Runs `detector` and forms boxes from its output.
pub fn detect_lines(img: &RasterImage, detector: &dyn Detector, params: &BoxParams) -> Result<Vec<LineBox>> {
    let p = detector.detect(img)?;
    box_formation(&p, params)
}

/// Sorts boxes top-to-bottom by row band, right-to-left within a band.
///
/// A box joins the current band when its vertical center lies inside the
/// band's first box.
pub(crate) fn reading_order(mut boxes: Vec<LineBox>) -> Vec<LineBox> {
    let span = |b: &LineBox| {
        let ys = b.quad.iter().map(|p| p.y);
        let lo = ys.clone().fold(f64::INFINITY, f64::min);
        let hi = ys.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let cx = |b: &LineBox| b.quad.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = |b: &LineBox| b.quad.iter().map(|p| p.y).sum::<f64>() / 4.0;
    boxes.sort_by(|a, b| cy(a).total_cmp(&cy(b)));
    let mut out = Vec::with_capacity(boxes.len());
    let mut band: Vec<LineBox> = Vec::new();
    let mut band_span = (0.0, 0.0);
    for b in boxes {
        if band.is_empty() || !(band_span.0..=band_span.1).contains(&cy(&b)) {
            band.sort_by(|p, q| cx(q).total_cmp(&cx(p)));
            out.append(&mut band);
            band_span = span(&b);
        }
        band.push(b);
    }
    band.sort_by(|p, q| cx(q).total_cmp(&cx(p)));
    out.append(&mut band);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect_quad;

    fn lb(x0: f64, y0: f64, x1: f64, y1: f64) -> LineBox {
        LineBox { quad: rect_quad(x0, y0, x1, y1), score: 1.0 }
    }

    #[test]
    fn rtl_within_band() {
        let boxes = vec![lb(0.0, 0.0, 10.0, 10.0), lb(50.0, 2.0, 60.0, 12.0), lb(0.0, 30.0, 10.0, 40.0)];
        let order = reading_order(boxes.clone());
        assert_eq!(order, vec![boxes[1], boxes[0], boxes[2]]);
    }
}
