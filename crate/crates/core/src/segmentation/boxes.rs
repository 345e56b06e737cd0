use super::{reading_order, LineBox, ProbabilityMap};
use crate::error::{Error, Result};
use crate::geometry::{area, min_area_rect, offset_convex, order_clockwise, perimeter, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxParams {
    pub bin_thresh: f64,
    pub box_thresh: f64,
    pub unclip_ratio: f64,
    pub min_area_px: usize,
}

impl Default for BoxParams {
    fn default() -> Self {
        BoxParams {
            bin_thresh: 0.3,
            box_thresh: 0.6,
            unclip_ratio: 1.5,
            min_area_px: 16,
        }
    }
}

/// 8-connected components of `mask`, as pixel index lists.
fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Turns a probability map into line boxes.
///
/// Pixels above `bin_thresh` form 8-connected components. Components whose
/// mean probability is below `box_thresh`, or with fewer than `min_area_px`
/// pixels, are dropped. Each survivor's minimum-area rectangle (over its
/// pixel squares) is pushed outward by `area * unclip_ratio / perimeter`
/// and clamped to the map.
pub fn box_formation(p: &ProbabilityMap, params: &BoxParams) -> Result<Vec<LineBox>> {
    for (name, v) in [("bin_thresh", params.bin_thresh), ("box_thresh", params.box_thresh)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} must be in (0, 1), got {v}")));
        }
    }
    if !(params.unclip_ratio >= 0.0) {
        return Err(Error::InvalidParameter(format!("unclip_ratio must be >= 0, got {}", params.unclip_ratio)));
    }
    let (w, h) = (p.width(), p.height());
    let mask: Vec<bool> = p.values().iter().map(|&v| v > params.bin_thresh).collect();
    let mut boxes = Vec::new();
    for comp in components(&mask, w, h) {
        if comp.len() < params.min_area_px {
            continue;
        }
        let score = comp.iter().map(|&i| p.values()[i]).sum::<f64>() / comp.len() as f64;
        if score < params.box_thresh {
            continue;
        }
        let corners: Vec<Point> = comp
            .iter()
            .flat_map(|&i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                [
                    Point::new(x, y),
                    Point::new(x + 1.0, y),
                    Point::new(x + 1.0, y + 1.0),
                    Point::new(x, y + 1.0),
                ]
            })
            .collect();
        let rect = min_area_rect(&corners);
        let (a, l) = (area(&rect), perimeter(&rect));
        if a <= 0.0 || l <= 0.0 {
            continue;
        }
        let grown = offset_convex(&rect, a * params.unclip_ratio / l);
        let grown: [Point; 4] = match grown.as_slice() {
            [p0, p1, p2, p3] => [*p0, *p1, *p2, *p3],
            _ => rect,
        };
        let clamped = grown.map(|q| Point::new(q.x.clamp(0.0, w as f64), q.y.clamp(0.0, h as f64)));
        let quad = order_clockwise(clamped);
        if area(&quad) <= 0.0 {
            continue;
        }
        boxes.push(LineBox { quad, score });
    }
    Ok(reading_order(boxes))
}
