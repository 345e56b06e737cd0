//! 128-dimensional gradient-histogram descriptors (4x4 cells x 8 bins).

use super::keypoints::{Keypoint, ScaleSpace};
use crate::imaging::Plane;
use std::f64::consts::TAU;

pub const DESCRIPTOR_LEN: usize = 128;
const GRID: usize = 4;
const BINS: usize = 8;
const CELL_SCALE: f64 = 3.0;
const CLIP: f32 = 0.2;

/// A unit-length descriptor vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub Vec<f32>);

impl Descriptor {
    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        squared_distance(&self.0, &other.0).sqrt()
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Descriptors together with the keypoint each one was computed for.
/// Keypoints whose sampling window leaves the image, or whose window has no
/// gradient at all, are skipped.
#[derive(Debug, Clone, Default)]
pub struct DescriptorSet {
    pub descriptors: Vec<Descriptor>,
    /// `keypoint_index[i]` is the index into the keypoint list for descriptor `i`.
    pub keypoint_index: Vec<usize>,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

fn describe(g: &Plane, kp: &Keypoint, sigma: f64, factor: f64) -> Option<Descriptor> {
    let (x, y) = (kp.x / factor, kp.y / factor);
    let hist_width = CELL_SCALE * sigma;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (GRID as f64 + 1.0) * 0.5).round() as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    if cx - radius < 1 || cy - radius < 1 || cx + radius >= g.width as isize - 1 || cy + radius >= g.height as isize - 1 {
        return None;
    }
    let (sin_t, cos_t) = kp.orientation.sin_cos();
    let half = GRID as f64 / 2.0;
    let weight_denom = 2.0 * half * half;
    let side = GRID + 2;
    let mut hist = vec![0.0f64; side * side * (BINS + 2)];

    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let x_rot = (dx as f64 * cos_t + dy as f64 * sin_t) / hist_width;
            let y_rot = (-(dx as f64) * sin_t + dy as f64 * cos_t) / hist_width;
            let rbin = y_rot + half - 0.5;
            let cbin = x_rot + half - 0.5;
            if rbin <= -1.0 || rbin >= GRID as f64 || cbin <= -1.0 || cbin >= GRID as f64 {
                continue;
            }
            let (px, py) = ((cx + dx) as usize, (cy + dy) as usize);
            let gx = (g.at(px + 1, py) - g.at(px - 1, py)) as f64;
            let gy = (g.at(px, py + 1) - g.at(px, py - 1)) as f64;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = (gy.atan2(gx) - kp.orientation).rem_euclid(TAU);
            let obin = angle / TAU * BINS as f64;
            let weight = (-(x_rot * x_rot + y_rot * y_rot) / weight_denom).exp() * mag;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (ri, wr) in [(0usize, 1.0 - fr), (1, fr)] {
                let r = (r0 as isize + 1 + ri as isize) as usize;
                for (ci, wc) in [(0usize, 1.0 - fc), (1, fc)] {
                    let c = (c0 as isize + 1 + ci as isize) as usize;
                    for (oi, wo) in [(0usize, 1.0 - fo), (1, fo)] {
                        let o = (o0 as usize + oi) % BINS;
                        hist[(r * side + c) * (BINS + 2) + o] += weight * wr * wc * wo;
                    }
                }
            }
        }
    }

    let mut values = Vec::with_capacity(DESCRIPTOR_LEN);
    for r in 0..GRID {
        for c in 0..GRID {
            for o in 0..BINS {
                values.push(hist[((r + 1) * side + c + 1) * (BINS + 2) + o] as f32);
            }
        }
    }
    let norm = |v: &[f32]| v.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    let n = norm(&values);
    if n <= 1e-12 {
        return None;
    }
    for v in &mut values {
        *v = ((*v as f64 / n) as f32).min(CLIP);
    }
    let n = norm(&values);
    for v in &mut values {
        *v = (*v as f64 / n) as f32;
    }
    Some(Descriptor(values))
}

pub(crate) fn describe_in(space: &ScaleSpace, kps: &[Keypoint]) -> DescriptorSet {
    let mut set = DescriptorSet::default();
    for (i, kp) in kps.iter().enumerate() {
        let Some(stack) = space.gaussians.get(kp.octave) else {
            continue;
        };
        let layer = (kp.layer.round() as usize).clamp(0, stack.len() - 1);
        let factor = 2f64.powi(kp.octave as i32);
        let sigma = space.octave_sigma(kp.layer);
        if let Some(d) = describe(&stack[layer], kp, sigma, factor) {
            set.descriptors.push(d);
            set.keypoint_index.push(i);
        }
    }
    set
}

/// Computes descriptors for keypoints detected on the same image.
pub fn compute_descriptors(gray: &crate::imaging::RasterImage, kps: &[Keypoint]) -> DescriptorSet {
    let gray = crate::imaging::to_grayscale(gray);
    match ScaleSpace::build(&gray, super::keypoints::DogParams::default()) {
        Some(space) => describe_in(&space, kps),
        None => DescriptorSet::default(),
    }
}
