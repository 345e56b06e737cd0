//! Difference-of-Gaussians keypoints with subpixel refinement, edge
//! rejection and dominant-orientation assignment.

use crate::imaging::blur::blur_plane;
use crate::imaging::{Plane, RasterImage};
use serde::{Deserialize, Serialize};

/// Scale-space parameters. Defaults follow the usual SIFT recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DogParams {
    pub scales_per_octave: usize,
    pub base_sigma: f64,
    /// Minimum |DoG| response on unit-range intensities.
    pub contrast_threshold: f32,
    /// Maximum principal-curvature ratio.
    pub edge_ratio: f32,
    /// Blur already present in the input image.
    pub assumed_blur: f64,
    /// Octaves stop once the smaller side drops below this.
    pub min_octave_size: usize,
}

impl Default for DogParams {
    fn default() -> Self {
        Self {
            scales_per_octave: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            assumed_blur: 0.5,
            min_octave_size: 16,
        }
    }
}

/// A detected interest point in input-image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian sigma of the detection level, in input pixels.
    pub scale: f64,
    /// Dominant gradient direction in radians, `[0, 2pi)`.
    pub orientation: f64,
    /// |DoG| at the refined extremum.
    pub response: f32,
    pub(crate) octave: usize,
    /// Fractional layer inside the octave.
    pub(crate) layer: f64,
}

impl Keypoint {
    pub fn octave(&self) -> usize {
        self.octave
    }
}

/// Gaussian and DoG stacks for every octave.
pub(crate) struct ScaleSpace {
    pub gaussians: Vec<Vec<Plane>>,
    pub dogs: Vec<Vec<Plane>>,
    pub params: DogParams,
}

impl ScaleSpace {
    pub fn build(img: &RasterImage, params: DogParams) -> Option<ScaleSpace> {
        let s = params.scales_per_octave;
        let base = Plane::from_image(img, 1.0 / 255.0);
        if base.width.min(base.height) < params.min_octave_size {
            return None;
        }
        let init = (params.base_sigma.powi(2) - params.assumed_blur.powi(2)).max(0.01).sqrt();
        let mut current = blur_plane(&base, init);
        let k = 2f64.powf(1.0 / s as f64);
        let increments: Vec<f64> = (1..s + 3)
            .map(|i| {
                let prev = params.base_sigma * k.powi(i as i32 - 1);
                let next = prev * k;
                (next * next - prev * prev).sqrt()
            })
            .collect();

        let mut gaussians = Vec::new();
        let mut dogs = Vec::new();
        loop {
            let mut stack = vec![current];
            for &inc in &increments {
                let next = blur_plane(stack.last().unwrap(), inc);
                stack.push(next);
            }
            let dog: Vec<Plane> = stack.windows(2).map(|w| w[1].sub(&w[0])).collect();
            let next_base = stack[s].decimate();
            gaussians.push(stack);
            dogs.push(dog);
            if next_base.width.min(next_base.height) < params.min_octave_size {
                break;
            }
            current = next_base;
        }
        Some(ScaleSpace { gaussians, dogs, params })
    }

    /// Sigma of `layer` relative to its own octave's pixel grid.
    pub fn octave_sigma(&self, layer: f64) -> f64 {
        self.params.base_sigma * 2f64.powf(layer / self.params.scales_per_octave as f64)
    }
}

fn is_extremum(dogs: &[Plane], l: usize, x: usize, y: usize) -> bool {
    let v = dogs[l].at(x, y);
    let mut is_max = true;
    let mut is_min = true;
    for plane in &dogs[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let n = plane.at(xx, yy);
                if std::ptr::eq(plane, &dogs[l]) && xx == x && yy == y {
                    continue;
                }
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

/// Solves the 3x3 system `h * x = -g` by Cramer's rule.
fn solve3(h: [[f32; 3]; 3], g: [f32; 3]) -> Option<[f32; 3]> {
    let det = |m: [[f32; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(h);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut m = h;
        for r in 0..3 {
            m[r][c] = -g[r];
        }
        out[c] = det(m) / d;
    }
    Some(out)
}

struct Refined {
    x: usize,
    y: usize,
    layer: usize,
    offset: [f32; 3],
    response: f32,
}

fn refine(dogs: &[Plane], params: &DogParams, mut x: usize, mut y: usize, mut l: usize) -> Option<Refined> {
    let s = params.scales_per_octave;
    let (w, h) = (dogs[0].width, dogs[0].height);
    for _ in 0..5 {
        let d = |dl: isize, dx: isize, dy: isize| {
            dogs[(l as isize + dl) as usize].at((x as isize + dx) as usize, (y as isize + dy) as usize)
        };
        let v = d(0, 0, 0);
        let g = [
            0.5 * (d(0, 1, 0) - d(0, -1, 0)),
            0.5 * (d(0, 0, 1) - d(0, 0, -1)),
            0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
        ];
        let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
        let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
        let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
        let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
        let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
        let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let off = solve3(hess, g)?;
        if off.iter().all(|o| o.abs() < 0.5) {
            let response = v + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            if response.abs() < params.contrast_threshold {
                return None;
            }
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = params.edge_ratio;
            if det <= 0.0 || tr * tr * r >= (r + 1.0).powi(2) * det {
                return None;
            }
            return Some(Refined {
                x,
                y,
                layer: l,
                offset: off,
                response: response.abs(),
            });
        }
        let nx = x as isize + off[0].round() as isize;
        let ny = y as isize + off[1].round() as isize;
        let nl = l as isize + off[2].round() as isize;
        if nl < 1 || nl > s as isize || nx < 1 || ny < 1 || nx >= w as isize - 1 || ny >= h as isize - 1 {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        l = nl as usize;
    }
    None
}

const ORI_BINS: usize = 36;

/// Orientation peaks (radians) of the gradient histogram around `(x, y)`.
fn orientations(g: &Plane, x: f64, y: f64, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * 1.5 * sigma).round() as isize;
    let weight_denom = 2.0 * (1.5 * sigma).powi(2);
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0f64; ORI_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= g.width as isize - 1 || py >= g.height as isize - 1 {
                continue;
            }
            let (px, py) = (px as usize, py as usize);
            let gx = (g.at(px + 1, py) - g.at(px - 1, py)) as f64;
            let gy = (g.at(px, py + 1) - g.at(px, py - 1)) as f64;
            let mag = gx.hypot(gy);
            let ang = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
            let weight = (-((dx * dx + dy * dy) as f64) / weight_denom).exp();
            let bin = ((ang / std::f64::consts::TAU * ORI_BINS as f64).round() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    for _ in 0..2 {
        let prev = hist;
        for i in 0..ORI_BINS {
            hist[i] = (prev[(i + ORI_BINS - 1) % ORI_BINS] + 2.0 * prev[i] + prev[(i + 1) % ORI_BINS]) / 4.0;
        }
    }
    let max = hist.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0];
    }
    let mut out = Vec::new();
    for i in 0..ORI_BINS {
        let l = hist[(i + ORI_BINS - 1) % ORI_BINS];
        let r = hist[(i + 1) % ORI_BINS];
        if hist[i] > l && hist[i] > r && hist[i] >= 0.8 * max {
            let shift = 0.5 * (l - r) / (l - 2.0 * hist[i] + r);
            let bin = (i as f64 + shift).rem_euclid(ORI_BINS as f64);
            out.push(bin * std::f64::consts::TAU / ORI_BINS as f64);
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out
}

pub(crate) fn detect_in(space: &ScaleSpace) -> Vec<Keypoint> {
    let params = space.params;
    let s = params.scales_per_octave;
    let prefilter = 0.5 * params.contrast_threshold;
    let mut out = Vec::new();
    for (octave, dogs) in space.dogs.iter().enumerate() {
        let (w, h) = (dogs[0].width, dogs[0].height);
        let factor = 2f64.powi(octave as i32);
        let mut found: Vec<Keypoint> = Vec::new();
        for l in 1..=s {
            for y in 1..h.saturating_sub(1) {
                for x in 1..w.saturating_sub(1) {
                    if dogs[l].at(x, y).abs() < prefilter || !is_extremum(dogs, l, x, y) {
                        continue;
                    }
                    let Some(r) = refine(dogs, &params, x, y, l) else {
                        continue;
                    };
                    let ox = r.x as f64 + r.offset[0] as f64;
                    let oy = r.y as f64 + r.offset[1] as f64;
                    let layer = r.layer as f64 + r.offset[2] as f64;
                    let sigma = space.octave_sigma(layer);
                    let gauss = &space.gaussians[octave][r.layer];
                    let img_w = (w as f64 * factor).max(1.0);
                    let img_h = (h as f64 * factor).max(1.0);
                    for orientation in orientations(gauss, ox, oy, sigma) {
                        found.push(Keypoint {
                            x: (ox * factor).clamp(0.0, img_w - 1e-6),
                            y: (oy * factor).clamp(0.0, img_h - 1e-6),
                            scale: sigma * factor,
                            orientation,
                            response: r.response,
                            octave,
                            layer,
                        });
                    }
                }
            }
        }
        found.sort_by(|a, b| {
            a.y.total_cmp(&b.y)
                .then(a.x.total_cmp(&b.x))
                .then(a.layer.total_cmp(&b.layer))
                .then(a.orientation.total_cmp(&b.orientation))
        });
        out.extend(found);
    }
    out
}

/// Detects DoG keypoints on a gray image. Images smaller than 32 px on
/// either side yield no keypoints.
pub fn detect_keypoints(gray: &RasterImage) -> Vec<Keypoint> {
    detect_keypoints_with(gray, DogParams::default())
}

pub fn detect_keypoints_with(gray: &RasterImage, params: DogParams) -> Vec<Keypoint> {
    if gray.width() < 32 || gray.height() < 32 {
        return Vec::new();
    }
    let gray = crate::imaging::to_grayscale(gray);
    match ScaleSpace::build(&gray, params) {
        Some(space) => detect_in(&space),
        None => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            (255.0 - 200.0 * (-d2 / (2.0 * sigma * sigma)).exp()).round() as u8
        })
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        assert!(detect_keypoints(&RasterImage::filled(64, 64, 120)).is_empty());
    }

    #[test]
    fn tiny_image_has_no_keypoints() {
        assert!(detect_keypoints(&blob(31, 40, 15.0, 20.0, 3.0)).is_empty());
    }

    #[test]
    fn blob_center_is_found() {
        let (cx, cy) = (40.3, 37.6);
        let kps = detect_keypoints(&blob(80, 80, cx, cy, 4.0));
        assert!(!kps.is_empty());
        let best = kps
            .iter()
            .map(|k| (k.x - cx).hypot(k.y - cy))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 2.0, "nearest keypoint {best:.2} px away");
        for k in &kps {
            assert!(k.x >= 0.0 && k.x < 80.0 && k.y >= 0.0 && k.y < 80.0 && k.scale > 0.0);
        }
    }

    #[test]
    fn ordering_is_octave_then_y_then_x() {
        let img = RasterImage::from_fn(96, 96, |x, y| {
            let b1 = blob(96, 96, 30.0, 30.0, 3.0).get(x, y);
            let b2 = blob(96, 96, 65.0, 60.0, 5.0).get(x, y);
            b1.min(b2)
        });
        let kps = detect_keypoints(&img);
        for w in kps.windows(2) {
            assert!(w[0].octave <= w[1].octave);
            if w[0].octave == w[1].octave {
                assert!(w[0].y <= w[1].y);
            }
        }
    }
}
