//! Fast non-local means.
//!
//! Each output pixel is a weighted mean of the pixels in its search window,
//! weighted by `exp(-d^2 / h^2)` where `d^2` is the mean squared difference
//! between the two surrounding patches. Patch distances for one window
//! offset are computed for the whole image at once from an integral image
//! of squared differences, so the cost does not depend on the patch size.

use super::blur::reflect;
use super::RasterImage;
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FnlmParams {
    pub patch_radius: usize,
    pub search_radius: usize,
    pub h: f64,
}

impl Default for FnlmParams {
    fn default() -> Self {
        Self {
            patch_radius: 3,
            search_radius: 10,
            h: 10.0,
        }
    }
}

impl FnlmParams {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return invalid(format!("fnlm filter strength h must be > 0, got {}", self.h));
        }
        if self.patch_radius < 1 {
            return invalid("fnlm patch_radius must be >= 1");
        }
        if self.search_radius < self.patch_radius {
            return invalid(format!(
                "fnlm search_radius ({}) must be >= patch_radius ({})",
                self.search_radius, self.patch_radius
            ));
        }
        Ok(())
    }
}

/// Per-pixel weight accumulators.
struct Accum {
    weighted: Vec<f64>,
    weight_sum: Vec<f64>,
    /// Largest weight seen for a non-center pixel; used as the center weight
    /// so that a pixel does not dominate its own estimate.
    max_weight: Vec<f64>,
}

struct Padded {
    data: Vec<f64>,
    width: usize,
    height: usize,
}

fn pad_reflect(img: &RasterImage, pad: usize) -> Padded {
    let (w, h) = (img.width(), img.height());
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let mut data = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = reflect(py as isize - pad as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - pad as isize, w);
            data.push(img.get(sx, sy) as f64);
        }
    }
    Padded {
        data,
        width: pw,
        height: ph,
    }
}

/// Calls `visit(pixel_index, neighbor_index, weight)` for every pixel and
/// every non-center neighbor inside its (clamped) search window.
fn for_each_weight(img: &RasterImage, params: &FnlmParams, mut visit: impl FnMut(usize, usize, f64)) {
    let (w, h) = (img.width(), img.height());
    let pr = params.patch_radius;
    let sr = params.search_radius as isize;
    let padded = pad_reflect(img, pr);
    let (pw, ph) = (padded.width, padded.height);
    let patch_area = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let inv_h2 = 1.0 / (params.h * params.h);

    let mut diff = vec![0.0f64; pw * ph];
    // Integral image with a zero guard row/column.
    let iw = pw + 1;
    let mut integral = vec![0.0f64; iw * (ph + 1)];

    for dy in -sr..=sr {
        for dx in -sr..=sr {
            if dx == 0 && dy == 0 {
                continue;
            }
            if dx.unsigned_abs() >= w && dy.unsigned_abs() >= h {
                continue;
            }
            for qy in 0..ph {
                let ty = qy as isize + dy;
                for qx in 0..pw {
                    let tx = qx as isize + dx;
                    diff[qy * pw + qx] = if tx >= 0 && ty >= 0 && (tx as usize) < pw && (ty as usize) < ph {
                        let d = padded.data[qy * pw + qx] - padded.data[ty as usize * pw + tx as usize];
                        d * d
                    } else {
                        0.0
                    };
                }
            }
            for qy in 0..ph {
                let mut row = 0.0;
                for qx in 0..pw {
                    row += diff[qy * pw + qx];
                    integral[(qy + 1) * iw + qx + 1] = integral[qy * iw + qx + 1] + row;
                }
            }
            let y_lo = (-dy).max(0) as usize;
            let y_hi = (h as isize - dy.max(0)).max(0) as usize;
            let x_lo = (-dx).max(0) as usize;
            let x_hi = (w as isize - dx.max(0)).max(0) as usize;
            for y in y_lo..y_hi {
                // Patch around image pixel (x, y) spans padded [x, x + 2pr] x [y, y + 2pr].
                let top = y * iw;
                let bottom = (y + 2 * pr + 1) * iw;
                let ny = (y as isize + dy) as usize;
                for x in x_lo..x_hi {
                    let right = x + 2 * pr + 1;
                    let sum = integral[bottom + right] - integral[top + right] - integral[bottom + x]
                        + integral[top + x];
                    let d2 = (sum / patch_area).max(0.0);
                    let weight = (-d2 * inv_h2).exp();
                    let nx = (x as isize + dx) as usize;
                    visit(y * w + x, ny * w + nx, weight);
                }
            }
        }
    }
}

fn accumulate(img: &RasterImage, params: &FnlmParams) -> Accum {
    let n = img.width() * img.height();
    let mut acc = Accum {
        weighted: vec![0.0; n],
        weight_sum: vec![0.0; n],
        max_weight: vec![0.0; n],
    };
    let data = img.data();
    for_each_weight(img, params, |p, q, weight| {
        acc.weighted[p] += weight * data[q] as f64;
        acc.weight_sum[p] += weight;
        if weight > acc.max_weight[p] {
            acc.max_weight[p] = weight;
        }
    });
    acc
}

/// Center weight and normalizer `C(x)` for pixel `p`.
#[inline]
fn center_and_norm(acc: &Accum, p: usize) -> (f64, f64) {
    let center = if acc.max_weight[p] > 0.0 { acc.max_weight[p] } else { 1.0 };
    (center, acc.weight_sum[p] + center)
}

/// Denoises a gray image. Output is rounded and clamped to `[0, 255]`.
pub fn fnlm_denoise(img: &RasterImage, params: &FnlmParams) -> Result<RasterImage> {
    img.require_gray("fnlm_denoise")?;
    params.validate()?;
    let acc = accumulate(img, params);
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let (center, norm) = center_and_norm(&acc, p);
            ((acc.weighted[p] + center * v as f64) / norm).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    RasterImage::new(img.width(), img.height(), 1, data)
}

/// Same as [`fnlm_denoise`] but also returns, per pixel, the sum of the
/// normalized weights `K(x, y) / C(x)` over the search window, recomputed
/// independently of the normalizer.
pub fn fnlm_denoise_instrumented(img: &RasterImage, params: &FnlmParams) -> Result<(RasterImage, Vec<f64>)> {
    let out = fnlm_denoise(img, params)?;
    let acc = accumulate(img, params);
    let mut normalized: Vec<f64> = (0..acc.weight_sum.len())
        .map(|p| {
            let (center, norm) = center_and_norm(&acc, p);
            center / norm
        })
        .collect();
    for_each_weight(img, params, |p, _, weight| {
        let (_, norm) = center_and_norm(&acc, p);
        normalized[p] += weight / norm;
    });
    Ok((out, normalized))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_errors() {
        let img = RasterImage::filled(8, 8, 3);
        let bad_h = FnlmParams { h: 0.0, ..Default::default() };
        assert!(fnlm_denoise(&img, &bad_h).is_err());
        let bad_patch = FnlmParams { patch_radius: 0, ..Default::default() };
        assert!(fnlm_denoise(&img, &bad_patch).is_err());
        let bad_search = FnlmParams { patch_radius: 3, search_radius: 2, h: 10.0 };
        assert!(fnlm_denoise(&img, &bad_search).is_err());
        assert!(fnlm_denoise(&img.to_rgb(), &FnlmParams::default()).is_err());
    }

    #[test]
    fn constant_is_fixed_point() {
        let img = RasterImage::filled(20, 15, 128);
        assert_eq!(fnlm_denoise(&img, &FnlmParams::default()).unwrap(), img);
    }

    #[test]
    fn single_pixel() {
        let img = RasterImage::filled(1, 1, 77);
        assert_eq!(fnlm_denoise(&img, &FnlmParams::default()).unwrap(), img);
    }

    /// Direct O(N * window * patch) evaluation of the same estimator.
    fn brute_force(img: &RasterImage, params: &FnlmParams) -> Vec<f64> {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let pr = params.patch_radius as isize;
        let sr = params.search_radius as isize;
        let px = |x: isize, y: isize| img.get(reflect(x, w as usize), reflect(y, h as usize)) as f64;
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut num = 0.0;
                let mut den = 0.0;
                let mut maxw: f64 = 0.0;
                for ny in (y - sr).max(0)..=(y + sr).min(h - 1) {
                    for nx in (x - sr).max(0)..=(x + sr).min(w - 1) {
                        if nx == x && ny == y {
                            continue;
                        }
                        let mut d2 = 0.0;
                        for oy in -pr..=pr {
                            for ox in -pr..=pr {
                                let d = px(x + ox, y + oy) - px(nx + ox, ny + oy);
                                d2 += d * d;
                            }
                        }
                        d2 /= ((2 * pr + 1) * (2 * pr + 1)) as f64;
                        let wgt = (-d2 / (params.h * params.h)).exp();
                        num += wgt * img.get(nx as usize, ny as usize) as f64;
                        den += wgt;
                        maxw = maxw.max(wgt);
                    }
                }
                let c = if maxw > 0.0 { maxw } else { 1.0 };
                out.push((num + c * img.get(x as usize, y as usize) as f64) / (den + c));
            }
        }
        out
    }

    #[test]
    fn integral_image_path_matches_brute_force() {
        let img = RasterImage::from_fn(17, 13, |x, y| ((x * 37 + y * 91 + x * y * 13) % 200) as u8 + 20);
        let params = FnlmParams { patch_radius: 1, search_radius: 3, h: 25.0 };
        let expected = brute_force(&img, &params);
        let out = fnlm_denoise(&img, &params).unwrap();
        for (o, e) in out.data().iter().zip(&expected) {
            assert_eq!(*o, e.round().clamp(0.0, 255.0) as u8);
        }
    }
}
