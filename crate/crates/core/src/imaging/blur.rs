use super::{Plane, RasterImage};
use crate::error::{invalid, Result};

/// Normalized 1-D Gaussian taps with radius `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Mirror index into `[0, n)` without repeating the edge sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn convolve_rows(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[reflect(x as isize + k as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, t) in taps.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src_row = &src[sy * w..(sy + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += t * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflected borders, applied per channel.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> Result<RasterImage> {
    if !(sigma > 0.0) {
        return invalid(format!("gaussian sigma must be > 0, got {sigma}"));
    }
    let taps = gaussian_kernel(sigma);
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = vec![0u8; w * h * ch];
    for c in 0..ch {
        let plane: Vec<f64> = img.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let blurred = convolve_cols(&convolve_rows(&plane, w, h, &taps), w, h, &taps);
        for (i, v) in blurred.into_iter().enumerate() {
            out[i * ch + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    RasterImage::new(w, h, ch, out)
}

/// Gaussian blur of a float plane (no rounding). `sigma <= 0` copies.
pub(crate) fn blur_plane(p: &Plane, sigma: f64) -> Plane {
    if sigma <= 0.0 {
        return p.clone();
    }
    let taps = gaussian_kernel(sigma);
    let src: Vec<f64> = p.data.iter().map(|&v| v as f64).collect();
    let out = convolve_cols(&convolve_rows(&src, p.width, p.height, &taps), p.width, p.height, &taps);
    Plane {
        width: p.width,
        height: p.height,
        data: out.into_iter().map(|v| v as f32).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_sigma() {
        let img = RasterImage::filled(4, 4, 9);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn constant_is_fixed_point() {
        let img = RasterImage::filled(13, 9, 173);
        assert_eq!(gaussian_blur(&img, 2.3).unwrap(), img);
    }

    #[test]
    fn impulse_center_matches_continuous_gaussian() {
        // Continuous 2-D Gaussian peak: 1 / (2 pi sigma^2) = 0.159 at sigma = 1.
        let mut img = RasterImage::filled(21, 21, 0);
        img.set(10, 10, 255);
        let out = gaussian_blur(&img, 1.0).unwrap();
        let expected = 255.0 / (2.0 * std::f64::consts::PI);
        assert!((out.get(10, 10) as f64 - expected).abs() <= 1.0, "{}", out.get(10, 10));
    }

    #[test]
    fn larger_sigma_smooths_more() {
        let img = RasterImage::from_fn(40, 40, |x, y| if (x / 3 + y / 5) % 2 == 0 { 20 } else { 230 });
        let v1 = gaussian_blur(&img, 0.8).unwrap().variance();
        let v2 = gaussian_blur(&img, 2.5).unwrap().variance();
        assert!(v2 <= v1);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(-7, 5), 1);
        assert_eq!(reflect(3, 1), 0);
    }
}
