//! Augmentation menu for recognizer training lines.
//!
//! Effects run in a fixed order: background, rotation, motion blur,
//! low resolution, gaussian noise, salt-and-pepper. Every random draw comes
//! from the spec's seed.

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, sample_bilinear, RasterImage, BACKGROUND};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    Lined,
    Dotted,
}

/// Paper texture drawn under the ink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub kind: BackgroundKind,
    /// Distance between lines or dots, 2..=256 px.
    pub spacing: usize,
    /// Darkness of the texture in (0, 1].
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBlur {
    /// Kernel length, 1..=64 px.
    pub length: usize,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub seed: u64,
    #[serde(default)]
    pub background: Option<Background>,
    /// Rotation about the image center, |deg| <= 45.
    #[serde(default)]
    pub rotation_deg: Option<f64>,
    #[serde(default)]
    pub motion_blur: Option<MotionBlur>,
    /// Downscale factor in [1, 16], then upscaled back.
    #[serde(default)]
    pub low_res_factor: Option<f64>,
    /// Gaussian noise standard deviation in [0, 128] gray levels.
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    /// Fraction of pixels replaced by 0 or 255, in [0, 1].
    #[serde(default)]
    pub salt_pepper_rate: Option<f64>,
}

impl AugmentSpec {
    /// A spec with no effects enabled.
    pub fn new(seed: u64) -> Self {
        AugmentSpec {
            seed,
            background: None,
            rotation_deg: None,
            motion_blur: None,
            low_res_factor: None,
            gaussian_sigma: None,
            salt_pepper_rate: None,
        }
    }

    /// Draws a random combination of effects at moderate strength.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut spec = AugmentSpec::new(rng.random());
        if rng.random_bool(0.3) {
            spec.background = Some(Background {
                kind: if rng.random_bool(0.5) { BackgroundKind::Lined } else { BackgroundKind::Dotted },
                spacing: rng.random_range(8..24),
                intensity: rng.random_range(0.1..0.4),
            });
        }
        if rng.random_bool(0.3) {
            spec.rotation_deg = Some(rng.random_range(-2.0..2.0));
        }
        if rng.random_bool(0.2) {
            spec.motion_blur = Some(MotionBlur {
                length: rng.random_range(2..5),
                angle_deg: rng.random_range(0.0..180.0),
            });
        }
        if rng.random_bool(0.2) {
            spec.low_res_factor = Some(rng.random_range(1.2..2.0));
        }
        if rng.random_bool(0.3) {
            spec.gaussian_sigma = Some(rng.random_range(2.0..12.0));
        }
        if rng.random_bool(0.2) {
            spec.salt_pepper_rate = Some(rng.random_range(0.001..0.01));
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let Some(b) = &self.background {
            if !(2..=256).contains(&b.spacing) {
                return bad(format!("background spacing {} outside 2..=256", b.spacing));
            }
            if !(b.intensity > 0.0 && b.intensity <= 1.0) {
                return bad(format!("background intensity {} outside (0, 1]", b.intensity));
            }
        }
        if let Some(r) = self.rotation_deg {
            if !(r.is_finite() && r.abs() <= 45.0) {
                return bad(format!("rotation {r} outside [-45, 45]"));
            }
        }
        if let Some(m) = &self.motion_blur {
            if !(1..=64).contains(&m.length) || !m.angle_deg.is_finite() {
                return bad(format!("motion blur length {} outside 1..=64", m.length));
            }
        }
        if let Some(f) = self.low_res_factor {
            if !(1.0..=16.0).contains(&f) {
                return bad(format!("low-res factor {f} outside [1, 16]"));
            }
        }
        if let Some(s) = self.gaussian_sigma {
            if !(0.0..=128.0).contains(&s) {
                return bad(format!("gaussian sigma {s} outside [0, 128]"));
            }
        }
        if let Some(p) = self.salt_pepper_rate {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("salt-pepper rate {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

fn background(img: &RasterImage, bg: &Background, rng: &mut ChaCha8Rng) -> RasterImage {
    let tone = (255.0 * (1.0 - bg.intensity)).round() as u8;
    let phase_x = rng.random_range(0..bg.spacing);
    let phase_y = rng.random_range(0..bg.spacing);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let on = match bg.kind {
                BackgroundKind::Lined => (y + phase_y) % bg.spacing == 0,
                BackgroundKind::Dotted => (y + phase_y) % bg.spacing == 0 && (x + phase_x) % bg.spacing == 0,
            };
            if on {
                for c in 0..img.channels() {
                    let i = (y * img.width() + x) * img.channels() + c;
                    let v = &mut out.data_mut()[i];
                    *v = (*v).min(tone);
                }
            }
        }
    }
    out
}

fn per_pixel(img: &RasterImage, f: impl Fn(f64, f64, usize) -> f64) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut data = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                data.push(f(x as f64, y as f64, c).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(w, h, ch, data).expect("dimensions preserved")
}

fn rotate(img: &RasterImage, deg: f64) -> RasterImage {
    let (s, c) = deg.to_radians().sin_cos();
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    per_pixel(img, |x, y, ch| {
        let (dx, dy) = (x - cx, y - cy);
        sample_bilinear(img, cx + c * dx + s * dy, cy - s * dx + c * dy, ch, BACKGROUND)
    })
}

fn motion_blur(img: &RasterImage, m: &MotionBlur) -> RasterImage {
    if m.length <= 1 {
        return img.clone();
    }
    let (s, c) = m.angle_deg.to_radians().sin_cos();
    let offsets: Vec<f64> = (0..m.length)
        .map(|i| i as f64 - (m.length as f64 - 1.0) / 2.0)
        .collect();
    per_pixel(img, |x, y, ch| {
        let sum: f64 = offsets
            .iter()
            .map(|t| sample_bilinear(img, x + t * c, y + t * s, ch, BACKGROUND))
            .sum();
        sum / offsets.len() as f64
    })
}

fn low_res(img: &RasterImage, factor: f64) -> RasterImage {
    let w = ((img.width() as f64 / factor).round() as usize).max(1);
    let h = ((img.height() as f64 / factor).round() as usize).max(1);
    resize_bilinear(&resize_bilinear(img, w, h), img.width(), img.height())
}

/// Applies the enabled effects of `spec`. Dimensions never change.
pub fn augment(img: &RasterImage, spec: &AugmentSpec) -> Result<RasterImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = img.clone();
    if let Some(bg) = &spec.background {
        out = background(&out, bg, &mut rng);
    }
    if let Some(deg) = spec.rotation_deg {
        out = rotate(&out, deg);
    }
    if let Some(m) = &spec.motion_blur {
        out = motion_blur(&out, m);
    }
    if let Some(f) = spec.low_res_factor {
        out = low_res(&out, f);
    }
    if let Some(sigma) = spec.gaussian_sigma {
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            for v in out.data_mut() {
                *v = (*v as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    if let Some(p) = spec.salt_pepper_rate {
        for v in out.data_mut() {
            if rng.random_bool(p) {
                *v = if rng.random_bool(0.5) { 255 } else { 0 };
            }
        }
    }
    Ok(out)
}
