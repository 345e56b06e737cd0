//! Raster images and the document preprocessing chain.
//!
//! Every stage of the engine passes [`RasterImage`] values around: 8-bit,
//! row-major, one (gray) or three (RGB) interleaved channels. Operations
//! here are pure; they never modify their input.

pub(crate) mod blur;
mod color;
mod denoise;
pub mod io;
mod morphology;
mod plane;
mod resample;
mod threshold;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use color::{invert, to_grayscale};
pub use denoise::{fnlm_denoise, fnlm_denoise_instrumented, FnlmParams};
pub use morphology::{dilate, erode, open};
pub use plane::Plane;
pub use resample::{resize_bilinear, sample_bilinear};
pub use threshold::{binarize, otsu_threshold, BinarizeMode, Binarized};

use crate::error::{Error, Result};

/// Background intensity of document images (white paper).
pub const BACKGROUND: u8 = 255;
/// Ink intensity after binarization.
pub const INK: u8 = 0;

/// An 8-bit image with 1 or 3 interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel image filled with `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    /// Single-channel image built from a per-pixel function `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Intensity of channel 0 at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels]
    }

    #[inline]
    pub fn get_channel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        let base = (y * self.width + x) * self.channels;
        for c in 0..self.channels {
            self.data[base + c] = value;
        }
    }

    /// Reads `(x, y)` with out-of-bounds positions returning `fill`.
    #[inline]
    pub fn get_or(&self, x: isize, y: isize, fill: u8) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            fill
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::InvalidImage(format!(
                "{op} expects a single-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Replicates a gray image into three channels; RGB input is returned as is.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Axis-aligned crop; the rectangle is clipped to the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<RasterImage> {
        let x1 = (x0 + w).min(self.width);
        let y1 = (y0 + h).min(self.height);
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidParameter(format!(
                "crop ({x0},{y0},{w},{h}) is empty inside {}x{}",
                self.width, self.height
            )));
        }
        let cw = x1 - x0;
        let mut data = Vec::with_capacity(cw * (y1 - y0) * self.channels);
        for y in y0..y1 {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + cw * self.channels]);
        }
        RasterImage::new(cw, y1 - y0, self.channels, data)
    }

    /// Copies `src` into `self` with its top-left corner at `(x0, y0)`.
    /// Pixels falling outside `self` are dropped. Channel counts must match.
    pub fn blit(&mut self, src: &RasterImage, x0: isize, y0: isize) {
        assert_eq!(self.channels, src.channels, "blit channel mismatch");
        for sy in 0..src.height {
            let ty = y0 + sy as isize;
            if ty < 0 || ty as usize >= self.height {
                continue;
            }
            for sx in 0..src.width {
                let tx = x0 + sx as isize;
                if tx < 0 || tx as usize >= self.width {
                    continue;
                }
                let s = (sy * src.width + sx) * src.channels;
                let t = (ty as usize * self.width + tx as usize) * self.channels;
                self.data[t..t + self.channels].copy_from_slice(&src.data[s..s + src.channels]);
            }
        }
    }

    /// Mean intensity over all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Population variance over all samples.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data
            .iter()
            .map(|&v| (v as f64 - m).powi(2))
            .sum::<f64>()
            / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
