use super::RasterImage;

/// Single-channel floating point image used by the numeric stages
/// (blurring, scale space, resampling).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Channel 0 of `img`, scaled by `scale` (use `1.0 / 255.0` for unit range).
    pub fn from_image(img: &RasterImage, scale: f32) -> Self {
        let mut p = Plane::new(img.width(), img.height());
        for y in 0..img.height() {
            for x in 0..img.width() {
                p.data[y * img.width() + x] = img.get(x, y) as f32 * scale;
            }
        }
        p
    }

    /// Rounds and clamps back into an 8-bit gray image, multiplying by `scale`.
    pub fn to_image(&self, scale: f32) -> RasterImage {
        let data = self
            .data
            .iter()
            .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
            .collect();
        RasterImage::new(self.width, self.height, 1, data).expect("plane dimensions are valid")
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut f32 {
        &mut self.data[y * self.width + x]
    }

    /// Reads with coordinates clamped to the border.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Keeps every second pixel in both directions.
    pub fn decimate(&self) -> Plane {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let mut out = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = self.at((2 * x).min(self.width - 1), (2 * y).min(self.height - 1));
            }
        }
        out
    }

    pub fn sub(&self, other: &Plane) -> Plane {
        debug_assert_eq!(self.data.len(), other.data.len());
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}
