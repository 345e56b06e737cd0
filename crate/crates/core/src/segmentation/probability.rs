use crate::error::{Error, Result};
use std::path::Path;

/// Per-pixel probabilities in [0, 1], row-major.
///
/// On disk: width and height as little-endian `u32`, then `width*height`
/// little-endian `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "probability map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbabilityMap { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        ProbabilityMap::new(width, height, values)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        ProbabilityMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.values.len());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::InvalidParameter("probability map shorter than its header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (w, h) = (word(0), word(4));
        let expected = w
            .checked_mul(h)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(8))
            .ok_or_else(|| Error::InvalidParameter(format!("probability map {w}x{h} is too large")))?;
        if bytes.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "probability map {w}x{h} needs {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let values = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        ProbabilityMap::new(w, h, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProbabilityMap::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// Differentiable binarization: `1 / (1 + exp(-k (P - T)))` per pixel.
pub fn approx_binary_map(p: &ProbabilityMap, t: &ProbabilityMap, k: f64) -> Result<ProbabilityMap> {
    if (p.width, p.height) != (t.width, t.height) {
        return Err(Error::InvalidParameter(format!(
            "probability {}x{} and threshold {}x{} maps differ in size",
            p.width, p.height, t.width, t.height
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("amplification k must be positive, got {k}")));
    }
    let values = p
        .values
        .iter()
        .zip(&t.values)
        .map(|(&pv, &tv)| 1.0 / (1.0 + (-k * (pv - tv)).exp()))
        .collect();
    Ok(ProbabilityMap {
        width: p.width,
        height: p.height,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_cases() {
        let p = ProbabilityMap::from_fn(3, 2, |x, y| (x + y) as f64 / 4.0).unwrap();
        let b = approx_binary_map(&p, &p, 50.0).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.5));
        let ones = ProbabilityMap::from_fn(2, 2, |_, _| 1.0).unwrap();
        let b = approx_binary_map(&ones, &ProbabilityMap::zeros(2, 2), 50.0).unwrap();
        assert!(b.values().iter().all(|&v| (1.0 - v).abs() < 1e-9));
    }

    #[test]
    fn errors() {
        assert!(approx_binary_map(&ProbabilityMap::zeros(2, 2), &ProbabilityMap::zeros(3, 2), 50.0).is_err());
        assert!(approx_binary_map(&ProbabilityMap::zeros(2, 2), &ProbabilityMap::zeros(2, 2), 0.0).is_err());
        assert!(ProbabilityMap::new(1, 1, vec![1.5]).is_err());
        assert!(ProbabilityMap::new(2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn file_format() {
        let p = ProbabilityMap::from_fn(3, 2, |x, y| (x * 2 + y) as f64 / 8.0).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..8], &[3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 8 + 24);
        assert_eq!(ProbabilityMap::from_bytes(&bytes).unwrap(), p);
        assert!(ProbabilityMap::from_bytes(&bytes[..20]).is_err());
        assert!(ProbabilityMap::from_bytes(&[0xff; 8]).is_err());
    }
}
