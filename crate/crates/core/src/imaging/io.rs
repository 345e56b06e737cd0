//! PNG and binary PGM (P5) reading and writing.

use super::RasterImage;
use crate::error::{Error, Result};
use image::{DynamicImage, ImageFormat};
use std::path::Path;

/// Decodes PNG or PGM bytes. Gray images stay single-channel; everything
/// else is converted to RGB (alpha is dropped).
pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let dynamic = image::load_from_memory(bytes).map_err(|e| Error::ImageDecode(e.to_string()))?;
    from_dynamic(dynamic)
}

fn from_dynamic(dynamic: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    match dynamic {
        DynamicImage::ImageLuma8(buf) => RasterImage::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            RasterImage::new(w, h, 1, dynamic.to_luma8().into_raw())
        }
        other => RasterImage::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

fn to_dynamic(img: &RasterImage) -> DynamicImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.is_gray() {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, img.data().to_vec()).expect("geometry"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, img.data().to_vec()).expect("geometry"))
    }
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    to_dynamic(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::ImageDecode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Binary PGM (P5). RGB input is written as its luma.
pub fn encode_pgm(img: &RasterImage) -> Vec<u8> {
    let gray = super::to_grayscale(img);
    let mut out = format!("P5\n{} {}\n255\n", gray.width(), gray.height()).into_bytes();
    out.extend_from_slice(gray.data());
    out
}

pub fn load(path: impl AsRef<Path>) -> Result<RasterImage> {
    decode(&std::fs::read(path)?)
}

/// Writes PGM when the extension is `.pgm`, PNG otherwise.
pub fn save(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let bytes = if is_pgm { encode_pgm(img) } else { encode_png(img)? };
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pgm_round_trip() {
        let gray = RasterImage::from_fn(13, 7, |x, y| (x * 19 + y * 3) as u8);
        assert_eq!(decode(&encode_png(&gray).unwrap()).unwrap(), gray);
        assert_eq!(decode(&encode_pgm(&gray)).unwrap(), gray);
        let rgb = RasterImage::new(2, 1, 3, vec![1, 2, 3, 250, 251, 252]).unwrap();
        assert_eq!(decode(&encode_png(&rgb).unwrap()).unwrap(), rgb);
    }

    #[test]
    fn garbage_is_decode_error() {
        assert!(matches!(decode(b"not an image"), Err(Error::ImageDecode(_))));
    }
}
