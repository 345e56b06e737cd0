use super::RasterImage;

/// Luma conversion with the 0.299 / 0.587 / 0.114 weights. Gray input is
/// returned unchanged.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.is_gray() {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| {
            let l = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            l.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    RasterImage::new(img.width(), img.height(), 1, data).expect("same geometry")
}

/// Photometric negative.
pub fn invert(img: &RasterImage) -> RasterImage {
    img.map(|v| 255 - v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(px: [u8; 3]) -> RasterImage {
        RasterImage::new(1, 1, 3, px.to_vec()).unwrap()
    }

    #[test]
    fn luma_values() {
        assert_eq!(to_grayscale(&rgb([255, 255, 255])).get(0, 0), 255);
        assert_eq!(to_grayscale(&rgb([255, 0, 0])).get(0, 0), 76);
        assert_eq!(to_grayscale(&rgb([0, 0, 0])).get(0, 0), 0);
    }

    #[test]
    fn gray_is_identity() {
        let img = RasterImage::from_fn(7, 3, |x, y| (x * 31 + y * 7) as u8);
        assert_eq!(to_grayscale(&img), img);
    }
}
