use super::RasterImage;

/// Bilinear sample of channel `c` at continuous pixel-center coordinates;
/// positions outside the image blend with `fill`.
#[inline]
pub fn sample_bilinear(img: &RasterImage, x: f64, y: f64, c: usize, fill: u8) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let px = |xx: isize, yy: isize| -> f64 {
        if xx < 0 || yy < 0 || xx >= w || yy >= h {
            fill as f64
        } else {
            img.get_channel(xx as usize, yy as usize, c) as f64
        }
    };
    let top = px(xi, yi) * (1.0 - fx) + px(xi + 1, yi) * fx;
    let bottom = px(xi, yi + 1) * (1.0 - fx) + px(xi + 1, yi + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resizes with bilinear interpolation using pixel-center alignment.
/// Downscaling by more than 2x first averages boxes to avoid aliasing.
pub fn resize_bilinear(img: &RasterImage, width: usize, height: usize) -> RasterImage {
    assert!(width > 0 && height > 0, "resize target must be non-empty");
    if width == img.width() && height == img.height() {
        return img.clone();
    }
    let src = if img.width() >= 2 * width || img.height() >= 2 * height {
        box_reduce(img, (img.width() / width).max(1), (img.height() / height).max(1))
    } else {
        img.clone()
    };
    let ch = src.channels();
    let sx = src.width() as f64 / width as f64;
    let sy = src.height() as f64 / height as f64;
    let mut data = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (src.height() - 1) as f64);
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (src.width() - 1) as f64);
            for c in 0..ch {
                data.push(sample_bilinear(&src, fx, fy, c, 255).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, ch, data).expect("valid resize geometry")
}

/// Averages `fx` x `fy` blocks (partial blocks at the edges included).
fn box_reduce(img: &RasterImage, fx: usize, fy: usize) -> RasterImage {
    if fx == 1 && fy == 1 {
        return img.clone();
    }
    let w = img.width().div_ceil(fx);
    let h = img.height().div_ceil(fy);
    let ch = img.channels();
    let mut data = Vec::with_capacity(w * h * ch);
    for by in 0..h {
        for bx in 0..w {
            for c in 0..ch {
                let mut sum = 0u32;
                let mut n = 0u32;
                for y in by * fy..((by + 1) * fy).min(img.height()) {
                    for x in bx * fx..((bx + 1) * fx).min(img.width()) {
                        sum += img.get_channel(x, y, c) as u32;
                        n += 1;
                    }
                }
                data.push(((sum as f64) / n as f64).round() as u8);
            }
        }
    }
    RasterImage::new(w, h, ch, data).expect("valid block geometry")
}
