use super::homography::{dlt, Homography};
use crate::error::{Error, Result};
use crate::geometry::{area, Point};
use crate::imaging::{sample_bilinear, RasterImage, BACKGROUND};

/// Output size for a quad: rounded mean of opposite side lengths.
pub fn quad_extent(quad: &[Point; 4]) -> (usize, usize) {
    let w = 0.5 * (quad[0].dist(&quad[1]) + quad[3].dist(&quad[2]));
    let h = 0.5 * (quad[1].dist(&quad[2]) + quad[0].dist(&quad[3]));
    (w.round().max(1.0) as usize, h.round().max(1.0) as usize)
}

/// Rectifies the region inside `quad` (clockwise from top-left) into an
/// axis-aligned image. Samples outside the source read as background.
pub fn warp_extract(img: &RasterImage, quad: &[Point; 4]) -> Result<RasterImage> {
    let a = area(quad);
    if a < 4.0 {
        return Err(Error::DegenerateRegion { area: a });
    }
    let (w, h) = quad_extent(quad);
    let (wf, hf) = (w as f64, h as f64);
    let rect = [Point::new(0.0, 0.0), Point::new(wf, 0.0), Point::new(wf, hf), Point::new(0.0, hf)];
    let pairs: Vec<(Point, Point)> = rect.iter().copied().zip(quad.iter().copied()).collect();
    let to_source = dlt(&pairs).map_err(|_| Error::DegenerateRegion { area: a })?;
    warp_with(img, &to_source, w, h)
}

/// Inverse-maps every output pixel through `to_source` and samples bilinearly.
pub fn warp_with(img: &RasterImage, to_source: &Homography, w: usize, h: usize) -> Result<RasterImage> {
    let ch = img.channels();
    let mut data = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        for x in 0..w {
            let src = to_source.try_project(Point::new(x as f64, y as f64));
            for c in 0..ch {
                let v = match src {
                    Some(p) => snap_sample(img, p, c),
                    None => BACKGROUND as f64,
                };
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(w, h, ch, data)
}

/// Bilinear sample, snapping coordinates within 1e-9 of an integer so that
/// integer-to-integer mappings copy pixels exactly.
fn snap_sample(img: &RasterImage, p: Point, c: usize) -> f64 {
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    sample_bilinear(img, snap(p.x), snap(p.y), c, BACKGROUND)
}
