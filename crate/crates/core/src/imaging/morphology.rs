//! Binary morphology with a 3x3 square structuring element.
//!
//! Foreground is any non-zero pixel; outputs use 255 for foreground.
//! Positions outside the image are ignored by both operators, which keeps
//! erosion and dilation exact duals under inversion.

use super::RasterImage;

fn sweep(img: &RasterImage, keep_when_all: bool) -> RasterImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            let mut any = false;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let fg = img.get(nx as usize, ny as usize) != 0;
                    all &= fg;
                    any |= fg;
                }
            }
            let on = if keep_when_all { all } else { any };
            out.set(x as usize, y as usize, if on { 255 } else { 0 });
        }
    }
    out
}

/// A pixel stays foreground only if its whole 3x3 neighborhood is foreground.
pub fn erode(img: &RasterImage) -> RasterImage {
    sweep(img, true)
}

/// A pixel becomes foreground if any 3x3 neighbor is foreground.
pub fn dilate(img: &RasterImage) -> RasterImage {
    sweep(img, false)
}

/// Erosion followed by dilation: removes foreground specks narrower than 3 px.
pub fn open(img: &RasterImage) -> RasterImage {
    dilate(&erode(img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::invert;

    fn canvas(points: &[(usize, usize)]) -> RasterImage {
        let mut img = RasterImage::filled(12, 12, 0);
        for &(x, y) in points {
            img.set(x, y, 255);
        }
        img
    }

    #[test]
    fn isolated_pixel_is_removed() {
        assert!(open(&canvas(&[(5, 5)])).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn two_pixels_three_apart_are_removed() {
        assert!(open(&canvas(&[(3, 5), (6, 5)])).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn solid_block_survives() {
        let block: Vec<_> = (3..8).flat_map(|y| (3..8).map(move |x| (x, y))).collect();
        let img = canvas(&block);
        let eroded = erode(&img);
        assert_eq!(eroded.data().iter().filter(|&&v| v == 255).count(), 9);
        assert_eq!(open(&img), img);
    }

    #[test]
    fn duality_and_idempotence() {
        let img = RasterImage::from_fn(23, 17, |x, y| if (x * 7 + y * 13 + x * y) % 5 < 3 { 255 } else { 0 });
        assert_eq!(erode(&invert(&img)), invert(&dilate(&img)));
        let o = open(&img);
        assert_eq!(open(&o), o);
    }
}
