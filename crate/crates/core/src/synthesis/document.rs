//! Synthetic form pages for registration and end-to-end fixtures.
//!
//! A page is clutter (blocks, rings, strokes, printed-digit marks) around
//! blank field boxes. Filling the boxes and warping the page by a known
//! homography gives a test scan with exact ground truth.

use super::digits::render_digit;
use crate::error::{Error, Result};
use crate::geometry::{rect_quad, Point};
use crate::imaging::{resize_bilinear, RasterImage, BACKGROUND};
use crate::registration::{dlt, warp_with, Homography};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Axis-aligned field box `(x0, y0, x1, y1)` in page pixels.
pub type FieldRect = (f64, f64, f64, f64);

fn overlaps(a: FieldRect, b: FieldRect, pad: f64) -> bool {
    a.0 < b.2 + pad && b.0 < a.2 + pad && a.1 < b.3 + pad && b.1 < a.3 + pad
}

fn darken(img: &mut RasterImage, x: isize, y: isize, v: u8) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        let cur = img.get(x as usize, y as usize);
        img.set(x as usize, y as usize, cur.min(v));
    }
}

fn fill_ellipse_ring(img: &mut RasterImage, cx: f64, cy: f64, rx: f64, ry: f64, thickness: f64, v: u8) {
    for y in (cy - ry - thickness).floor() as isize..=(cy + ry + thickness).ceil() as isize {
        for x in (cx - rx - thickness).floor() as isize..=(cx + rx + thickness).ceil() as isize {
            let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
            let r = (dx * dx + dy * dy).sqrt();
            if (r - 1.0).abs() * rx.min(ry) <= thickness / 2.0 {
                darken(img, x, y, v);
            }
        }
    }
}

fn draw_segment(img: &mut RasterImage, a: Point, b: Point, width: f64, v: u8) {
    let steps = (a.dist(&b) * 2.0).ceil().max(1.0) as usize;
    let r = (width / 2.0).ceil() as isize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (px, py) = (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64).sqrt() <= width / 2.0 {
                    darken(img, px.round() as isize + dx, py.round() as isize + dy, v);
                }
            }
        }
    }
}

fn stamp(img: &mut RasterImage, mark: &RasterImage, x0: isize, y0: isize) {
    for y in 0..mark.height() {
        for x in 0..mark.width() {
            darken(img, x0 + x as isize, y0 + y as isize, mark.get(x, y));
        }
    }
}

/// Draws the outline of a field box.
pub fn draw_box(img: &mut RasterImage, r: FieldRect, v: u8) {
    let q = rect_quad(r.0 - 2.0, r.1 - 2.0, r.2 + 1.0, r.3 + 1.0);
    for i in 0..4 {
        draw_segment(img, q[i], q[(i + 1) % 4], 1.0, v);
    }
}

/// Renders a template page of the given size with empty `fields`.
pub fn form_page(width: usize, height: usize, fields: &[FieldRect], seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = RasterImage::filled(width, height, BACKGROUND);
    let keep_out: Vec<FieldRect> = fields.to_vec();
    let free = |r: FieldRect| !keep_out.iter().any(|&f| overlaps(r, f, 6.0));
    let (wf, hf) = (width as f64, height as f64);

    let clutter = (width * height / 2500).max(12);
    for i in 0..clutter {
        let x = rng.random_range(0.0..wf);
        let y = rng.random_range(0.0..hf);
        match i % 4 {
            0 => {
                let w = rng.random_range(8.0..40.0);
                let h = rng.random_range(6.0..30.0);
                let r = (x, y, (x + w).min(wf), (y + h).min(hf));
                if free(r) {
                    let v = rng.random_range(20..200u8);
                    for yy in r.1 as usize..r.3 as usize {
                        for xx in r.0 as usize..r.2 as usize {
                            darken(&mut img, xx as isize, yy as isize, v);
                        }
                    }
                }
            }
            1 => {
                let rx = rng.random_range(5.0..20.0);
                let ry = rng.random_range(5.0..20.0);
                if free((x - rx - 2.0, y - ry - 2.0, x + rx + 2.0, y + ry + 2.0)) {
                    let v = rng.random_range(0..120u8);
                    fill_ellipse_ring(&mut img, x, y, rx, ry, rng.random_range(1.5..4.0), v);
                }
            }
            2 => {
                let b = Point::new(x + rng.random_range(-40.0..40.0), y + rng.random_range(-40.0..40.0));
                let r = (x.min(b.x) - 3.0, y.min(b.y) - 3.0, x.max(b.x) + 3.0, y.max(b.y) + 3.0);
                if free(r) {
                    draw_segment(&mut img, Point::new(x, y), b, rng.random_range(1.0..4.0), rng.random_range(0..100u8));
                }
            }
            _ => {
                let mark = render_digit(rng.random_range(0..10), &mut rng);
                let side = rng.random_range(16..40usize);
                let mark = resize_bilinear(&mark, (mark.width() * side / 64).max(1), side);
                let r = (x, y, x + mark.width() as f64, y + mark.height() as f64);
                if free(r) {
                    stamp(&mut img, &mark, x as isize, y as isize);
                }
            }
        }
    }
    for &f in fields {
        draw_box(&mut img, f, 40);
    }
    img
}

/// Writes `content` into a field, scaled to the box height (or width if
/// too wide) and right-aligned as Arabic text is.
pub fn fill_field(page: &mut RasterImage, r: FieldRect, content: &RasterImage) {
    let (bw, bh) = ((r.2 - r.0).floor() as usize, (r.3 - r.1).floor() as usize);
    if bw == 0 || bh == 0 || content.width() == 0 {
        return;
    }
    let scale = (bh as f64 / content.height() as f64).min(bw as f64 / content.width() as f64);
    let w = ((content.width() as f64 * scale).round() as usize).clamp(1, bw);
    let h = ((content.height() as f64 * scale).round() as usize).clamp(1, bh);
    let scaled = resize_bilinear(&crate::imaging::to_grayscale(content), w, h);
    let x0 = r.2.floor() as isize - w as isize;
    let y0 = r.1.floor() as isize + ((bh - h) / 2) as isize;
    stamp(page, &scaled, x0, y0);
}

/// A homography moving each page corner by up to `max_shift` pixels.
pub fn random_homography(width: usize, height: usize, max_shift: f64, rng: &mut impl Rng) -> Homography {
    let (w, h) = (width as f64, height as f64);
    let corners = [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)];
    let pairs: Vec<(Point, Point)> = corners
        .iter()
        .map(|&c| {
            let d = Point::new(
                c.x + rng.random_range(-max_shift..=max_shift),
                c.y + rng.random_range(-max_shift..=max_shift),
            );
            (c, d)
        })
        .collect();
    dlt(&pairs).expect("four corners in general position")
}

/// Warps a page forward by `template_to_test` into a `w` x `h` image.
pub fn warp_page(page: &RasterImage, template_to_test: &Homography, w: usize, h: usize) -> Result<RasterImage> {
    let inv = template_to_test.inverse().ok_or(Error::PointAtInfinity)?;
    warp_with(page, &inv, w, h)
}
