//! Rasterizing shaped text lines with a TrueType/OpenType font.

use super::shaping::{is_ltr_char, visual_order_by, ContextualShaper, Shaper};
use crate::error::{Error, Result};
use crate::imaging::{RasterImage, BACKGROUND};
use ab_glyph::{point, Font, FontVec, GlyphId, PxScale, ScaleFont};
use std::path::Path;

/// Margin kept around the inked text, in pixels.
pub const RENDER_MARGIN: usize = 4;

/// A loaded font.
pub struct LineFont {
    font: FontVec,
}

impl std::fmt::Debug for LineFont {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineFont").field("glyphs", &self.font.glyph_count()).finish()
    }
}

impl LineFont {
    pub fn load(path: impl AsRef<Path>) -> Result<LineFont> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::Font(format!("{}: {e}", path.display())))?;
        LineFont::from_bytes(bytes)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<LineFont> {
        let font = FontVec::try_from_vec(bytes).map_err(|e| Error::Font(e.to_string()))?;
        Ok(LineFont { font })
    }

    fn glyph(&self, shaped: char, original: char) -> Result<GlyphId> {
        let id = self.font.glyph_id(shaped);
        if id.0 != 0 {
            return Ok(id);
        }
        let fallback = self.font.glyph_id(original);
        if fallback.0 != 0 {
            return Ok(fallback);
        }
        Err(Error::Glyph { character: original })
    }
}

/// Renders `text` with the built-in shaper. See [`render_line_with`].
pub fn render_line(text: &str, font: &LineFont, px_height: usize) -> Result<RasterImage> {
    render_line_with(text, font, px_height, &ContextualShaper)
}

/// Renders shaped right-to-left text, ink 0 on 255.
///
/// The output is `px_height` tall: ascent to descent fills the height minus
/// the top and bottom margins. Horizontally it is cropped to the ink plus
/// the margin. An empty string yields a blank `2*margin` wide image.
pub fn render_line_with(text: &str, font: &LineFont, px_height: usize, shaper: &dyn Shaper) -> Result<RasterImage> {
    let inner = px_height
        .checked_sub(2 * RENDER_MARGIN)
        .filter(|&h| h > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("px_height {px_height} leaves no room for text")))?;
    let logical: Vec<char> = text.chars().collect();
    let shaped = shaper.shape(text);
    if shaped.len() != logical.len() {
        return Err(Error::InvalidParameter("shaper must map characters one to one".into()));
    }
    let pairs: Vec<(char, char)> = shaped.into_iter().zip(logical).collect();
    let visual = visual_order_by(&pairs, |&(_, o)| is_ltr_char(o));

    let units = font.font.height_unscaled();
    let scale = PxScale::from(inner as f32 * font.font.units_per_em().unwrap_or(units) / units);
    let scaled = font.font.as_scaled(scale);
    let baseline = RENDER_MARGIN as f32 + scaled.ascent();

    let mut glyphs = Vec::with_capacity(visual.len());
    let mut caret = 0.0f32;
    let mut prev: Option<GlyphId> = None;
    for &(shaped, original) in &visual {
        if original.is_whitespace() {
            caret += scaled.h_advance(font.font.glyph_id(' '));
            prev = None;
            continue;
        }
        let id = font.glyph(shaped, original)?;
        if let Some(p) = prev {
            caret += scaled.kern(p, id);
        }
        glyphs.push(id.with_scale_and_position(scale, point(caret, baseline)));
        caret += scaled.h_advance(id);
        prev = Some(id);
    }

    let width = (caret.ceil().max(0.0) as usize) + 2 * RENDER_MARGIN + 8;
    let mut cover = vec![0f32; width * px_height];
    for g in glyphs {
        let Some(outlined) = font.font.outline_glyph(g) else { continue };
        let b = outlined.px_bounds();
        let ox = b.min.x.floor() as i64 + RENDER_MARGIN as i64;
        let oy = b.min.y.floor() as i64;
        outlined.draw(|x, y, c| {
            let (px, py) = (ox + x as i64, oy + y as i64);
            if px >= 0 && py >= 0 && (px as usize) < width && (py as usize) < px_height {
                let cell = &mut cover[py as usize * width + px as usize];
                *cell = (*cell + c).min(1.0);
            }
        });
    }

    let inked: Vec<usize> = (0..width)
        .filter(|&x| (0..px_height).any(|y| cover[y * width + x] > 0.0))
        .collect();
    let (x0, x1) = match (inked.first(), inked.last()) {
        (Some(&a), Some(&b)) => (a, b + 1),
        _ => return Ok(RasterImage::filled(2 * RENDER_MARGIN, px_height, BACKGROUND)),
    };
    let out_w = x1 - x0 + 2 * RENDER_MARGIN;
    Ok(RasterImage::from_fn(out_w, px_height, |x, y| {
        let sx = (x + x0) as isize - RENDER_MARGIN as isize;
        if sx < 0 || sx as usize >= width {
            return BACKGROUND;
        }
        let c = cover[y * width + sx as usize];
        (255.0 * (1.0 - c)).round() as u8
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEJAVU: &str = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf";

    fn font() -> Option<LineFont> {
        LineFont::load(DEJAVU).ok()
    }

    #[test]
    fn missing_font_is_font_error() {
        assert!(matches!(LineFont::load("/nonexistent/font.ttf"), Err(Error::Font(_))));
        assert!(matches!(LineFont::from_bytes(vec![1, 2, 3]), Err(Error::Font(_))));
    }

    #[test]
    fn empty_text_is_blank_margin_image() {
        let Some(f) = font() else { return };
        let img = render_line("", &f, 48).unwrap();
        assert_eq!((img.width(), img.height()), (8, 48));
        assert!(img.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn rendering_is_deterministic_and_margined() {
        let Some(f) = font() else { return };
        let a = render_line("سلام ١٢", &f, 48).unwrap();
        assert_eq!(a, render_line("سلام ١٢", &f, 48).unwrap());
        assert_eq!(a.height(), 48);
        for x in 0..RENDER_MARGIN {
            assert!((0..48).all(|y| a.get(x, y) == 255 && a.get(a.width() - 1 - x, y) == 255));
        }
        assert!((0..48).any(|y| a.get(RENDER_MARGIN, y) < 255));
    }

    #[test]
    fn medial_form_differs_from_isolated() {
        let Some(f) = font() else { return };
        let iso = render_line("ع", &f, 48).unwrap();
        let med = render_line("ـعـ", &f, 48).unwrap();
        assert_ne!(iso, med);
        // Unshaped, the letter keeps its isolated form between the tatweels.
        let iso_tatweel = render_line_with("ـعـ", &f, 48, &NoShaping).unwrap();
        assert_ne!(iso_tatweel, med);
    }

    struct NoShaping;
    impl Shaper for NoShaping {
        fn shape(&self, text: &str) -> Vec<char> {
            text.chars().collect()
        }
    }

    #[test]
    fn missing_glyph_names_the_character() {
        let Some(f) = font() else { return };
        match render_line("a\u{10FFFD}", &f, 48) {
            Err(Error::Glyph { character }) => assert_eq!(character, '\u{10FFFD}'),
            other => panic!("expected glyph error, got {other:?}"),
        }
    }
}
