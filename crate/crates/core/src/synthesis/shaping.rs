//! Minimal Arabic shaping: contextual letter forms and visual ordering.
//!
//! Letters are mapped to their Presentation Forms-B codepoints (isolated,
//! final, initial, medial) from their joining neighbours. Ligatures beyond
//! single-letter contextual forms are not produced.

/// Turns logical-order text into the glyph characters to draw, still in
/// logical order.
pub trait Shaper {
    fn shape(&self, text: &str) -> Vec<char>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Joining {
    /// Joins on both sides.
    Dual,
    /// Joins only to the preceding letter.
    Right,
    /// Join-causing (tatweel).
    Causing,
    None,
}

const TATWEEL: char = '\u{0640}';

/// First Presentation Forms-B codepoint (the isolated form) per letter.
fn forms_base(c: char) -> Option<(u32, Joining)> {
    use Joining::*;
    let v = match c {
        'ء' => (0xFE80, None),
        'آ' => (0xFE81, Right),
        'أ' => (0xFE83, Right),
        'ؤ' => (0xFE85, Right),
        'إ' => (0xFE87, Right),
        'ئ' => (0xFE89, Dual),
        'ا' => (0xFE8D, Right),
        'ب' => (0xFE8F, Dual),
        'ة' => (0xFE93, Right),
        'ت' => (0xFE95, Dual),
        'ث' => (0xFE99, Dual),
        'ج' => (0xFE9D, Dual),
        'ح' => (0xFEA1, Dual),
        'خ' => (0xFEA5, Dual),
        'د' => (0xFEA9, Right),
        'ذ' => (0xFEAB, Right),
        'ر' => (0xFEAD, Right),
        'ز' => (0xFEAF, Right),
        'س' => (0xFEB1, Dual),
        'ش' => (0xFEB5, Dual),
        'ص' => (0xFEB9, Dual),
        'ض' => (0xFEBD, Dual),
        'ط' => (0xFEC1, Dual),
        'ظ' => (0xFEC5, Dual),
        'ع' => (0xFEC9, Dual),
        'غ' => (0xFECD, Dual),
        'ف' => (0xFED1, Dual),
        'ق' => (0xFED5, Dual),
        'ك' => (0xFED9, Dual),
        'ل' => (0xFEDD, Dual),
        'م' => (0xFEE1, Dual),
        'ن' => (0xFEE5, Dual),
        'ه' => (0xFEE9, Dual),
        'و' => (0xFEED, Right),
        'ى' => (0xFEEF, Right),
        'ي' => (0xFEF1, Dual),
        _ => return Option::None,
    };
    Some(v)
}

fn joining(c: char) -> Joining {
    if c == TATWEEL {
        return Joining::Causing;
    }
    forms_base(c).map_or(Joining::None, |(_, j)| j)
}

fn joins_forward(j: Joining) -> bool {
    matches!(j, Joining::Dual | Joining::Causing)
}

fn joins_backward(j: Joining) -> bool {
    matches!(j, Joining::Dual | Joining::Right | Joining::Causing)
}

fn is_transparent(c: char) -> bool {
    super::normalize::is_arabic_diacritic(c)
}

/// The built-in contextual-form shaper.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContextualShaper;

impl Shaper for ContextualShaper {
    fn shape(&self, text: &str) -> Vec<char> {
        let chars: Vec<char> = text.chars().collect();
        let neighbour = |mut i: isize, step: isize| -> Joining {
            loop {
                i += step;
                if i < 0 || i as usize >= chars.len() {
                    return Joining::None;
                }
                let c = chars[i as usize];
                if !is_transparent(c) {
                    return joining(c);
                }
            }
        };
        chars
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let Some((base, j)) = forms_base(c) else { return c };
                let prev = joins_forward(neighbour(i as isize, -1)) && joins_backward(j);
                let next = joins_forward(j) && joins_backward(neighbour(i as isize, 1));
                let offset = match (prev, next) {
                    (false, false) => 0,
                    (true, false) => 1,
                    (false, true) => 2,
                    (true, true) => 3,
                };
                char::from_u32(base + offset).unwrap_or(c)
            })
            .collect()
    }
}

/// Maps a presentation form back to its base letter (identity otherwise).
pub fn base_letter(c: char) -> char {
    let code = c as u32;
    if !(0xFE80..=0xFEF4).contains(&code) {
        return c;
    }
    ('\u{0621}'..='\u{064A}')
        .filter_map(|b| forms_base(b).map(|(base, j)| (b, base, j)))
        .find(|&(_, base, j)| {
            let n = match j {
                Joining::Dual => 4,
                Joining::Right => 2,
                _ => 1,
            };
            (base..base + n).contains(&code)
        })
        .map_or(c, |(b, _, _)| b)
}

fn is_ltr_run_char(c: char) -> bool {
    c.is_ascii_digit() || super::charset::ARABIC_INDIC_DIGITS.contains(&c) || c.is_ascii_alphabetic()
}

/// Reorders logical-order characters for right-to-left display, keeping
/// runs of digits (and Latin letters) left-to-right.
pub fn visual_order(chars: &[char]) -> Vec<char> {
    visual_order_by(chars, |&c| is_ltr_run_char(c))
}

/// [`visual_order`] over arbitrary items, classified by `is_ltr`.
pub fn visual_order_by<T: Clone>(items: &[T], is_ltr: impl Fn(&T) -> bool) -> Vec<T> {
    let mut out = Vec::with_capacity(items.len());
    let mut i = items.len();
    while i > 0 {
        if is_ltr(&items[i - 1]) {
            let end = i;
            while i > 0 && is_ltr(&items[i - 1]) {
                i -= 1;
            }
            out.extend_from_slice(&items[i..end]);
        } else {
            i -= 1;
            out.push(items[i].clone());
        }
    }
    out
}

pub(crate) fn is_ltr_char(c: char) -> bool {
    is_ltr_run_char(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contextual_forms() {
        let s = ContextualShaper;
        assert_eq!(s.shape("ع"), vec!['\u{FEC9}']);
        assert_eq!(s.shape("ـعـ"), vec![TATWEEL, '\u{FECC}', TATWEEL]);
        // ب initial, ا final, ب isolated (alef does not join forward).
        assert_eq!(s.shape("باب"), vec!['\u{FE91}', '\u{FE8E}', '\u{FE8F}']);
        assert_eq!(s.shape("ببب"), vec!['\u{FE91}', '\u{FE92}', '\u{FE90}']);
        assert_eq!(s.shape("a ١"), vec!['a', ' ', '١']);
    }

    #[test]
    fn diacritics_are_transparent() {
        let s = ContextualShaper;
        assert_eq!(s.shape("بَب"), vec!['\u{FE91}', '\u{064E}', '\u{FE90}']);
    }

    #[test]
    fn base_letters_round_trip() {
        let s = ContextualShaper;
        for text in ["سلام عليكم", "ببب", "أإآؤئ", "ءة"] {
            let back: String = s.shape(text).into_iter().map(base_letter).collect();
            assert_eq!(back, text);
        }
    }

    #[test]
    fn digits_stay_ltr() {
        let logical: Vec<char> = "رقم ١٢٣".chars().collect();
        let visual: String = visual_order(&logical).into_iter().collect();
        assert_eq!(visual, "١٢٣ مقر");
    }
}
