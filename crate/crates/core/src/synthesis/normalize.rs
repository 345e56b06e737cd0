use super::charset::{Charset, ARABIC_INDIC_DIGITS};

/// The eight Arabic vowel/diacritic combining marks (fathatan .. sukun).
pub fn is_arabic_diacritic(c: char) -> bool {
    ('\u{064B}'..='\u{0652}').contains(&c)
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || (('\u{00C0}'..='\u{024F}').contains(&c) && c.is_alphabetic())
}

/// Western digit to its Arabic-Indic counterpart; other characters unchanged.
pub fn to_arabic_digit(c: char) -> char {
    match c.to_digit(10) {
        Some(d) if c.is_ascii_digit() => ARABIC_INDIC_DIGITS[d as usize],
        _ => c,
    }
}

/// Arabic-Indic digit to ASCII; other characters unchanged.
pub fn to_western_digit(c: char) -> char {
    match ARABIC_INDIC_DIGITS.iter().position(|&d| d == c) {
        Some(v) => char::from(b'0' + v as u8),
        None => c,
    }
}

/// Cleans raw corpus text into recognizer labels:
/// Western digits become Arabic-Indic, Latin letters and diacritics are
/// dropped, characters outside `charset` are removed and whitespace runs
/// collapse to one space.
pub fn normalize_corpus(text: &str, charset: &Charset) -> String {
    let kept: String = text
        .chars()
        .map(to_arabic_digit)
        .filter(|&c| !is_latin_letter(c))
        .filter(|&c| !is_arabic_diacritic(c))
        .filter(|&c| c.is_whitespace() || charset.contains(c))
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}
