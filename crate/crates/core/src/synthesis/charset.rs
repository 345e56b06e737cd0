use crate::error::{Error, Result};
use std::collections::HashSet;

const DEFAULT_CHARSET: &str = include_str!("../../assets/charset.txt");

/// Arabic-Indic digits in value order.
pub const ARABIC_INDIC_DIGITS: [char; 10] = ['٠', '١', '٢', '٣', '٤', '٥', '٦', '٧', '٨', '٩'];

/// Ordered set of characters the recognizer may emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charset {
    chars: Vec<char>,
    lookup: HashSet<char>,
}

impl Charset {
    pub fn new(chars: Vec<char>) -> Result<Charset> {
        let mut lookup = HashSet::new();
        for &c in &chars {
            if !lookup.insert(c) {
                return Err(Error::InvalidParameter(format!("duplicate charset entry {c:?}")));
            }
        }
        if let Some(d) = ARABIC_INDIC_DIGITS.iter().find(|d| !lookup.contains(d)) {
            return Err(Error::InvalidParameter(format!("charset lacks digit {d:?}")));
        }
        Ok(Charset { chars, lookup })
    }

    /// Parses the charset file format: one entry per line, `<space>` for the
    /// space character, `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Charset> {
        let mut chars = Vec::new();
        for line in text.lines() {
            let entry = line.trim_end_matches('\r');
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            if entry == "<space>" {
                chars.push(' ');
                continue;
            }
            let mut it = entry.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "charset line {entry:?} must hold exactly one character"
                    )))
                }
            }
        }
        Charset::new(chars)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Charset> {
        Charset::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled 64-entry set: Arabic letters, Arabic-Indic digits, space
    /// and common punctuation.
    pub fn default_arabic() -> Charset {
        Charset::parse(DEFAULT_CHARSET).expect("bundled charset is valid")
    }

    /// Only the ten Arabic-Indic digits.
    pub fn digits() -> Charset {
        Charset::new(ARABIC_INDIC_DIGITS.to_vec()).expect("digits are unique")
    }

    pub fn contains(&self, c: char) -> bool {
        self.lookup.contains(&c)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_charset() {
        let cs = Charset::default_arabic();
        assert_eq!(cs.len(), 64);
        assert!(cs.contains(' '));
        assert!(cs.contains('/'));
        assert!(ARABIC_INDIC_DIGITS.iter().all(|&d| cs.contains(d)));
        assert!(!cs.contains('a'));
    }

    #[test]
    fn parse_errors() {
        assert!(Charset::parse("٠\n١\n").is_err());
        let mut text: String = ARABIC_INDIC_DIGITS.iter().map(|d| format!("{d}\n")).collect();
        text.push_str("ab\n");
        assert!(Charset::parse(&text).is_err());
        let dup: String = ARABIC_INDIC_DIGITS.iter().chain(&['٠']).map(|d| format!("{d}\n")).collect();
        assert!(Charset::parse(&dup).is_err());
    }
}
