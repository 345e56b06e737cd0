//! Type-constrained correction of recognized field text.

use crate::error::{Error, Result};
use crate::synthesis::{normalize_corpus, to_arabic_digit, to_western_digit, Charset, ARABIC_INDIC_DIGITS};
use crate::template::FieldType;
use serde::{Deserialize, Serialize};

/// Edit distance (insert / delete / substitute, unit costs) over any sequence.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag } else { 1 + diag.min(above).min(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

/// Keeps digits only, mapping Western digits to Arabic-Indic.
pub fn enhance_number(raw: &str) -> Result<String> {
    let out: String = raw
        .chars()
        .filter(|c| c.is_ascii_digit() || ARABIC_INDIC_DIGITS.contains(c))
        .map(to_arabic_digit)
        .collect();
    if out.is_empty() {
        Err(Error::EmptyAfterFilter)
    } else {
        Ok(out)
    }
}

fn days_in_month(month: u32, year: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

/// Validates a date written `DD?MM?YYYY` or `YYYY?MM?DD` (separator `/`, `-`
/// or `.`, the same one twice) and rewrites it as `DD/MM/YYYY`. Digits in the
/// output use Arabic-Indic forms when the input contained any.
pub fn enhance_date(raw: &str) -> Result<String> {
    let reject = || Error::DateRejected(raw.to_string());
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).map(to_western_digit).collect();
    let sep = compact.chars().find(|c| matches!(c, '/' | '-' | '.')).ok_or_else(reject)?;
    let parts: Vec<&str> = compact.split(sep).collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty() || !p.chars().all(|c| c.is_ascii_digit())) {
        return Err(reject());
    }
    let (d, m, y) = match (parts[0].len(), parts[1].len(), parts[2].len()) {
        (1..=2, 1..=2, 4) => (parts[0], parts[1], parts[2]),
        (4, 1..=2, 1..=2) => (parts[2], parts[1], parts[0]),
        _ => return Err(reject()),
    };
    let (day, month, year): (u32, u32, u32) = (d.parse().unwrap(), m.parse().unwrap(), y.parse().unwrap());
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(month, year) {
        return Err(reject());
    }
    let canonical = format!("{day:02}/{month:02}/{year:04}");
    if raw.chars().any(|c| ARABIC_INDIC_DIGITS.contains(&c)) {
        Ok(canonical.chars().map(to_arabic_digit).collect())
    } else {
        Ok(canonical)
    }
}

/// The possibility closest to `raw` by Levenshtein distance, comparing
/// normalized forms; ties go to the earliest entry.
pub fn enhance_defined<'a>(raw: &str, possibilities: &'a [String]) -> Option<&'a str> {
    let charset = Charset::default_arabic();
    let key = normalize_corpus(raw, &charset);
    possibilities
        .iter()
        .enumerate()
        .min_by_key(|(i, p)| (levenshtein(&key, &normalize_corpus(p, &charset)), *i))
        .map(|(_, p)| p.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationMode {
    Matched,
    Fallback,
}

/// Recognized text of one template field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub field_id: String,
    pub raw_text: String,
    pub enhanced_text: String,
    pub field_type: FieldType,
    pub registration: RegistrationMode,
    /// Per-line text for multi-line fields, top to bottom.
    pub line_texts: Vec<String>,
    /// Review markers such as `EmptyAfterFilter`, `DateRejected`,
    /// `RegistrationFallback` or `Error:<stage>: <message>`.
    pub flags: Vec<String>,
}

impl Prediction {
    pub fn new(field_id: impl Into<String>, field_type: FieldType, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        Self {
            field_id: field_id.into(),
            enhanced_text: raw_text.clone(),
            raw_text,
            field_type,
            registration: RegistrationMode::Matched,
            line_texts: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

pub const FLAG_EMPTY_AFTER_FILTER: &str = "EmptyAfterFilter";
pub const FLAG_DATE_REJECTED: &str = "DateRejected";
pub const FLAG_NO_POSSIBILITIES: &str = "NoPossibilities";

/// Applies the correction rule of the field type to `raw_text`. Free-text
/// fields pass through; failed corrections keep the raw text and add a flag.
pub fn enhance(pred: &Prediction, possibilities: &[String]) -> Prediction {
    let mut out = pred.clone();
    out.flags
        .retain(|f| f != FLAG_EMPTY_AFTER_FILTER && f != FLAG_DATE_REJECTED && f != FLAG_NO_POSSIBILITIES);
    let mut flag = |f: &str| out.flags.push(f.to_string());
    let enhanced = match pred.field_type {
        FieldType::SingleLine | FieldType::MultipleLines => pred.raw_text.clone(),
        FieldType::Number => enhance_number(&pred.raw_text).unwrap_or_else(|_| {
            flag(FLAG_EMPTY_AFTER_FILTER);
            pred.raw_text.clone()
        }),
        FieldType::Date => enhance_date(&pred.raw_text).unwrap_or_else(|_| {
            flag(FLAG_DATE_REJECTED);
            pred.raw_text.clone()
        }),
        FieldType::DefinedLabel => match enhance_defined(&pred.raw_text, possibilities) {
            Some(p) => p.to_string(),
            None => {
                flag(FLAG_NO_POSSIBILITIES);
                pred.raw_text.clone()
            }
        },
    };
    out.enhanced_text = enhanced;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("مدفوغ", "مدفوع"), 1);
    }

    #[test]
    fn number_filter() {
        assert_eq!(enhance_number("٤٥أ٦").unwrap(), "٤٥٦");
        assert_eq!(enhance_number("4٥6").unwrap(), "٤٥٦");
        assert!(matches!(enhance_number("abc"), Err(Error::EmptyAfterFilter)));
    }

    #[test]
    fn dates() {
        assert_eq!(enhance_date("12/05/2023").unwrap(), "12/05/2023");
        assert_eq!(enhance_date("2023-05-12").unwrap(), "12/05/2023");
        assert_eq!(enhance_date("1.5.2024").unwrap(), "01/05/2024");
        assert_eq!(enhance_date("١٢/٠٥/٢٠٢٣").unwrap(), "١٢/٠٥/٢٠٢٣");
        assert_eq!(enhance_date(" 29 / 02 / 2024 ").unwrap(), "29/02/2024");
        assert!(matches!(enhance_date("31/02/2020"), Err(Error::DateRejected(_))));
        assert!(enhance_date("29/02/1900").is_err());
        assert!(enhance_date("12/05-2023").is_err());
        assert!(enhance_date("2023/05").is_err());
        assert!(enhance_date("12/13/2023").is_err());
    }

    #[test]
    fn defined_label() {
        let p = vec!["مدفوع".to_string(), "ملغي".to_string()];
        assert_eq!(enhance_defined("مدفوغ", &p), Some("مدفوع"));
        assert_eq!(enhance_defined("ملغي", &p), Some("ملغي"));
        let tie = vec!["ab".to_string(), "ba".to_string()];
        assert_eq!(enhance_defined("", &tie), Some("ab"));
        assert_eq!(enhance_defined("x", &[]), None);
    }

    #[test]
    fn dispatch() {
        let single = Prediction::new("a", FieldType::SingleLine, "٤٥أ٦");
        assert_eq!(enhance(&single, &[]).enhanced_text, "٤٥أ٦");
        let num = Prediction::new("b", FieldType::Number, "٤٥أ٦");
        assert_eq!(enhance(&num, &[]).enhanced_text, "٤٥٦");
        let bad = enhance(&Prediction::new("c", FieldType::Number, "abc"), &[]);
        assert_eq!(bad.enhanced_text, "abc");
        assert_eq!(bad.flags, vec![FLAG_EMPTY_AFTER_FILTER]);
        let label = Prediction::new("d", FieldType::DefinedLabel, "مدفوغ");
        let poss = vec!["مدفوع".to_string(), "ملغي".to_string()];
        assert_eq!(enhance(&label, &poss).enhanced_text, "مدفوع");
        let date = enhance(&Prediction::new("e", FieldType::Date, "31/02/2020"), &[]);
        assert_eq!(date.flags, vec![FLAG_DATE_REJECTED]);
        assert_eq!(enhance(&date, &[]), date);
    }
}
