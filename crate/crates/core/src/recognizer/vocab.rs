use crate::error::{Error, Result};
use crate::synthesis::Charset;
use std::collections::HashMap;
use std::path::Path;

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;

const SPECIALS: [&str; 3] = ["<pad>", "<sos>", "<eos>"];
const SPACE: &str = "<space>";

/// Output alphabet: the three specials, then one token per character.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Vocabulary> {
        let chars: Vec<char> = chars.into_iter().collect();
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i + SPECIALS.len()).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary character {c:?}")));
            }
        }
        Ok(Vocabulary { chars, index })
    }

    pub fn from_charset(cs: &Charset) -> Vocabulary {
        Vocabulary::new(cs.chars().iter().copied()).expect("charset entries are unique")
    }

    /// Number of tokens including specials.
    pub fn len(&self) -> usize {
        self.chars.len() + SPECIALS.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn token(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Character for a non-special token.
    pub fn char(&self, token: usize) -> Option<char> {
        token.checked_sub(SPECIALS.len()).and_then(|i| self.chars.get(i).copied())
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .map(|c| {
                self.token(c)
                    .ok_or_else(|| Error::Validation(format!("character {c:?} is not in the vocabulary")))
            })
            .collect()
    }

    /// Text of the non-special tokens.
    pub fn decode(&self, tokens: &[usize]) -> String {
        tokens.iter().filter_map(|&t| self.char(t)).collect()
    }

    /// One token per line, specials first; space is written as `<space>`.
    pub fn to_file_string(&self) -> String {
        let mut out: String = SPECIALS.iter().map(|s| format!("{s}\n")).collect();
        for &c in &self.chars {
            if c == ' ' {
                out.push_str(SPACE);
            } else {
                out.push(c);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Vocabulary> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < SPECIALS.len() || lines[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Schema(format!("vocabulary must start with {SPECIALS:?}")));
        }
        let mut chars = Vec::new();
        for (n, line) in lines[SPECIALS.len()..].iter().enumerate() {
            if *line == SPACE {
                chars.push(' ');
                continue;
            }
            let mut it = line.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => {
                    return Err(Error::Schema(format!(
                        "vocabulary line {}: expected one character, got {line:?}",
                        n + SPECIALS.len() + 1
                    )))
                }
            }
        }
        Vocabulary::new(chars)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary> {
        Vocabulary::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection_and_specials() {
        let v = Vocabulary::from_charset(&Charset::default_arabic());
        assert_eq!(v.len(), 67);
        for t in 3..v.len() {
            assert_eq!(v.token(v.char(t).unwrap()), Some(t));
        }
        assert_eq!(v.char(PAD), None);
        assert_eq!(v.decode(&[SOS, v.token('٤').unwrap(), EOS]), "٤");
        assert!(v.encode("abc").is_err());
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::new(['a', ' ', 'ب']).unwrap();
        let text = v.to_file_string();
        assert_eq!(text, "<pad>\n<sos>\n<eos>\na\n<space>\nب\n");
        assert_eq!(Vocabulary::parse(&text).unwrap(), v);
        assert!(Vocabulary::parse("a\nb\n").is_err());
        assert!(Vocabulary::new(['a', 'a']).is_err());
    }
}
