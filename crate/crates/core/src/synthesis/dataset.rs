//! Dataset manifests, splits and generators.
//!
//! A manifest is UTF-8 text with one `image_path<TAB>label` line per
//! sample. Relative image paths resolve against the manifest's directory.

use super::augment::{augment, AugmentSpec};
use super::compose::{compose_digit_sequence, compose_line, LabeledImage, LINE_HEIGHT, LINE_WIDTH};
use super::digits::digit_pool;
use super::normalize::normalize_corpus;
use super::render::{render_line, LineFont};
use super::Charset;
use crate::error::{Error, Result};
use crate::imaging::io;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub label: String,
}

pub fn parse_manifest(text: &str, base_dir: Option<&Path>) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (path, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::Schema(format!("manifest line {}: expected image_path<TAB>label", n + 1)))?;
        if label.contains('\t') {
            return Err(Error::Schema(format!("manifest line {}: more than one tab", n + 1)));
        }
        let p = PathBuf::from(path);
        let image_path = match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        };
        out.push(ManifestEntry {
            image_path,
            label: label.to_string(),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent())
}

/// Manifest text; paths are written as given.
pub fn format_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        if e.label.contains(['\t', '\n', '\r']) {
            return Err(Error::Validation(format!("label {:?} contains a tab or newline", e.label)));
        }
        out.push_str(&e.image_path.to_string_lossy());
        out.push('\t');
        out.push_str(&e.label);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    std::fs::write(path, format_manifest(entries)?)?;
    Ok(())
}

/// Train / validation / test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles with `seed` and splits 7:2:2. Items are assigned whole, so a
/// line id never lands in two partitions.
pub fn split_7_2_2<T: Clone>(items: &[T], seed: u64) -> Split<T> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = items.len();
    let n_train = (n as f64 * 7.0 / 11.0).round() as usize;
    let n_val = ((n as f64 * 2.0 / 11.0).round() as usize).min(n - n_train);
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Split {
        train: pick(&idx[..n_train]),
        val: pick(&idx[n_train..n_train + n_val]),
        test: pick(&idx[n_train + n_val..]),
    }
}

/// Renderings of each digit kept in a generator's pool.
pub const DIGITS_PER_POOL: usize = 12;

/// Deterministic stream of composed digit-sequence lines.
#[derive(Debug, Clone)]
pub struct DigitLineGenerator {
    rng: ChaCha8Rng,
    pool: Vec<LabeledImage>,
    augment: bool,
}

impl DigitLineGenerator {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = digit_pool(DIGITS_PER_POOL, &mut rng);
        DigitLineGenerator {
            rng,
            pool,
            augment: false,
        }
    }

    /// Applies a random augmentation to every sample.
    pub fn with_augmentation(mut self, on: bool) -> Self {
        self.augment = on;
        self
    }

    pub fn sample(&mut self) -> LabeledImage {
        let n = self.rng.random_range(1..=8);
        let mut s = compose_digit_sequence(&self.pool, n, &mut self.rng).expect("n in range and pool non-empty");
        if self.augment {
            let spec = AugmentSpec::random(&mut self.rng);
            s.image = augment(&s.image, &spec).expect("random specs are in range");
        }
        s
    }

    pub fn take(&mut self, count: usize) -> Vec<LabeledImage> {
        (0..count).map(|_| self.sample()).collect()
    }
}

fn save_samples(out_dir: &Path, prefix: &str, samples: &[LabeledImage]) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{prefix}-{i:06}.png");
        io::save(&s.image, out_dir.join(&name))?;
        entries.push(ManifestEntry {
            image_path: PathBuf::from(name),
            label: s.label.clone(),
        });
    }
    write_manifest(out_dir.join("manifest.tsv"), &entries)?;
    Ok(entries)
}

/// Writes `count` digit lines as PNGs plus `manifest.tsv` into `out_dir`.
pub fn write_digit_dataset(out_dir: &Path, count: usize, seed: u64, augmented: bool) -> Result<Vec<ManifestEntry>> {
    let samples = DigitLineGenerator::new(seed).with_augmentation(augmented).take(count);
    save_samples(out_dir, "digits", &samples)
}

/// Normalizes a corpus line, renders each word and composes the line.
/// Returns `None` when nothing survives normalization.
pub fn text_line_sample(line: &str, charset: &Charset, font: &LineFont) -> Result<Option<LabeledImage>> {
    let label = normalize_corpus(line, charset);
    if label.is_empty() {
        return Ok(None);
    }
    let words = label
        .split(' ')
        .map(|w| render_line(w, font, LINE_HEIGHT))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(LabeledImage {
        image: compose_line(&words, LINE_HEIGHT, LINE_WIDTH)?,
        label,
    }))
}

/// Renders corpus lines with each font in turn (optionally augmented) and
/// writes PNGs plus `manifest.tsv`.
pub fn write_text_dataset(
    out_dir: &Path,
    lines: &[String],
    charset: &Charset,
    fonts: &[LineFont],
    seed: u64,
    augmented: bool,
) -> Result<Vec<ManifestEntry>> {
    if fonts.is_empty() {
        return Err(Error::Font("no fonts given".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let font = &fonts[i % fonts.len()];
        if let Some(mut s) = text_line_sample(line, charset, font)? {
            if augmented {
                s.image = augment(&s.image, &AugmentSpec::random(&mut rng))?;
            }
            samples.push(s);
        }
    }
    save_samples(out_dir, "line", &samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let entries = vec![
            ManifestEntry { image_path: "a.png".into(), label: "١٢٣".into() },
            ManifestEntry { image_path: "b/c.png".into(), label: "سلام عليكم".into() },
        ];
        let text = format_manifest(&entries).unwrap();
        assert_eq!(text, "a.png\t١٢٣\nb/c.png\tسلام عليكم\n");
        assert_eq!(parse_manifest(&text, None).unwrap(), entries);
        let based = parse_manifest(&text, Some(Path::new("/data"))).unwrap();
        assert_eq!(based[0].image_path, PathBuf::from("/data/a.png"));
    }

    #[test]
    fn manifest_errors() {
        assert!(parse_manifest("no-tab-here\n", None).is_err());
        assert!(parse_manifest("a\tb\tc\n", None).is_err());
        let bad = [ManifestEntry { image_path: "a".into(), label: "x\ty".into() }];
        assert!(format_manifest(&bad).is_err());
    }

    #[test]
    fn split_is_7_2_2_and_disjoint() {
        let ids: Vec<usize> = (0..110).collect();
        let s = split_7_2_2(&ids, 4);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 20, 20));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(s, split_7_2_2(&ids, 4));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = DigitLineGenerator::new(42).take(3);
        let b = DigitLineGenerator::new(42).take(3);
        assert_eq!(a, b);
        for s in &a {
            assert_eq!((s.image.width(), s.image.height()), (1024, 64));
            assert!((1..=8).contains(&s.label.chars().count()));
        }
    }
}
