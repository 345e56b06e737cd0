//! Training data synthesis: corpus normalization, line rendering and
//! composition, procedural digits, augmentation and synthetic forms.

pub mod augment;
mod charset;
pub mod compose;
pub mod dataset;
pub mod digits;
pub mod document;
mod normalize;
pub mod render;
pub mod shaping;

pub use augment::{augment, AugmentSpec, Background, BackgroundKind, MotionBlur};
pub use charset::{Charset, ARABIC_INDIC_DIGITS};
pub use compose::{compose_digit_sequence, compose_line, LabeledImage, LINE_HEIGHT, LINE_WIDTH};
pub use dataset::{
    read_manifest, split_7_2_2, write_digit_dataset, write_manifest, write_text_dataset, DigitLineGenerator, ManifestEntry,
    Split,
};
pub use normalize::{is_arabic_diacritic, normalize_corpus, to_arabic_digit, to_western_digit};
pub use render::{render_line, render_line_with, LineFont};
pub use shaping::{ContextualShaper, Shaper};
