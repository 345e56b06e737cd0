//! Template-driven Arabic document OCR.
//!
//! A test scan is registered against an annotated template, each field is
//! rectified, cleaned and recognized, and the raw text is corrected using
//! the field's declared type.

pub mod enhancement;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod recognizer;
pub mod registration;
pub mod segmentation;
pub mod synthesis;
pub mod template;

pub use error::{Error, Result};
