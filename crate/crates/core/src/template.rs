//! Template documents: the annotated reference image and its text fields.
//!
//! ```json
//! {
//!   "imageData": "<base64 PNG>",
//!   "shapes": [
//!     {"id": "total", "type": "Number", "points": [[x, y], ...], "possibilities": []}
//!   ]
//! }
//! ```
//!
//! Unknown keys (top level and per shape) are kept and written back out.
//! Serialization is canonical: sorted keys, two-space indentation.

use crate::error::{Error, Result};
use crate::geometry::{area, is_simple, Point};
use crate::imaging::{io, RasterImage};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::Path;

/// Slack allowed when checking that quads lie inside the template image.
pub const BOUNDS_TOLERANCE_PX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldType {
    #[serde(rename = "Single Line")]
    SingleLine,
    #[serde(rename = "Multiple Lines")]
    MultipleLines,
    #[serde(rename = "Number")]
    Number,
    #[serde(rename = "Date")]
    Date,
    #[serde(rename = "Defined Label")]
    DefinedLabel,
}

impl FieldType {
    pub const ALL: [FieldType; 5] = [
        FieldType::SingleLine,
        FieldType::MultipleLines,
        FieldType::Number,
        FieldType::Date,
        FieldType::DefinedLabel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FieldType::SingleLine => "Single Line",
            FieldType::MultipleLines => "Multiple Lines",
            FieldType::Number => "Number",
            FieldType::Date => "Date",
            FieldType::DefinedLabel => "Defined Label",
        }
    }

    pub fn parse(s: &str) -> Option<FieldType> {
        FieldType::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Free-text fields are never rewritten by enhancement.
    pub fn is_arbitrary(&self) -> bool {
        matches!(self, FieldType::SingleLine | FieldType::MultipleLines)
    }
}

impl std::fmt::Display for FieldType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One text field of the template.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldShape {
    pub id: String,
    pub field_type: FieldType,
    /// Corners in template-image pixels, clockwise from top-left.
    pub points: [Point; 4],
    pub possibilities: Vec<String>,
    pub extra: BTreeMap<String, Value>,
}

impl FieldShape {
    pub fn new(id: impl Into<String>, field_type: FieldType, points: [Point; 4]) -> Self {
        Self {
            id: id.into(),
            field_type,
            points,
            possibilities: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_possibilities(mut self, possibilities: Vec<String>) -> Self {
        self.possibilities = possibilities;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::Validation(format!("shape {:?}: non-finite point", self.id)));
        }
        if area(&self.points) <= 0.0 || !is_simple(&self.points) {
            return Err(Error::Validation(format!(
                "shape {:?}: points must form a simple quad with positive area",
                self.id
            )));
        }
        if self.field_type == FieldType::DefinedLabel && self.possibilities.is_empty() {
            return Err(Error::Validation(format!(
                "shape {:?}: \"Defined Label\" requires at least one possibility",
                self.id
            )));
        }
        Ok(())
    }
}

/// Where the template image came from; kept so serialization reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    /// Base64 PNG exactly as found in `imageData`.
    Embedded(String),
    /// Value of `imagePath`.
    Path(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub shapes: Vec<FieldShape>,
    pub image: RasterImage,
    pub image_source: ImageSource,
    pub extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawShape {
    id: Option<String>,
    #[serde(rename = "type")]
    field_type: Option<String>,
    points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    possibilities: Vec<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawTemplate {
    shapes: Option<Vec<RawShape>>,
    #[serde(rename = "imageData")]
    image_data: Option<String>,
    #[serde(rename = "imagePath")]
    image_path: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

impl Template {
    /// Builds a template around an in-memory image (embedded as PNG).
    pub fn new(image: RasterImage, shapes: Vec<FieldShape>) -> Result<Template> {
        let encoded = BASE64.encode(io::encode_png(&image)?);
        let t = Template {
            shapes,
            image,
            image_source: ImageSource::Embedded(encoded),
            extra: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let (w, h) = (self.image.width() as f64, self.image.height() as f64);
        let mut seen = std::collections::HashSet::new();
        for s in &self.shapes {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate shape id {:?}", s.id)));
            }
            let t = BOUNDS_TOLERANCE_PX;
            if s.points.iter().any(|p| p.x < -t || p.y < -t || p.x > w + t || p.y > h + t) {
                return Err(Error::Validation(format!(
                    "shape {:?} lies outside the {}x{} template image",
                    s.id, w, h
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self, id: &str) -> Option<&FieldShape> {
        self.shapes.iter().find(|s| s.id == id)
    }

    /// Canonical JSON bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serialize_template(self)
    }
}

/// Parses template JSON. `imagePath` is resolved against `base_dir` when given.
pub fn parse_template_with_base(bytes: &[u8], base_dir: Option<&Path>) -> Result<Template> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Schema(format!("template is not UTF-8: {e}")))?;
    let raw: RawTemplate = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let raw_shapes = raw.shapes.ok_or_else(|| Error::Schema("missing key \"shapes\"".into()))?;

    let (image, image_source) = match (raw.image_data, raw.image_path) {
        (Some(data), _) => {
            let png = BASE64
                .decode(data.trim())
                .map_err(|e| Error::ImageDecode(format!("imageData is not base64: {e}")))?;
            (io::decode(&png)?, ImageSource::Embedded(data))
        }
        (None, Some(path)) => {
            let full = match base_dir {
                Some(dir) => dir.join(&path),
                None => Path::new(&path).to_path_buf(),
            };
            let bytes = std::fs::read(&full)
                .map_err(|e| Error::ImageDecode(format!("cannot read imagePath {}: {e}", full.display())))?;
            (io::decode(&bytes)?, ImageSource::Path(path))
        }
        (None, None) => return Err(Error::Schema("missing key \"imageData\"".into())),
    };

    let mut shapes = Vec::with_capacity(raw_shapes.len());
    for (i, rs) in raw_shapes.into_iter().enumerate() {
        let id = rs.id.unwrap_or_else(|| format!("field-{i}"));
        let type_str = rs
            .field_type
            .ok_or_else(|| Error::Schema(format!("shape {id:?}: missing key \"type\"")))?;
        let field_type = FieldType::parse(&type_str)
            .ok_or_else(|| Error::Schema(format!("shape {id:?}: unknown type {type_str:?}")))?;
        let pts = rs
            .points
            .ok_or_else(|| Error::Schema(format!("shape {id:?}: missing key \"points\"")))?;
        let points: [Point; 4] = match pts.as_slice() {
            [a, b, c, d] => [(*a).into(), (*b).into(), (*c).into(), (*d).into()],
            _ => {
                return Err(Error::Schema(format!(
                    "shape {id:?}: expected 4 points, got {}",
                    pts.len()
                )))
            }
        };
        shapes.push(FieldShape {
            id,
            field_type,
            points,
            possibilities: rs.possibilities,
            extra: rs.extra,
        });
    }
    let t = Template {
        shapes,
        image,
        image_source,
        extra: raw.extra,
    };
    t.validate()?;
    Ok(t)
}

pub fn parse_template(bytes: &[u8]) -> Result<Template> {
    parse_template_with_base(bytes, None)
}

pub fn load_template(path: impl AsRef<Path>) -> Result<Template> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    parse_template_with_base(&bytes, path.parent())
}

fn shape_value(s: &FieldShape) -> Value {
    let mut m: Map<String, Value> = s.extra.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    m.insert("id".into(), Value::String(s.id.clone()));
    m.insert("type".into(), Value::String(s.field_type.as_str().into()));
    m.insert(
        "points".into(),
        Value::Array(s.points.iter().map(|p| serde_json::json!([p.x, p.y])).collect()),
    );
    m.insert(
        "possibilities".into(),
        Value::Array(s.possibilities.iter().cloned().map(Value::String).collect()),
    );
    Value::Object(m)
}

/// Canonical JSON: sorted keys, two-space indent, trailing newline.
pub fn serialize_template(t: &Template) -> Vec<u8> {
    let mut m: Map<String, Value> = t.extra.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    m.insert("shapes".into(), Value::Array(t.shapes.iter().map(shape_value).collect()));
    match &t.image_source {
        ImageSource::Embedded(data) => m.insert("imageData".into(), Value::String(data.clone())),
        ImageSource::Path(p) => m.insert("imagePath".into(), Value::String(p.clone())),
    };
    let mut out = serde_json::to_vec_pretty(&Value::Object(m)).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect_quad;

    fn image_b64() -> String {
        BASE64.encode(io::encode_png(&RasterImage::filled(100, 60, 255)).unwrap())
    }

    fn doc(shapes: &str) -> String {
        format!(r#"{{"shapes": {shapes}, "imageData": "{}"}}"#, image_b64())
    }

    #[test]
    fn minimal_template() {
        let t = parse_template(
            doc(r#"[{"id": "a", "type": "Number", "points": [[1,1],[50,1],[50,20],[1,20]], "possibilities": []}]"#)
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(t.shapes.len(), 1);
        assert_eq!(t.shapes[0].field_type, FieldType::Number);
        assert_eq!(t.image.width(), 100);
    }

    #[test]
    fn defined_label_without_possibilities() {
        let r = parse_template(
            doc(r#"[{"id": "a", "type": "Defined Label", "points": [[1,1],[50,1],[50,20],[1,20]], "possibilities": []}]"#)
                .as_bytes(),
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_template(br#"{"imageData": ""}"#), Err(Error::Schema(_))));
        assert!(matches!(parse_template(br#"{"shapes": []}"#), Err(Error::Schema(_))));
        assert!(matches!(
            parse_template(br#"{"shapes": [], "imageData": "%%%"}"#),
            Err(Error::ImageDecode(_))
        ));
        assert!(matches!(
            parse_template(br#"{"shapes": [], "imageData": "aGVsbG8="}"#),
            Err(Error::ImageDecode(_))
        ));
        let bad_type = doc(r#"[{"type": "Paragraph", "points": [[1,1],[50,1],[50,20],[1,20]]}]"#);
        assert!(matches!(parse_template(bad_type.as_bytes()), Err(Error::Schema(_))));
        let three = doc(r#"[{"type": "Date", "points": [[1,1],[50,1],[50,20]]}]"#);
        assert!(matches!(parse_template(three.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn geometry_is_validated() {
        let bowtie = doc(r#"[{"type": "Date", "points": [[1,1],[50,20],[50,1],[1,20]]}]"#);
        assert!(matches!(parse_template(bowtie.as_bytes()), Err(Error::Validation(_))));
        let outside = doc(r#"[{"type": "Date", "points": [[1,1],[150,1],[150,20],[1,20]]}]"#);
        assert!(matches!(parse_template(outside.as_bytes()), Err(Error::Validation(_))));
        let slack = doc(r#"[{"type": "Date", "points": [[-1.5,1],[101.5,1],[101.5,20],[-1.5,20]]}]"#);
        assert!(parse_template(slack.as_bytes()).is_ok());
    }

    #[test]
    fn missing_ids_get_positional_defaults() {
        let t = parse_template(doc(r#"[{"type": "Date", "points": [[1,1],[50,1],[50,20],[1,20]]}]"#).as_bytes()).unwrap();
        assert_eq!(t.shapes[0].id, "field-0");
    }

    #[test]
    fn unknown_keys_round_trip() {
        let src = format!(
            r#"{{"version": "5.0", "shapes": [{{"id": "x", "type": "Single Line", "flags": {{"a": 1}}, "points": [[1,1],[50,1],[50,20],[1,20]]}}], "imageData": "{}"}}"#,
            image_b64()
        );
        let t = parse_template(src.as_bytes()).unwrap();
        assert_eq!(t.extra["version"], Value::String("5.0".into()));
        let again = parse_template(&serialize_template(&t)).unwrap();
        assert_eq!(again, t);
        assert_eq!(again.shapes[0].extra["flags"]["a"], 1);
    }

    #[test]
    fn serialization_is_deterministic_and_canonical() {
        let shapes = vec![
            FieldShape::new("status", FieldType::DefinedLabel, rect_quad(2.0, 2.0, 60.0, 20.0))
                .with_possibilities(vec!["مدفوع".into(), "ملغي".into()]),
            FieldShape::new("date", FieldType::Date, rect_quad(2.0, 30.0, 60.0, 50.0)),
        ];
        let t = Template::new(RasterImage::filled(100, 60, 250), shapes).unwrap();
        let a = serialize_template(&t);
        assert_eq!(a, serialize_template(&t));
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.find("\"imageData\"").unwrap() < text.find("\"shapes\"").unwrap());
        assert!(text.contains("\n  \"shapes\""));
        let back = parse_template(&a).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.shapes[0].possibilities, vec!["مدفوع".to_string(), "ملغي".to_string()]);
        assert_eq!(serialize_template(&back), a);
    }
}
