#![allow(dead_code)]

use invizo::geometry::rect_quad;
use invizo::imaging::{io, RasterImage};
use invizo::recognizer::{Model, ModelConfig, Vocabulary};
use invizo::synthesis::document::{fill_field, form_page, FieldRect};
use invizo::synthesis::{compose_digit_sequence, ARABIC_INDIC_DIGITS};
use invizo::template::{serialize_template, FieldShape, FieldType, Template};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

pub const FIELDS: [FieldRect; 3] = [(230.0, 40.0, 370.0, 70.0), (230.0, 110.0, 370.0, 140.0), (40.0, 190.0, 300.0, 230.0)];

pub struct Fixture {
    pub template: PathBuf,
    pub image: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn template() -> Template {
    let page = form_page(400, 300, &FIELDS, 9);
    let shapes = vec![
        FieldShape::new("amount", FieldType::Number, rect_quad(230.0, 40.0, 370.0, 70.0)),
        FieldShape::new("status", FieldType::DefinedLabel, rect_quad(230.0, 110.0, 370.0, 140.0))
            .with_possibilities(vec!["مدفوع".into(), "ملغي".into()]),
        FieldShape::new("notes", FieldType::MultipleLines, rect_quad(40.0, 190.0, 300.0, 230.0)),
    ];
    Template::new(page, shapes).unwrap()
}

/// The template page with digits written into the number field.
pub fn filled_page(t: &Template) -> RasterImage {
    let mut page = t.image.clone();
    let pool = invizo::synthesis::digits::digit_pool(2, &mut ChaCha8Rng::seed_from_u64(1));
    let line = compose_digit_sequence(&pool, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    fill_field(&mut page, FIELDS[0], &line.image);
    page
}

/// A small untrained recognizer; enough to exercise the plumbing.
pub fn tiny_model() -> Model {
    let cfg = ModelConfig {
        d_model: 8,
        enc_layers: 1,
        dec_layers: 1,
        heads: 2,
        ff_dim: 16,
        dropout: 0.0,
        input_width: 128,
        input_height: 16,
        max_len: 64,
        conv_channels: [2, 3, 4],
        ..ModelConfig::default()
    };
    Model::new(cfg, Vocabulary::new(ARABIC_INDIC_DIGITS).unwrap()).unwrap()
}

pub fn write_fixture(dir: &Path) -> Fixture {
    let t = template();
    let f = Fixture {
        template: dir.join("template.json"),
        image: dir.join("test.png"),
        checkpoint: dir.join("model.ckpt"),
    };
    std::fs::write(&f.template, serialize_template(&t)).unwrap();
    io::save(&filled_page(&t), &f.image).unwrap();
    tiny_model().save(&f.checkpoint).unwrap();
    f
}
