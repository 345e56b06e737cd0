mod common;

use common::fixtures::{forty_two, overfit, small_config};
use invizo::geometry::rect_quad;
use invizo::pipeline::{locate_fields, preprocess, run_pipeline, PipelineConfig};
use invizo::registration::warp_extract;
use invizo::synthesis::document::{fill_field, form_page, random_homography, warp_page};
use invizo::template::{FieldShape, FieldType, Template};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const AMOUNT: (f64, f64, f64, f64) = (120.0, 120.0, 280.0, 170.0);

fn template() -> Template {
    let page = form_page(400, 300, &[AMOUNT], 21);
    let (x0, y0, x1, y1) = AMOUNT;
    Template::new(page, vec![FieldShape::new("amount", FieldType::Number, rect_quad(x0, y0, x1, y1))]).unwrap()
}

#[test]
fn identical_image_keeps_template_quads() {
    let t = template();
    let layout = locate_fields(&t, &t.image, &PipelineConfig::default()).unwrap();
    for (shape, quad) in t.shapes.iter().zip(&layout.quads) {
        for (a, b) in shape.points.iter().zip(quad) {
            assert!(a.dist(b) < 0.5, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn number_field_reads_back_through_the_pipeline() {
    let t = template();
    let mut filled = t.image.clone();
    fill_field(&mut filled, AMOUNT, &forty_two());
    let h = random_homography(400, 300, 8.0, &mut ChaCha8Rng::seed_from_u64(3));
    let test = warp_page(&filled, &h, 400, 300).unwrap();

    // Train on the exact crop the pipeline will hand to the recognizer.
    let cfg = PipelineConfig::default();
    let pre = preprocess(&test, &cfg).unwrap();
    let layout = locate_fields(&t, &pre.gray, &cfg).unwrap();
    let crop = warp_extract(&pre.binary, &layout.quads[0]).unwrap();
    let (model, _) = overfit(small_config(), &crop, "٤٢", 600).expect("did not converge");

    let preds = run_pipeline(&test, &t, &model, &cfg).unwrap();
    assert_eq!(preds.len(), 1);
    assert_eq!(preds[0].enhanced_text, "٤٢");
    assert!(preds[0].flags.is_empty(), "{:?}", preds[0].flags);
}
