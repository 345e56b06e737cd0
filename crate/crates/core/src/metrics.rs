//! Recognition and detection scores.

use crate::enhancement::edit_distance;
use crate::error::{invalid, Result};
use crate::geometry::{iou, Point};
use serde::{Deserialize, Serialize};

/// Character error rate: edits / reference length, in Unicode scalars.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return invalid("CER reference must be non-empty");
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Word error rate over whitespace-delimited tokens.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return invalid("WER reference must contain at least one word");
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
}

/// Precision / recall / F-measure of detected quads. Pairs are matched
/// greedily one-to-one by descending IoU; a pair counts when IoU >= `iou_thresh`.
pub fn detection_prf(gt: &[[Point; 4]], pred: &[[Point; 4]], iou_thresh: f64) -> Prf {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let v = iou(g, p).max(iou(p, g));
            if v >= iou_thresh && v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !gt_used[i] && !pred_used[j] {
            gt_used[i] = true;
            pred_used[j] = true;
            tp += 1;
        }
    }
    let precision = if pred.is_empty() { 0.0 } else { tp as f64 / pred.len() as f64 };
    let recall = if gt.is_empty() { 0.0 } else { tp as f64 / gt.len() as f64 };
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f_measure,
        true_positives: tp,
    }
}

/// Scores of one reference/hypothesis pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
    pub cer: f64,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleScore>,
    pub mean_cer: f64,
    pub mean_wer: f64,
    /// Total character edits over total reference characters.
    pub corpus_cer: f64,
    /// Total word edits over total reference words.
    pub corpus_wer: f64,
}

impl EvalReport {
    /// Scores aligned `(id, reference, hypothesis)` triples.
    pub fn from_pairs<'a>(items: impl IntoIterator<Item = (String, &'a str, &'a str)>) -> Result<EvalReport> {
        let mut samples = Vec::new();
        let (mut char_edits, mut chars, mut word_edits, mut words) = (0.0, 0usize, 0.0, 0usize);
        for (id, r, h) in items {
            let c = cer(r, h)?;
            let w = wer(r, h)?;
            let rc = r.chars().count();
            let rw = r.split_whitespace().count();
            char_edits += c * rc as f64;
            chars += rc;
            word_edits += w * rw as f64;
            words += rw;
            samples.push(SampleScore {
                id,
                reference: r.to_string(),
                hypothesis: h.to_string(),
                cer: c,
                wer: w,
            });
        }
        if samples.is_empty() {
            return invalid("evaluation needs at least one sample");
        }
        let n = samples.len() as f64;
        Ok(EvalReport {
            mean_cer: samples.iter().map(|s| s.cer).sum::<f64>() / n,
            mean_wer: samples.iter().map(|s| s.wer).sum::<f64>() / n,
            corpus_cer: char_edits / chars as f64,
            corpus_wer: word_edits / words as f64,
            samples,
        })
    }

    /// Tab-separated: one row per sample, then a summary row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tcer\twer\treference\thypothesis\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\t{}\n",
                s.id,
                s.cer,
                s.wer,
                s.reference.replace('\t', " "),
                s.hypothesis.replace('\t', " ")
            ));
        }
        out.push_str(&format!("#corpus\t{:.6}\t{:.6}\t\t\n", self.corpus_cer, self.corpus_wer));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect_quad;

    #[test]
    fn cer_cases() {
        assert_eq!(cer("abc", "abc").unwrap(), 0.0);
        assert!((cer("abc", "abd").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cer("ab", "").unwrap(), 1.0);
        assert!(cer("", "x").is_err());
    }

    #[test]
    fn wer_cases() {
        assert_eq!(wer("a b c d", "a b c d").unwrap(), 0.0);
        assert_eq!(wer("a b c d", "a x c d").unwrap(), 0.25);
        assert_eq!(wer("a b c d", "a b new c d").unwrap(), 0.25);
        assert!(wer("   ", "a").is_err());
    }

    #[test]
    fn prf_cases() {
        let a = rect_quad(0.0, 0.0, 10.0, 10.0);
        let b = rect_quad(20.0, 0.0, 30.0, 10.0);
        let p = detection_prf(&[a, b], &[a, b], 0.5);
        assert_eq!((p.precision, p.recall, p.f_measure), (1.0, 1.0, 1.0));
        let p = detection_prf(&[a, b], &[a], 0.5);
        assert_eq!((p.precision, p.recall), (1.0, 0.5));
        assert!((p.f_measure - 2.0 / 3.0).abs() < 1e-15);
        let p = detection_prf(&[a], &[b], 0.5);
        assert_eq!((p.precision, p.recall, p.f_measure), (0.0, 0.0, 0.0));
        let p = detection_prf(&[], &[], 0.5);
        assert_eq!(p.f_measure, 0.0);
    }

    #[test]
    fn report_formats() {
        let r = EvalReport::from_pairs(vec![("1".into(), "ab cd", "ab cd"), ("2".into(), "xy", "x")]).unwrap();
        assert_eq!(r.samples.len(), 2);
        // 1 edit over 5 + 2 reference characters (the space counts).
        assert!((r.corpus_cer - 1.0 / 7.0).abs() < 1e-12);
        assert!(r.to_tsv().lines().count() == 4);
        assert!(r.to_json().contains("\"mean_cer\""));
    }
}
