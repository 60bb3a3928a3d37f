//! Concurrence scoring of interest points against human annotations.
//!
//! A predicted point is a true positive when an annotated feature lies
//! within the match radius; it is paired with the nearest such feature
//! (ties to the lower feature index). Several predictions may land on the
//! same feature and each counts as a true positive. Features that attract
//! no prediction are false negatives. All three rates share the denominator
//! `TP + FP`, so `fnr` can exceed 1 and does not complement `tpr`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::InterestPoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub x: u32,
    pub y: u32,
    #[serde(default)]
    pub label: String,
}

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image_id: String,
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchOutcome {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Matched feature index per prediction, in prediction order.
    pub pairing: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

impl Rates {
    /// `tpr=68% fpr=32% fnr=32%`, rounded half away from zero.
    pub fn percent_line(&self) -> String {
        let pct = |r: f64| (r * 100.0).round() as i64;
        format!(
            "tpr={}% fpr={}% fnr={}%",
            pct(self.tpr),
            pct(self.fpr),
            pct(self.fnr)
        )
    }
}

pub fn match_points(
    predicted: &[InterestPoint],
    truth: &AnnotationSet,
    match_radius: f64,
) -> Result<MatchOutcome> {
    if match_radius.is_nan() || match_radius <= 0.0 {
        return Err(Error::Contract(format!(
            "match radius must be positive, got {match_radius}"
        )));
    }
    let r2 = match_radius * match_radius;
    let mut hit = vec![false; truth.features.len()];
    let pairing: Vec<Option<usize>> = predicted
        .iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (i, f) in truth.features.iter().enumerate() {
                let dx = p.x as f64 - f64::from(f.x);
                let dy = p.y as f64 - f64::from(f.y);
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 && best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((i, d2));
                }
            }
            let idx = best.map(|(i, _)| i);
            if let Some(i) = idx {
                hit[i] = true;
            }
            idx
        })
        .collect();
    let tp = pairing.iter().filter(|m| m.is_some()).count();
    Ok(MatchOutcome {
        tp,
        fp: predicted.len() - tp,
        fn_: hit.iter().filter(|&&h| !h).count(),
        pairing,
    })
}

/// `tpr = TP/(TP+FP)`, `fpr = FP/(TP+FP)`, `fnr = FN/(TP+FP)`.
pub fn compute_rates(tp: usize, fp: usize, fn_: usize) -> Result<Rates> {
    let n = tp + fp;
    if n == 0 {
        return Err(Error::UndefinedRates);
    }
    let n = n as f64;
    Ok(Rates {
        tpr: tp as f64 / n,
        fpr: fp as f64 / n,
        fnr: fn_ as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageConcurrence {
    pub image_id: String,
    pub predictions: usize,
    pub features: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pairing: Vec<Option<usize>>,
    /// `None` when the image had no predictions.
    pub rates: Option<Rates>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateConcurrence {
    pub images: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub mean_tp: f64,
    pub mean_fp: f64,
    pub mean_fn: f64,
}

impl AggregateConcurrence {
    /// Sum per-image counts and derive rates and per-image means.
    pub fn from_counts(counts: &[(usize, usize, usize)]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Contract("no images to aggregate".into()));
        }
        let (tp, fp, fn_) = counts
            .iter()
            .fold((0, 0, 0), |(a, b, c), &(t, f, n)| (a + t, b + f, c + n));
        let rates = compute_rates(tp, fp, fn_)?;
        let images = counts.len() as f64;
        Ok(AggregateConcurrence {
            images: counts.len(),
            tp,
            fp,
            fn_,
            tpr: rates.tpr,
            fpr: rates.fpr,
            fnr: rates.fnr,
            mean_tp: tp as f64 / images,
            mean_fp: fp as f64 / images,
            mean_fn: fn_ as f64 / images,
        })
    }

    pub fn rates(&self) -> Rates {
        Rates {
            tpr: self.tpr,
            fpr: self.fpr,
            fnr: self.fnr,
        }
    }

    /// Per-image means at one decimal (rounded, not truncated).
    pub fn means_line(&self) -> String {
        format!(
            "mean per image: tp={:.1} fp={:.1} fn={:.1}",
            round1(self.mean_tp),
            round1(self.mean_fp),
            round1(self.mean_fn)
        )
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcurrenceReport {
    pub match_radius: f64,
    pub per_image: Vec<ImageConcurrence>,
    pub aggregate: AggregateConcurrence,
}

/// Score every image's predictions. Both sides must cover the same image ids.
pub fn evaluate(
    predictions: &BTreeMap<String, Vec<InterestPoint>>,
    annotations: &[AnnotationSet],
    match_radius: f64,
) -> Result<ConcurrenceReport> {
    let mut truth: BTreeMap<&str, &AnnotationSet> = BTreeMap::new();
    for a in annotations {
        if truth.insert(a.image_id.as_str(), a).is_some() {
            return Err(Error::Mismatch(format!(
                "duplicate annotations for image '{}'",
                a.image_id
            )));
        }
    }
    let predicted_ids: BTreeSet<&str> = predictions.keys().map(String::as_str).collect();
    let truth_ids: BTreeSet<&str> = truth.keys().copied().collect();
    if predicted_ids != truth_ids {
        let only_pred: Vec<_> = predicted_ids.difference(&truth_ids).collect();
        let only_truth: Vec<_> = truth_ids.difference(&predicted_ids).collect();
        return Err(Error::Mismatch(format!(
            "records without annotations: {only_pred:?}; annotations without records: {only_truth:?}"
        )));
    }

    let mut per_image = Vec::with_capacity(predictions.len());
    for (id, points) in predictions {
        let set = truth[id.as_str()];
        let m = match_points(points, set, match_radius)?;
        per_image.push(ImageConcurrence {
            image_id: id.clone(),
            predictions: points.len(),
            features: set.features.len(),
            rates: compute_rates(m.tp, m.fp, m.fn_).ok(),
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            pairing: m.pairing,
        });
    }
    let counts: Vec<_> = per_image.iter().map(|c| (c.tp, c.fp, c.fn_)).collect();
    Ok(ConcurrenceReport {
        match_radius,
        aggregate: AggregateConcurrence::from_counts(&counts)?,
        per_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: usize, y: usize) -> InterestPoint {
        InterestPoint { x, y, score: 1.0 }
    }

    fn truth(features: &[(u32, u32)]) -> AnnotationSet {
        AnnotationSet {
            image_id: "img".into(),
            features: features
                .iter()
                .map(|&(x, y)| Feature {
                    x,
                    y,
                    label: String::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_concurrence() {
        let m = match_points(
            &[pt(10, 10), pt(50, 50), pt(90, 20)],
            &truth(&[(12, 10), (50, 47), (90, 20)]),
            10.0,
        )
        .unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (3, 0, 0));
        assert_eq!(m.pairing, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn double_counting_on_one_feature() {
        let m = match_points(
            &[pt(10, 10), pt(14, 10)],
            &truth(&[(12, 10), (80, 80)]),
            10.0,
        )
        .unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (2, 0, 1));
        assert_eq!(m.pairing, vec![Some(0), Some(0)]);
    }

    #[test]
    fn total_miss() {
        let m = match_points(
            &[pt(0, 0), pt(1, 1)],
            &truth(&[(100, 100), (120, 5), (5, 120)]),
            10.0,
        )
        .unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 2, 3));
    }

    #[test]
    fn nearest_feature_wins_and_ties_go_to_lower_index() {
        let m = match_points(&[pt(10, 10)], &truth(&[(18, 10), (13, 10)]), 10.0).unwrap();
        assert_eq!(m.pairing, vec![Some(1)]);
        let m = match_points(&[pt(10, 10)], &truth(&[(15, 10), (5, 10)]), 10.0).unwrap();
        assert_eq!(m.pairing, vec![Some(0)]);
    }

    #[test]
    fn radius_boundary_is_inclusive() {
        let m = match_points(&[pt(0, 0)], &truth(&[(6, 8)]), 10.0).unwrap();
        assert_eq!(m.tp, 1);
    }

    #[test]
    fn zero_radius_is_rejected() {
        assert!(match_points(&[], &truth(&[]), 0.0).is_err());
    }

    #[test]
    fn field_totals_give_reported_rates() {
        let r = compute_rates(69, 32, 32).unwrap();
        assert!((r.tpr - 69.0 / 101.0).abs() < 1e-15);
        assert!((r.tpr - 0.683).abs() < 5e-4);
        assert!((r.fpr - 0.317).abs() < 5e-4);
        assert!((r.fnr - 0.317).abs() < 5e-4);
        assert_eq!(r.percent_line(), "tpr=68% fpr=32% fnr=32%");
    }

    #[test]
    fn perfect_rates() {
        let r = compute_rates(3, 0, 0).unwrap();
        assert_eq!((r.tpr, r.fpr, r.fnr), (1.0, 0.0, 0.0));
        assert_eq!(r.percent_line(), "tpr=100% fpr=0% fnr=0%");
    }

    #[test]
    fn fnr_shares_the_prediction_denominator() {
        let r = compute_rates(1, 1, 2).unwrap();
        assert_eq!((r.tpr, r.fpr, r.fnr), (0.5, 0.5, 1.0));
    }

    #[test]
    fn no_predictions_means_undefined_rates() {
        assert!(matches!(compute_rates(0, 0, 4), Err(Error::UndefinedRates)));
    }

    #[test]
    fn thirty_two_image_means() {
        // 69 / 32 spread so per-image counts sum to the field totals
        let counts: Vec<_> = (0..32).map(|i| (if i < 5 { 3 } else { 2 }, 1, 1)).collect();
        let agg = AggregateConcurrence::from_counts(&counts).unwrap();
        assert_eq!((agg.tp, agg.fp, agg.fn_), (69, 32, 32));
        assert_eq!(agg.mean_tp, 2.15625);
        assert_eq!(agg.means_line(), "mean per image: tp=2.2 fp=1.0 fn=1.0");
    }

    #[test]
    fn evaluate_rejects_unmatched_ids() {
        let mut preds = BTreeMap::new();
        preds.insert("a".to_string(), vec![pt(0, 0)]);
        preds.insert("b".to_string(), vec![pt(0, 0)]);
        let mut t = truth(&[(0, 0)]);
        t.image_id = "a".into();
        let err = evaluate(&preds, &[t], 10.0).unwrap_err();
        assert!(err.to_string().contains("\"b\""));
    }

    #[test]
    fn report_serializes_fn_field_name() {
        let m = match_points(&[pt(0, 0)], &truth(&[(0, 0)]), 1.0).unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["fn"], 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn counts_are_consistent(
            preds in prop::collection::vec((0usize..60, 0usize..60), 0..8),
            feats in prop::collection::vec((0u32..60, 0u32..60), 0..8),
            radius in 1.0f64..30.0,
        ) {
            let predicted: Vec<_> = preds.iter().map(|&(x, y)| pt(x, y)).collect();
            let t = truth(&feats);
            let m = match_points(&predicted, &t, radius).unwrap();
            prop_assert_eq!(m.tp + m.fp, predicted.len());
            let matched: BTreeSet<_> = m.pairing.iter().flatten().collect();
            prop_assert_eq!(m.fn_, feats.len() - matched.len());
            // a larger radius never loses a true positive
            let wider = match_points(&predicted, &t, radius * 2.0).unwrap();
            prop_assert!(wider.tp >= m.tp);
        }

        #[test]
        fn tpr_and_fpr_sum_to_one(tp in 0usize..2000, fp in 0usize..2000, fn_ in 0usize..2000) {
            prop_assume!(tp + fp > 0);
            let r = compute_rates(tp, fp, fn_).unwrap();
            prop_assert_eq!(r.tpr + r.fpr, 1.0);
        }
    }
}
