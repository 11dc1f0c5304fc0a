//! ROC analysis of pooled time-frequency bins against ground-truth labels.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::{LabelMatrix, SppMatrix};

/// Documented in every report so MAC figures are not mistaken for FLOPs.
pub const MAC_CONVENTION: &str =
    "multiply-accumulates per frame of the GRU matrix-vector products, 3h(n+h) per model; pointwise ops excluded";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_d: f64,
}

/// Operating points sorted by false-alarm rate, from (0,0) to (1,1).
/// `thresholds[i]` is the lowest score classified as speech at point `i`;
/// the first threshold is +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    pub fn auc(&self) -> f64 {
        auc(self)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,p_fa,p_d\n");
        for (p, t) in self.points.iter().zip(&self.thresholds) {
            let _ = writeln!(s, "{},{},{}", t, p.p_fa, p.p_d);
        }
        s
    }
}

/// Exact ROC by a descending sweep over distinct scores; tied scores form a
/// single operating point.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        p_fa: 0.0,
        p_d: 0.0,
    }];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            p_fa: fp as f64 / negatives as f64,
            p_d: tp as f64 / positives as f64,
        });
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(c: &RocCurve) -> f64 {
    c.points
        .windows(2)
        .map(|w| (w[1].p_fa - w[0].p_fa) * (w[1].p_d + w[0].p_d) * 0.5)
        .sum()
}

/// Detection probability at false-alarm rate `pfa`, interpolated linearly
/// between the first point at or beyond `pfa` and its predecessor.
pub fn pd_at_pfa(c: &RocCurve, pfa: f64) -> f64 {
    let pts = &c.points;
    let Some(i) = pts.iter().position(|p| p.p_fa >= pfa) else {
        return pts.last().map_or(0.0, |p| p.p_d);
    };
    let hi = pts[i];
    if hi.p_fa == pfa || i == 0 {
        return hi.p_d;
    }
    let lo = pts[i - 1];
    lo.p_d + (hi.p_d - lo.p_d) * (pfa - lo.p_fa) / (hi.p_fa - lo.p_fa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub estimator: String,
    pub dataset: String,
    pub config_fingerprint: String,
    pub auc: f64,
    pub pd_at_pfa05: f64,
    pub params: usize,
    pub macs_per_frame: usize,
    pub mac_convention: String,
    pub bins_pooled: usize,
    pub positives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc_csv: Option<String>,
}

/// Identifies the estimator being scored and its complexity (0/0 for
/// estimators without learned parameters).
#[derive(Debug, Clone, Default)]
pub struct EstimatorInfo {
    pub estimator: String,
    pub dataset: String,
    pub config_fingerprint: String,
    pub params: usize,
    pub macs_per_frame: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub roc: RocCurve,
}

/// Pools every bin of every utterance into one score/label sequence.
pub fn evaluate(
    outputs: &[SppMatrix],
    labels: &[LabelMatrix],
    info: &EstimatorInfo,
) -> Result<Evaluation> {
    if outputs.len() != labels.len() {
        return Err(Error::LengthMismatch(outputs.len(), labels.len()));
    }
    let mut scores = Vec::new();
    let mut flat_labels = Vec::new();
    for (o, l) in outputs.iter().zip(labels) {
        if o.shape() != l.shape() {
            return Err(Error::ShapeMismatch {
                expected: l.shape(),
                actual: o.shape(),
            });
        }
        scores.extend(o.values.iter().copied());
        flat_labels.extend(l.values.iter().copied());
    }
    let roc = roc_curve(&scores, &flat_labels)?;
    let report = MetricsReport {
        estimator: info.estimator.clone(),
        dataset: info.dataset.clone(),
        config_fingerprint: info.config_fingerprint.clone(),
        auc: auc(&roc),
        pd_at_pfa05: pd_at_pfa(&roc, 0.05),
        params: info.params,
        macs_per_frame: info.macs_per_frame,
        mac_convention: MAC_CONVENTION.to_string(),
        bins_pooled: scores.len(),
        positives: flat_labels.iter().filter(|&&l| l != 0).count(),
        roc_csv: None,
    };
    Ok(Evaluation { report, roc })
}
