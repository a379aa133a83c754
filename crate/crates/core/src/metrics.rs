//! Confusion-matrix statistics and ROC analysis, with skin as the positive
//! class.
//!
//! Scalar metrics are exact rationals; a metric whose denominator is zero
//! is `None` ("undefined") rather than zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;

use crate::dataset::Label;
use crate::error::{Error, Result};

pub type Rate = Option<Ratio<u64>>;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn actual_skin(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn actual_non_skin(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn predicted_skin(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn predicted_non_skin(&self) -> u64 {
        self.fn_ + self.tn
    }

    /// The same matrix with non-skin treated as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(predicted: &[Label], actual: &[Label]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        match (p, a) {
            (Label::Skin, Label::Skin) => m.tp += 1,
            (Label::Skin, Label::NonSkin) => m.fp += 1,
            (Label::NonSkin, Label::Skin) => m.fn_ += 1,
            (Label::NonSkin, Label::NonSkin) => m.tn += 1,
        }
    }
    Ok(m)
}

fn rate(num: u64, den: u64) -> Rate {
    (den > 0).then(|| Ratio::new(num, den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalarMetrics {
    pub accuracy: Rate,
    pub sensitivity: Rate,
    pub specificity: Rate,
    pub precision: Rate,
    pub f1: Rate,
}

pub fn scalar_metrics(m: &ConfusionMatrix) -> ScalarMetrics {
    let sensitivity = rate(m.tp, m.tp + m.fn_);
    let precision = rate(m.tp, m.tp + m.fp);
    // 2PR / (P + R) reduces to 2tp / (2tp + fp + fn) when P + R > 0.
    let f1 = match (precision, sensitivity) {
        (Some(_), Some(_)) if m.tp > 0 => rate(2 * m.tp, 2 * m.tp + m.fp + m.fn_),
        _ => None,
    };
    ScalarMetrics {
        accuracy: rate(m.tp + m.tn, m.total()),
        sensitivity,
        specificity: rate(m.tn, m.tn + m.fp),
        precision,
        f1,
    }
}

pub fn to_f64(r: Rate) -> Option<f64> {
    r.map(|r| *r.numer() as f64 / *r.denom() as f64)
}

/// Two-decimal percentage, e.g. `97.30%`, or `undefined`.
pub fn format_percent(r: Rate) -> String {
    match to_f64(r) {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "undefined".to_string(),
    }
}

/// ROC points ordered from `(0, 0)` to `(1, 1)`, as
/// `(false positive rate, true positive rate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }
}

/// Sweeps the threshold down through the distinct scores (skin iff
/// `score >= threshold`); equal scores enter the positive side together.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(bad));
    }
    let pos = labels.iter().filter(|l| l.is_skin()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]].is_skin() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let curve = RocCurve { points };
    let auc = curve.trapezoid_area();
    Ok((curve, auc))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub scalars: ScalarMetrics,
    pub auc: Option<f64>,
}

impl MetricsReport {
    pub fn new(confusion: ConfusionMatrix, auc: Option<f64>) -> Self {
        Self {
            confusion,
            scalars: scalar_metrics(&confusion),
            auc,
        }
    }

    /// Argmax labels for the confusion matrix, `p_skin` scores for AUC.
    /// AUC is undefined when the actual labels hold a single class.
    pub fn evaluate(scores: &[f64], actual: &[Label]) -> Result<Self> {
        let predicted: Vec<Label> = scores
            .iter()
            .map(|&s| if s >= 0.5 { Label::Skin } else { Label::NonSkin })
            .collect();
        let confusion = confusion(&predicted, actual)?;
        let auc = match roc_auc(scores, actual) {
            Ok((_, auc)) => Some(auc),
            Err(Error::SingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(Self::new(confusion, auc))
    }

    /// Flat `key = value` document, one field per line.
    pub fn to_document(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.16e}"));
        let s = &self.scalars;
        let mut out = String::new();
        let _ = writeln!(out, "# skinseg metrics report");
        let _ = writeln!(out, "format_version = {REPORT_FORMAT_VERSION}");
        let _ = writeln!(out, "accuracy = {}", fmt(to_f64(s.accuracy)));
        let _ = writeln!(out, "sensitivity = {}", fmt(to_f64(s.sensitivity)));
        let _ = writeln!(out, "specificity = {}", fmt(to_f64(s.specificity)));
        let _ = writeln!(out, "precision = {}", fmt(to_f64(s.precision)));
        let _ = writeln!(out, "f1 = {}", fmt(to_f64(s.f1)));
        let _ = writeln!(out, "auc = {}", fmt(self.auc));
        let _ = writeln!(out, "tp = {}", self.confusion.tp);
        let _ = writeln!(out, "fp = {}", self.confusion.fp);
        let _ = writeln!(out, "fn = {}", self.confusion.fn_);
        let _ = writeln!(out, "tn = {}", self.confusion.tn);
        out
    }

    /// Parses [`Self::to_document`] output. Scalar metrics are recomputed
    /// from the counts and must agree with the stored values.
    pub fn from_document(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Report(format!("expected `key = value`, got {line:?}")))?;
            if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Report(format!("duplicate key {:?}", k.trim())));
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| Error::Report(format!("missing key {k:?}")));
        let version: u32 = get("format_version")?
            .parse()
            .map_err(|_| Error::Report("format_version is not an integer".into()))?;
        if version != REPORT_FORMAT_VERSION {
            return Err(Error::Report(format!("unsupported format_version {version}")));
        }
        let count = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| Error::Report(format!("{k} is not a count")))
        };
        let metric = |k: &str| -> Result<Option<f64>> {
            match get(k)?.as_str() {
                "undefined" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Report(format!("{k} is not a number"))),
            }
        };
        let confusion = ConfusionMatrix {
            tp: count("tp")?,
            fp: count("fp")?,
            fn_: count("fn")?,
            tn: count("tn")?,
        };
        let report = Self::new(confusion, metric("auc")?);
        let s = report.scalars;
        for (key, expected) in [
            ("accuracy", s.accuracy),
            ("sensitivity", s.sensitivity),
            ("specificity", s.specificity),
            ("precision", s.precision),
            ("f1", s.f1),
        ] {
            let stored = metric(key)?;
            let consistent = match (stored, to_f64(expected)) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
                _ => false,
            };
            if !consistent {
                return Err(Error::Report(format!("{key} does not match the confusion counts")));
            }
        }
        Ok(report)
    }

    /// Human-readable summary in the style of a results table.
    pub fn render(&self) -> String {
        let s = &self.scalars;
        let m = &self.confusion;
        let mut out = String::new();
        let _ = writeln!(out, "accuracy     {}", format_percent(s.accuracy));
        let _ = writeln!(out, "sensitivity  {}", format_percent(s.sensitivity));
        let _ = writeln!(out, "specificity  {}", format_percent(s.specificity));
        let _ = writeln!(out, "precision    {}", format_percent(s.precision));
        let _ = writeln!(out, "f1           {}", format_percent(s.f1));
        let _ = writeln!(
            out,
            "auc          {}",
            self.auc.map_or_else(|| "undefined".to_string(), |a| format!("{a:.4}"))
        );
        let _ = writeln!(out, "N={}          actual=skin  actual=non-skin", m.total());
        let _ = writeln!(out, "pred=skin      {:>10}  {:>15}", m.tp, m.fp);
        let _ = writeln!(out, "pred=non-skin  {:>10}  {:>15}", m.fn_, m.tn);
        out
    }
}
