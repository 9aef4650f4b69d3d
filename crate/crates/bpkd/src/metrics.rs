//! Confusion-matrix segmentation metrics, plain and boundary-band restricted.

use std::fmt;

use crate::edge_masks::{trimap_region, BinaryMap, MaskError};
use crate::io::{format_float, LabelMap, ReportValue};

/// Pixel counts indexed `[ground truth][prediction]`. Predictions equal to
/// the prediction map's ignore value are tallied separately: they count as a
/// false negative for their ground-truth class but never as a false positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
    ignored_pred: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn empty(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
            ignored_pred: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    /// Total evaluated pixels, including ignore-valued predictions.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.ignored_pred.iter().sum::<u64>()
    }

    /// Integer-exact accumulation; counts from shards or file pairs add up
    /// to the same matrix in any order.
    pub fn merge(&mut self, other: &Self) -> Result<(), MetricsError> {
        if self.num_classes != other.num_classes {
            return Err(MetricsError::ClassCountMismatch {
                left: self.num_classes,
                right: other.num_classes,
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.ignored_pred.iter_mut().zip(&other.ignored_pred) {
            *a += b;
        }
        Ok(())
    }
}

/// Per-class IoU and accuracy with their means. Classes absent from both
/// maps are undefined and excluded from the means.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class_iou: Vec<Option<f64>>,
    pub per_class_acc: Vec<Option<f64>>,
    pub miou: Option<f64>,
    pub macc: Option<f64>,
    pub evaluated_pixels: u64,
    pub band_width: Option<usize>,
}

impl MetricsReport {
    pub fn to_report_value(&self) -> ReportValue {
        ReportValue::map(vec![
            ("band_width", self.band_width.map_or(ReportValue::Null, |w| ReportValue::Int(w as i64))),
            ("evaluated_pixels", ReportValue::Int(self.evaluated_pixels as i64)),
            ("macc", ReportValue::opt_float(self.macc)),
            ("miou", ReportValue::opt_float(self.miou)),
            ("per_class_acc", ReportValue::opt_floats(&self.per_class_acc)),
            ("per_class_iou", ReportValue::opt_floats(&self.per_class_iou)),
        ])
    }

    /// Per-class CSV with header `class,iou,acc`; undefined entries are
    /// left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,iou,acc\n");
        for (class, (iou, acc)) in self.per_class_iou.iter().zip(&self.per_class_acc).enumerate() {
            let iou = iou.map(format_float).unwrap_or_default();
            let acc = acc.map(format_float).unwrap_or_default();
            out.push_str(&format!("{class},{iou},{acc}\n"));
        }
        out
    }
}

/// Tallies predictions against ground truth over pixels where the ground
/// truth is not ignored and, when given, the region mask is set.
pub fn confusion(
    pred: &LabelMap,
    gt: &LabelMap,
    num_classes: usize,
    region: Option<&BinaryMap>,
) -> Result<ConfusionMatrix, MetricsError> {
    let dims = (gt.height(), gt.width());
    if (pred.height(), pred.width()) != dims {
        return Err(MetricsError::ShapeMismatch {
            expected: dims,
            actual: (pred.height(), pred.width()),
        });
    }
    if let Some(region) = region {
        if (region.height(), region.width()) != dims {
            return Err(MetricsError::ShapeMismatch {
                expected: dims,
                actual: (region.height(), region.width()),
            });
        }
    }
    let mut cm = ConfusionMatrix::empty(num_classes);
    for (index, (&g, &p)) in gt.values().iter().zip(pred.values()).enumerate() {
        if g == gt.ignore_value() {
            continue;
        }
        if let Some(region) = region {
            if region.values()[index] == 0 {
                continue;
            }
        }
        let g = g as usize;
        if g >= num_classes {
            return Err(MetricsError::LabelOutOfRange {
                which: "ground truth",
                index,
                value: g as u32,
                num_classes,
            });
        }
        if p == pred.ignore_value() {
            cm.ignored_pred[g] += 1;
            continue;
        }
        let p = p as usize;
        if p >= num_classes {
            return Err(MetricsError::LabelOutOfRange {
                which: "prediction",
                index,
                value: p as u32,
                num_classes,
            });
        }
        cm.counts[g * num_classes + p] += 1;
    }
    Ok(cm)
}

/// Per-class IoU `TP / (TP + FP + FN)` and accuracy `TP / (TP + FN)`;
/// classes with a zero denominator are excluded from the means.
pub fn miou(cm: &ConfusionMatrix) -> MetricsReport {
    let c = cm.num_classes;
    let mut per_class_iou = Vec::with_capacity(c);
    let mut per_class_acc = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.count(k, k);
        let row: u64 = (0..c).map(|p| cm.count(k, p)).sum::<u64>() + cm.ignored_pred[k];
        let col: u64 = (0..c).map(|g| cm.count(g, k)).sum();
        let iou_denom = row + col - tp;
        per_class_iou.push((iou_denom > 0).then(|| tp as f64 / iou_denom as f64));
        per_class_acc.push((row > 0).then(|| tp as f64 / row as f64));
    }
    MetricsReport {
        miou: mean_defined(&per_class_iou),
        macc: mean_defined(&per_class_acc),
        per_class_iou,
        per_class_acc,
        evaluated_pixels: cm.total(),
        band_width: None,
    }
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Metrics restricted to the boundary band of the ground truth.
pub fn trimap_miou(
    pred: &LabelMap,
    gt: &LabelMap,
    num_classes: usize,
    band_width: usize,
) -> Result<MetricsReport, MetricsError> {
    let region = trimap_region(gt, band_width)?;
    let cm = confusion(pred, gt, num_classes, Some(&region))?;
    let mut report = miou(&cm);
    report.band_width = Some(band_width);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    ShapeMismatch { expected: (usize, usize), actual: (usize, usize) },
    LabelOutOfRange { which: &'static str, index: usize, value: u32, num_classes: usize },
    ClassCountMismatch { left: usize, right: usize },
    Mask(MaskError),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { expected, actual } => write!(
                f,
                "shape mismatch: {}x{} vs {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            Self::LabelOutOfRange { which, index, value, num_classes } => write!(
                f,
                "{which} label {value} at index {index} exceeds class count {num_classes}"
            ),
            Self::ClassCountMismatch { left, right } => {
                write!(f, "cannot merge confusion matrices with {left} and {right} classes")
            }
            Self::Mask(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MetricsError {}

impl From<MaskError> for MetricsError {
    fn from(e: MaskError) -> Self {
        Self::Mask(e)
    }
}
