//! Per-pixel entropy maps and the entropy/accuracy relationship along edges.
//!
//! The entropy of a pixel is the Shannon entropy of the channel softmax of
//! its feature vector, normalized by `ln C` so values live in [0,1]. The
//! correlation analysis restricts to the ground-truth boundary band and
//! summarizes the relationship between entropy and the 0/1 correctness
//! indicator with a Pearson coefficient plus equal-width entropy bins.

use std::fmt;

use crate::edge_masks::{trimap_region, MaskError};
use crate::io::{DenseTensor, LabelMap, ReportValue};

/// Normalized per-pixel entropy in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl EntropyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, UncertaintyError> {
        if values.len() != height * width {
            return Err(UncertaintyError::Size { expected: height * width, actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(UncertaintyError::Range { index, value: values[index] });
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor::new(vec![self.height, self.width], self.values.clone())
            .expect("entropy values are finite")
    }

    /// Grayscale export: brighter means more certain, `round(255 * (1 - e))`.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.values.iter().map(|&e| (255.0 * (1.0 - e)).round() as u8).collect()
    }
}

/// Computes the normalized entropy map of a `C x H x W` feature tensor.
pub fn entropy_map(features: &DenseTensor) -> Result<EntropyMap, UncertaintyError> {
    let shape = features.shape();
    if shape.len() != 3 {
        return Err(UncertaintyError::Rank { rank: shape.len() });
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if c < 2 {
        return Err(UncertaintyError::TooFewChannels { channels: c });
    }
    let plane = h * w;
    let ln_c = (c as f64).ln();
    let data = features.values();
    let mut logp = vec![0.0; c];
    let mut values = Vec::with_capacity(plane);
    for i in 0..plane {
        let mut max = f64::NEG_INFINITY;
        for k in 0..c {
            max = max.max(data[k * plane + i]);
        }
        let mut sum = 0.0;
        for k in 0..c {
            logp[k] = data[k * plane + i] - max;
            sum += logp[k].exp();
        }
        let lse = sum.ln();
        let mut entropy = 0.0;
        for lp in &mut logp {
            *lp -= lse;
            entropy -= lp.exp() * *lp;
        }
        values.push((entropy / ln_c).clamp(0.0, 1.0));
    }
    Ok(EntropyMap { height: h, width: w, values })
}

/// Entropy/accuracy summary over the boundary band.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub bin_edges: Vec<f64>,
    pub bin_accuracy: Vec<Option<f64>>,
    pub n_edge_pixels: u64,
}

impl CorrelationReport {
    pub fn to_report_value(&self) -> ReportValue {
        ReportValue::map(vec![
            ("bin_accuracy", ReportValue::opt_floats(&self.bin_accuracy)),
            ("bin_edges", ReportValue::floats(&self.bin_edges)),
            ("n_edge_pixels", ReportValue::Int(self.n_edge_pixels as i64)),
            ("pearson_r", ReportValue::Float(self.pearson_r)),
        ])
    }
}

/// Pearson correlation between entropy and prediction correctness over the
/// ground-truth boundary band, plus per-bin accuracies over equal-width
/// entropy bins partitioning [0,1].
///
/// The correlation is undefined (an error) when the band holds fewer than
/// two distinct entropy values; when the correctness indicator is constant
/// the coefficient is reported as 0.
pub fn edge_entropy_accuracy(
    entropy: &EntropyMap,
    pred: &LabelMap,
    gt: &LabelMap,
    band_width: usize,
    bins: usize,
) -> Result<CorrelationReport, UncertaintyError> {
    if bins == 0 {
        return Err(UncertaintyError::ZeroBins);
    }
    let dims = (gt.height(), gt.width());
    if (pred.height(), pred.width()) != dims || (entropy.height, entropy.width) != dims {
        return Err(UncertaintyError::ShapeMismatch);
    }
    let region = trimap_region(gt, band_width)?;

    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (i, &in_band) in region.values().iter().enumerate() {
        if in_band == 0 || gt.values()[i] == gt.ignore_value() {
            continue;
        }
        let correct = f64::from(pred.values()[i] == gt.values()[i]);
        samples.push((entropy.values[i], correct));
    }
    if samples.is_empty() {
        return Err(UncertaintyError::EmptyBand);
    }
    let n = samples.len() as f64;
    let mean_e = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_c = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_e = 0.0;
    let mut var_c = 0.0;
    for &(e, c) in &samples {
        cov += (e - mean_e) * (c - mean_c);
        var_e += (e - mean_e) * (e - mean_e);
        var_c += (c - mean_c) * (c - mean_c);
    }
    if var_e == 0.0 {
        return Err(UncertaintyError::ConstantEntropy);
    }
    let pearson_r = if var_c == 0.0 {
        0.0
    } else {
        (cov / (var_e * var_c).sqrt()).clamp(-1.0, 1.0)
    };

    let bin_edges: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut hits = vec![0u64; bins];
    let mut totals = vec![0u64; bins];
    for &(e, c) in &samples {
        let bin = ((e * bins as f64) as usize).min(bins - 1);
        totals[bin] += 1;
        if c == 1.0 {
            hits[bin] += 1;
        }
    }
    let bin_accuracy = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect();

    Ok(CorrelationReport { pearson_r, bin_edges, bin_accuracy, n_edge_pixels: samples.len() as u64 })
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyError {
    Rank { rank: usize },
    TooFewChannels { channels: usize },
    Size { expected: usize, actual: usize },
    Range { index: usize, value: f64 },
    ShapeMismatch,
    EmptyBand,
    ConstantEntropy,
    ZeroBins,
    Mask(MaskError),
}

impl fmt::Display for UncertaintyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rank { rank } => write!(f, "feature tensor must be 3-D, got {rank} axes"),
            Self::TooFewChannels { channels } => {
                write!(f, "entropy needs at least 2 channels, got {channels}")
            }
            Self::Size { expected, actual } => {
                write!(f, "entropy map needs {expected} values, got {actual}")
            }
            Self::Range { index, value } => {
                write!(f, "entropy value {value} at index {index} is outside [0,1]")
            }
            Self::ShapeMismatch => write!(f, "entropy map, prediction, and ground truth must share a shape"),
            Self::EmptyBand => write!(f, "boundary band holds no evaluable pixels"),
            Self::ConstantEntropy => {
                write!(f, "correlation undefined: fewer than 2 distinct entropy values in the band")
            }
            Self::ZeroBins => write!(f, "bin count must be positive"),
            Self::Mask(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for UncertaintyError {}

impl From<MaskError> for UncertaintyError {
    fn from(e: MaskError) -> Self {
        Self::Mask(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(c: usize, h: usize, w: usize, values: Vec<f64>) -> DenseTensor {
        DenseTensor::new(vec![c, h, w], values).unwrap()
    }

    #[test]
    fn uniform_channels_have_maximal_entropy() {
        let f = features(3, 1, 1, vec![0.7, 0.7, 0.7]);
        let e = entropy_map(&f).unwrap();
        assert!((e.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_channel_has_near_zero_entropy() {
        let f = features(2, 1, 1, vec![1e3, 0.0]);
        let e = entropy_map(&f).unwrap();
        assert!(e.values()[0] < 1e-10);
    }

    #[test]
    fn two_channel_fixture_matches_hand_entropy() {
        let f = features(2, 1, 1, vec![3.0f64.ln(), 0.0]);
        let e = entropy_map(&f).unwrap();
        // p = (0.75, 0.25), H = -(0.75 ln 0.75 + 0.25 ln 0.25) / ln 2.
        let expect = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()) / 2.0f64.ln();
        assert!((e.values()[0] - expect).abs() < 1e-15);
        assert!((e.values()[0] - 0.8113).abs() < 1e-4);
    }

    #[test]
    fn entropy_is_shift_invariant_per_pixel() {
        let base = features(3, 2, 2, vec![
            0.1, -0.4, 2.0, 0.0, //
            1.1, 0.6, 3.0, 1.0, //
            2.1, 1.6, 4.0, 2.0,
        ]);
        let shifted = features(3, 2, 2, vec![
            100.1, 99.6, 102.0, 100.0, //
            101.1, 100.6, 103.0, 101.0, //
            102.1, 101.6, 104.0, 102.0,
        ]);
        let a = entropy_map(&base).unwrap();
        let b = entropy_map(&shifted).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn entropy_is_channel_permutation_invariant() {
        let f = features(3, 1, 2, vec![0.3, 1.0, -1.2, 0.0, 0.9, 2.0]);
        let g = features(3, 1, 2, vec![0.9, 2.0, 0.3, 1.0, -1.2, 0.0]);
        let a = entropy_map(&f).unwrap();
        let b = entropy_map(&g).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_and_channel_errors() {
        let flat = DenseTensor::new(vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(entropy_map(&flat), Err(UncertaintyError::Rank { rank: 2 })));
        let thin = features(1, 2, 2, vec![0.0; 4]);
        assert!(matches!(entropy_map(&thin), Err(UncertaintyError::TooFewChannels { .. })));
    }

    fn half_plane_labels() -> LabelMap {
        let mut v = vec![0u32; 64];
        for y in 4..8 {
            for x in 0..8 {
                v[y * 8 + x] = 1;
            }
        }
        LabelMap::new(8, 8, v).unwrap()
    }

    /// Band of the half-plane map at width 3 is rows 3 and 4 (16 pixels).
    #[test]
    fn monotone_fixture_has_negative_correlation() {
        let gt = half_plane_labels();
        // Entropy rises left to right along each band row; correctness flips
        // off exactly where entropy crosses 0.5.
        let mut entropy_values = vec![0.0f64; 64];
        let mut pred_values = gt.values().to_vec();
        for y in [3usize, 4] {
            for x in 0..8 {
                let e = (x as f64 + 0.5) / 8.0;
                entropy_values[y * 8 + x] = e;
                if e >= 0.5 {
                    pred_values[y * 8 + x] = 1 - pred_values[y * 8 + x];
                }
            }
        }
        let entropy = EntropyMap::new(8, 8, entropy_values).unwrap();
        let pred = LabelMap::new(8, 8, pred_values).unwrap();
        let report = edge_entropy_accuracy(&entropy, &pred, &gt, 3, 4).unwrap();
        assert_eq!(report.n_edge_pixels, 16);
        assert!(report.pearson_r < 0.0, "expected inverse correlation, got {}", report.pearson_r);
        assert_eq!(report.bin_edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(report.bin_accuracy, vec![Some(1.0), Some(1.0), Some(0.0), Some(0.0)]);
        let defined: Vec<f64> = report.bin_accuracy.iter().flatten().copied().collect();
        assert!(defined.windows(2).all(|w| w[0] >= w[1]), "bin accuracies must not increase");
    }

    #[test]
    fn constant_entropy_is_an_error() {
        let gt = half_plane_labels();
        let mut pred_values = gt.values().to_vec();
        pred_values[3 * 8] = 1 - pred_values[3 * 8];
        let pred = LabelMap::new(8, 8, pred_values).unwrap();
        let entropy = EntropyMap::new(8, 8, vec![0.5; 64]).unwrap();
        assert!(matches!(
            edge_entropy_accuracy(&entropy, &pred, &gt, 3, 4),
            Err(UncertaintyError::ConstantEntropy)
        ));
    }

    #[test]
    fn all_correct_band_has_zero_correlation_and_unit_bins() {
        let gt = half_plane_labels();
        let entropy_values: Vec<f64> = (0..64).map(|i| (i % 8) as f64 / 8.0).collect();
        let entropy = EntropyMap::new(8, 8, entropy_values).unwrap();
        let report = edge_entropy_accuracy(&entropy, &gt, &gt, 3, 4).unwrap();
        assert_eq!(report.pearson_r, 0.0);
        assert!(report.bin_accuracy.iter().flatten().all(|&a| a == 1.0));
    }

    #[test]
    fn empty_band_is_an_error() {
        let gt = LabelMap::new(4, 4, vec![0; 16]).unwrap();
        let entropy = EntropyMap::new(4, 4, vec![0.25; 16]).unwrap();
        assert!(matches!(
            edge_entropy_accuracy(&entropy, &gt, &gt, 3, 4),
            Err(UncertaintyError::EmptyBand)
        ));
    }

    #[test]
    fn luma_export_brightness_encodes_certainty() {
        let e = EntropyMap::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(e.to_luma8(), vec![255, 128, 0]);
    }
}
