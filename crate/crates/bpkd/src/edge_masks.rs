//! Per-class edge bands and soft edge masks.
//!
//! A class's edge band is `dilate(B_c) - erode(B_c)` where `B_c` is the
//! binary indicator of that class in the label map. The width-by-width square
//! structuring element is realized as `width/2` iterations of the 3x3 square
//! element; with replicate borders this equals a single Chebyshev-ball window
//! and a uniform map produces no band. Bands are average-pooled with a
//! non-overlapping stride-sized window into soft masks at the logit
//! resolution, so each pooled value is the fraction of band pixels in its
//! cell.

use std::fmt;

use rayon::prelude::*;

use crate::io::{DenseTensor, IoError, LabelMap};
use crate::losses::LogitTensor;

/// Mask construction parameters: structuring-element side length, output
/// stride, and class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeConfig {
    pub width: usize,
    pub stride: usize,
    pub num_classes: usize,
}

/// Edge width ablation optimum; used as the default everywhere.
pub const DEFAULT_EDGE_WIDTH: usize = 7;

impl EdgeConfig {
    pub fn new(width: usize, stride: usize, num_classes: usize) -> Result<Self, MaskError> {
        let cfg = Self { width, stride, num_classes };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        check_width(self.width)?;
        if self.stride == 0 {
            return Err(MaskError::ZeroStride);
        }
        if self.num_classes == 0 {
            return Err(MaskError::ZeroClasses);
        }
        Ok(())
    }
}

fn check_width(width: usize) -> Result<(), MaskError> {
    if width.is_multiple_of(2) {
        return Err(MaskError::EvenWidth(width));
    }
    if width < 3 {
        return Err(MaskError::WidthTooSmall(width));
    }
    Ok(())
}

/// Full-resolution {0,1} map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self, MaskError> {
        if values.len() != height * width {
            return Err(MaskError::StackShape { classes: 1, height, width, len: values.len() });
        }
        if let Some(index) = values.iter().position(|&v| v > 1) {
            return Err(MaskError::MaskRange { index, value: f64::from(values[index]) });
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.values.iter().zip(&other.values).all(|(&a, &b)| a == 0 || b != 0)
    }
}

/// Per-class soft masks in [0,1] at the pooled resolution, class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMaskStack {
    classes: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SoftMaskStack {
    pub fn new(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        if values.len() != classes * height * width {
            return Err(MaskError::StackShape {
                classes,
                height,
                width,
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(MaskError::MaskRange { index, value: values[index] });
        }
        Ok(Self { classes, height, width, values })
    }

    pub fn zeros(classes: usize, height: usize, width: usize) -> Self {
        Self { classes, height, width, values: vec![0.0; classes * height * width] }
    }

    pub fn classes(&self) -> usize {
        self.classes
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
    pub fn get(&self, class: usize, y: usize, x: usize) -> f64 {
        self.values[(class * self.height + y) * self.width + x]
    }

    /// Per-class slice of length height*width.
    pub fn class_plane(&self, class: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.values[class * plane..(class + 1) * plane]
    }

    /// Count of strictly positive mask values per class (the `n_c` vector).
    pub fn positive_counts(&self) -> Vec<usize> {
        (0..self.classes)
            .map(|c| self.class_plane(c).iter().filter(|&&v| v > 0.0).count())
            .collect()
    }

    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor::new(vec![self.classes, self.height, self.width], self.values.clone())
            .expect("mask values are finite and shape is consistent")
    }

    pub fn from_dense(tensor: &DenseTensor) -> Result<Self, MaskError> {
        let shape = tensor.shape();
        if shape.len() != 3 {
            return Err(MaskError::StackRank { rank: shape.len() });
        }
        Self::new(shape[0], shape[1], shape[2], tensor.values().to_vec())
    }
}

/// One 3x3 square (Chebyshev radius 1) dilation with replicate borders.
fn dilate3(src: &[u8], height: usize, width: usize, dst: &mut [u8]) {
    for y in 0..height {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(height - 1);
        for x in 0..width {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(width - 1);
            let mut v = 0u8;
            'scan: for yy in y0..=y1 {
                for xx in x0..=x1 {
                    if src[yy * width + xx] != 0 {
                        v = 1;
                        break 'scan;
                    }
                }
            }
            dst[y * width + x] = v;
        }
    }
}

/// One 3x3 square erosion with replicate borders.
fn erode3(src: &[u8], height: usize, width: usize, dst: &mut [u8]) {
    for y in 0..height {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(height - 1);
        for x in 0..width {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(width - 1);
            let mut v = 1u8;
            'scan: for yy in y0..=y1 {
                for xx in x0..=x1 {
                    if src[yy * width + xx] == 0 {
                        v = 0;
                        break 'scan;
                    }
                }
            }
            dst[y * width + x] = v;
        }
    }
}

fn iterate(op: fn(&[u8], usize, usize, &mut [u8]), src: Vec<u8>, h: usize, w: usize, iters: usize) -> Vec<u8> {
    let mut cur = src;
    let mut next = vec![0u8; cur.len()];
    for _ in 0..iters {
        op(&cur, h, w, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Binary edge band of one class: dilation minus erosion of the class
/// indicator. Ignore pixels are excluded from the indicator and forced to
/// zero in the output, so undefined labels never mint edges.
pub fn class_edge_band(labels: &LabelMap, class_id: u32, width: usize) -> Result<BinaryMap, MaskError> {
    check_width(width)?;
    if class_id == labels.ignore_value() {
        return Err(MaskError::ClassOutOfRange { class_id });
    }
    let (h, w) = (labels.height(), labels.width());
    let indicator: Vec<u8> = labels.values().iter().map(|&v| u8::from(v == class_id)).collect();
    let iters = width / 2;
    let dilated = iterate(dilate3, indicator.clone(), h, w, iters);
    let eroded = iterate(erode3, indicator, h, w, iters);
    let ignore = labels.ignore_value();
    let values: Vec<u8> = (0..h * w)
        .map(|i| {
            if labels.values()[i] == ignore {
                0
            } else {
                dilated[i] & !eroded[i] & 1
            }
        })
        .collect();
    Ok(BinaryMap { height: h, width: w, values })
}

/// Soft edge masks for every class: each class band average-pooled with a
/// non-overlapping stride-by-stride window.
pub fn build_soft_edge_masks(labels: &LabelMap, cfg: &EdgeConfig) -> Result<SoftMaskStack, MaskError> {
    cfg.validate()?;
    let (h, w, s) = (labels.height(), labels.width(), cfg.stride);
    if h % s != 0 || w % s != 0 {
        return Err(MaskError::StrideIndivisible { height: h, width: w, stride: s });
    }
    let ignore = labels.ignore_value();
    for (index, &v) in labels.values().iter().enumerate() {
        if v != ignore && v as usize >= cfg.num_classes {
            return Err(MaskError::ClassOverflow { value: v, num_classes: cfg.num_classes, index });
        }
    }
    let (hp, wp) = (h / s, w / s);
    let planes: Vec<Vec<f64>> = (0..cfg.num_classes as u32)
        .into_par_iter()
        .map(|class_id| {
            let band = class_edge_band(labels, class_id, cfg.width)?;
            Ok(pool_mean(band.values(), h, w, s))
        })
        .collect::<Result<_, MaskError>>()?;
    let mut values = Vec::with_capacity(cfg.num_classes * hp * wp);
    for plane in planes {
        values.extend_from_slice(&plane);
    }
    Ok(SoftMaskStack { classes: cfg.num_classes, height: hp, width: wp, values })
}

fn pool_mean(band: &[u8], h: usize, w: usize, s: usize) -> Vec<f64> {
    let (hp, wp) = (h / s, w / s);
    let cell = (s * s) as f64;
    let mut out = Vec::with_capacity(hp * wp);
    for oy in 0..hp {
        for ox in 0..wp {
            let mut count = 0u32;
            for yy in oy * s..(oy + 1) * s {
                for xx in ox * s..(ox + 1) * s {
                    count += u32::from(band[yy * w + xx]);
                }
            }
            out.push(f64::from(count) / cell);
        }
    }
    out
}

/// Elementwise complement `1 - M`, the body-side weighting.
pub fn body_masks(edge: &SoftMaskStack) -> SoftMaskStack {
    SoftMaskStack {
        classes: edge.classes,
        height: edge.height,
        width: edge.width,
        values: edge.values.iter().map(|v| 1.0 - v).collect(),
    }
}

/// Union of the edge bands of every class present in the map; used to
/// restrict metric evaluation to the boundary band.
pub fn trimap_region(labels: &LabelMap, width: usize) -> Result<BinaryMap, MaskError> {
    check_width(width)?;
    let ignore = labels.ignore_value();
    let mut present: Vec<u32> = labels.values().iter().copied().filter(|&v| v != ignore).collect();
    present.sort_unstable();
    present.dedup();
    let mut region = BinaryMap::zeros(labels.height(), labels.width());
    for class_id in present {
        let band = class_edge_band(labels, class_id, width)?;
        for (r, &b) in region.values.iter_mut().zip(band.values()) {
            *r |= b;
        }
    }
    Ok(region)
}

/// Per-pixel argmax over the class axis, ties to the lowest class index.
/// The result is at the logit resolution, so masks built from it use stride 1.
pub fn labels_from_logits(logits: &LogitTensor) -> LabelMap {
    let (c, h, w) = (logits.classes(), logits.height(), logits.width());
    let plane = h * w;
    let values = logits.values();
    let mut out = Vec::with_capacity(plane);
    for i in 0..plane {
        let mut best = 0usize;
        let mut best_v = values[i];
        for k in 1..c {
            let v = values[k * plane + i];
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        out.push(best as u32);
    }
    LabelMap::new(h, w, out).expect("argmax output matches logit resolution")
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskError {
    EvenWidth(usize),
    WidthTooSmall(usize),
    ZeroStride,
    ZeroClasses,
    ClassOutOfRange { class_id: u32 },
    ClassOverflow { value: u32, num_classes: usize, index: usize },
    StrideIndivisible { height: usize, width: usize, stride: usize },
    StackShape { classes: usize, height: usize, width: usize, len: usize },
    StackRank { rank: usize },
    MaskRange { index: usize, value: f64 },
}

impl fmt::Display for MaskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EvenWidth(w) => write!(f, "width must be odd, got {w}"),
            Self::WidthTooSmall(w) => write!(f, "width must be at least 3, got {w}"),
            Self::ZeroStride => write!(f, "stride must be positive"),
            Self::ZeroClasses => write!(f, "class count must be positive"),
            Self::ClassOutOfRange { class_id } => write!(f, "class id {class_id} is out of range"),
            Self::ClassOverflow { value, num_classes, index } => write!(
                f,
                "label value {value} at index {index} exceeds class count {num_classes}"
            ),
            Self::StrideIndivisible { height, width, stride } => write!(
                f,
                "label map {height}x{width} is not divisible by stride {stride}"
            ),
            Self::StackShape { classes, height, width, len } => write!(
                f,
                "mask stack {classes}x{height}x{width} needs {} values, got {len}",
                classes * height * width
            ),
            Self::StackRank { rank } => write!(f, "mask stack tensor must be 3-D, got {rank} axes"),
            Self::MaskRange { index, value } => {
                write!(f, "mask value {value} at index {index} is outside [0,1]")
            }
        }
    }
}

impl std::error::Error for MaskError {}

impl From<MaskError> for IoError {
    fn from(e: MaskError) -> Self {
        IoError::Schema { reason: e.to_string() }
    }
}
