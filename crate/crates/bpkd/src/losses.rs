//! Edge/body distillation losses over logit maps.
//!
//! The logit map decomposes additively through a soft edge mask stack:
//! `Z = Z_edge + Z_body` with `Z_edge = Z * M` and `Z_body = Z * (1 - M)`.
//! The edge loss masks teacher and student logits, takes the per-pixel
//! class-softmax KL divergence between them, and redistributes each pixel's
//! divergence to the classes whose soft masks cover it, weighted by
//! `alpha_c / n_c` where `n_c` counts the strictly positive mask pixels of
//! class `c`. The body loss is a channel-wise distillation on the
//! complementary masking: a temperature-scaled softmax over the spatial
//! positions of each class plane, KL-compared teacher-to-student and scaled
//! by `T^2 / C`. The composite objective is
//! `total = lambda_edge * edge + lambda_body * body`.
//!
//! All reductions run in 64-bit in a fixed class-major, row-major order, so
//! results are bit-stable across runs and thread counts. Teacher logits are
//! constants: the analytic gradient is taken with respect to the student
//! only and is exactly zero when the two networks coincide.

use std::fmt;

use crate::edge_masks::SoftMaskStack;
use crate::io::{DenseTensor, IoError, ReportValue};

/// Pre-softmax class scores, class-major `C x H x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTensor {
    classes: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LogitTensor {
    pub fn new(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self, LossError> {
        if values.len() != classes * height * width {
            return Err(LossError::Size {
                expected: classes * height * width,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFinite { index });
        }
        Ok(Self { classes, height, width, values })
    }

    pub fn from_dense(tensor: &DenseTensor) -> Result<Self, LossError> {
        let shape = tensor.shape();
        if shape.len() != 3 {
            return Err(LossError::Rank { rank: shape.len() });
        }
        Self::new(shape[0], shape[1], shape[2], tensor.values().to_vec())
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

    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor::new(vec![self.classes, self.height, self.width], self.values.clone())
            .expect("logit values are finite")
    }

    /// Copy with one value nudged; used by finite-difference probes.
    pub fn with_nudged(&self, index: usize, delta: f64) -> Self {
        let mut values = self.values.clone();
        values[index] += delta;
        Self { values, ..*self }
    }

    fn shape3(&self) -> [usize; 3] {
        [self.classes, self.height, self.width]
    }
}

/// Loss weighting: the two composite weights, the per-class edge balance
/// vector, and the body-softmax temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub lambda_body: f64,
    pub lambda_edge: f64,
    pub alpha: Vec<f64>,
    pub temperature: f64,
}

pub const DEFAULT_LAMBDA_BODY: f64 = 20.0;
pub const DEFAULT_LAMBDA_EDGE: f64 = 50.0;
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

impl LossWeights {
    /// The ablation-study optimum: lambda_body 20, lambda_edge 50, alpha 2,
    /// temperature 1.
    pub fn defaults(num_classes: usize) -> Self {
        Self {
            lambda_body: DEFAULT_LAMBDA_BODY,
            lambda_edge: DEFAULT_LAMBDA_EDGE,
            alpha: vec![DEFAULT_ALPHA; num_classes],
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    fn validate(&self, num_classes: usize) -> Result<(), LossError> {
        if !(self.lambda_body.is_finite() && self.lambda_body >= 0.0) {
            return Err(LossError::BadWeight { name: "lambda_body", value: self.lambda_body });
        }
        if !(self.lambda_edge.is_finite() && self.lambda_edge >= 0.0) {
            return Err(LossError::BadWeight { name: "lambda_edge", value: self.lambda_edge });
        }
        if self.alpha.len() != num_classes {
            return Err(LossError::AlphaLength { expected: num_classes, actual: self.alpha.len() });
        }
        validate_alpha(&self.alpha)?;
        check_temperature(self.temperature)?;
        Ok(())
    }
}

fn validate_alpha(alpha: &[f64]) -> Result<(), LossError> {
    for &a in alpha {
        if !(a.is_finite() && a >= 0.0) {
            return Err(LossError::NegativeAlpha { value: a });
        }
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<(), LossError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(LossError::BadTemperature { value: t });
    }
    Ok(())
}

/// Loss summary: unweighted components, the weighted total, the per-class
/// edge breakdown, mask statistics, and a configuration echo.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub edge_loss: f64,
    pub body_loss: f64,
    pub total: f64,
    pub per_class_edge: Vec<f64>,
    pub edge_pixel_counts: Vec<usize>,
    pub weights: LossWeights,
    pub edge_width: Option<usize>,
    pub stride: Option<usize>,
}

impl LossReport {
    pub fn to_report_value(&self) -> ReportValue {
        ReportValue::map(vec![
            ("alpha", ReportValue::floats(&self.weights.alpha)),
            ("body_loss", ReportValue::Float(self.body_loss)),
            ("edge_loss", ReportValue::Float(self.edge_loss)),
            ("edge_pixel_counts", ReportValue::ints(&self.edge_pixel_counts)),
            ("edge_width", self.edge_width.map_or(ReportValue::Null, |w| ReportValue::Int(w as i64))),
            ("lambda_body", ReportValue::Float(self.weights.lambda_body)),
            ("lambda_edge", ReportValue::Float(self.weights.lambda_edge)),
            ("per_class_edge", ReportValue::floats(&self.per_class_edge)),
            ("stride", self.stride.map_or(ReportValue::Null, |s| ReportValue::Int(s as i64))),
            ("temperature", ReportValue::Float(self.weights.temperature)),
            ("total", ReportValue::Float(self.total)),
        ])
    }
}

/// Gradient of the composite loss with respect to the student logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTensor {
    classes: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GradientTensor {
    pub fn new(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self, LossError> {
        if values.len() != classes * height * width {
            return Err(LossError::Size { expected: classes * height * width, actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFinite { index });
        }
        Ok(Self { classes, height, width, values })
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

    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor::new(vec![self.classes, self.height, self.width], self.values.clone())
            .expect("gradient values are finite")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_same_shape(a: [usize; 3], b: [usize; 3]) -> Result<(), LossError> {
    if a != b {
        return Err(LossError::ShapeMismatch { expected: a, actual: b });
    }
    Ok(())
}

fn check_mask_shape(z: &LogitTensor, m: &SoftMaskStack) -> Result<(), LossError> {
    check_same_shape(z.shape3(), [m.classes(), m.height(), m.width()])
}

/// Elementwise product of logits and a mask stack; used for both the edge
/// masking `Z * M` and, with the complement mask, the body masking.
pub fn mask_logits(z: &LogitTensor, m: &SoftMaskStack) -> Result<LogitTensor, LossError> {
    check_mask_shape(z, m)?;
    let values = z.values.iter().zip(m.values()).map(|(a, b)| a * b).collect();
    Ok(LogitTensor { values, ..*z })
}

/// Splits logits into `(Z_edge, Z_body) = (Z * M, Z * (1 - M))`; the two
/// parts reconstruct the input additively.
pub fn decompose(z: &LogitTensor, edge: &SoftMaskStack) -> Result<(LogitTensor, LogitTensor), LossError> {
    check_mask_shape(z, edge)?;
    let edge_values: Vec<f64> = z.values.iter().zip(edge.values()).map(|(a, b)| a * b).collect();
    let body_values: Vec<f64> =
        z.values.iter().zip(edge.values()).map(|(a, b)| a * (1.0 - b)).collect();
    Ok((
        LogitTensor { values: edge_values, ..*z },
        LogitTensor { values: body_values, ..*z },
    ))
}

/// In-place shifted log-softmax; returns after rewriting `buf` to log
/// probabilities. Summation runs in slice order.
fn log_softmax_in_place(buf: &mut [f64]) {
    let max = buf.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for v in buf.iter_mut() {
        *v -= max;
        sum += v.exp();
    }
    let lse = sum.ln();
    for v in buf.iter_mut() {
        *v -= lse;
    }
}

/// Per-class KL integrand map of the edge-masked logits. For each pixel,
/// `p` and `q` are the class softmaxes of the teacher and student inputs and
/// the entry at `(c, i)` is `p_c * ln(p_c / q_c)`. The class sum at a pixel
/// is the pixel's KL divergence and is non-negative; individual entries may
/// be negative. Inputs are expected to be masked already.
pub fn prm_kl_map(z_teacher_edge: &LogitTensor, z_student_edge: &LogitTensor) -> Result<DenseTensor, LossError> {
    check_same_shape(z_teacher_edge.shape3(), z_student_edge.shape3())?;
    let (c, h, w) = (z_teacher_edge.classes, z_teacher_edge.height, z_teacher_edge.width);
    if c < 2 {
        return Err(LossError::TooFewClasses { classes: c });
    }
    let plane = h * w;
    let mut out = vec![0.0; c * plane];
    let mut lp = vec![0.0; c];
    let mut lq = vec![0.0; c];
    for i in 0..plane {
        for k in 0..c {
            lp[k] = z_teacher_edge.values[k * plane + i];
            lq[k] = z_student_edge.values[k * plane + i];
        }
        log_softmax_in_place(&mut lp);
        log_softmax_in_place(&mut lq);
        for k in 0..c {
            out[k * plane + i] = lp[k].exp() * (lp[k] - lq[k]);
        }
    }
    DenseTensor::new(vec![c, h, w], out).map_err(|e| match e {
        IoError::NonFinite { index, .. } => LossError::NonFinite { index },
        other => LossError::Internal(other.to_string()),
    })
}

/// Edge loss: masks both logit maps, forms the per-pixel KL divergence, and
/// redistributes it per class as `(alpha_c / n_c) * sum_i kl_i * M_c(i)`.
/// Classes with `n_c == 0` contribute exactly zero. Returns the total, the
/// per-class contributions, and the `n_c` vector.
pub fn edge_loss(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    edge: &SoftMaskStack,
    alpha: &[f64],
) -> Result<(f64, Vec<f64>, Vec<usize>), LossError> {
    check_same_shape(z_teacher.shape3(), z_student.shape3())?;
    check_mask_shape(z_teacher, edge)?;
    let c = z_teacher.classes;
    if alpha.len() != c {
        return Err(LossError::AlphaLength { expected: c, actual: alpha.len() });
    }
    validate_alpha(alpha)?;

    let masked_teacher = mask_logits(z_teacher, edge)?;
    let masked_student = mask_logits(z_student, edge)?;
    let kl_map = prm_kl_map(&masked_teacher, &masked_student)?;

    let plane = z_teacher.height * z_teacher.width;
    let mut pixel_kl = vec![0.0; plane];
    for k in 0..c {
        let class_terms = &kl_map.values()[k * plane..(k + 1) * plane];
        for (acc, &term) in pixel_kl.iter_mut().zip(class_terms) {
            *acc += term;
        }
    }

    let counts = edge.positive_counts();
    let mut per_class = vec![0.0; c];
    let mut total = 0.0;
    for k in 0..c {
        if counts[k] == 0 {
            continue;
        }
        let mask_plane = edge.class_plane(k);
        let mut weighted = 0.0;
        for (kl, m) in pixel_kl.iter().zip(mask_plane) {
            weighted += kl * m;
        }
        per_class[k] = alpha[k] / counts[k] as f64 * weighted;
        total += per_class[k];
    }
    Ok((total, per_class, counts))
}

/// Body enhancement loss: channel-wise KL on the complement-masked logits.
/// Each class plane is softmaxed over its spatial positions at temperature
/// `T`, teacher against student, and the grand sum is scaled by `T^2 / C`.
pub fn body_loss(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    edge: &SoftMaskStack,
    temperature: f64,
) -> Result<f64, LossError> {
    check_temperature(temperature)?;
    check_same_shape(z_teacher.shape3(), z_student.shape3())?;
    check_mask_shape(z_teacher, edge)?;
    let (c, plane) = (z_teacher.classes, z_teacher.height * z_teacher.width);
    let mut lp = vec![0.0; plane];
    let mut lq = vec![0.0; plane];
    let mut sum = 0.0;
    for k in 0..c {
        let mask_plane = edge.class_plane(k);
        for j in 0..plane {
            let body = 1.0 - mask_plane[j];
            lp[j] = z_teacher.values[k * plane + j] * body / temperature;
            lq[j] = z_student.values[k * plane + j] * body / temperature;
        }
        log_softmax_in_place(&mut lp);
        log_softmax_in_place(&mut lq);
        for j in 0..plane {
            sum += lp[j].exp() * (lp[j] - lq[j]);
        }
    }
    Ok(temperature * temperature / c as f64 * sum)
}

/// Whole-view channel distillation: the body loss with no region removed
/// (an all-zero edge mask).
pub fn cwd_baseline_loss(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    temperature: f64,
) -> Result<f64, LossError> {
    let zero = SoftMaskStack::zeros(z_teacher.classes, z_teacher.height, z_teacher.width);
    body_loss(z_teacher, z_student, &zero, temperature)
}

/// Composite objective `lambda_edge * edge + lambda_body * body`. Components
/// are reported unweighted together with the per-class breakdown and mask
/// statistics.
pub fn bpkd_loss(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    edge: &SoftMaskStack,
    weights: &LossWeights,
) -> Result<LossReport, LossError> {
    weights.validate(z_teacher.classes)?;
    let (edge_total, per_class_edge, edge_pixel_counts) =
        edge_loss(z_teacher, z_student, edge, &weights.alpha)?;
    let body_total = body_loss(z_teacher, z_student, edge, weights.temperature)?;
    let total = weights.lambda_edge * edge_total + weights.lambda_body * body_total;
    Ok(LossReport {
        edge_loss: edge_total,
        body_loss: body_total,
        total,
        per_class_edge,
        edge_pixel_counts,
        weights: weights.clone(),
        edge_width: None,
        stride: None,
    })
}

/// Analytic gradient of the composite loss with respect to the student
/// logits.
///
/// Edge term, per pixel `i`: with `p`/`q` the class softmaxes of the masked
/// teacher/student logits and `W_i = sum_c alpha_c * M_c(i) / n_c` over
/// classes with `n_c > 0`, the derivative at class `k` is
/// `lambda_edge * M_k(i) * W_i * (q_k - p_k)` (the mask factor is the chain
/// rule through the pre-softmax multiplication).
///
/// Body term, per class `c` and position `j`: with `p`/`q` the spatial
/// softmaxes of the complement-masked logits at temperature `T`, the
/// derivative is `lambda_body * (T / C) * (1 - M_c(j)) * (q_j - p_j)`.
pub fn bpkd_grad(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    edge: &SoftMaskStack,
    weights: &LossWeights,
) -> Result<GradientTensor, LossError> {
    weights.validate(z_teacher.classes)?;
    check_same_shape(z_teacher.shape3(), z_student.shape3())?;
    check_mask_shape(z_teacher, edge)?;
    let (c, h, w) = (z_teacher.classes, z_teacher.height, z_teacher.width);
    if c < 2 {
        return Err(LossError::TooFewClasses { classes: c });
    }
    let plane = h * w;
    let t = weights.temperature;
    let counts = edge.positive_counts();
    let mut grad = vec![0.0; c * plane];

    // Edge term.
    let mut lp = vec![0.0; c];
    let mut lq = vec![0.0; c];
    for i in 0..plane {
        let mut pixel_weight = 0.0;
        for k in 0..c {
            if counts[k] > 0 {
                pixel_weight += weights.alpha[k] * edge.values()[k * plane + i] / counts[k] as f64;
            }
            lp[k] = z_teacher.values[k * plane + i] * edge.values()[k * plane + i];
            lq[k] = z_student.values[k * plane + i] * edge.values()[k * plane + i];
        }
        log_softmax_in_place(&mut lp);
        log_softmax_in_place(&mut lq);
        for k in 0..c {
            let mask = edge.values()[k * plane + i];
            grad[k * plane + i] +=
                weights.lambda_edge * mask * pixel_weight * (lq[k].exp() - lp[k].exp());
        }
    }

    // Body term.
    let mut sp = vec![0.0; plane];
    let mut sq = vec![0.0; plane];
    for k in 0..c {
        let mask_plane = edge.class_plane(k);
        for j in 0..plane {
            let body = 1.0 - mask_plane[j];
            sp[j] = z_teacher.values[k * plane + j] * body / t;
            sq[j] = z_student.values[k * plane + j] * body / t;
        }
        log_softmax_in_place(&mut sp);
        log_softmax_in_place(&mut sq);
        let scale = weights.lambda_body * t / c as f64;
        for j in 0..plane {
            grad[k * plane + j] += scale * (1.0 - mask_plane[j]) * (sq[j].exp() - sp[j].exp());
        }
    }

    Ok(GradientTensor { classes: c, height: h, width: w, values: grad })
}

/// Central finite differences of the composite loss over every student
/// logit; the independent check for [`bpkd_grad`].
pub fn central_difference_grad(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    edge: &SoftMaskStack,
    weights: &LossWeights,
    step: f64,
) -> Result<GradientTensor, LossError> {
    let n = z_student.values.len();
    let mut values = Vec::with_capacity(n);
    for index in 0..n {
        let plus = bpkd_loss(z_teacher, &z_student.with_nudged(index, step), edge, weights)?.total;
        let minus = bpkd_loss(z_teacher, &z_student.with_nudged(index, -step), edge, weights)?.total;
        values.push((plus - minus) / (2.0 * step));
    }
    Ok(GradientTensor {
        classes: z_student.classes,
        height: z_student.height,
        width: z_student.width,
        values,
    })
}

/// Componentwise maximum absolute and relative error between two gradients.
///
/// The relative denominator for each component is floored at 1e-4 times the
/// larger gradient's infinity norm (at least 1e-4). Central differences of a
/// loss `f` carry cancellation noise of order `eps * |f| / h` regardless of
/// the component's size, so components far below the gradient's own scale
/// are compared against that scale rather than against the noise. A wrong
/// term or chain factor perturbs components at their own magnitude and still
/// registers.
pub fn gradient_errors(analytic: &GradientTensor, numeric: &GradientTensor) -> (f64, f64) {
    let scale = analytic.max_abs().max(numeric.max_abs()).max(1.0);
    let floor = 1e-4 * scale;
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (&a, &g) in analytic.values.iter().zip(&numeric.values) {
        let abs = (a - g).abs();
        let rel = abs / a.abs().max(g.abs()).max(floor);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    (max_abs, max_rel)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    ShapeMismatch { expected: [usize; 3], actual: [usize; 3] },
    Size { expected: usize, actual: usize },
    Rank { rank: usize },
    NonFinite { index: usize },
    TooFewClasses { classes: usize },
    AlphaLength { expected: usize, actual: usize },
    NegativeAlpha { value: f64 },
    BadTemperature { value: f64 },
    BadWeight { name: &'static str, value: f64 },
    Config(String),
    Internal(String),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { expected, actual } => write!(
                f,
                "shape mismatch: {}x{}x{} vs {}x{}x{}",
                expected[0], expected[1], expected[2], actual[0], actual[1], actual[2]
            ),
            Self::Size { expected, actual } => {
                write!(f, "logit tensor needs {expected} values, got {actual}")
            }
            Self::Rank { rank } => write!(f, "logit tensor must be 3-D, got {rank} axes"),
            Self::NonFinite { index } => write!(f, "non-finite value at index {index}"),
            Self::TooFewClasses { classes } => {
                write!(f, "KL over classes needs at least 2 classes, got {classes}")
            }
            Self::AlphaLength { expected, actual } => {
                write!(f, "alpha must have {expected} entries, got {actual}")
            }
            Self::NegativeAlpha { value } => write!(f, "alpha entries must be non-negative, got {value}"),
            Self::BadTemperature { value } => write!(f, "temperature must be positive, got {value}"),
            Self::BadWeight { name, value } => {
                write!(f, "{name} must be non-negative and finite, got {value}")
            }
            Self::Config(msg) | Self::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for LossError {}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_logits(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> LogitTensor {
        let values = (0..c * h * w).map(|_| rng.gen_range(-4.0..4.0)).collect();
        LogitTensor::new(c, h, w, values).unwrap()
    }

    fn random_mask(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> SoftMaskStack {
        let values = (0..c * h * w)
            .map(|_| match rng.gen_range(0u8..5) {
                0 => 0.0,
                4 => 1.0,
                _ => rng.gen::<f64>(),
            })
            .collect();
        SoftMaskStack::new(c, h, w, values).unwrap()
    }

    // Frozen from the two-class fixture: teacher (ln 3, 0) vs student (0, 0),
    // so p = (0.75, 0.25) and q = (0.5, 0.5).
    const TERM_0: f64 = 0.3040988310811233; // 0.75 * ln 1.5
    const TERM_1: f64 = -0.17328679513998632; // 0.25 * ln 0.5
    const PIXEL_KL: f64 = 0.13081203594113697;

    fn single_pixel_pair() -> (LogitTensor, LogitTensor) {
        let teacher = LogitTensor::new(2, 1, 1, vec![3.0f64.ln(), 0.0]).unwrap();
        let student = LogitTensor::new(2, 1, 1, vec![0.0, 0.0]).unwrap();
        (teacher, student)
    }

    #[test]
    fn mask_logits_is_elementwise() {
        let z = LogitTensor::new(2, 1, 1, vec![1.0, -2.0]).unwrap();
        let m = SoftMaskStack::new(2, 1, 1, vec![0.5, 1.0]).unwrap();
        assert_eq!(mask_logits(&z, &m).unwrap().values(), &[0.5, -2.0]);
        let ones = SoftMaskStack::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(mask_logits(&z, &ones).unwrap().values(), z.values());
        let zeros = SoftMaskStack::zeros(2, 1, 1);
        assert_eq!(mask_logits(&z, &zeros).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn decompose_degenerate_splits() {
        let z = LogitTensor::new(2, 1, 2, vec![1.0, -2.0, 0.25, 4.0]).unwrap();
        let zeros = SoftMaskStack::zeros(2, 1, 2);
        let (e, b) = decompose(&z, &zeros).unwrap();
        assert!(e.values().iter().all(|&v| v == 0.0));
        assert_eq!(b.values(), z.values());
        let ones = SoftMaskStack::new(2, 1, 2, vec![1.0; 4]).unwrap();
        let (e, b) = decompose(&z, &ones).unwrap();
        assert_eq!(e.values(), z.values());
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decompose_reconstructs_random_inputs() {
        let mut r = rng(3);
        for _ in 0..20 {
            let z = random_logits(&mut r, 3, 5, 4);
            let m = random_mask(&mut r, 3, 5, 4);
            let (e, b) = decompose(&z, &m).unwrap();
            for ((&ze, &zb), &zv) in e.values().iter().zip(b.values()).zip(z.values()) {
                assert!((ze + zb - zv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prm_map_zero_when_teacher_equals_student() {
        let mut r = rng(4);
        let z = random_logits(&mut r, 4, 3, 3);
        let map = prm_kl_map(&z, &z).unwrap();
        assert!(map.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prm_map_matches_hand_softmax_fixture() {
        let (teacher, student) = single_pixel_pair();
        let map = prm_kl_map(&teacher, &student).unwrap();
        assert!((map.values()[0] - TERM_0).abs() < 1e-15);
        assert!((map.values()[1] - TERM_1).abs() < 1e-15);
        assert!((map.values()[0] + map.values()[1] - PIXEL_KL).abs() < 1e-15);
    }

    #[test]
    fn prm_pixel_sums_are_non_negative() {
        let mut r = rng(5);
        for _ in 0..50 {
            let t = random_logits(&mut r, 3, 4, 4);
            let s = random_logits(&mut r, 3, 4, 4);
            let map = prm_kl_map(&t, &s).unwrap();
            let plane = 16;
            for i in 0..plane {
                let sum: f64 = (0..3).map(|k| map.values()[k * plane + i]).sum();
                assert!(sum >= -1e-12, "pixel KL {sum} went negative");
            }
        }
    }

    // The single-pixel full-mask fixture. Each class has n_c = 1 and mask 1,
    // so both classes receive the full pixel KL and the loss is twice it.
    #[test]
    fn edge_loss_single_pixel_fixture() {
        let (teacher, student) = single_pixel_pair();
        let full = SoftMaskStack::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let (total, per_class, counts) = edge_loss(&teacher, &student, &full, &[1.0, 1.0]).unwrap();
        assert_eq!(counts, vec![1, 1]);
        assert!((per_class[0] - PIXEL_KL).abs() < 1e-15);
        assert!((per_class[1] - PIXEL_KL).abs() < 1e-15);
        assert!((total - 2.0 * PIXEL_KL).abs() < 1e-15);
    }

    #[test]
    fn edge_loss_zero_at_coincidence_and_zero_mask() {
        let mut r = rng(6);
        let z = random_logits(&mut r, 3, 4, 4);
        let m = random_mask(&mut r, 3, 4, 4);
        let (total, per_class, _) = edge_loss(&z, &z, &m, &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(total, 0.0);
        assert!(per_class.iter().all(|&v| v == 0.0));

        let other = random_logits(&mut r, 3, 4, 4);
        let zeros = SoftMaskStack::zeros(3, 4, 4);
        let (total, _, counts) = edge_loss(&z, &other, &zeros, &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(total, 0.0);
        assert_eq!(counts, vec![0, 0, 0]);
    }

    #[test]
    fn doubling_alpha_doubles_edge_loss() {
        let mut r = rng(7);
        let t = random_logits(&mut r, 4, 5, 3);
        let s = random_logits(&mut r, 4, 5, 3);
        let m = random_mask(&mut r, 4, 5, 3);
        let (one, _, _) = edge_loss(&t, &s, &m, &[1.0; 4]).unwrap();
        let (two, _, _) = edge_loss(&t, &s, &m, &[2.0; 4]).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let (teacher, student) = single_pixel_pair();
        let m = SoftMaskStack::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            edge_loss(&teacher, &student, &m, &[1.0, -0.5]),
            Err(LossError::NegativeAlpha { .. })
        ));
    }

    // One class, two spatial positions, zero mask, T = 1: teacher (0,0) gives
    // p = (0.5, 0.5); student (ln 3, 0) gives q = (0.75, 0.25).
    #[test]
    fn body_loss_matches_hand_channel_softmax() {
        let teacher = LogitTensor::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let student = LogitTensor::new(1, 1, 2, vec![3.0f64.ln(), 0.0]).unwrap();
        let zeros = SoftMaskStack::zeros(1, 1, 2);
        let got = body_loss(&teacher, &student, &zeros, 1.0).unwrap();
        assert!((got - 0.14384103622589045).abs() < 1e-15);
    }

    #[test]
    fn body_loss_temperature_two_matches_naive_recompute() {
        let teacher = LogitTensor::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let student = LogitTensor::new(1, 1, 2, vec![3.0f64.ln(), 0.0]).unwrap();
        let zeros = SoftMaskStack::zeros(1, 1, 2);
        let got = body_loss(&teacher, &student, &zeros, 2.0).unwrap();
        // Recompute naively: softmax of halved logits, KL, times T^2 / C.
        let qs = [(3.0f64.ln() / 2.0).exp(), 1.0];
        let qsum = qs[0] + qs[1];
        let q = [qs[0] / qsum, qs[1] / qsum];
        let p = [0.5, 0.5];
        let expect = 4.0 * (p[0] * (p[0] / q[0]).ln() + p[1] * (p[1] / q[1]).ln());
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn body_loss_zero_at_coincidence() {
        let mut r = rng(8);
        let z = random_logits(&mut r, 3, 4, 4);
        let m = random_mask(&mut r, 3, 4, 4);
        for t in [1.0, 2.0, 4.0] {
            assert_eq!(body_loss(&z, &z, &m, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        let (teacher, student) = single_pixel_pair();
        let m = SoftMaskStack::zeros(2, 1, 1);
        assert!(matches!(
            body_loss(&teacher, &student, &m, 0.0),
            Err(LossError::BadTemperature { .. })
        ));
        assert!(matches!(
            body_loss(&teacher, &student, &m, -1.0),
            Err(LossError::BadTemperature { .. })
        ));
    }

    #[test]
    fn cwd_equals_body_with_zero_mask_bitwise() {
        let mut r = rng(9);
        let t = random_logits(&mut r, 4, 8, 8);
        let s = random_logits(&mut r, 4, 8, 8);
        let zeros = SoftMaskStack::zeros(4, 8, 8);
        let a = cwd_baseline_loss(&t, &s, 1.0).unwrap();
        let b = body_loss(&t, &s, &zeros, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(cwd_baseline_loss(&t, &t, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn composite_total_is_the_weighted_sum() {
        let mut r = rng(10);
        let t = random_logits(&mut r, 3, 6, 4);
        let s = random_logits(&mut r, 3, 6, 4);
        let m = random_mask(&mut r, 3, 6, 4);
        let w = LossWeights::defaults(3);
        let report = bpkd_loss(&t, &s, &m, &w).unwrap();
        assert_eq!(report.total, 50.0 * report.edge_loss + 20.0 * report.body_loss);
        let per_class_sum: f64 = report.per_class_edge.iter().sum();
        assert!((per_class_sum - report.edge_loss).abs() < 1e-15);

        let body_only = LossWeights { lambda_edge: 0.0, ..w.clone() };
        let r2 = bpkd_loss(&t, &s, &m, &body_only).unwrap();
        assert_eq!(r2.total, 20.0 * r2.body_loss);

        let r3 = bpkd_loss(&t, &t, &m, &w).unwrap();
        assert_eq!(r3.total, 0.0);
        assert_eq!(r3.edge_loss, 0.0);
        assert_eq!(r3.body_loss, 0.0);
    }

    // Full masks make the pixel weight W = alpha_0 + alpha_1 = 2, so the
    // gradient is 2 * (q - p) = (-0.5, 0.5); verified against central
    // differences below.
    #[test]
    fn gradient_single_pixel_fixture() {
        let (teacher, student) = single_pixel_pair();
        let full = SoftMaskStack::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let w = LossWeights {
            lambda_body: 0.0,
            lambda_edge: 1.0,
            alpha: vec![1.0, 1.0],
            temperature: 1.0,
        };
        let grad = bpkd_grad(&teacher, &student, &full, &w).unwrap();
        assert!((grad.values()[0] - (-0.5)).abs() < 1e-12);
        assert!((grad.values()[1] - 0.5).abs() < 1e-12);
        let fd = central_difference_grad(&teacher, &student, &full, &w, 1e-5).unwrap();
        let (_, rel) = gradient_errors(&grad, &fd);
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn gradient_zero_at_coincidence() {
        let mut r = rng(11);
        let z = random_logits(&mut r, 4, 5, 5);
        let m = random_mask(&mut r, 4, 5, 5);
        let grad = bpkd_grad(&z, &z, &m, &LossWeights::defaults(4)).unwrap();
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_instances() {
        let mut r = rng(12);
        for case in 0..5 {
            let c = r.gen_range(2..=5);
            let h = r.gen_range(3..=6);
            let w = r.gen_range(3..=6);
            let t = random_logits(&mut r, c, h, w);
            let s = random_logits(&mut r, c, h, w);
            let m = random_mask(&mut r, c, h, w);
            let weights = LossWeights {
                lambda_body: 20.0,
                lambda_edge: 50.0,
                alpha: vec![2.0; c],
                temperature: if case % 2 == 0 { 1.0 } else { 2.0 },
            };
            let grad = bpkd_grad(&t, &s, &m, &weights).unwrap();
            let fd = central_difference_grad(&t, &s, &m, &weights, 1e-5).unwrap();
            let (_, rel) = gradient_errors(&grad, &fd);
            assert!(rel < 1e-4, "case {case}: relative error {rel}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = LogitTensor::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let b = LogitTensor::new(2, 2, 3, vec![0.0; 12]).unwrap();
        let m = SoftMaskStack::zeros(2, 2, 2);
        assert!(matches!(
            edge_loss(&a, &b, &m, &[1.0, 1.0]),
            Err(LossError::ShapeMismatch { .. })
        ));
        let m3 = SoftMaskStack::zeros(3, 2, 2);
        assert!(matches!(mask_logits(&a, &m3), Err(LossError::ShapeMismatch { .. })));
    }

    #[test]
    fn single_class_kl_is_rejected() {
        let z = LogitTensor::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(prm_kl_map(&z, &z), Err(LossError::TooFewClasses { .. })));
    }
}
