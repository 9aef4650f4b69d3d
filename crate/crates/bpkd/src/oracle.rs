//! Naive reference implementation of the full loss pipeline.
//!
//! Everything is recomputed from the label map with explicit nested loops:
//! morphology as a single Chebyshev-window scan per pixel, pooling as a
//! direct window sum, softmaxes without the max-shift rearrangement, KL sums
//! term by term. No code is shared with the fast path; this module exists so
//! tests can compare two independently written routes. Intended for small
//! instances only (roughly C <= 8, pooled side <= 32).

use crate::io::LabelMap;
use crate::losses::{LogitTensor, LossError, LossReport, LossWeights};

use crate::edge_masks::EdgeConfig;

pub fn oracle_bpkd_loss(
    z_teacher: &LogitTensor,
    z_student: &LogitTensor,
    labels: &LabelMap,
    cfg: &EdgeConfig,
    weights: &LossWeights,
) -> Result<LossReport, LossError> {
    let classes = cfg.num_classes;
    if cfg.width.is_multiple_of(2) || cfg.width < 3 {
        return Err(LossError::Config(format!("width must be odd and >= 3, got {}", cfg.width)));
    }
    if cfg.stride == 0 || classes == 0 {
        return Err(LossError::Config("stride and class count must be positive".to_string()));
    }
    let (lh, lw) = (labels.height(), labels.width());
    if lh % cfg.stride != 0 || lw % cfg.stride != 0 {
        return Err(LossError::Config(format!(
            "label map {lh}x{lw} is not divisible by stride {}",
            cfg.stride
        )));
    }
    let (hp, wp) = (lh / cfg.stride, lw / cfg.stride);
    let shape_t = [z_teacher.classes(), z_teacher.height(), z_teacher.width()];
    let shape_s = [z_student.classes(), z_student.height(), z_student.width()];
    if shape_t != shape_s {
        return Err(LossError::ShapeMismatch { expected: shape_t, actual: shape_s });
    }
    if shape_t != [classes, hp, wp] {
        return Err(LossError::ShapeMismatch { expected: [classes, hp, wp], actual: shape_t });
    }
    if weights.alpha.len() != classes {
        return Err(LossError::AlphaLength { expected: classes, actual: weights.alpha.len() });
    }
    if weights.temperature <= 0.0 {
        return Err(LossError::BadTemperature { value: weights.temperature });
    }

    // Soft masks, one pooled cell at a time, straight from the definition.
    let mut masks = vec![0.0f64; classes * hp * wp];
    let radius = (cfg.width / 2) as isize;
    let ignore = labels.ignore_value();
    for class in 0..classes {
        for oy in 0..hp {
            for ox in 0..wp {
                let mut band_pixels = 0u32;
                for y in oy * cfg.stride..(oy + 1) * cfg.stride {
                    for x in ox * cfg.stride..(ox + 1) * cfg.stride {
                        if labels.get(y, x) == ignore {
                            continue;
                        }
                        let mut any_inside = false;
                        let mut all_inside = true;
                        for dy in -radius..=radius {
                            for dx in -radius..=radius {
                                let yy = (y as isize + dy).clamp(0, lh as isize - 1) as usize;
                                let xx = (x as isize + dx).clamp(0, lw as isize - 1) as usize;
                                let inside = labels.get(yy, xx) != ignore
                                    && labels.get(yy, xx) as usize == class;
                                any_inside |= inside;
                                all_inside &= inside;
                            }
                        }
                        if any_inside && !all_inside {
                            band_pixels += 1;
                        }
                    }
                }
                masks[(class * hp + oy) * wp + ox] =
                    f64::from(band_pixels) / (cfg.stride * cfg.stride) as f64;
            }
        }
    }

    let plane = hp * wp;
    let mut counts = vec![0usize; classes];
    for class in 0..classes {
        for i in 0..plane {
            if masks[class * plane + i] > 0.0 {
                counts[class] += 1;
            }
        }
    }

    // Edge loss: per-pixel class softmax of masked logits, KL summed over
    // classes, redistributed per class by alpha_c * M_c / n_c.
    let mut per_class_edge = vec![0.0f64; classes];
    let zt = z_teacher.values();
    let zs = z_student.values();
    for class in 0..classes {
        if counts[class] == 0 {
            continue;
        }
        let mut acc = 0.0f64;
        for i in 0..plane {
            let mut denom_t = 0.0f64;
            let mut denom_s = 0.0f64;
            for k in 0..classes {
                denom_t += (zt[k * plane + i] * masks[k * plane + i]).exp();
                denom_s += (zs[k * plane + i] * masks[k * plane + i]).exp();
            }
            let mut pixel_kl = 0.0f64;
            for k in 0..classes {
                let p = (zt[k * plane + i] * masks[k * plane + i]).exp() / denom_t;
                let q = (zs[k * plane + i] * masks[k * plane + i]).exp() / denom_s;
                pixel_kl += p * (p / q).ln();
            }
            acc += pixel_kl * masks[class * plane + i];
        }
        per_class_edge[class] = weights.alpha[class] / counts[class] as f64 * acc;
    }
    let mut edge_total = 0.0f64;
    for v in &per_class_edge {
        edge_total += v;
    }

    // Body loss: spatial softmax of complement-masked logits per class.
    let t = weights.temperature;
    let mut body_sum = 0.0f64;
    for class in 0..classes {
        let mut denom_t = 0.0f64;
        let mut denom_s = 0.0f64;
        for j in 0..plane {
            let body = 1.0 - masks[class * plane + j];
            denom_t += (zt[class * plane + j] * body / t).exp();
            denom_s += (zs[class * plane + j] * body / t).exp();
        }
        for j in 0..plane {
            let body = 1.0 - masks[class * plane + j];
            let p = (zt[class * plane + j] * body / t).exp() / denom_t;
            let q = (zs[class * plane + j] * body / t).exp() / denom_s;
            body_sum += p * (p / q).ln();
        }
    }
    let body_total = t * t / classes as f64 * body_sum;

    Ok(LossReport {
        edge_loss: edge_total,
        body_loss: body_total,
        total: weights.lambda_edge * edge_total + weights.lambda_body * body_total,
        per_class_edge,
        edge_pixel_counts: counts,
        weights: weights.clone(),
        edge_width: Some(cfg.width),
        stride: Some(cfg.stride),
    })
}
