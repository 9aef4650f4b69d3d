//! File interchange: label maps (PNG or integer `.npy`), dense float tensors
//! (`.npy` v1.0 containers), and deterministic JSON report documents.
//!
//! All loaders validate eagerly and return a typed [`IoError`]; a malformed
//! input never yields a partial value. Tensor values are widened to 64-bit
//! floats on load and non-finite values are rejected at this boundary so the
//! numeric kernels downstream can assume finite inputs.

mod npy;
mod png;
mod report;

pub use npy::{load_tensor, save_tensor};
pub use png::{save_binary_map, save_label_map, save_luma8};
pub use report::{save_report, ReportDocument, ReportValue, SCHEMA_VERSION};

pub(crate) use report::format_float;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Label value excluded from masks, losses, and metrics unless overridden.
pub const DEFAULT_IGNORE: u32 = 255;

/// Integer class-ID image. Ground-truth maps and predictions both use this
/// type; pixels equal to `ignore_value` are excluded from every computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    values: Vec<u32>,
    ignore_value: u32,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, values: Vec<u32>) -> Result<Self, IoError> {
        Self::with_ignore(height, width, values, DEFAULT_IGNORE)
    }

    pub fn with_ignore(
        height: usize,
        width: usize,
        values: Vec<u32>,
        ignore_value: u32,
    ) -> Result<Self, IoError> {
        if height == 0 || width == 0 {
            return Err(IoError::BadShape {
                reason: format!("label map must be at least 1x1, got {height}x{width}"),
            });
        }
        if values.len() != height * width {
            return Err(IoError::BadShape {
                reason: format!(
                    "label map {height}x{width} needs {} values, got {}",
                    height * width,
                    values.len()
                ),
            });
        }
        Ok(Self { height, width, values, ignore_value })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn ignore_value(&self) -> u32 {
        self.ignore_value
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.values[y * self.width + x]
    }

    /// Largest non-ignore label present, if any.
    pub fn max_label(&self) -> Option<u32> {
        self.values.iter().copied().filter(|&v| v != self.ignore_value).max()
    }
}

/// Row-major dense tensor of 1 to 4 axes, always held as 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Validates axis count, extent/value agreement, and finiteness.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, IoError> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(IoError::BadShape {
                reason: format!("tensor must have 1 to 4 axes, got {}", shape.len()),
            });
        }
        let mut expected = 1usize;
        for &extent in &shape {
            if extent == 0 {
                return Err(IoError::BadShape {
                    reason: format!("tensor shape {shape:?} has a zero extent"),
                });
            }
            expected = expected.checked_mul(extent).ok_or_else(|| IoError::BadShape {
                reason: format!("tensor shape {shape:?} overflows"),
            })?;
        }
        if expected != values.len() {
            return Err(IoError::BadShape {
                reason: format!(
                    "tensor shape {shape:?} declares {expected} values, got {}",
                    values.len()
                ),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(IoError::NonFinite { path: None, index });
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Loads a label map from a single-channel PNG or a 2-D integer `.npy`
/// container, dispatching on the file's magic bytes. Values are read
/// verbatim; the ignore value defaults to [`DEFAULT_IGNORE`].
pub fn load_label_map(path: &Path) -> Result<LabelMap, IoError> {
    let head = fs::read(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];
    if head.starts_with(&PNG_MAGIC) {
        png::load_label_png(path, &head)
    } else if head.starts_with(&npy::NPY_MAGIC) {
        npy::load_label_npy(path, &head)
    } else {
        Err(IoError::UnknownFormat { path: path.to_path_buf() })
    }
}

/// Error taxonomy for the interchange boundary. Every malformed input maps
/// onto one of these; loaders never return a partial value.
#[derive(Debug)]
pub enum IoError {
    Read { path: PathBuf, source: std::io::Error },
    Write { path: PathBuf, source: std::io::Error },
    Decode { path: PathBuf, reason: String },
    BadMagic { path: PathBuf },
    BadHeader { path: PathBuf, reason: String },
    FortranOrder { path: PathBuf },
    NonFloatDtype { path: PathBuf, descr: String },
    NonIntegerTensor { path: PathBuf, descr: String },
    UnsupportedDtype { path: PathBuf, descr: String },
    MultiChannel { path: PathBuf, color: String },
    NonFinite { path: Option<PathBuf>, index: usize },
    SizeMismatch { path: PathBuf, expected_values: usize, actual_bytes: usize },
    LabelRank { path: PathBuf, rank: usize },
    LabelValue { path: PathBuf, index: usize, value: i128 },
    UnknownFormat { path: PathBuf },
    BadShape { reason: String },
    Schema { reason: String },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Read { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            Self::Write { path, source } => write!(f, "cannot write {}: {source}", path.display()),
            Self::Decode { path, reason } => write!(f, "cannot decode {}: {reason}", path.display()),
            Self::BadMagic { path } => write!(f, "{}: bad magic, not a v1.0 tensor container", path.display()),
            Self::BadHeader { path, reason } => write!(f, "{}: bad tensor header: {reason}", path.display()),
            Self::FortranOrder { path } => write!(f, "{}: fortran-order tensors are not supported", path.display()),
            Self::NonFloatDtype { path, descr } => write!(f, "{}: non-float dtype '{descr}', expected '<f4' or '<f8'", path.display()),
            Self::NonIntegerTensor { path, descr } => write!(f, "{}: non-integer tensor dtype '{descr}' cannot hold labels", path.display()),
            Self::UnsupportedDtype { path, descr } => write!(f, "{}: unsupported dtype '{descr}'", path.display()),
            Self::MultiChannel { path, color } => write!(f, "{}: multi-channel image ({color}), expected single-channel 8- or 16-bit", path.display()),
            Self::NonFinite { path: Some(path), index } => write!(f, "{}: non-finite value at index {index}", path.display()),
            Self::NonFinite { path: None, index } => write!(f, "non-finite value at index {index}"),
            Self::SizeMismatch { path, expected_values, actual_bytes } => write!(
                f,
                "{}: payload holds {actual_bytes} bytes, header declares {expected_values} values",
                path.display()
            ),
            Self::LabelRank { path, rank } => write!(f, "{}: label tensor must be 2-D, got {rank} axes", path.display()),
            Self::LabelValue { path, index, value } => write!(f, "{}: value {value} at index {index} is not a valid class id", path.display()),
            Self::UnknownFormat { path } => write!(f, "{}: unrecognized format (neither PNG nor tensor container)", path.display()),
            Self::BadShape { reason } => write!(f, "{reason}"),
            Self::Schema { reason } => write!(f, "schema error: {reason}"),
        }
    }
}

impl std::error::Error for IoError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Read { source, .. } | Self::Write { source, .. } => Some(source),
            _ => None,
        }
    }
}
