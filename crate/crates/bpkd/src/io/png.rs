//! Single-channel PNG I/O for label maps, binary masks, and grayscale exports.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma};

use super::{IoError, LabelMap};
use crate::edge_masks::BinaryMap;

pub(crate) fn load_label_png(path: &Path, bytes: &[u8]) -> Result<LabelMap, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| IoError::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
    match img {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let values = img.into_raw().into_iter().map(u32::from).collect();
            LabelMap::new(h, w, values)
        }
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let values = img.into_raw().into_iter().map(u32::from).collect();
            LabelMap::new(h, w, values)
        }
        other => Err(IoError::MultiChannel {
            path: path.to_path_buf(),
            color: format!("{:?}", other.color()),
        }),
    }
}

/// Writes a label map as an 8-bit PNG when every value fits a byte,
/// otherwise as a 16-bit PNG. Values above 16 bits cannot be represented.
pub fn save_label_map(labels: &LabelMap, path: &Path) -> Result<(), IoError> {
    let max = labels.values().iter().copied().max().unwrap_or(0);
    if max > u16::MAX as u32 {
        return Err(IoError::Schema {
            reason: format!("label value {max} does not fit a 16-bit PNG"),
        });
    }
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    if max <= u8::MAX as u32 {
        let raw: Vec<u8> = labels.values().iter().map(|&v| v as u8).collect();
        let img: GrayImage = ImageBuffer::from_raw(w, h, raw).expect("buffer sized to map");
        img.save_with_format(path, ImageFormat::Png)
            .map_err(|e| IoError::Decode { path: path.to_path_buf(), reason: e.to_string() })
    } else {
        let raw: Vec<u16> = labels.values().iter().map(|&v| v as u16).collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(w, h, raw).expect("buffer sized to map");
        img.save_with_format(path, ImageFormat::Png)
            .map_err(|e| IoError::Decode { path: path.to_path_buf(), reason: e.to_string() })
    }
}

/// Writes a binary map as an 8-bit PNG with values {0, 255}.
pub fn save_binary_map(map: &BinaryMap, path: &Path) -> Result<(), IoError> {
    let raw: Vec<u8> = map.values().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    save_luma8(map.height(), map.width(), raw, path)
}

/// Writes raw 8-bit grayscale pixels as a PNG.
pub fn save_luma8(height: usize, width: usize, pixels: Vec<u8>, path: &Path) -> Result<(), IoError> {
    if pixels.len() != height * width {
        return Err(IoError::BadShape {
            reason: format!("{height}x{width} image needs {} pixels, got {}", height * width, pixels.len()),
        });
    }
    let img: GrayImage =
        ImageBuffer::from_raw(width as u32, height as u32, pixels).expect("length checked above");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| IoError::Decode { path: path.to_path_buf(), reason: e.to_string() })
}
