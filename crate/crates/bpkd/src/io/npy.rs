//! v1.0 `.npy` tensor container reader/writer.
//!
//! Readers accept little-endian `<f4`/`<f8` payloads (floats are widened to
//! 64-bit) plus little-endian integer dtypes for 2-D label tensors. The
//! writer always emits `<f8`, C order, so a 64-bit save/load round trip is
//! bitwise identity.

use std::fs;
use std::path::Path;

use super::{DenseTensor, IoError, LabelMap};

pub(crate) const NPY_MAGIC: [u8; 6] = *b"\x93NUMPY";

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
    data_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, IoError> {
    let bad = |reason: &str| IoError::BadHeader { path: path.to_path_buf(), reason: reason.to_string() };
    if bytes.len() < 10 || bytes[..6] != NPY_MAGIC {
        return Err(IoError::BadMagic { path: path.to_path_buf() });
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(bad(&format!("unsupported container version {}.{}", bytes[6], bytes[7])));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_offset = 10 + header_len;
    if bytes.len() < data_offset {
        return Err(bad("truncated header"));
    }
    let dict = std::str::from_utf8(&bytes[10..data_offset]).map_err(|_| bad("header is not ASCII"))?;

    let descr = dict_str(dict, "descr").ok_or_else(|| bad("missing 'descr'"))?;
    let fortran_order = match dict_raw(dict, "fortran_order") {
        Some(v) if v.starts_with("True") => true,
        Some(v) if v.starts_with("False") => false,
        _ => return Err(bad("missing or malformed 'fortran_order'")),
    };
    let shape_src = dict_raw(dict, "shape").ok_or_else(|| bad("missing 'shape'"))?;
    if !shape_src.starts_with('(') {
        return Err(bad("'shape' is not a tuple"));
    }
    let close = shape_src.find(')').ok_or_else(|| bad("'shape' tuple is not closed"))?;
    let mut shape = Vec::new();
    for part in shape_src[1..close].split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        shape.push(part.parse::<usize>().map_err(|_| bad("non-integer extent in 'shape'"))?);
    }
    Ok(Header { descr, fortran_order, shape, data_offset })
}

fn dict_raw<'a>(dict: &'a str, key: &str) -> Option<&'a str> {
    let pat = format!("'{key}'");
    let at = dict.find(&pat)?;
    let rest = &dict[at + pat.len()..];
    let colon = rest.find(':')?;
    Some(rest[colon + 1..].trim_start())
}

fn dict_str(dict: &str, key: &str) -> Option<String> {
    let raw = dict_raw(dict, key)?;
    let quote = raw.chars().next().filter(|&c| c == '\'' || c == '"')?;
    let rest = &raw[1..];
    let end = rest.find(quote)?;
    Some(rest[..end].to_string())
}

fn element_count(path: &Path, shape: &[usize]) -> Result<usize, IoError> {
    let mut n = 1usize;
    for &e in shape {
        n = n.checked_mul(e).ok_or_else(|| IoError::BadHeader {
            path: path.to_path_buf(),
            reason: format!("shape {shape:?} overflows"),
        })?;
    }
    Ok(n)
}

/// Loads a float tensor container. 32-bit payloads are widened to 64-bit.
pub fn load_tensor(path: &Path) -> Result<DenseTensor, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let header = parse_header(path, &bytes)?;
    if header.fortran_order {
        return Err(IoError::FortranOrder { path: path.to_path_buf() });
    }
    let item_size = match header.descr.as_str() {
        "<f4" => 4,
        "<f8" => 8,
        _ => {
            return Err(IoError::NonFloatDtype { path: path.to_path_buf(), descr: header.descr })
        }
    };
    let count = element_count(path, &header.shape)?;
    let payload = &bytes[header.data_offset..];
    if payload.len() != count * item_size {
        return Err(IoError::SizeMismatch {
            path: path.to_path_buf(),
            expected_values: count,
            actual_bytes: payload.len(),
        });
    }
    let values: Vec<f64> = if item_size == 4 {
        payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    } else {
        payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect()
    };
    DenseTensor::new(header.shape, values).map_err(|e| match e {
        IoError::NonFinite { index, .. } => {
            IoError::NonFinite { path: Some(path.to_path_buf()), index }
        }
        other => other,
    })
}

/// Saves a tensor as a `<f8`, C-order v1.0 container. Output bytes are a
/// pure function of the tensor value.
pub fn save_tensor(tensor: &DenseTensor, path: &Path) -> Result<(), IoError> {
    let shape = tensor.shape();
    let tuple = if shape.len() == 1 {
        format!("({},)", shape[0])
    } else {
        let parts: Vec<String> = shape.iter().map(|e| e.to_string()).collect();
        format!("({})", parts.join(", "))
    };
    let dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {tuple}, }}");
    // Pad with spaces plus a trailing newline so the data start is 64-byte aligned.
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;

    let mut bytes = Vec::with_capacity(10 + header_len + tensor.values().len() * 8);
    bytes.extend_from_slice(&NPY_MAGIC);
    bytes.extend_from_slice(&[1, 0]);
    bytes.extend_from_slice(&(header_len as u16).to_le_bytes());
    bytes.extend_from_slice(dict.as_bytes());
    bytes.resize(bytes.len() + padding, b' ');
    bytes.push(b'\n');
    for v in tensor.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

/// Loads a 2-D integer container as a label map.
pub(crate) fn load_label_npy(path: &Path, bytes: &[u8]) -> Result<LabelMap, IoError> {
    let header = parse_header(path, bytes)?;
    if header.fortran_order {
        return Err(IoError::FortranOrder { path: path.to_path_buf() });
    }
    if header.shape.len() != 2 {
        return Err(IoError::LabelRank { path: path.to_path_buf(), rank: header.shape.len() });
    }
    let (item_size, signed): (usize, bool) = match header.descr.as_str() {
        "|u1" | "<u1" => (1, false),
        "|i1" | "<i1" => (1, true),
        "<u2" => (2, false),
        "<i2" => (2, true),
        "<u4" => (4, false),
        "<i4" => (4, true),
        "<u8" => (8, false),
        "<i8" => (8, true),
        "<f4" | "<f8" => {
            return Err(IoError::NonIntegerTensor { path: path.to_path_buf(), descr: header.descr })
        }
        _ => {
            return Err(IoError::UnsupportedDtype { path: path.to_path_buf(), descr: header.descr })
        }
    };
    let count = element_count(path, &header.shape)?;
    let payload = &bytes[header.data_offset..];
    if payload.len() != count * item_size {
        return Err(IoError::SizeMismatch {
            path: path.to_path_buf(),
            expected_values: count,
            actual_bytes: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(count);
    for (index, chunk) in payload.chunks_exact(item_size).enumerate() {
        let wide: i128 = match (item_size, signed) {
            (1, false) => chunk[0] as i128,
            (1, true) => chunk[0] as i8 as i128,
            (2, false) => u16::from_le_bytes([chunk[0], chunk[1]]) as i128,
            (2, true) => i16::from_le_bytes([chunk[0], chunk[1]]) as i128,
            (4, false) => u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as i128,
            (4, true) => i32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as i128,
            (8, false) => u64::from_le_bytes(chunk.try_into().unwrap()) as i128,
            _ => i64::from_le_bytes(chunk.try_into().unwrap()) as i128,
        };
        if wide < 0 || wide > u32::MAX as i128 {
            return Err(IoError::LabelValue { path: path.to_path_buf(), index, value: wide });
        }
        values.push(wide as u32);
    }
    LabelMap::new(header.shape[0], header.shape[1], values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::load_label_map;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tmp();
        let path = dir.path().join("t.npy");
        let t = DenseTensor::new(vec![1], vec![0.5]).unwrap();
        save_tensor(&t, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tmp();
        let path = dir.path().join("t.npy");
        // Values chosen to exercise sign, subnormal, and negative zero bits.
        let values = vec![
            -0.0,
            f64::MIN_POSITIVE / 4.0,
            1.0 + f64::EPSILON,
            -123.456e300,
            3.0,
            -7.25,
            1e-300,
            0.1,
            2.0f64.powi(-60),
            9.0,
            -1.5,
            42.0,
        ];
        let t = DenseTensor::new(vec![3, 2, 2], values).unwrap();
        save_tensor(&t, &path).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.values().iter().zip(t.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reads_sequential_values() {
        let dir = tmp();
        let path = dir.path().join("seq.npy");
        let values: Vec<f64> = (0..18).map(f64::from).collect();
        save_tensor(&DenseTensor::new(vec![2, 3, 3], values.clone()).unwrap(), &path).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.shape(), &[2, 3, 3]);
        assert_eq!(back.values(), values.as_slice());
    }

    #[test]
    fn f32_payload_is_widened() {
        let dir = tmp();
        let path = dir.path().join("f32.npy");
        let dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        fs::write(&path, bytes).unwrap();
        let t = load_tensor(&path).unwrap();
        assert_eq!(t.values(), &[0.5, -2.0]);
    }

    #[test]
    fn rejects_nan_payload() {
        let dir = tmp();
        let path = dir.path().join("nan.npy");
        let dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&f64::NAN.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        match load_tensor(&path) {
            Err(IoError::NonFinite { index: 0, .. }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn rejects_size_mismatch() {
        let dir = tmp();
        let path = dir.path().join("short.npy");
        let dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        for v in [1.0f64, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        match load_tensor(&path) {
            Err(IoError::SizeMismatch { expected_values: 4, .. }) => {}
            other => panic!("expected SizeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn rejects_fortran_order_and_bad_magic() {
        let dir = tmp();
        let path = dir.path().join("f.npy");
        let dict = "{'descr': '<f8', 'fortran_order': True, 'shape': (1,), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_tensor(&path), Err(IoError::FortranOrder { .. })));

        let bad = dir.path().join("bad.npy");
        fs::write(&bad, b"\x93NUMPZ garbage").unwrap();
        assert!(matches!(load_tensor(&bad), Err(IoError::BadMagic { .. })));
    }

    #[test]
    fn rejects_integer_dtype_for_float_load() {
        let dir = tmp();
        let path = dir.path().join("int.npy");
        let dict = "{'descr': '<i4', 'fortran_order': False, 'shape': (1,), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&5i32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_tensor(&path), Err(IoError::NonFloatDtype { .. })));
    }

    #[test]
    fn label_npy_loads_and_validates() {
        let dir = tmp();
        let path = dir.path().join("labels.npy");
        let dict = "{'descr': '|u1', 'fortran_order': False, 'shape': (2, 2), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&[0, 1, 255, 1]);
        fs::write(&path, bytes).unwrap();
        let labels = load_label_map(&path).unwrap();
        assert_eq!(labels.values(), &[0, 1, 255, 1]);

        let float_path = dir.path().join("float_labels.npy");
        save_tensor(&DenseTensor::new(vec![2, 2], vec![0.0; 4]).unwrap(), &float_path).unwrap();
        assert!(matches!(load_label_map(&float_path), Err(IoError::NonIntegerTensor { .. })));

        let signed = dir.path().join("neg.npy");
        let dict = "{'descr': '<i4', 'fortran_order': False, 'shape': (1, 2), }";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&3i32.to_le_bytes());
        bytes.extend_from_slice(&(-1i32).to_le_bytes());
        fs::write(&signed, bytes).unwrap();
        assert!(matches!(load_label_map(&signed), Err(IoError::LabelValue { index: 1, .. })));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tmp();
        let path = dir.path().join("trunc.npy");
        let full = dir.path().join("full.npy");
        save_tensor(&DenseTensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), &full).unwrap();
        let bytes = fs::read(&full).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load_tensor(&path).is_err());
    }

    #[test]
    fn save_to_invalid_location_reports_path() {
        let dir = tmp();
        let file = dir.path().join("plain.txt");
        fs::write(&file, b"x").unwrap();
        let path = file.join("nested.npy");
        let err = save_tensor(&DenseTensor::new(vec![1], vec![1.0]).unwrap(), &path).unwrap_err();
        assert!(err.to_string().contains("nested.npy"));
    }
}
