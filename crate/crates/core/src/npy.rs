//! Minimal reader/writer for the NumPy `.npy` format, restricted to
//! little-endian `f32` arrays in C order.
//!
//! Layout of a version 1.0 file:
//!
//! ```text
//! \x93NUMPY  0x01 0x00  <u16 LE header length>  <header dict, space padded, '\n'>  <data>
//! ```
//!
//! The header dict is written exactly as NumPy writes it, e.g.
//! `{'descr': '<f4', 'fortran_order': False, 'shape': (3, 4), }`, padded so
//! that the data starts on a 64-byte boundary. Version 2.0 files (u32 header
//! length) are accepted on read.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;

/// A dense `f32` array with its shape, as stored in an `.npy` file.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("npy array", format!("{expected} elements"), data.len()));
        }
        Ok(Self { shape, data })
    }
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        _ => {
            let parts: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    }
}

/// Builds the complete v1.0 preamble (magic, version, length, padded dict).
pub fn header_bytes(shape: &[usize]) -> Vec<u8> {
    let dict = format!(
        "{{'descr': '<f4', 'fortran_order': False, 'shape': {}, }}",
        shape_literal(shape)
    );
    // preamble = 6 magic + 2 version + 2 length
    let unpadded = 10 + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + padding + 1;

    let mut out = Vec::with_capacity(10 + header_len);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padding));
    out.push(b'\n');
    out
}

pub fn write_to<W: Write>(writer: &mut W, shape: &[usize], data: &[f32]) -> io::Result<()> {
    writer.write_all(&header_bytes(shape))?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)
}

pub fn write_file(path: &Path, shape: &[usize], data: &[f32]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::shape(
            format!("npy write {}", path.display()),
            format!("{expected} elements"),
            data.len(),
        ));
    }
    let mut bytes = Vec::new();
    write_to(&mut bytes, shape, data).expect("writing to a Vec cannot fail");
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<NpyArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes).map_err(|reason| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn read_from<R: Read>(reader: &mut R) -> std::result::Result<NpyArray, String> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
    parse(&bytes)
}

/// Parses a complete `.npy` byte buffer.
pub fn parse(bytes: &[u8]) -> std::result::Result<NpyArray, String> {
    if bytes.len() < 10 || bytes[..6] != MAGIC {
        return Err("missing \\x93NUMPY magic".into());
    }
    let (header_len, dict_start) = match (bytes[6], bytes[7]) {
        (1, 0) => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        (2, 0) => {
            if bytes.len() < 12 {
                return Err("truncated v2 preamble".into());
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        (major, minor) => return Err(format!("unsupported format version {major}.{minor}")),
    };
    let data_start = dict_start + header_len;
    if bytes.len() < data_start {
        return Err("header length exceeds file size".into());
    }
    let dict = std::str::from_utf8(&bytes[dict_start..data_start])
        .map_err(|_| "header is not valid text".to_string())?;
    let shape = parse_dict(dict)?;

    let count: usize = shape.iter().product();
    let payload = &bytes[data_start..];
    if payload.len() != count * 4 {
        return Err(format!(
            "payload holds {} bytes, shape {:?} needs {}",
            payload.len(),
            shape,
            count * 4
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(NpyArray { shape, data })
}

fn dict_value<'a>(dict: &'a str, key: &str) -> std::result::Result<&'a str, String> {
    let needle = format!("'{key}':");
    let start = dict
        .find(&needle)
        .ok_or_else(|| format!("header lacks key '{key}'"))?
        + needle.len();
    Ok(dict[start..].trim_start())
}

fn parse_dict(dict: &str) -> std::result::Result<Vec<usize>, String> {
    let dict = dict.trim_end_matches(['\n', ' ', '\0']).trim();
    if !(dict.starts_with('{') && dict.ends_with('}')) {
        return Err("header is not a dict literal".into());
    }

    let descr = dict_value(dict, "descr")?;
    let descr = descr
        .strip_prefix('\'')
        .and_then(|s| s.split('\'').next())
        .ok_or("descr is not a string")?;
    if descr != "<f4" {
        return Err(format!("dtype '{descr}' is not '<f4'"));
    }

    let fortran = dict_value(dict, "fortran_order")?;
    if fortran.starts_with("True") {
        return Err("fortran_order arrays are not supported".into());
    } else if !fortran.starts_with("False") {
        return Err("fortran_order is not a boolean".into());
    }

    let shape = dict_value(dict, "shape")?;
    let inner = shape
        .strip_prefix('(')
        .and_then(|s| s.split(')').next())
        .ok_or("shape is not a tuple")?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse::<usize>().map_err(|_| format!("bad shape entry '{s}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_byte_aligned() {
        for shape in [vec![], vec![7], vec![3, 4], vec![5794, 512], vec![80, 2, 512]] {
            let h = header_bytes(&shape);
            assert_eq!(h.len() % 64, 0, "{shape:?}");
            assert_eq!(*h.last().unwrap(), b'\n');
        }
    }

    #[test]
    fn shape_literals_match_python_repr() {
        assert_eq!(shape_literal(&[]), "()");
        assert_eq!(shape_literal(&[5]), "(5,)");
        assert_eq!(shape_literal(&[0, 5]), "(0, 5)");
        assert_eq!(shape_literal(&[2, 1, 3]), "(2, 1, 3)");
    }

    #[test]
    fn rejects_wrong_dtype_and_order() {
        let mut bytes = header_bytes(&[1]);
        let pos = bytes.windows(3).position(|w| w == b"<f4").unwrap();
        bytes[pos + 2] = b'8';
        bytes.extend_from_slice(&[0; 8]);
        assert!(parse(&bytes).unwrap_err().contains("'<f8'"));

        let mut bytes = header_bytes(&[1]);
        let pos = bytes.windows(5).position(|w| w == b"False").unwrap();
        bytes[pos..pos + 5].copy_from_slice(b"True ");
        bytes.extend_from_slice(&[0; 4]);
        assert!(parse(&bytes).unwrap_err().contains("fortran"));
    }

    #[test]
    fn rejects_truncated_payload_and_bad_magic() {
        let mut bytes = header_bytes(&[2, 2]);
        bytes.extend_from_slice(&[0; 12]);
        assert!(parse(&bytes).unwrap_err().contains("payload"));
        assert!(parse(b"NUMPY\x01\x00").is_err());
    }

    #[test]
    fn reads_version_two() {
        let dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }\n";
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&[2, 0]);
        bytes.extend_from_slice(&(dict.len() as u32).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        let arr = parse(&bytes).unwrap();
        assert_eq!(arr.shape, vec![2]);
        assert_eq!(arr.data, vec![1.5, -2.0]);
    }
}
