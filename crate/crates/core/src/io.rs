//! Embedding files (CSV and the `KENF` binary layout) and JSON reports.
//!
//! `KENF` layout, all little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "KENF"
//! 4       4           dim   (u32)
//! 8       8           count (u64)
//! 16      8*count*dim row-major f64 values
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::novelty::NoveltyReport;

pub const KENF_MAGIC: [u8; 4] = *b"KENF";
const KENF_HEADER_LEN: u64 = 16;

fn label_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a comma-separated file of numeric rows.
///
/// The first row is treated as a header, and skipped, only when its first
/// cell does not parse as a number. Blank lines are ignored.
pub fn load_csv(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_for(path))
}

pub fn parse_csv(text: &str, label: impl Into<String>) -> Result<EmbeddingSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    if let Some((_, first)) = lines.peek() {
        let first_cell = first.split(',').next().unwrap_or("").trim();
        if first_cell.parse::<f64>().is_err() {
            lines.next();
        }
    }

    let mut dim = None;
    let mut data = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *dim.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::RaggedRow {
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        for (col, token) in fields.iter().enumerate() {
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col + 1,
                        token: token.to_string(),
                    })
                }
            }
        }
    }

    match dim {
        Some(dim) => EmbeddingSet::new(label, dim, data),
        None => Err(Error::EmptyInput("no data rows".into())),
    }
}

pub fn write_csv(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(set.as_slice().len() * 20);
    for row in set.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // `{:?}` prints the shortest string that parses back to the same f64.
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_kenf(&bytes, label_for(path))
}

pub fn decode_kenf(bytes: &[u8], label: impl Into<String>) -> Result<EmbeddingSet> {
    if bytes.len() >= 4 && bytes[..4] != KENF_MAGIC {
        return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
    }
    if (bytes.len() as u64) < KENF_HEADER_LEN {
        return Err(Error::Length {
            expected: KENF_HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(KENF_HEADER_LEN))
        .ok_or_else(|| Error::InvalidSet(format!("header declares {count}x{dim} values")))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len() as u64,
        });
    }
    if dim == 0 {
        return Err(Error::InvalidSet("dimension must be at least 1".into()));
    }
    let data = bytes[KENF_HEADER_LEN as usize..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingSet::new(label, dim as usize, data)
}

pub fn encode_kenf(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(KENF_HEADER_LEN as usize + 8 * set.as_slice().len());
    out.extend_from_slice(&KENF_MAGIC);
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(set.count() as u64).to_le_bytes());
    for v in set.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_binary(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_kenf(set)).map_err(|e| Error::io(path, e))
}

/// Loads either format, deciding by the leading magic bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&KENF_MAGIC) {
        decode_kenf(&bytes, label_for(path))
    } else {
        let text = String::from_utf8(bytes).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            )
        })?;
        parse_csv(&text, label_for(path))
    }
}

pub fn report_to_json(report: &NoveltyReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_report(report: &NoveltyReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = report_to_json(report)?;
    json.push('\n');
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(json.as_bytes())
        .map_err(|e| Error::io(path, e))
}
