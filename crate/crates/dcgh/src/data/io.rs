//! On-disk formats for feature, label, and split files.
//!
//! Feature file (little-endian): magic `DCGHFEAT`, version u32=1, N u64,
//! d u64, then N·d f32 row-major. Label file: magic `DCGHLABL`, version
//! u32=1, N u64, C u64, then N·C bytes in {0,1} row-major. Split file:
//! plain text, one index list per line prefixed `train:`, `query:`,
//! `retrieval:`.

use super::{DatasetSplit, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub(crate) const FEATURE_MAGIC: &[u8; 8] = b"DCGHFEAT";
pub(crate) const LABEL_MAGIC: &[u8; 8] = b"DCGHLABL";
pub(crate) const FORMAT_VERSION: u32 = 1;

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn read_magic(
    r: &mut impl Read,
    expected: &'static [u8; 8],
    file: &str,
) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| truncated(e, file, "magic"))?;
    if &magic != expected {
        return Err(Error::BadMagic {
            file: file.to_string(),
            expected: std::str::from_utf8(expected).unwrap(),
        });
    }
    Ok(())
}

pub(crate) fn read_version(r: &mut impl Read, file: &str) -> Result<()> {
    let v = read_u32(r, file, "version")?;
    if v != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            file: file.to_string(),
            found: v,
        });
    }
    Ok(())
}

fn truncated(e: std::io::Error, file: &str, context: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Truncated {
            file: file.to_string(),
            context: context.to_string(),
        }
    } else {
        Error::Io(e)
    }
}

pub(crate) fn read_u32(r: &mut impl Read, file: &str, context: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| truncated(e, file, context))?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_u64(r: &mut impl Read, file: &str, context: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| truncated(e, file, context))?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn checked_len(n: u64, m: u64, file: &str) -> Result<usize> {
    n.checked_mul(m)
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::Truncated {
            file: file.to_string(),
            context: format!("declared size {n}x{m} overflows"),
        })
}

pub(crate) fn expect_eof(r: &mut impl Read, file: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::TrailingBytes {
            file: file.to_string(),
        }),
    }
}

/// Write a feature matrix to `path`.
pub fn save_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.dim() as u64).to_le_bytes())?;
    for v in m.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Load a feature matrix, validating magic, version, payload size, and
/// finiteness of every entry.
pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let file = display(path);
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, FEATURE_MAGIC, &file)?;
    read_version(&mut r, &file)?;
    let n = read_u64(&mut r, &file, "row count")?;
    let d = read_u64(&mut r, &file, "dimension")?;
    let len = checked_len(n, d, &file)?;
    let mut values = Vec::with_capacity(len);
    let mut buf = [0u8; 4];
    for i in 0..len {
        r.read_exact(&mut buf).map_err(|e| {
            truncated(e, &file, &format!("value {i} of {len}"))
        })?;
        values.push(f32::from_le_bytes(buf));
    }
    expect_eof(&mut r, &file)?;
    FeatureMatrix::from_values(n as usize, d as usize, values)
}

/// Write a label matrix to `path`.
pub fn save_labels(path: &Path, labels: &LabelMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_labels_to(&mut w, labels)?;
    w.flush()?;
    Ok(())
}

/// Serialize a label matrix into any writer (also used inside code files).
pub fn write_labels_to(w: &mut impl Write, labels: &LabelMatrix) -> Result<()> {
    w.write_all(LABEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(labels.rows() as u64).to_le_bytes())?;
    w.write_all(&(labels.categories() as u64).to_le_bytes())?;
    w.write_all(labels.bits())?;
    Ok(())
}

/// Load a label matrix, validating the {0,1} domain and the
/// at-least-one-label-per-row rule.
pub fn load_labels(path: &Path) -> Result<LabelMatrix> {
    let file = display(path);
    let mut r = BufReader::new(File::open(path)?);
    let labels = read_labels_from(&mut r, &file)?;
    expect_eof(&mut r, &file)?;
    Ok(labels)
}

/// Deserialize a label matrix from any reader (also used inside code files).
pub fn read_labels_from(r: &mut impl Read, file: &str) -> Result<LabelMatrix> {
    read_magic(r, LABEL_MAGIC, file)?;
    read_version(r, file)?;
    let n = read_u64(r, file, "row count")?;
    let c = read_u64(r, file, "category count")?;
    let len = checked_len(n, c, file)?;
    let mut bits = vec![0u8; len];
    r.read_exact(&mut bits)
        .map_err(|e| truncated(e, file, "label payload"))?;
    LabelMatrix::from_values(n as usize, c as usize, bits)
}

/// Write a split as structured text.
pub fn save_split(path: &Path, split: &DatasetSplit) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (name, list) in [
        ("train", &split.train),
        ("query", &split.query),
        ("retrieval", &split.retrieval),
    ] {
        let joined: Vec<String> = list.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{name}: {}", joined.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a split file; requires all three lists exactly once.
pub fn load_split(path: &Path) -> Result<DatasetSplit> {
    let text = std::fs::read_to_string(path)?;
    let mut train = None;
    let mut query = None;
    let mut retrieval = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, rest) = line.split_once(':').ok_or_else(|| {
            Error::InvalidSplit(format!("line without prefix: {line:?}"))
        })?;
        let list: Vec<usize> = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::InvalidSplit(format!("bad index {tok:?}")))
            })
            .collect::<Result<_>>()?;
        let slot = match name.trim() {
            "train" => &mut train,
            "query" => &mut query,
            "retrieval" => &mut retrieval,
            other => {
                return Err(Error::InvalidSplit(format!("unknown list {other:?}")));
            }
        };
        if slot.replace(list).is_some() {
            return Err(Error::InvalidSplit(format!("duplicate list {name:?}")));
        }
    }
    match (train, query, retrieval) {
        (Some(train), Some(query), Some(retrieval)) => Ok(DatasetSplit {
            train,
            query,
            retrieval,
        }),
        _ => Err(Error::InvalidSplit(
            "missing one of train/query/retrieval".to_string(),
        )),
    }
}
