//! Sign quantization and bit-packed binary codes.
//!
//! Codes live in {-1, +1}^K and are stored packed into 64-bit words, bit 1
//! for +1 and bit 0 for -1, LSB-first within each word. With that encoding
//! Hamming distance is XOR + popcount and the ±1 inner product is
//! `K - 2 * distance`. The tie `value == 0` quantizes to +1 so encoding is
//! deterministic.

use crate::data::{io, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::model::{BinaryLikeCodes, ForwardMode, HashHead};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const CODE_MAGIC: &[u8; 8] = b"DCGHCODE";
const VERSION: u32 = 1;

/// Bit-packed ±1 codes, one row per sample. Padding bits beyond K are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodeMatrix {
    rows: usize,
    code_length: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BinaryCodeMatrix {
    pub fn from_words(rows: usize, code_length: usize, words: Vec<u64>) -> Result<Self> {
        if code_length == 0 {
            return Err(Error::dim("code length", 1, 0));
        }
        let words_per_row = code_length.div_ceil(64);
        if words.len() != rows * words_per_row {
            return Err(Error::dim(
                "packed words length",
                rows * words_per_row,
                words.len(),
            ));
        }
        // padding bits must be zero
        let tail_bits = code_length % 64;
        if tail_bits != 0 {
            let mask = !((1u64 << tail_bits) - 1);
            for r in 0..rows {
                if words[r * words_per_row + words_per_row - 1] & mask != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "row {r} has nonzero padding bits"
                    )));
                }
            }
        }
        Ok(Self {
            rows,
            code_length,
            words_per_row,
            words,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn word_row(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Expand row `i` back to ±1 values.
    pub fn unpack_row(&self, i: usize) -> Vec<i8> {
        let row = self.word_row(i);
        (0..self.code_length)
            .map(|k| {
                if row[k / 64] >> (k % 64) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    /// Pack rows of ±1 values.
    pub fn pack_rows(code_length: usize, rows: &[Vec<i8>]) -> Result<Self> {
        let words_per_row = code_length.div_ceil(64);
        let mut words = vec![0u64; rows.len() * words_per_row];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != code_length {
                return Err(Error::dim("code row length", code_length, row.len()));
            }
            for (k, &v) in row.iter().enumerate() {
                match v {
                    1 => words[i * words_per_row + k / 64] |= 1u64 << (k % 64),
                    -1 => {}
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "code entry must be ±1, got {other}"
                        )))
                    }
                }
            }
        }
        Self::from_words(rows.len(), code_length, words)
    }
}

/// Quantize binary-like codes to packed ±1 codes: positive entries (and
/// exact zeros) map to +1, negative entries to -1.
pub fn sign_quantize(codes: &BinaryLikeCodes) -> BinaryCodeMatrix {
    let k = codes.code_length();
    let words_per_row = k.div_ceil(64);
    let mut words = vec![0u64; codes.rows() * words_per_row];
    for i in 0..codes.rows() {
        for (j, &v) in codes.row(i).iter().enumerate() {
            debug_assert!(v.is_finite());
            if v >= 0.0 {
                words[i * words_per_row + j / 64] |= 1u64 << (j % 64);
            }
        }
    }
    BinaryCodeMatrix {
        rows: codes.rows(),
        code_length: k,
        words_per_row,
        words,
    }
}

/// Eval-mode forward pass followed by sign quantization.
pub fn encode_dataset(head: &HashHead, features: &FeatureMatrix) -> Result<BinaryCodeMatrix> {
    let codes = head.forward(features, ForwardMode::Eval)?;
    Ok(sign_quantize(&codes))
}

/// Write packed codes and the labels of the encoded rows to one file so the
/// retrieval evaluator is self-contained.
pub fn save_codes(path: &Path, codes: &BinaryCodeMatrix, labels: &LabelMatrix) -> Result<()> {
    if labels.rows() != codes.rows() {
        return Err(Error::dim("code labels rows", codes.rows(), labels.rows()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CODE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(codes.rows() as u64).to_le_bytes())?;
    w.write_all(&(codes.code_length() as u64).to_le_bytes())?;
    for word in &codes.words {
        w.write_all(&word.to_le_bytes())?;
    }
    io::write_labels_to(&mut w, labels)?;
    w.flush()?;
    Ok(())
}

/// Read a code file back into packed codes plus labels.
pub fn load_codes(path: &Path) -> Result<(BinaryCodeMatrix, LabelMatrix)> {
    let file = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    io::read_magic(&mut r, CODE_MAGIC, &file)?;
    io::read_version(&mut r, &file)?;
    let rows = io::read_u64(&mut r, &file, "row count")? as usize;
    let k = io::read_u64(&mut r, &file, "code length")? as usize;
    if k == 0 {
        return Err(Error::dim("code length", 1, 0));
    }
    let words_per_row = k.div_ceil(64);
    let total = io::checked_len(rows as u64, words_per_row as u64, &file)?;
    let mut words = Vec::with_capacity(total);
    let mut buf = [0u8; 8];
    for i in 0..total {
        use std::io::Read;
        r.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    file: file.clone(),
                    context: format!("packed word {i} of {total}"),
                }
            } else {
                Error::Io(e)
            }
        })?;
        words.push(u64::from_le_bytes(buf));
    }
    let codes = BinaryCodeMatrix::from_words(rows, k, words)?;
    let labels = io::read_labels_from(&mut r, &file)?;
    io::expect_eof(&mut r, &file)?;
    if labels.rows() != codes.rows() {
        return Err(Error::dim("code labels rows", codes.rows(), labels.rows()));
    }
    Ok((codes, labels))
}
