//! Checkpoint file: both heads, the proxy bank, and the optimizer state.
//!
//! Layout (little-endian): magic `DCGHCKPT`, version u32=1, then d, K, C as
//! u64, then W_x (d·K), b_x (K), W_y (d·K), b_y (K), P (C·K) as f32 arrays,
//! then the Adam state: beta1/beta2/eps as f64, step u64, and per tensor (in
//! the same order as above) its first- and second-moment f32 arrays.
//! Save/load round-trips bit-exactly; writes go through a temp file and an
//! atomic rename.

use crate::data::io::{expect_eof, read_magic, read_u32, read_u64};
use crate::error::{Error, Result};
use crate::model::{HashHead, ProxyBank};
use crate::trainer::AdamState;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const CHECKPOINT_MAGIC: &[u8; 8] = b"DCGHCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub head_x: HashHead,
    pub head_y: HashHead,
    pub proxies: ProxyBank,
    pub adam: AdamState,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Checkpoint {
    pub fn new(
        head_x: HashHead,
        head_y: HashHead,
        proxies: ProxyBank,
        adam: AdamState,
        adam_beta1: f64,
        adam_beta2: f64,
        adam_eps: f64,
    ) -> Self {
        Self {
            head_x,
            head_y,
            proxies,
            adam,
            adam_beta1,
            adam_beta2,
            adam_eps,
        }
    }
}

fn write_f32s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, len: usize, file: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 4];
    for i in 0..len {
        r.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    file: file.to_string(),
                    context: format!("f32 value {i} of {len}"),
                }
            } else {
                Error::Io(e)
            }
        })?;
        out.push(f32::from_le_bytes(buf) as f64);
    }
    Ok(out)
}

fn read_f64(r: &mut impl Read, file: &str, context: &str) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                file: file.to_string(),
                context: context.to_string(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    Ok(f64::from_le_bytes(buf))
}

/// Write a checkpoint atomically (temp file + rename).
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let d = ckpt.head_x.input_dim();
    let k = ckpt.head_x.code_length();
    let c = ckpt.proxies.categories();
    if ckpt.head_y.input_dim() != d || ckpt.head_y.code_length() != k {
        return Err(Error::dim(
            "head_y shape",
            d * k,
            ckpt.head_y.weights().len(),
        ));
    }
    if ckpt.adam.tensors() != 5 {
        return Err(Error::InvalidConfig(format!(
            "checkpoint expects 5 optimizer tensors, got {}",
            ckpt.adam.tensors()
        )));
    }

    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(d as u64).to_le_bytes())?;
        w.write_all(&(k as u64).to_le_bytes())?;
        w.write_all(&(c as u64).to_le_bytes())?;
        write_f32s(&mut w, ckpt.head_x.weights())?;
        write_f32s(&mut w, ckpt.head_x.bias())?;
        write_f32s(&mut w, ckpt.head_y.weights())?;
        write_f32s(&mut w, ckpt.head_y.bias())?;
        write_f32s(&mut w, ckpt.proxies.values())?;
        w.write_all(&ckpt.adam_beta1.to_le_bytes())?;
        w.write_all(&ckpt.adam_beta2.to_le_bytes())?;
        w.write_all(&ckpt.adam_eps.to_le_bytes())?;
        w.write_all(&ckpt.adam.step_count().to_le_bytes())?;
        for t in 0..5 {
            let (m, v) = ckpt.adam.moments(t);
            write_f32s(&mut w, m)?;
            write_f32s(&mut w, v)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Load a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, CHECKPOINT_MAGIC, &file)?;
    let version = read_u32(&mut r, &file, "version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            file,
            found: version,
        });
    }
    let d = read_u64(&mut r, &file, "input dim")? as usize;
    let k = read_u64(&mut r, &file, "code length")? as usize;
    let c = read_u64(&mut r, &file, "category count")? as usize;
    let wx = read_f32s(&mut r, d * k, &file)?;
    let bx = read_f32s(&mut r, k, &file)?;
    let wy = read_f32s(&mut r, d * k, &file)?;
    let by = read_f32s(&mut r, k, &file)?;
    let p = read_f32s(&mut r, c * k, &file)?;
    let beta1 = read_f64(&mut r, &file, "adam beta1")?;
    let beta2 = read_f64(&mut r, &file, "adam beta2")?;
    let eps = read_f64(&mut r, &file, "adam eps")?;
    let step = read_u64(&mut r, &file, "adam step")?;
    let sizes = [d * k, k, d * k, k, c * k];
    let mut m = Vec::with_capacity(5);
    let mut v = Vec::with_capacity(5);
    for &size in &sizes {
        m.push(read_f32s(&mut r, size, &file)?);
        v.push(read_f32s(&mut r, size, &file)?);
    }
    expect_eof(&mut r, &file)?;

    Ok(Checkpoint {
        head_x: HashHead::from_parts(d, k, wx, bx)?,
        head_y: HashHead::from_parts(d, k, wy, by)?,
        proxies: ProxyBank::from_values(c, k, p)?,
        adam: AdamState::from_parts(beta1, beta2, eps, step, m, v),
        adam_beta1: beta1,
        adam_beta2: beta2,
        adam_eps: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::trainer::{train, TrainConfig};
    use tempfile::tempdir;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let data = generate_synthetic(&SyntheticConfig {
            n_per_class: 4,
            classes: 2,
            dim: 6,
            multi_label_rate: 0.25,
            noise_sigma: 0.2,
            seed: 3,
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            code_length: 8,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &data.features_x, &data.features_y, &data.labels).unwrap();
        let ckpt = Checkpoint::new(
            out.head_x,
            out.head_y,
            out.proxies,
            out.adam,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
        );

        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &ckpt).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded).unwrap();
        let bytes2 = std::fs::read(&path2).unwrap();
        assert_eq!(bytes1, bytes2);
        assert_eq!(loaded.adam.step_count(), ckpt.adam.step_count());
    }

    #[test]
    fn load_rejects_bad_magic_and_truncation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, b"WRONGMAGxxxx").unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::BadMagic { .. }
        ));
        std::fs::write(&path, b"DCGHCKPT").unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::Truncated { .. }
        ));
    }
}
