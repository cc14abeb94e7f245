//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | field        | encoding                                   |
//! |--------------|--------------------------------------------|
//! | magic        | 8 bytes, `MVDISCK\0`                       |
//! | version      | u32, currently 1                           |
//! | config       | u32 byte length, then UTF-8 TOML           |
//! | view dims    | u32 count, then one u64 per view           |
//! | entries      | u32 count, then per entry:                 |
//! |              | u32 name length, UTF-8 name,               |
//! |              | u64 rows, u64 cols, rows*cols f64 values   |

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::params::{ModelParams, NamedParams};
use crate::autodiff::Matrix;
use crate::config::TrainConfig;

pub const MAGIC: &[u8; 8] = b"MVDISCK\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is malformed: {0}")]
    Malformed(String),
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    params: &ModelParams,
    config: &TrainConfig,
) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let cfg = config.to_toml_string();
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(cfg.as_bytes())?;
    w.write_all(&(params.view_dims.len() as u32).to_le_bytes())?;
    for d in &params.view_dims {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    let named = params.named();
    w.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, m) in named {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for x in m.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R, len: usize) -> Result<String, CheckpointError> {
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| CheckpointError::Malformed("non-UTF-8 text".into()))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ModelParams, TrainConfig), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let cfg_len = read_u32(&mut r)? as usize;
    let config = TrainConfig::from_toml_str(&read_string(&mut r, cfg_len)?)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let views = read_u32(&mut r)? as usize;
    let view_dims = (0..views)
        .map(|_| read_u64(&mut r).map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let count = read_u32(&mut r)? as usize;
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let name = read_string(&mut r, name_len)?;
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        entries.insert(name, Matrix::new(rows, cols, data).expect("sized"));
    }

    let mut params = ModelParams::init(&config, &view_dims, 0)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let mut seen = 0;
    for (name, slot) in params.named_params_mut() {
        let m = entries
            .get(&name)
            .ok_or_else(|| CheckpointError::Malformed(format!("missing entry {name}")))?;
        if m.shape() != slot.shape() {
            return Err(CheckpointError::Malformed(format!(
                "entry {name} is {:?}, expected {:?}",
                m.shape(),
                slot.shape()
            )));
        }
        *slot = m.clone();
        seen += 1;
    }
    if seen != entries.len() {
        return Err(CheckpointError::Malformed(
            "unexpected extra entries".into(),
        ));
    }
    Ok((params, config))
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    config: &TrainConfig,
) -> Result<(), CheckpointError> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(f, params, config)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, TrainConfig), CheckpointError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
