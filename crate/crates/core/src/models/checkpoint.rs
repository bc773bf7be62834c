//! Binary checkpoint files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "KGLITCKP"
//! version      u32      (currently 1)
//! config_hash  u32 length + UTF-8 bytes
//! model        u32 length + UTF-8 bytes (model name)
//! dims         6 x u64  entities, relations, attrs, dim, relation_dim, hidden
//! tables       u32 count, then per table:
//!                u32 length + UTF-8 name
//!                u8 trainable
//!                u64 rows, u64 cols
//!                rows * cols f64, row-major
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{ModelDims, ModelKind, ModelState, Param};
use crate::error::{KgError, Result};

pub const MAGIC: &[u8; 8] = b"KGLITCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub state: ModelState,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(state: &ModelState, config_hash: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut buf, config_hash);
    put_str(&mut buf, state.kind().name());
    let d = state.dims();
    for v in [d.num_entities, d.num_relations, d.num_attrs, d.dim, d.relation_dim, d.hidden] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(state.params().len() as u32).to_le_bytes());
    for p in state.params() {
        put_str(&mut buf, p.name);
        buf.push(p.trainable as u8);
        buf.extend_from_slice(&(p.value.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(p.value.ncols() as u64).to_le_bytes());
        for v in p.value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| KgError::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| KgError::Checkpoint("size overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| KgError::Checkpoint("invalid UTF-8 in checkpoint".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(KgError::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(KgError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let config_hash = r.string()?;
    let kind: ModelKind = r
        .string()?
        .parse()
        .map_err(|e: KgError| KgError::Checkpoint(e.to_string()))?;
    let dims = ModelDims {
        num_entities: r.u64()?,
        num_relations: r.u64()?,
        num_attrs: r.u64()?,
        dim: r.u64()?,
        relation_dim: r.u64()?,
        hidden: r.u64()?,
    };
    let count = r.u32()? as usize;
    let names = kind.table_names();
    if count != names.len() {
        return Err(KgError::Checkpoint(format!(
            "{kind} expects {} tables, found {count}",
            names.len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for &expected in names {
        let name = r.string()?;
        if name != expected {
            return Err(KgError::Checkpoint(format!("expected table {expected}, found {name}")));
        }
        let trainable = r.u8()? != 0;
        let (rows, cols) = (r.u64()?, r.u64()?);
        let len = rows
            .checked_mul(cols)
            .filter(|&n| n.saturating_mul(8) <= bytes.len())
            .ok_or_else(|| KgError::Checkpoint(format!("table {name} is too large")))?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let value = Array2::from_shape_vec((rows, cols), data).expect("length matches shape");
        params.push(Param {
            name: expected,
            value,
            trainable,
        });
    }
    if r.pos != bytes.len() {
        return Err(KgError::Checkpoint("trailing bytes after checkpoint".into()));
    }
    let state = ModelState::from_parts(kind, dims, params)?;
    Ok(Checkpoint { config_hash, state })
}

pub fn save_checkpoint(path: &Path, state: &ModelState, config_hash: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| KgError::io(dir, e))?;
    }
    fs::write(path, encode(state, config_hash)).map_err(|e| KgError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| KgError::io(path, e))?;
    decode(&bytes)
}
