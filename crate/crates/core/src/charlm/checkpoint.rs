//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "LFZCKPT\0"
//! version      u32      1
//! epoch        u64
//! loss         f64
//! vocab_len    u32
//! vocab        vocab_len bytes, in index order
//! num_layers   u32
//! hidden_size  u32
//! weights      f64 × N  per layer: wx, wh, b; then out_w, out_b (row-major)
//! ```
//!
//! The file must end exactly after the last weight.

use std::path::Path;

use super::params::{ModelParams, ModelShape};
use super::{Checkpoint, ModelError, Vocab};

pub const MAGIC: &[u8; 8] = b"LFZCKPT\0";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut out = Vec::with_capacity(64 + p.weights.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ckpt.epoch as u64).to_le_bytes());
    out.extend_from_slice(&ckpt.training_loss.to_le_bytes());
    out.extend_from_slice(&(p.vocab.len() as u32).to_le_bytes());
    out.extend_from_slice(p.vocab.chars());
    out.extend_from_slice(&(p.num_layers() as u32).to_le_bytes());
    out.extend_from_slice(&(p.hidden_size() as u32).to_le_bytes());
    for t in p.weights.tensors() {
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| ModelError::Corrupt(format!("truncated checkpoint at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(data: &[u8]) -> Result<Checkpoint, ModelError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(ModelError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Corrupt(format!("unsupported checkpoint version {version}")));
    }
    let epoch = r.u64()? as usize;
    let training_loss = r.f64()?;
    let vocab_len = r.u32()? as usize;
    if vocab_len == 0 || vocab_len > 256 {
        return Err(ModelError::Corrupt(format!("vocabulary size {vocab_len} out of range")));
    }
    let vocab = Vocab::from_chars(r.take(vocab_len)?.to_vec())?;
    let num_layers = r.u32()? as usize;
    let hidden_size = r.u32()? as usize;
    if num_layers == 0 || hidden_size == 0 {
        return Err(ModelError::Corrupt("zero model dimension".into()));
    }
    // Check the declared shape against the file length before allocating.
    let (v, h, l) = (vocab_len as u128, hidden_size as u128, num_layers as u128);
    let first = (v + h + 1) * 4 * h;
    let rest = (l - 1) * (2 * h + 1) * 4 * h;
    let needed = (first + rest + (h + 1) * v) * 8;
    if needed != (data.len() - r.pos) as u128 {
        return Err(ModelError::Corrupt("dimensions do not match file size".into()));
    }
    let mut params = ModelParams::zeros(vocab, ModelShape { hidden_size, num_layers });
    for t in params.weights.tensors_mut() {
        for x in &mut t.data {
            *x = r.f64()?;
        }
    }
    if r.pos != data.len() {
        return Err(ModelError::Corrupt(format!("{} trailing bytes after weights", data.len() - r.pos)));
    }
    if epoch == 0 || training_loss.is_nan() || training_loss < 0.0 {
        return Err(ModelError::Corrupt("invalid epoch or loss".into()));
    }
    Ok(Checkpoint { params, epoch, training_loss })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    decode_checkpoint(&std::fs::read(path)?)
}
