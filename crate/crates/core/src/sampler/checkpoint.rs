//! Resumable training state. Random streams are keyed by iteration, so the
//! model, the thinned counts and the posterior sums are all that is needed
//! to continue a run exactly.

use std::path::Path;

use super::allocation::CountAllocation;
use super::summary::Accumulator;
use crate::config::write_atomic;
use crate::error::{Error, Result};
use crate::model::format::{Decoder, Encoder};
use crate::model::PacoModel;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PACOCKP\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Digest of the training-relevant configuration.
    pub config_hash: String,
    /// Digest of the training corpus file.
    pub corpus_hash: String,
    /// Completed iterations.
    pub iteration: u64,
    pub model: PacoModel,
    pub allocation: CountAllocation,
    pub accumulator: Accumulator,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(CHECKPOINT_MAGIC);
        e.u32(CHECKPOINT_VERSION);
        e.str(&self.config_hash);
        e.str(&self.corpus_hash);
        e.u64(self.iteration);
        e.bytes(&self.model.to_bytes());
        e.u32(self.allocation.slots() as u32);
        e.u64(self.allocation.n_reviews() as u64);
        for row in self.allocation.rows() {
            e.u64(row.len() as u64);
            e.u32s(row);
        }
        e.bytes(&serde_json::to_vec(&self.accumulator).expect("accumulator serialises"));
        e.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        if d.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad format: not a checkpoint file".into()));
        }
        let version = d.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let config_hash = d.string()?;
        let corpus_hash = d.string()?;
        let iteration = d.u64()?;
        let model = PacoModel::from_bytes(d.bytes()?)?;
        let slots = d.u32()? as usize;
        let n = d.u64()? as usize;
        let mut rows = Vec::with_capacity(n.min(bytes.len()));
        for _ in 0..n {
            let len = d.u64()? as usize;
            if len > bytes.len() {
                return Err(Error::Format("allocation row length exceeds file size".into()));
            }
            rows.push(d.u32s(len)?);
        }
        let accumulator = serde_json::from_slice(d.bytes()?)
            .map_err(|e| Error::Format(format!("checkpoint accumulator: {e}")))?;
        if !d.finished() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint {
            config_hash,
            corpus_hash,
            iteration,
            model,
            allocation: CountAllocation::from_parts(slots, rows),
            accumulator,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
