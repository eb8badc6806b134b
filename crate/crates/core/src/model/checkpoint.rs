//! Binary checkpoint: magic, u64 LE header length, JSON header, then raw
//! little-endian f64 tensor blocks in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{param_shapes, Model, ModelConfig};
use crate::data::{MaskMode, Vocab};
use crate::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"GCNREX1\n";
const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("checkpoint is truncated: {0}")]
    Truncated(String),
    #[error("checkpoint is inconsistent: {0}")]
    Inconsistent(String),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
    /// Offset in f64 values from the start of the data section.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    vocab: Vocab,
    mask: MaskMode,
    tensors: Vec<TensorEntry>,
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.to_string(), source }
}

pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<(), CheckpointError> {
    let mut offset = 0;
    let tensors = model
        .params
        .iter()
        .map(|(_, p)| {
            let e = TensorEntry { name: p.name.clone(), shape: p.value.shape().to_vec(), trainable: p.trainable, offset };
            offset += p.value.len();
            e
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        mask: model.mask,
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let io = io_err("<checkpoint>");
    w.write_all(MAGIC).map_err(&io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(&io)?;
    w.write_all(&json).map_err(&io)?;
    for (_, p) in model.params.iter() {
        for &x in p.value.data() {
            w.write_all(&x.to_le_bytes()).map_err(&io)?;
        }
    }
    w.flush().map_err(&io)
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::Truncated(what.to_string()),
        _ => CheckpointError::Io { path: "<checkpoint>".into(), source: e },
    })
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len = [0u8; 8];
    read_exact_or(&mut r, &mut len, "header length")?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(CheckpointError::Inconsistent(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    read_exact_or(&mut r, &mut json, "header")?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Version(header.format_version));
    }
    header.config.validate().map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;

    let v = &header.vocab;
    let expected = param_shapes(&header.config, v.words.len(), v.pos.len(), v.ner.len(), v.labels().len());
    if expected.len() != header.tensors.len() {
        return Err(CheckpointError::Inconsistent(format!(
            "expected {} tensors for this configuration, found {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    let mut store = ParamStore::new();
    let mut offset = 0;
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(CheckpointError::Inconsistent(format!(
                "tensor {} with shape {:?} where {name} with shape {shape:?} was expected",
                entry.name, entry.shape
            )));
        }
        if entry.offset != offset {
            return Err(CheckpointError::Inconsistent(format!("tensor {name} has offset {}, expected {offset}", entry.offset)));
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        read_exact_or(&mut r, &mut raw, &format!("data of tensor {name}"))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let value = Tensor::new(shape, data).map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
        store.insert(name, value, entry.trainable).map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
        offset += n;
    }
    let mut rest = [0u8; 1];
    match r.read(&mut rest) {
        Ok(0) => {}
        Ok(_) => return Err(CheckpointError::Inconsistent("trailing bytes after tensor data".into())),
        Err(e) => return Err(CheckpointError::Io { path: "<checkpoint>".into(), source: e }),
    }
    Ok(Model { config: header.config, vocab: header.vocab, mask: header.mask, params: store })
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    let shown = path.display().to_string();
    let file = File::create(path).map_err(io_err(&shown))?;
    write_checkpoint(model, BufWriter::new(file)).map_err(|e| relabel(e, &shown))
}

pub fn load_checkpoint(path: &Path) -> Result<Model, CheckpointError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(io_err(&shown))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| relabel(e, &shown))
}

fn relabel(e: CheckpointError, path: &str) -> CheckpointError {
    match e {
        CheckpointError::Io { source, .. } => CheckpointError::Io { path: path.to_string(), source },
        other => other,
    }
}
