//! Binary model files: magic, format version, a JSON header, then every
//! tensor as raw little-endian floats at the declared precision.

use std::io::{Read, Write};
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser_core::model::{ParserModel, Precision, TrainConfig};
use crate::parser_core::tape::{ParamStore, Tensor};
use crate::tree_codec::{Instruction, Vocabulary};

pub const MAGIC: &[u8; 8] = b"NLUCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("tensors do not match the declared configuration")]
    Shape,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    precision: Precision,
    symbols: Vec<Instruction>,
    context_vocab: Vec<String>,
    tensors: Vec<TensorInfo>,
}

pub fn to_bytes(m: &ParserModel) -> Vec<u8> {
    let header = Header {
        config: m.config.clone(),
        precision: m.precision,
        symbols: m.vocab.symbols().to_vec(),
        context_vocab: m.context_vocab.clone(),
        tensors: m
            .params
            .iter()
            .map(|(name, t)| TensorInfo {
                name: name.to_string(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in m.params.iter() {
        for &x in &t.data {
            match m.precision {
                Precision::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
                Precision::F16 => out.extend_from_slice(&f16::from_f64(x).to_le_bytes()),
            }
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Io(std::io::ErrorKind::UnexpectedEof.into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<ParserModel, CheckpointError> {
    if take(&mut bytes, 8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(&mut bytes, len)?)?;
    let width = match header.precision {
        Precision::F32 => 4,
        Precision::F16 => 2,
    };
    let mut params = ParamStore::default();
    for info in &header.tensors {
        let raw = take(&mut bytes, info.rows * info.cols * width)?;
        let data = raw
            .chunks_exact(width)
            .map(|c| match header.precision {
                Precision::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
                Precision::F16 => f16::from_le_bytes(c.try_into().unwrap()).to_f64(),
            })
            .collect();
        params.add(info.name.clone(), Tensor::from_vec(info.rows, info.cols, data));
    }
    if !bytes.is_empty() {
        return Err(CheckpointError::Shape);
    }
    ParserModel::from_parts(
        header.config,
        Vocabulary::new(header.symbols),
        header.context_vocab,
        params,
        header.precision,
    )
    .ok_or(CheckpointError::Shape)
}

pub fn save(m: &ParserModel, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(m))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ParserModel, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::context_vocabulary;
    use crate::resources;

    fn model() -> ParserModel {
        let o = resources::toy_ontology();
        let mut m = ParserModel::new(TrainConfig::default(), o.symbol_vocabulary(), context_vocabulary(&o));
        m.round_to_precision();
        m
    }

    #[test]
    fn full_precision_round_trip() {
        let m = model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.config, m.config);
    }

    #[test]
    fn half_precision_is_smaller_and_stable() {
        let m = model();
        let full = to_bytes(&m);
        let q = m.quantize();
        let half = to_bytes(&q);
        assert!((half.len() as f64) / (full.len() as f64) <= 0.55);
        assert_eq!(to_bytes(&from_bytes(&half).unwrap().quantize()), half);
        assert_eq!(from_bytes(&half).unwrap().params, q.params);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(from_bytes(b"not a model at all"), Err(CheckpointError::BadMagic)));
        let mut bytes = to_bytes(&model());
        bytes.truncate(bytes.len() - 3);
        assert!(from_bytes(&bytes).is_err());
        let mut bytes = to_bytes(&model());
        bytes[8] = 9;
        assert!(matches!(from_bytes(&bytes), Err(CheckpointError::Version(9))));
    }
}
