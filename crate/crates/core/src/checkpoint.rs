//! Self-describing binary container for trained models.
//!
//! Layout: the 8-byte magic `BSTFRMR\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, the JSON header, then the
//! tensor data. The header carries the learner config, the tokenizer, and per
//! learner its role, coefficients, vocabulary subset and a tensor directory
//! (name, dimensions, element type, byte offset into the data section).
//! Tensors are row-major and little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::{Ensemble, Stage};
use crate::data::Tokenizer;
use crate::error::{Error, Result};
use crate::experiment::Model;
use crate::files::write_atomic;
use crate::importance::VocabSubset;
use crate::scalar::{DType, Scalar};
use crate::transformer::{tensor_specs, Params, Transformer, TransformerConfig};

pub const MAGIC: &[u8; 8] = b"BSTFRMR\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Base,
    Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub dtype: DType,
    /// Byte offset into the data section.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerEntry {
    pub role: Role,
    pub alpha: f64,
    pub coefficient: f64,
    pub vocab: Option<VocabSubset>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub dtype: DType,
    pub num_classes: usize,
    pub shrinkage: f64,
    pub model: TransformerConfig,
    pub tokenizer: Tokenizer,
    pub learners: Vec<LearnerEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn element_size(dtype: DType) -> usize {
    match dtype {
        DType::Float32 => 4,
        DType::Float64 => 8,
    }
}

fn push_tensor<T: Scalar>(data: &mut Vec<u8>, values: &[T]) {
    for v in values {
        match T::DTYPE {
            DType::Float32 => data.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
            DType::Float64 => data.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
}

fn encode_learner<T: Scalar>(
    learner: &Transformer<T>,
    role: Role,
    alpha: f64,
    coefficient: f64,
    vocab: Option<&VocabSubset>,
    data: &mut Vec<u8>,
) -> LearnerEntry {
    let specs = tensor_specs(learner.config());
    let tensors = specs
        .into_iter()
        .zip(learner.params().slots())
        .map(|(spec, values)| {
            let entry = TensorEntry {
                name: spec.name,
                dims: spec.dims,
                dtype: T::DTYPE,
                offset: data.len() as u64,
            };
            push_tensor(data, values);
            entry
        })
        .collect();
    LearnerEntry {
        role,
        alpha,
        coefficient,
        vocab: vocab.cloned(),
        tensors,
    }
}

fn encode_typed<T: Scalar>(ensemble: &Ensemble<Transformer<T>>, tokenizer: &Tokenizer) -> Result<Vec<u8>> {
    let model = ensemble
        .last_learner()
        .ok_or_else(|| corrupt("cannot save a model without learners"))?
        .config()
        .clone();
    let mut data = Vec::new();
    let mut learners = Vec::new();
    if let Some(base) = &ensemble.base {
        learners.push(encode_learner(base, Role::Base, 1.0, 1.0, None, &mut data));
    }
    for s in &ensemble.stages {
        learners.push(encode_learner(
            &s.learner,
            Role::Stage,
            s.alpha,
            s.coefficient,
            s.vocab.as_ref(),
            &mut data,
        ));
    }
    let header = Header {
        version: FORMAT_VERSION,
        dtype: T::DTYPE,
        num_classes: ensemble.num_classes,
        shrinkage: ensemble.shrinkage,
        model,
        tokenizer: tokenizer.clone(),
        learners,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + header_bytes.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&data);
    Ok(out)
}

/// Serializes a model and its tokenizer.
pub fn encode(model: &Model, tokenizer: &Tokenizer) -> Result<Vec<u8>> {
    match model {
        Model::F32(e) => encode_typed(e, tokenizer),
        Model::F64(e) => encode_typed(e, tokenizer),
    }
}

fn split_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let end = 20usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[20..end])?;
    if header.version != version {
        return Err(corrupt("header and container versions differ"));
    }
    Ok((header, &bytes[end..]))
}

fn read_tensor<T: Scalar>(data: &[u8], entry: &TensorEntry, expected_dims: &[usize]) -> Result<Vec<T>> {
    if entry.dims != expected_dims {
        return Err(corrupt(format!(
            "tensor {} has dims {:?}, config implies {:?}",
            entry.name, entry.dims, expected_dims
        )));
    }
    if entry.dtype != T::DTYPE {
        return Err(corrupt(format!("tensor {} has the wrong element type", entry.name)));
    }
    let count: usize = entry.dims.iter().product();
    let size = element_size(entry.dtype);
    let start = entry.offset as usize;
    let bytes = start
        .checked_add(count * size)
        .and_then(|end| data.get(start..end))
        .ok_or_else(|| corrupt(format!("tensor {} runs past the data section", entry.name)))?;
    Ok(bytes
        .chunks_exact(size)
        .map(|c| match entry.dtype {
            DType::Float32 => T::from_f64(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64),
            DType::Float64 => T::from_f64(f64::from_le_bytes(c.try_into().expect("8 bytes"))),
        })
        .collect())
}

fn decode_learner<T: Scalar>(header: &Header, entry: &LearnerEntry, data: &[u8]) -> Result<Transformer<T>> {
    let specs = tensor_specs(&header.model);
    if specs.len() != entry.tensors.len() {
        return Err(corrupt("tensor directory does not match the config"));
    }
    let mut params = Params::<T>::zeros(&header.model);
    for ((spec, tensor), slot) in specs.iter().zip(&entry.tensors).zip(params.slots_mut()) {
        if spec.name != tensor.name {
            return Err(corrupt(format!("expected tensor {}, found {}", spec.name, tensor.name)));
        }
        *slot = read_tensor(data, tensor, &spec.dims)?;
    }
    if !params.all_finite() {
        return Err(corrupt("non-finite parameter values"));
    }
    Transformer::from_params(header.model.clone(), params)
}

fn decode_typed<T: Scalar>(header: &Header, data: &[u8]) -> Result<Ensemble<Transformer<T>>> {
    let mut ensemble = Ensemble::new(header.num_classes, header.shrinkage);
    for (i, entry) in header.learners.iter().enumerate() {
        let learner = decode_learner::<T>(header, entry, data)?;
        match entry.role {
            Role::Base if i == 0 => ensemble.base = Some(learner),
            Role::Base => return Err(corrupt("base learner must come first")),
            Role::Stage => ensemble.stages.push(Stage {
                alpha: entry.alpha,
                coefficient: entry.coefficient,
                learner,
                vocab: entry.vocab.clone(),
            }),
        }
    }
    Ok(ensemble)
}

/// Parses a checkpoint produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<(Model, Tokenizer)> {
    let (mut header, data) = split_header(bytes)?;
    header.tokenizer.rebuild_lookup();
    if header.tokenizer.vocab_size() != header.model.vocab_size {
        return Err(corrupt(format!(
            "tokenizer has {} ids but the model expects {}",
            header.tokenizer.vocab_size(),
            header.model.vocab_size
        )));
    }
    if header.model.num_classes != header.num_classes || header.model.precision != header.dtype {
        return Err(corrupt("header fields disagree with the model config"));
    }
    let model = match header.dtype {
        DType::Float32 => Model::F32(decode_typed(&header, data)?),
        DType::Float64 => Model::F64(decode_typed(&header, data)?),
    };
    Ok((model, header.tokenizer))
}

pub fn save(path: &Path, model: &Model, tokenizer: &Tokenizer) -> Result<()> {
    write_atomic(path, &encode(model, tokenizer)?)
}

pub fn load(path: &Path) -> Result<(Model, Tokenizer)> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CorpusRecord;

    fn tokenizer() -> Tokenizer {
        let records = vec![CorpusRecord {
            text: "alpha beta gamma delta".into(),
            label: 1,
        }];
        Tokenizer::build_from_records(&records, 1, None).unwrap()
    }

    fn config(tok: &Tokenizer, precision: DType) -> TransformerConfig {
        TransformerConfig {
            layers: 1,
            heads: 2,
            d_model: 4,
            d_ff: 8,
            max_seq_len: 8,
            vocab_size: tok.vocab_size(),
            num_classes: 2,
            precision,
            head_init: crate::transformer::HeadInit::Random,
            ..TransformerConfig::default()
        }
    }

    fn ensemble<T: Scalar>(cfg: &TransformerConfig) -> Ensemble<Transformer<T>> {
        let mut e = Ensemble::new(2, 0.5);
        e.base = Some(Transformer::new(cfg.clone(), 1).unwrap());
        e.stages.push(Stage {
            alpha: 0.8,
            coefficient: 0.4,
            learner: Transformer::new(cfg.clone(), 2).unwrap(),
            vocab: Some(VocabSubset::new([0, 1, 2, 4])),
        });
        e
    }

    #[test]
    fn round_trip_both_precisions() {
        let tok = tokenizer();
        let models = [
            Model::F32(ensemble::<f32>(&config(&tok, DType::Float32))),
            Model::F64(ensemble::<f64>(&config(&tok, DType::Float64))),
        ];
        for model in models {
            let bytes = encode(&model, &tok).unwrap();
            let (back, tok2) = decode(&bytes).unwrap();
            assert_eq!(back, model);
            assert_eq!(tok2.id("beta"), tok.id("beta"));
            let x = [0, 3, 4, 5];
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
            assert_eq!(encode(&back, &tok2).unwrap(), bytes);
        }
    }

    #[test]
    fn rejects_damage() {
        let tok = tokenizer();
        let model = Model::F32(ensemble::<f32>(&config(&tok, DType::Float32)));
        let bytes = encode(&model, &tok).unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::Checkpoint(_))));
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(decode(truncated), Err(Error::Checkpoint(_))));
        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(matches!(decode(&bad_version), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn header_is_self_describing() {
        let tok = tokenizer();
        let model = Model::F64(ensemble::<f64>(&config(&tok, DType::Float64)));
        let bytes = encode(&model, &tok).unwrap();
        let (header, data) = split_header(&bytes).unwrap();
        assert_eq!(header.learners.len(), 2);
        let head = header.learners[1]
            .tensors
            .iter()
            .find(|t| t.name == "head.weight")
            .unwrap();
        assert_eq!(head.dims, vec![4, 2]);
        assert_eq!(head.dtype, DType::Float64);
        let total: usize = header
            .learners
            .iter()
            .flat_map(|l| &l.tensors)
            .map(|t| t.dims.iter().product::<usize>() * 8)
            .sum();
        assert_eq!(total, data.len());
    }
}
