//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "XSRLCKPT" | u32 version | u64 header length | header JSON {config, vocabs}
//! u32 tensor count
//! per tensor: u32 name length | name | u8 trainable | u32 ndim | u64 dims[ndim] | f64 data (row-major)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{self, Params, Tensor};
use super::vocab::Vocabs;
use super::{ModelConfig, ModelError, SrlModel, Variant};

pub const MAGIC: &[u8; 8] = b"XSRLCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabs: Vocabs,
}

/// Tensor names and shapes a configuration implies, in container order.
pub fn expected_shapes(config: &ModelConfig, vocabs: &Vocabs) -> Vec<(&'static str, Vec<usize>)> {
    let layout = config.layout();
    let k = config.label_count;
    let mut out = vec![
        (params::WORD_EMBEDDING, vec![vocabs.words.len(), config.word_dim]),
        (params::POS_EMBEDDING, vec![vocabs.tags.len(), config.pos_dim]),
        (params::PREDICATE_EMBEDDING, vec![2, config.pred_dim]),
    ];
    match config.variant {
        Variant::Basic => out.push((params::ENCODER, vec![layout.param_len()])),
        Variant::Pgn => {
            out.push((params::LANGUAGE_EMBEDDING, vec![config.language_count, config.lang_dim]));
            out.push((params::GENERATOR, vec![layout.param_len(), config.lang_dim]));
        }
    }
    out.push((params::CRF_EMISSION, vec![k, layout.output_dim()]));
    out.push((params::CRF_TRANSITION, vec![k + 2, k + 2]));
    out
}

pub fn write_model<W: Write>(model: &SrlModel, mut out: W) -> Result<(), ModelError> {
    let header = serde_json::to_vec(&Header {
        config: model.config().clone(),
        vocabs: model.vocabs().clone(),
    })
    .map_err(|e| ModelError::Header(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let tensors = model.params().tensors();
    out.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        out.write_all(&(t.name.len() as u32).to_le_bytes())?;
        out.write_all(t.name.as_bytes())?;
        out.write_all(&[u8::from(t.trainable)])?;
        out.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 8);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.bytes.len() < n {
            return Err(ModelError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, ModelError> {
        usize::try_from(self.u64()?).map_err(|_| ModelError::Truncated)
    }
}

pub fn read_model<R: Read>(mut input: R) -> Result<SrlModel, ModelError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes };

    let magic = r.take(MAGIC.len()).map_err(|_| ModelError::BadMagic)?;
    if magic != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = r.len()?;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| ModelError::Header(e.to_string()))?;

    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(16));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| ModelError::Header("tensor name is not UTF-8".into()))?;
        let trainable = r.u8()? != 0;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
        let size = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or(ModelError::Truncated)?;
        let data = r
            .take(size)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor {
            name,
            shape,
            data,
            trainable,
        });
    }
    if !r.bytes.is_empty() {
        return Err(ModelError::Header(format!("{} trailing bytes after the last tensor", r.bytes.len())));
    }

    let Header { config, vocabs } = header;
    config.validate()?;
    if config.label_count != vocabs.labels.len() {
        return Err(ModelError::ConfigMismatch(format!(
            "label_count {} but {} labels",
            config.label_count,
            vocabs.labels.len()
        )));
    }
    let expected = expected_shapes(&config, &vocabs);
    let found: Vec<(&str, &[usize])> = tensors.iter().map(|t| (t.name.as_str(), t.shape.as_slice())).collect();
    let matches = expected.len() == found.len()
        && expected.iter().zip(&found).all(|((n, s), (fnm, fs))| n == fnm && s.as_slice() == *fs);
    if !matches {
        return Err(ModelError::ConfigMismatch(format!("expected {expected:?}, found {found:?}")));
    }

    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("count checked");
    let word = next();
    let pos = next();
    let predicate = next();
    let language = (config.variant == Variant::Pgn).then(&mut next);
    let encoder = next();
    let emission = next();
    let transition = next();
    let params = Params {
        word,
        pos,
        predicate,
        language,
        encoder,
        emission,
        transition,
    };
    if !params.all_finite() {
        return Err(ModelError::ConfigMismatch("non-finite parameter values".into()));
    }
    Ok(SrlModel::from_parts(config, vocabs, params))
}

pub fn save_model(model: &SrlModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let file = std::fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(file))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SrlModel, ModelError> {
    let file = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(file))
}
