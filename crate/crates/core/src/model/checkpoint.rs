//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "TCVN"                      4 bytes magic
//! version                     u16 (currently 1)
//! header_len                  u32
//! header                      header_len bytes of UTF-8 JSON
//! block_count                 u32
//! block_count times:
//!     rank                    u32
//!     extents                 rank × u32
//!     values                  product(extents) × f32 (IEEE-754)
//! ```
//!
//! The JSON header holds the architecture config, the input dimensions,
//! the embedding depth, the init seed, and the class names. Blocks follow
//! [`Model::params`] order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureConfig, Model};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::Dims;

pub const MAGIC: &[u8; 4] = b"TCVN";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ArchitectureConfig,
    dims: Dims,
    depth: usize,
    seed: u64,
    class_names: Vec<String>,
}

pub fn to_bytes(model: &Model<f32>) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        dims: model.dims,
        depth: model.depth,
        seed: model.seed,
        class_names: model.class_names.clone(),
    })?;
    let params = model.params();
    let mut out = Vec::with_capacity(64 + header.len() + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.rank() as u32).to_le_bytes());
        for &e in p.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint {
            offset: self.pos,
            reason: format!("truncated while reading {what}"),
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Checkpoint { offset: self.pos, reason: reason.into() }
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint { offset: 0, reason: "bad magic bytes".into() });
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: FORMAT_VERSION });
    }
    let header_len = r.u32("header length")? as usize;
    let header_start = r.pos;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| Error::Checkpoint { offset: header_start, reason: format!("bad header: {e}") })?;

    let mut model = Model::<f32>::build(&header.config, header.dims, header.depth, header.seed)
        .map_err(|e| Error::Checkpoint { offset: header_start, reason: e.to_string() })?;
    model.class_names = header.class_names;

    let count = r.u32("block count")? as usize;
    let expected: Vec<Vec<usize>> = model.params().iter().map(|p| p.shape().to_vec()).collect();
    if count != expected.len() {
        return Err(r.fail(format!("expected {} parameter blocks, found {count}", expected.len())));
    }
    let mut blocks = Vec::with_capacity(count);
    for shape in &expected {
        let block_start = r.pos;
        let rank = r.u32("block rank")? as usize;
        if rank != shape.len() {
            return Err(Error::Checkpoint { offset: block_start, reason: format!("block rank {rank}, expected {}", shape.len()) });
        }
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(r.u32("block extent")? as usize);
        }
        if &extents != shape {
            return Err(Error::Checkpoint { offset: block_start, reason: format!("block shape {extents:?}, expected {shape:?}") });
        }
        let len: usize = extents.iter().product();
        let raw = r.take(len * 4, "block values")?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        blocks.push(Tensor::from_vec(&extents, values)?);
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last block"));
    }
    model.load_params_from(&blocks)?;
    Ok(model)
}

pub fn save(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lookup, TEXTCONVONET_4};

    fn model() -> Model<f32> {
        let mut m = Model::build(&lookup(TEXTCONVONET_4).unwrap().with_classes(3), Dims { m: 3, n: 4 }, 2, 9).unwrap();
        m.class_names = vec!["a".into(), "b".into(), "c".into()];
        // move away from the seed-derived values so the blocks really matter
        m.dense.biases.fill(0.125);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let input = Tensor::new(&[3, 4, 2], 0.7).unwrap();
        assert_eq!(back.predict(&input).unwrap(), m.predict(&input).unwrap());
    }

    #[test]
    fn starts_with_magic_and_version() {
        let bytes = to_bytes(&model()).unwrap();
        assert_eq!(&bytes[..4], b"TCVN");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = to_bytes(&model()).unwrap();
        for cut in [0, 3, 5, 9, 40, bytes.len() - 1] {
            match from_bytes(&bytes[..cut]) {
                Err(Error::Checkpoint { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = to_bytes(&model()).unwrap();
        bytes[4] = 7;
        assert!(matches!(from_bytes(&bytes), Err(Error::UnsupportedVersion { found: 7, expected: 1 })));
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(Error::Checkpoint { offset: 0, .. })));
    }
}
