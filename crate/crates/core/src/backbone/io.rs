//! Binary weight (`SMW1`) and descriptor (`SMD1`) files, little-endian.
//!
//! Weights: magic, then records of `u32 name_len, name, u32 ndim, ndim x u32
//! dims, f32 payload`, then a CRC-32 of every preceding byte.
//!
//! Descriptors: magic, `u32 count`, `u32 dim`, `count x dim` f32 row-major.

use std::fs;
use std::path::Path;

use super::model::{EmbeddingModel, LinearHead, EMBEDDING_DIM};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SMW1";
pub const DESCRIPTORS_MAGIC: &[u8; 4] = b"SMD1";

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_record(buf: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) {
    put_u32(buf, name.len());
    buf.extend_from_slice(name.as_bytes());
    put_u32(buf, shape.len());
    for &d in shape {
        put_u32(buf, d);
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::data("unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::data("record too large"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn encode_weights(m: &EmbeddingModel) -> Vec<u8> {
    let mut buf = WEIGHTS_MAGIC.to_vec();
    for ((name, ws, bs), (_, p)) in m.layer_param_shapes().iter().zip(m.named_layers()) {
        put_record(&mut buf, &format!("{name}.weight"), ws, &p.weight);
        put_record(&mut buf, &format!("{name}.bias"), bs, &p.bias);
    }
    if let Some(h) = m.head() {
        put_record(&mut buf, "head.weight", &[h.out_dim, h.in_dim], &h.weight);
        put_record(&mut buf, "head.bias", &[h.out_dim], &h.bias);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Load parameters into a model of the configured architecture. Every
/// backbone parameter must be present; head records are optional.
pub fn decode_weights(m: &EmbeddingModel, bytes: &[u8]) -> Result<EmbeddingModel> {
    if bytes.len() < 8 || &bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::data("not an SMW1 weights file"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let expected = m.layer_param_shapes();
    let mut out = m.clone();
    let layer_slots: Vec<usize> = (0..out.layers.len()).filter(|&k| !out.layers[k].weight.is_empty()).collect();
    let mut seen = vec![[false; 2]; expected.len()];
    let (mut head_w, mut head_b) = (None, None);

    let mut cur = Cursor { buf: body, pos: 4 };
    while !cur.done() {
        let name_len = cur.u32()?;
        let name = String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| Error::data("record name is not UTF-8"))?;
        let ndim = cur.u32()?;
        let shape = (0..ndim).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        let data = cur.f32s(shape.iter().product())?;

        let check = |want: &[usize]| -> Result<()> {
            if shape != want {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: want.to_vec(),
                    found: shape.clone(),
                });
            }
            Ok(())
        };
        if name == "head.weight" {
            check(&[EMBEDDING_DIM, m.tap_dim()])?;
            head_w = Some(data);
            continue;
        }
        if name == "head.bias" {
            check(&[EMBEDDING_DIM])?;
            head_b = Some(data);
            continue;
        }
        let (layer, part) = name
            .rsplit_once('.')
            .ok_or_else(|| Error::data(format!("unexpected record `{name}`")))?;
        let slot = expected
            .iter()
            .position(|(n, _, _)| n == layer)
            .ok_or_else(|| Error::data(format!("record `{name}` names no layer of this architecture")))?;
        let target = &mut out.layers[layer_slots[slot]];
        match part {
            "weight" => {
                check(&expected[slot].1)?;
                target.weight = data;
                seen[slot][0] = true;
            }
            "bias" => {
                check(&expected[slot].2)?;
                target.bias = data;
                seen[slot][1] = true;
            }
            _ => return Err(Error::data(format!("unexpected record `{name}`"))),
        }
    }
    if let Some(slot) = seen.iter().position(|s| !(s[0] && s[1])) {
        return Err(Error::data(format!("weights file lacks parameters for layer `{}`", expected[slot].0)));
    }
    match (head_w, head_b) {
        (Some(weight), Some(bias)) => {
            out.head = Some(LinearHead {
                in_dim: m.tap_dim(),
                out_dim: EMBEDDING_DIM,
                weight,
                bias,
            })
        }
        (None, None) => {}
        _ => return Err(Error::data("weights file has an incomplete head")),
    }
    Ok(out)
}

pub fn save_weights(m: &EmbeddingModel, path: &Path) -> Result<()> {
    fs::write(path, encode_weights(m)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(m: &EmbeddingModel, path: &Path) -> Result<EmbeddingModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(m, &bytes)
}

/// Row-major descriptor matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorMatrix {
    pub count: usize,
    pub dim: usize,
    pub values: Vec<f32>,
}

impl DescriptorMatrix {
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::data("descriptor rows differ in dimension"));
        }
        Ok(DescriptorMatrix {
            count: rows.len(),
            dim,
            values: rows.concat(),
        })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact panics on zero; an empty-dim matrix has no meaningful rows
        self.values.chunks_exact(self.dim.max(1)).take(self.count)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = DESCRIPTORS_MAGIC.to_vec();
        put_u32(&mut buf, self.count);
        put_u32(&mut buf, self.dim);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != DESCRIPTORS_MAGIC {
            return Err(Error::data("not an SMD1 descriptor file"));
        }
        let mut cur = Cursor { buf: bytes, pos: 4 };
        let count = cur.u32()?;
        let dim = cur.u32()?;
        let values = cur.f32s(count * dim)?;
        if !cur.done() {
            return Err(Error::data("trailing bytes after descriptor payload"));
        }
        Ok(DescriptorMatrix { count, dim, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
