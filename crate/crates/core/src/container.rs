//! Flat binary container for matrices and chains.
//!
//! Layout: the 8-byte magic `GMIXF64\n`, the header length as a little-endian `u64`, a UTF-8
//! JSON header, then `rows·cols` little-endian `f64` values in row-major order. Nothing may
//! follow the payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::samplers::Chain;

pub const MAGIC: &[u8; 8] = b"GMIXF64\n";
pub const DTYPE: &str = "f64le";
pub const ORDER: &str = "row-major";

/// Headers larger than this are rejected as corrupt.
const MAX_HEADER: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    /// `[rows, cols]`.
    pub shape: [usize; 2],
    pub role: String,
    pub seed: u64,
    pub dtype: String,
    pub order: String,
    /// Free-form metadata such as acceptance rates.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub attributes: Map<String, Value>,
}

/// A header and its row-major payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub header: Header,
    pub values: Vec<f64>,
}

impl Container {
    pub fn new(role: impl Into<String>, seed: u64, shape: [usize; 2], values: Vec<f64>) -> Result<Self> {
        if shape[0].checked_mul(shape[1]) != Some(values.len()) {
            return Err(Error::shape(format!("{} values do not fill shape {:?}", values.len(), shape)));
        }
        let header = Header {
            shape,
            role: role.into(),
            seed,
            dtype: DTYPE.into(),
            order: ORDER.into(),
            attributes: Map::new(),
        };
        Ok(Self { header, values })
    }

    pub fn from_matrix(role: impl Into<String>, seed: u64, m: &DMatrix<f64>) -> Self {
        let values = m.transpose().as_slice().to_vec();
        Self::new(role, seed, [m.nrows(), m.ncols()], values).expect("shape matches by construction")
    }

    /// A vector stored as one row.
    pub fn from_vector(role: impl Into<String>, seed: u64, v: &DVector<f64>) -> Self {
        Self::new(role, seed, [1, v.len()], v.as_slice().to_vec()).expect("shape matches by construction")
    }

    /// One row per draw. Acceptance rate and step sizes go into the attributes.
    pub fn from_chain(role: impl Into<String>, chain: &Chain) -> Self {
        let mut c = Self::new(role, chain.seed, [chain.len(), chain.dim()], chain.samples.as_slice().to_vec())
            .expect("shape matches by construction");
        c.header.attributes.insert("acceptance_rate".into(), Value::from(chain.acceptance_rate));
        c.header.attributes.insert("step_sizes".into(), Value::from(chain.step_sizes.clone()));
        c
    }

    pub fn with_attribute(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.header.attributes.insert(key.into(), value.into());
        self
    }

    pub fn rows(&self) -> usize {
        self.header.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.header.shape[1]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows(), self.cols(), &self.values)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn to_chain(&self) -> Result<Chain> {
        let samples = DMatrix::from_column_slice(self.cols(), self.rows(), &self.values);
        let attr = &self.header.attributes;
        let acceptance_rate = match attr.get("acceptance_rate") {
            None => 1.0,
            Some(v) => v.as_f64().ok_or_else(|| Error::arg("acceptance_rate attribute is not a number"))?,
        };
        let step_sizes = match attr.get("step_sizes") {
            None => Vec::new(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::arg("step_sizes attribute holds a non-number")))
                .collect::<Result<_>>()?,
            Some(_) => return Err(Error::arg("step_sizes attribute is not an array")),
        };
        Ok(Chain { seed: self.header.seed, samples, acceptance_rate, step_sizes })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, message: &str| Error::Format { offset: offset as u64, message: message.into() };
        if bytes.len() < 8 {
            return Err(fail(bytes.len(), "file ends inside the magic number"));
        }
        if let Some(k) = (0..8).find(|&k| bytes[k] != MAGIC[k]) {
            return Err(fail(k, "bad magic number"));
        }
        if bytes.len() < 16 {
            return Err(fail(bytes.len(), "file ends inside the header length"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        if hlen > MAX_HEADER {
            return Err(fail(8, "header length is implausibly large"));
        }
        let hend = 16 + hlen as usize;
        if bytes.len() < hend {
            return Err(fail(bytes.len(), "file ends inside the header"));
        }
        let header: Header = serde_json::from_slice(&bytes[16..hend])
            .map_err(|e| fail(16 + json_offset(&bytes[16..hend], e.line(), e.column()), &format!("invalid header: {e}")))?;
        if header.dtype != DTYPE {
            return Err(fail(16, &format!("unsupported dtype `{}`", header.dtype)));
        }
        if header.order != ORDER {
            return Err(fail(16, &format!("unsupported order `{}`", header.order)));
        }
        let count = header.shape[0]
            .checked_mul(header.shape[1])
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| fail(16, "shape overflows"))?;
        let payload = &bytes[hend..];
        if payload.len() < count {
            let whole = hend + payload.len() / 8 * 8;
            return Err(fail(whole, &format!("payload truncated: {} of {} bytes", payload.len(), count)));
        }
        if payload.len() > count {
            return Err(fail(hend + count, "trailing bytes after the payload"));
        }
        let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Self { header, values })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Byte offset of a 1-based (line, column) position reported by the JSON parser.
fn json_offset(text: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match text[offset..].iter().position(|b| *b == b'\n') {
            Some(p) => offset += p + 1,
            None => return text.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(text.len())
}
