//! Binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "GPLHCKPT"
//! version  u32
//! seed     u64
//! step     u64      optimizer step count
//! n_meta   u32      then n_meta × (key: str, value: str)
//! n_param  u32      then n_param × param record
//!
//! param record: name: str, ndim: u32, dims: ndim × u64, data: numel × f64,
//!               has_moments: u8, [first: numel × f64, second: numel × f64]
//! str: u32 byte length + UTF-8 bytes
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a write/read cycle is exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::params::Moments;
use super::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"GPLHCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Parameters plus free-form string metadata (model config echo, task, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ParamStore, metadata: BTreeMap<String, String>) -> Self {
        Self { params, metadata }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.params.seed())?;
        w.write_u64::<LittleEndian>(self.params.step())?;
        w.write_u32::<LittleEndian>(self.metadata.len() as u32)?;
        for (k, v) in &self.metadata {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        w.write_u32::<LittleEndian>(self.params.len() as u32)?;
        for (name, t) in self.params.iter() {
            write_str(w, name)?;
            w.write_u32::<LittleEndian>(t.shape().len() as u32)?;
            for &d in t.shape() {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            write_f64s(w, t.data())?;
            match self.params.moments(name) {
                Some(m) => {
                    w.write_u8(1)?;
                    write_f64s(w, m.first.data())?;
                    write_f64s(w, m.second.data())?;
                }
                None => w.write_u8(0)?,
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        Self::read_from(&mut r).map_err(|e| match e {
            ReadError::Io(e) => Error::Checkpoint(format!("truncated or corrupt: {e}")),
            ReadError::Format(msg) => Error::Checkpoint(msg),
        })
    }

    fn read_from(r: &mut impl Read) -> std::result::Result<Self, ReadError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ReadError::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(ReadError::Format(format!(
                "format version {version} unsupported (expected {FORMAT_VERSION})"
            )));
        }
        let seed = r.read_u64::<LittleEndian>()?;
        let step = r.read_u64::<LittleEndian>()?;
        let n_meta = r.read_u32::<LittleEndian>()?;
        let mut metadata = BTreeMap::new();
        for _ in 0..n_meta {
            let k = read_str(r)?;
            let v = read_str(r)?;
            metadata.insert(k, v);
        }
        let n_param = r.read_u32::<LittleEndian>()?;
        let mut entries = BTreeMap::new();
        let mut moments = BTreeMap::new();
        for _ in 0..n_param {
            let name = read_str(r)?;
            let ndim = r.read_u32::<LittleEndian>()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.read_u64::<LittleEndian>()? as usize);
            }
            let numel: usize = shape.iter().product();
            let data = read_f64s(r, numel)?;
            let tensor = Tensor::new(shape.clone(), data).map_err(|e| ReadError::Format(e.to_string()))?;
            if r.read_u8()? == 1 {
                let first = Tensor::new(shape.clone(), read_f64s(r, numel)?).expect("same shape");
                let second = Tensor::new(shape, read_f64s(r, numel)?).expect("same shape");
                moments.insert(name.clone(), Moments { first, second });
            }
            if entries.insert(name.clone(), tensor).is_some() {
                return Err(ReadError::Format(format!("duplicate parameter `{name}`")));
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(ReadError::Format("trailing bytes after last parameter".into()));
        }
        Ok(Self {
            params: ParamStore::from_parts(entries, moments, seed, step),
            metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> std::result::Result<String, ReadError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| ReadError::Format("non-UTF-8 string".into()))
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> std::io::Result<()> {
    for &v in data {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> std::result::Result<Vec<f64>, ReadError> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}
