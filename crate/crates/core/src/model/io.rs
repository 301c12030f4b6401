//! Binary model file.
//!
//! ```text
//! "CTDM"                       magic, 4 bytes
//! u16 LE                       format version (1)
//! u32 LE                       input dimension
//! u32 LE                       class count
//! u64 LE                       initialization seed
//! u32 LE + UTF-8               canonical architecture text
//! u32 LE                       class label count (0 or class count)
//!   per label: u32 LE + UTF-8
//! u64 LE + f64 LE ...          trainable parameters in topology order
//! u64 LE + f64 LE ...          normalization running mean/var in topology order
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::arch::{Architecture, ModelConfig};
use super::network::{assemble, Model};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CTDM";
pub const MODEL_VERSION: u16 = 1;

pub fn write_model<W: Write>(model: &Model, mut w: W) -> std::io::Result<()> {
    let cfg = model.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.input_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.num_classes as u32).to_le_bytes());
    buf.extend_from_slice(&model.seed().to_le_bytes());
    put_str(&mut buf, &cfg.arch.to_string());
    buf.extend_from_slice(&(model.class_labels().len() as u32).to_le_bytes());
    for label in model.class_labels() {
        put_str(&mut buf, label);
    }
    let params = model.flat_params();
    put_f64s(&mut buf, &params);
    let state: Vec<f64> = model.state_blocks().concat();
    put_f64s(&mut buf, &state);
    w.write_all(&buf)
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, v: &[f64]) {
    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.pos as u64, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let at = self.pos;
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::format(at as u64, format!("{what} is not UTF-8")))
    }

    fn f64s(&mut self, what: &str) -> Result<Vec<f64>> {
        let at = self.pos;
        let n = self.u64(what)? as usize;
        let bytes = self
            .take(n.checked_mul(8).ok_or_else(|| Error::format(at as u64, "length overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<Model> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<model stream>", e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::format(0, "bad magic, expected CTDM"));
    }
    let version = c.u16("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let input_dim = c.u32("input dimension")? as usize;
    let num_classes = c.u32("class count")? as usize;
    let seed = c.u64("seed")?;
    let arch_at = c.pos;
    let text = c.string("architecture")?;
    let arch = Architecture::parse(&text)
        .map_err(|e| Error::format(arch_at as u64, format!("architecture: {e}")))?;
    let config = ModelConfig::new(arch, input_dim, num_classes)
        .map_err(|e| Error::format(arch_at as u64, format!("architecture: {e}")))?;
    let n_labels = c.u32("label count")? as usize;
    let labels = (0..n_labels)
        .map(|_| c.string("class label"))
        .collect::<Result<Vec<_>>>()?;
    let params_at = c.pos;
    let params = c.f64s("parameters")?;
    let state = c.f64s("normalization state")?;
    if c.pos != bytes.len() {
        return Err(Error::format(c.pos as u64, "trailing bytes"));
    }
    assemble(config, seed, &params, &state, labels).map_err(|e| Error::format(params_at as u64, e.to_string()))
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(model, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(bytes.as_slice())
}
