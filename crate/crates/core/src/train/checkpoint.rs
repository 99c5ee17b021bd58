//! Binary named-tensor archive.
//!
//! Layout, all integers `u32` little-endian: magic `MLSM`, version, record
//! count, then per record {name length, UTF-8 name, rank, dims, dtype `u8`
//! (0 = `f32`), payload}; then a length-prefixed UTF-8 text block carrying
//! the stage tag, optimizer step and config echo. Version 2 appends a
//! SHA-256 of everything before it.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::NamedTensor;

pub const MAGIC: &[u8; 4] = b"MLSM";
pub const VERSION_PLAIN: u32 = 1;
pub const VERSION_CHECKSUMMED: u32 = 2;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    /// Which model this is, e.g. `vae-dark`.
    pub stage: String,
    /// Optimizer step at save time.
    pub step: u64,
    /// [`TrainConfig::to_text`](super::TrainConfig::to_text) of the producing run.
    pub config: String,
    pub records: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn record(&self, name: &str) -> Option<&NamedTensor> {
        self.records.iter().find(|r| r.name == name)
    }

    fn text_block(&self) -> String {
        format!("stage={}\nstep={}\n{}", self.stage, self.step, self.config)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
            for &d in &r.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.push(DTYPE_F32);
            for v in &r.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let text = self.text_block();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        if self.version >= VERSION_CHECKSUMMED {
            let digest = Sha256::digest(&out);
            out.extend_from_slice(&digest);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], context: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, context, what: "header".into() };
        if r.take(4)? != MAGIC {
            return Err(Error::parse(context, 0, "bad magic (expected MLSM)"));
        }
        let version = r.u32()?;
        if version != VERSION_PLAIN && version != VERSION_CHECKSUMMED {
            return Err(Error::parse(context, 4, format!("unsupported version {}", version)));
        }
        if version == VERSION_CHECKSUMMED {
            if bytes.len() < 32 + 12 {
                return Err(Error::parse(context, bytes.len(), "truncated before checksum"));
            }
            let (body, digest) = bytes.split_at(bytes.len() - 32);
            if Sha256::digest(body).as_slice() != digest {
                return Err(Error::parse(context, body.len(), "checksum mismatch"));
            }
            r.bytes = body;
        }
        let count = r.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            r.what = format!("record {}", i);
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| r.error("name is not UTF-8"))?.to_string();
            r.what = format!("record {} '{}'", i, name);
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let dtype = r.take(1)?[0];
            if dtype != DTYPE_F32 {
                return Err(r.error(&format!("unknown dtype tag {}", dtype)));
            }
            let n: usize = dims.iter().product();
            let payload = r.take(n.checked_mul(4).ok_or_else(|| r.error("element count overflows"))?)?;
            let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            records.push(NamedTensor { name, dims, data });
        }
        r.what = "text block".into();
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| r.error("text block is not UTF-8"))?;
        if r.pos != r.bytes.len() {
            return Err(r.error("trailing bytes"));
        }
        let mut lines = text.splitn(3, '\n');
        let stage = lines.next().and_then(|l| l.strip_prefix("stage=")).ok_or_else(|| r.error("missing stage tag"))?;
        let step = lines
            .next()
            .and_then(|l| l.strip_prefix("step="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| r.error("missing step"))?;
        Ok(Checkpoint {
            version,
            stage: stage.to_string(),
            step,
            config: lines.next().unwrap_or("").to_string(),
            records,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
    what: String,
}

impl<'a> Reader<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::parse(self.context, self.pos, format!("{}: {}", self.what, msg))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
