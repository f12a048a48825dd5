//! Binary parameter checkpoints with a JSON manifest alongside.
//!
//! Layout: magic `TSCK`, `u32` version, `u32` tensor count, then per tensor a
//! `u32`-prefixed UTF-8 name, `u32` rank, `u64` dims and little-endian `f64`
//! values. All integers are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Parameters;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TSCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub sha256: String,
    pub parameter_count: usize,
    pub tensors: Vec<(String, Vec<usize>)>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn encode<P: Parameters + ?Sized>(params: &P) -> Vec<u8> {
    let mut body = Vec::new();
    let mut count = 0u32;
    params.visit(&mut |name, shape, data| {
        count += 1;
        body.extend_from_slice(&(name.len() as u32).to_le_bytes());
        body.extend_from_slice(name.as_bytes());
        body.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            body.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            body.extend_from_slice(&v.to_le_bytes());
        }
    });
    let mut out = Vec::with_capacity(body.len() + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&body);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("checkpoint", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format("checkpoint", format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::format("checkpoint", "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::format("checkpoint", "tensor too large"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push(Tensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    Ok(tensors)
}

/// Copies decoded tensors into `params`, requiring identical names and shapes.
pub fn apply<P: Parameters + ?Sized>(tensors: &[Tensor], params: &mut P) -> Result<()> {
    let mut expected = Vec::new();
    params.visit(&mut |n, s, _| expected.push((n.to_string(), s.to_vec())));
    if expected.len() != tensors.len() {
        return Err(Error::shape("checkpoint tensor count", expected.len(), tensors.len()));
    }
    for ((name, shape), t) in expected.iter().zip(tensors) {
        if *name != t.name || *shape != t.shape {
            return Err(Error::invalid(
                name.clone(),
                format!("checkpoint holds `{}` with shape {:?}, expected {:?}", t.name, t.shape, shape),
            ));
        }
    }
    let mut it = tensors.iter();
    params.visit_mut(&mut |_, _, d| d.copy_from_slice(&it.next().unwrap().data));
    Ok(())
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `path` and `path.json`.
pub fn save<P: Parameters + ?Sized>(path: &Path, params: &P, metadata: serde_json::Value) -> Result<Manifest> {
    let bytes = encode(params);
    let mut tensors = Vec::new();
    params.visit(&mut |n, s, _| tensors.push((n.to_string(), s.to_vec())));
    let manifest = Manifest {
        format_version: VERSION,
        sha256: hex(&Sha256::digest(&bytes)),
        parameter_count: params.param_count(),
        tensors,
        metadata,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    fs::write(path, &bytes).map_err(|e| Error::file(path, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::file(&mpath, e))?;
    Ok(manifest)
}

/// Loads `path` into `params`, verifying the manifest hash when present.
pub fn load<P: Parameters + ?Sized>(path: &Path, params: &mut P) -> Result<Option<Manifest>> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    let mpath = manifest_path(path);
    let manifest = match fs::read_to_string(&mpath) {
        Ok(s) => {
            let m: Manifest = serde_json::from_str(&s)?;
            if m.sha256 != hex(&Sha256::digest(&bytes)) {
                return Err(Error::format("checkpoint", "content hash does not match manifest"));
            }
            Some(m)
        }
        Err(_) => None,
    };
    apply(&decode(&bytes)?, params)?;
    Ok(manifest)
}
