//! Binary checkpoint container.
//!
//! Layout: magic "LLCK", u32 LE version (= 1), u8 kind, u32 metadata length +
//! UTF-8 JSON metadata, u32 tensor count; per tensor: u16 name length + name,
//! u8 rank, rank x u64 dims (LE), then raw 32-bit LE floats, row-major.
//! Writes are atomic (temp file + rename).

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::tensor::ParamStore;
use crate::numerics::Real;

pub const MAGIC: [u8; 4] = *b"LLCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Backbone,
    Adaptor,
}

impl CheckpointKind {
    fn to_byte(self) -> u8 {
        match self {
            CheckpointKind::Backbone => 0,
            CheckpointKind::Adaptor => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(CheckpointKind::Backbone),
            1 => Ok(CheckpointKind::Adaptor),
            other => Err(Error::Format(format!("unknown checkpoint kind byte {other}"))),
        }
    }
}

/// A loaded checkpoint: metadata plus named f32 tensors.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

/// Serializes a parameter store (cast to f32) with metadata.
pub fn checkpoint_bytes<R: Real>(
    kind: CheckpointKind,
    meta: &serde_json::Value,
    store: &ParamStore<R>,
) -> Result<Vec<u8>> {
    let meta_bytes = serde_json::to_vec(meta)
        .map_err(|e| Error::Format(format!("metadata does not serialize: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind.to_byte());
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, tensor) in store.iter() {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(Error::Format(format!("tensor name too long: {name:?}")));
        }
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        let shape = tensor.shape();
        if shape.len() > u8::MAX as usize {
            return Err(Error::Format("tensor rank exceeds u8".into()));
        }
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint<R: Real>(
    path: &Path,
    kind: CheckpointKind,
    meta: &serde_json::Value,
    store: &ParamStore<R>,
) -> Result<()> {
    let bytes = checkpoint_bytes(kind, meta, store)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Integrity(format!(
                "truncated checkpoint while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn checkpoint_from_bytes(buf: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Version { expected: VERSION, found: version });
    }
    let kind = CheckpointKind::from_byte(cur.take(1, "kind")?[0])?;
    let meta_len = cur.u32("metadata length")? as usize;
    let meta_bytes = cur.take(meta_len, "metadata")?;
    let meta: serde_json::Value = serde_json::from_slice(meta_bytes)
        .map_err(|e| Error::Format(format!("metadata is not valid JSON: {e}")))?;
    let count = cur.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = cur.u16("tensor name length")? as usize;
        let name = String::from_utf8(cur.take(name_len, "tensor name")?.to_vec())
            .map_err(|_| Error::Format(format!("tensor {i} name is not UTF-8")))?;
        let rank = cur.take(1, "tensor rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u64("tensor dim")? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = cur.take(numel * 4, &format!("tensor {name:?} data"))?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, shape, data));
    }
    if cur.pos != buf.len() {
        return Err(Error::Integrity(format!(
            "checkpoint declares {count} tensors but {} trailing bytes remain",
            buf.len() - cur.pos
        )));
    }
    Ok(Checkpoint { kind, meta, tensors })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    checkpoint_from_bytes(&buf)
}

impl Checkpoint {
    /// Copies tensors into a store by name; every checkpoint tensor must have
    /// a matching parameter of identical shape and vice versa.
    pub fn load_into<R: Real>(&self, store: &mut ParamStore<R>) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(Error::Integrity(format!(
                "checkpoint has {} tensors, store expects {}",
                self.tensors.len(),
                store.len()
            )));
        }
        for (name, shape, data) in &self.tensors {
            let t = store
                .by_name_mut(name)
                .ok_or_else(|| Error::Integrity(format!("unexpected tensor {name:?}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Integrity(format!(
                    "tensor {name:?}: shape {:?} in file, {:?} in store",
                    shape,
                    t.shape()
                )));
            }
            for (dst, src) in t.data_mut().iter_mut().zip(data) {
                *dst = R::of(*src as f64);
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 over a store's canonical serialization (names, shapes, f32
/// data). Used for freezing checks and config digests in report headers.
pub fn store_digest<R: Real>(store: &ParamStore<R>) -> String {
    let mut hasher = Sha256::new();
    for (name, tensor) in store.iter() {
        hasher.update(name.as_bytes());
        for &d in tensor.shape() {
            hasher.update((d as u64).to_le_bytes());
        }
        for v in tensor.data() {
            hasher.update((v.to_f64() as f32).to_le_bytes());
        }
    }
    hex_string(&hasher.finalize())
}

/// Hex SHA-256 of arbitrary bytes (config digests).
pub fn bytes_digest(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;
    use crate::numerics::tensor::Tensor;

    fn demo_store() -> ParamStore<f32> {
        let mut stream = RngKey::root(8).stream();
        let mut ps = ParamStore::new();
        ps.register("a.w", Tensor::randn(&[3, 2, 1], 0.5, &mut stream)).unwrap();
        ps.register("a.b", Tensor::randn(&[3], 0.5, &mut stream)).unwrap();
        ps.register("deep.nested.t", Tensor::randn(&[2, 2], 0.5, &mut stream)).unwrap();
        ps
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ps = demo_store();
        let meta = serde_json::json!({"kind": "adaptor", "variant": "htr"});
        let bytes = checkpoint_bytes(CheckpointKind::Adaptor, &meta, &ps).unwrap();
        let ck = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(ck.kind, CheckpointKind::Adaptor);
        assert_eq!(ck.meta, meta);
        assert_eq!(ck.tensors.len(), 3);
        for ((name, tensor), (cname, cshape, cdata)) in ps.iter().zip(&ck.tensors) {
            assert_eq!(name, cname);
            assert_eq!(tensor.shape(), cshape.as_slice());
            assert_eq!(tensor.data(), cdata.as_slice());
        }
        // load_into restores bit-exactly
        let mut ps2 = demo_store();
        for i in 0..ps2.len() {
            for v in ps2.tensor_at_mut(i).data_mut() {
                *v = 0.0;
            }
        }
        ck.load_into(&mut ps2).unwrap();
        for ((_, a), (_, b)) in ps.iter().zip(ps2.iter()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let ps = demo_store();
        let mut bytes =
            checkpoint_bytes(CheckpointKind::Backbone, &serde_json::json!({}), &ps).unwrap();
        bytes[0] = b'X';
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_version_is_version_error() {
        let ps = demo_store();
        let mut bytes =
            checkpoint_bytes(CheckpointKind::Backbone, &serde_json::json!({}), &ps).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::Version { expected: 1, found: 9 })
        ));
    }

    #[test]
    fn truncation_is_integrity_error() {
        let ps = demo_store();
        let bytes =
            checkpoint_bytes(CheckpointKind::Backbone, &serde_json::json!({}), &ps).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(checkpoint_from_bytes(cut), Err(Error::Integrity(_))));
    }

    #[test]
    fn tensor_count_mismatch_is_integrity_error() {
        let ps = demo_store();
        let mut bytes =
            checkpoint_bytes(CheckpointKind::Backbone, &serde_json::json!({}), &ps).unwrap();
        // Header says 3 tensors; claim 2 so trailing bytes remain.
        let meta_len = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let count_at = 13 + meta_len;
        bytes[count_at..count_at + 4].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Integrity(_))));
    }

    #[test]
    fn digest_tracks_content() {
        let ps = demo_store();
        let d1 = store_digest(&ps);
        let mut ps2 = demo_store();
        assert_eq!(d1, store_digest(&ps2));
        ps2.tensor_at_mut(0).data_mut()[0] += 1.0;
        assert_ne!(d1, store_digest(&ps2));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ps = demo_store();
        save_checkpoint(&path, CheckpointKind::Backbone, &serde_json::json!({"seed": 1}), &ps)
            .unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.kind, CheckpointKind::Backbone);
        assert_eq!(ck.meta["seed"], 1);
    }
}
