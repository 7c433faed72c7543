//! VJFC checkpoint container.
//!
//! Layout (little-endian): magic `VJFC`, u32 version = 1, u32 tensor count,
//! then per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32),
//! u8 rank, u32 dims[rank], raw f32 values. Tensor order is preserved, so
//! writing the same model twice produces byte-identical files.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"VJFC";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// A named tensor snapshot, values stored as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// An ordered collection of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<Entry>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn push<E: Element>(&mut self, name: impl Into<String>, t: &Tensor<E>) {
        self.entries.push(Entry {
            name: name.into(),
            dims: t.shape().to_vec(),
            values: t.values().iter().map(|&v| Element::into_f32(v)).collect(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Copy the named entry's values into `dst`, checking shape agreement.
    pub fn load_into<E: Element>(&self, name: &str, dst: &Tensor<E>) -> Result<()> {
        let e = self
            .get(name)
            .ok_or_else(|| Error::protocol(format!("checkpoint missing tensor '{name}'")))?;
        if e.dims != dst.shape() {
            return Err(Error::Dimension {
                op: "checkpoint load",
                lhs: e.dims.clone(),
                rhs: dst.shape().to_vec(),
            });
        }
        let vals: Vec<E> = e.values.iter().map(|&v| E::from_f32(v)).collect();
        dst.set_values(&vals)
    }

    /// Serialize to `path` atomically (write to a temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
            let mut w = BufWriter::new(file);
            self.write_to(&mut w)
                .map_err(|e| Error::io(tmp.display().to_string(), e))?;
            w.flush().map_err(|e| Error::io(tmp.display().to_string(), e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for e in &self.entries {
            w.write_u16::<LittleEndian>(e.name.len() as u16)?;
            w.write_all(e.name.as_bytes())?;
            w.write_u8(DTYPE_F32)?;
            w.write_u8(e.dims.len() as u8)?;
            for &d in &e.dims {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in &e.values {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r)
    }

    fn read_from<R: Read + Seek>(r: &mut R) -> Result<Checkpoint> {
        let offset = |r: &mut R| r.stream_position().unwrap_or(0);
        let fail = |off: u64, msg: &str| Error::Format {
            offset: off,
            msg: msg.to_string(),
        };

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| fail(0, "file too short for VJFC magic"))?;
        if &magic != MAGIC {
            return Err(fail(0, "bad magic, expected 'VJFC'"));
        }
        let version = r
            .read_u32::<LittleEndian>()
            .map_err(|_| fail(4, "truncated version field"))?;
        if version != VERSION {
            return Err(fail(4, &format!("unsupported version {version}")));
        }
        let count = r
            .read_u32::<LittleEndian>()
            .map_err(|_| fail(8, "truncated tensor count"))?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let off = offset(r);
            let name_len = r
                .read_u16::<LittleEndian>()
                .map_err(|_| fail(off, "truncated name length"))? as usize;
            let mut name_buf = vec![0u8; name_len];
            r.read_exact(&mut name_buf)
                .map_err(|_| fail(offset(r), "truncated tensor name"))?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| fail(off, "tensor name is not UTF-8"))?;
            let dtype = r.read_u8().map_err(|_| fail(offset(r), "truncated dtype"))?;
            if dtype != DTYPE_F32 {
                return Err(fail(offset(r), &format!("unsupported dtype {dtype}")));
            }
            let rank = r.read_u8().map_err(|_| fail(offset(r), "truncated rank"))? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(
                    r.read_u32::<LittleEndian>()
                        .map_err(|_| fail(offset(r), "truncated dims"))? as usize,
                );
            }
            let numel: usize = dims.iter().product();
            let mut values = vec![0.0f32; numel];
            r.read_f32_into::<LittleEndian>(&mut values)
                .map_err(|_| fail(offset(r), "truncated tensor payload"))?;
            entries.push(Entry { name, dims, values });
        }
        Ok(Checkpoint { entries })
    }

    /// FNV-1a hash over the serialized byte stream; used to assert that a
    /// frozen model did not change.
    pub fn digest(&self) -> u64 {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for &b in &buf {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn roundtrip_preserves_entries_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vjfc");
        let mut ck = Checkpoint::new();
        ck.push(
            "encoder.block0.attn.wq",
            &Tensor::<f32>::new(&[2, 3], vec![1.0, -2.0, 3.5, 0.0, 4.25, -0.125]).unwrap(),
        );
        ck.push("predictor.mask_token", &Tensor::<f32>::new(&[1, 4], vec![9.0; 4]).unwrap());
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ck, back);

        ck.save(&path).unwrap();
        let again = std::fs::read(&path).unwrap();
        ck.save(&path).unwrap();
        assert_eq!(again, std::fs::read(&path).unwrap(), "writes must be byte-identical");
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vjfc");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        match Checkpoint::load(&path) {
            Err(crate::Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.vjfc");
        let mut ck = Checkpoint::new();
        ck.push("w", &Tensor::<f32>::new(&[4], vec![1.0; 4]).unwrap());
        ck.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match Checkpoint::load(&path) {
            Err(crate::Error::Format { offset, msg }) => {
                assert!(offset > 0);
                assert!(msg.contains("truncated"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
