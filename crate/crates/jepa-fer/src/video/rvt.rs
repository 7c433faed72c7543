//! RVT1 raw-video container: magic `RVT1`, u32 T, H, W, C (little-endian),
//! then the u8 payload in frame-major row-major order. Real codecs are out
//! of scope; converting from MP4 or similar is an external preprocessing
//! step documented in the README.

use super::VideoTensor;
use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RVT1";
const HEADER_LEN: u64 = 20;

/// Write `v` to `path` atomically.
pub fn store_video(v: &VideoTensor, path: &Path) -> Result<()> {
    let tmp = path.with_extension("rvt.tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(tmp.display().to_string(), e);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(v.frames as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(v.height as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(v.width as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(v.channels as u32).map_err(io_err)?;
        w.write_all(&v.data).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read an RVT1 file; header dims must match the payload exactly.
pub fn load_video(path: &Path) -> Result<VideoTensor> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format {
        offset: 0,
        msg: format!("{}: file too short for RVT1 magic", path.display()),
    })?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("{}: bad magic, expected 'RVT1'", path.display()),
        });
    }
    let mut dims = [0u32; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = r.read_u32::<LittleEndian>().map_err(|_| Error::Format {
            offset: 4 + 4 * i as u64,
            msg: format!("{}: truncated header", path.display()),
        })?;
    }
    let (t, h, w, c) = (dims[0] as usize, dims[1] as usize, dims[2] as usize, dims[3] as usize);
    let expected = t
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: format!("{}: header dims overflow", path.display()),
        })?;
    let mut data = Vec::with_capacity(expected);
    r.read_to_end(&mut data)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    if data.len() != expected {
        return Err(Error::Format {
            offset: HEADER_LEN + data.len() as u64,
            msg: format!(
                "{}: payload holds {} bytes, header {}x{}x{}x{} requires {}",
                path.display(),
                data.len(),
                t,
                h,
                w,
                c,
                expected
            ),
        });
    }
    VideoTensor::new(t, h, w, c, data)
}
