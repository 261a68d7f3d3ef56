//! Angle stack container.
//!
//! ```text
//! "PWZS"  u16 version  u16 k  u32 H  u32 W  k x f64 angles
//! k*H*W x f32 envelope, frame-major, row-major within a frame
//! ```
//! All fields little-endian.

use std::path::Path;

use super::{read_bytes, write_bytes, Reader};
use crate::compounding::AngleStack;
use crate::error::{Error, Result};
use crate::image::Image2D;

pub const MAGIC: &[u8; 4] = b"PWZS";
pub const VERSION: u16 = 1;

pub fn encode(stack: &AngleStack) -> Result<Vec<u8>> {
    let (h, w) = stack.shape();
    let k = u16::try_from(stack.k()).map_err(|_| Error::invalid("too many frames for a stack file"))?;
    let h32 = u32::try_from(h).map_err(|_| Error::invalid("frame height exceeds u32"))?;
    let w32 = u32::try_from(w).map_err(|_| Error::invalid("frame width exceeds u32"))?;
    let mut out = Vec::with_capacity(16 + 8 * stack.k() + 4 * stack.k() * h * w);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    for a in stack.angles_deg() {
        out.extend_from_slice(&a.to_le_bytes());
    }
    for f in stack.frames() {
        for v in f.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<AngleStack> {
    let mut r = Reader::new(bytes, path);
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "not a PWZS stack file"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported stack version {version}")));
    }
    let k = r.u16("k")? as usize;
    if k < 2 {
        return Err(Error::format(path, format!("k must be >= 2, header says {k}")));
    }
    let h = r.u32("height")? as usize;
    let w = r.u32("width")? as usize;
    let angles = (0..k).map(|_| r.f64("angles")).collect::<Result<Vec<_>>>()?;
    let expected = k
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let remaining = bytes.len() - (16 + 8 * k);
    if remaining != expected {
        return Err(Error::format(
            path,
            format!("payload is {remaining} bytes, header implies {expected}"),
        ));
    }
    let mut frames = Vec::with_capacity(k);
    for i in 0..k {
        let data = r.f32s(h * w, "payload")?;
        frames.push(Image2D::from_vec(h, w, data).map_err(|e| Error::format(path, format!("frame {i}: {e}")))?);
    }
    r.finish()?;
    AngleStack::new(frames, angles, (0.1, 0.1), path.display().to_string())
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save(stack: &AngleStack, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode(stack)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<AngleStack> {
    let path = path.as_ref();
    decode(&read_bytes(path)?, path)
}
