//! Lossless single-image raster.
//!
//! ```text
//! "PWZR"  u16 version  u16 reserved(0)  u32 H  u32 W  H*W x f32 (LE, row-major)
//! ```

use std::path::Path;

use super::{read_bytes, write_bytes, Reader};
use crate::error::{Error, Result};
use crate::image::Image2D;

pub const MAGIC: &[u8; 4] = b"PWZR";
pub const VERSION: u16 = 1;

pub fn encode(image: &Image2D<f32>) -> Result<Vec<u8>> {
    let (h, w) = image.shape();
    let h32 = u32::try_from(h).map_err(|_| Error::invalid("height exceeds u32"))?;
    let w32 = u32::try_from(w).map_err(|_| Error::invalid("width exceeds u32"))?;
    let mut out = Vec::with_capacity(16 + 4 * h * w);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    for v in image.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Image2D<f32>> {
    let mut r = Reader::new(bytes, path);
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "not a PWZR raster"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported raster version {version}")));
    }
    r.u16("reserved")?;
    let h = r.u32("height")? as usize;
    let w = r.u32("width")? as usize;
    if bytes.len() - 16 != h * w * 4 {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, header implies {}", bytes.len() - 16, h * w * 4),
        ));
    }
    let data = r.f32s(h * w, "payload")?;
    r.finish()?;
    Image2D::from_vec(h, w, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save(image: &Image2D<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode(image)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<Image2D<f32>> {
    let path = path.as_ref();
    decode(&read_bytes(path)?, path)
}
