//! 8-bit binary PGM (P5) export.

use std::path::Path;

use super::write_bytes;
use crate::compounding::BModeImage;
use crate::error::Result;

/// `round(255 v)` with halves rounded up.
pub fn quantize(v: f32) -> u8 {
    (255.0 * v as f64 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode(image: &BModeImage) -> Vec<u8> {
    let (h, w) = image.shape();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.pixels().as_slice().iter().map(|&v| quantize(v)));
    out
}

pub fn save(image: &BModeImage, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode(image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image2D;

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.0 / 255.0), 1);
    }

    #[test]
    fn layout() {
        let b = BModeImage::new(Image2D::from_vec(2, 3, vec![0.0, 1.0, 0.5, 0.0, 0.0, 1.0]).unwrap(), 80.0).unwrap();
        let bytes = encode(&b);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 255, 128, 0, 0, 255]);
        let ones = BModeImage::new(Image2D::filled(2, 2, 1.0), 80.0).unwrap();
        assert!(encode(&ones)[header.len() - 1..].iter().skip(1).all(|&v| v == 255));
    }
}
