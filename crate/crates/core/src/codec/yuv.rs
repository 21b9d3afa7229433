//! Raw planar 10-bit YUV 4:4:4 frames: three planes in channel order,
//! row-major, one little-endian u16 per sample.

use crate::error::{Error, Result};
use crate::maps::Image10;

pub fn frame_len(side: usize) -> usize {
    3 * side * side * 2
}

pub fn write_yuv444p10(image: &Image10) -> Result<Vec<u8>> {
    image.check_range()?;
    let mut out = Vec::with_capacity(frame_len(image.side));
    for &s in &image.samples {
        out.extend(s.to_le_bytes());
    }
    Ok(out)
}

pub fn read_yuv444p10(bytes: &[u8], side: usize) -> Result<Image10> {
    if bytes.len() != frame_len(side) {
        return Err(Error::Format(format!(
            "frame is {} bytes, a {side}×{side} 4:4:4 10-bit frame needs {}",
            bytes.len(),
            frame_len(side)
        )));
    }
    let samples = bytes.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
    let image = Image10 { side, samples };
    image.check_range()?;
    Ok(image)
}
