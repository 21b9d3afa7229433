//! Codec stage: raw frame I/O plus the pluggable per-image backends.

pub mod external;
pub mod internal;
pub mod yuv;

use serde::{Deserialize, Serialize};

pub use external::ExternalBackend;
pub use yuv::{read_yuv444p10, write_yuv444p10};

use crate::error::{Error, Result};
use crate::maps::Image10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    Lossless,
    Lossy,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CodecBackend {
    #[default]
    Internal,
    External(ExternalBackend),
}

impl CodecBackend {
    pub fn id(&self) -> String {
        match self {
            CodecBackend::Internal => "internal".into(),
            CodecBackend::External(b) => format!("external:{}", b.name),
        }
    }

    pub fn max_parallel(&self) -> usize {
        match self {
            CodecBackend::Internal => rayon::current_num_threads(),
            CodecBackend::External(b) => b.max_parallel,
        }
    }
}

/// Encodes one image. Lossless encodes are decoded again and compared, so a
/// backend that is not actually lossless fails here instead of at decode.
pub fn encode_image(image: &Image10, mode: CodecMode, qp: u32, backend: &CodecBackend) -> Result<Vec<u8>> {
    let bytes = match (backend, mode) {
        (CodecBackend::Internal, CodecMode::Lossless) => internal::encode_lossless(image)?,
        (CodecBackend::Internal, CodecMode::Lossy) => internal::encode_lossy(image, qp)?,
        (CodecBackend::External(b), _) => b.encode(image, mode == CodecMode::Lossless, qp)?,
    };
    if mode == CodecMode::Lossless {
        let back = decode_image(&bytes, image.side, mode, qp, backend)?;
        if &back != image {
            return Err(Error::Integrity(format!("{} backend is not lossless on this image", backend.id())));
        }
    }
    Ok(bytes)
}

pub fn decode_image(bytes: &[u8], side: usize, mode: CodecMode, qp: u32, backend: &CodecBackend) -> Result<Image10> {
    match (backend, mode) {
        (CodecBackend::Internal, CodecMode::Lossless) => internal::decode_lossless(bytes, side),
        (CodecBackend::Internal, CodecMode::Lossy) => internal::decode_lossy(bytes, side, qp),
        (CodecBackend::External(b), _) => b.decode(bytes, side, mode == CodecMode::Lossless, qp),
    }
}
