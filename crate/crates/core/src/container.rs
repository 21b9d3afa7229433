//! Single-file container: `"GSMC"`, u32 version, u32 manifest length, the
//! manifest as canonical JSON, then the encoded image blocks. Block offsets
//! in the manifest are relative to the first byte after the manifest.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::codec::CodecMode;
use crate::error::{Error, Result};
use crate::maps::ImageTag;
use crate::pca::{check_k, parse_model, PcaModel};
use crate::plas::PlasSchedule;
use crate::quant::QuantizationParams;

pub const MAGIC: &[u8; 4] = b"GSMC";
pub const VERSION: u32 = 1;
const FIXED_HEADER: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub tag: ImageTag,
    pub mode: CodecMode,
    pub qp: u32,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub n_real: usize,
    pub side: usize,
    pub k: usize,
    /// Serialized PCA block, base64.
    pub pca: String,
    pub quant: QuantizationParams,
    pub images: Vec<ImageEntry>,
    pub backend: String,
    /// How the layout was refined; informational only.
    pub miniplas: PlasSchedule,
}

impl Manifest {
    pub fn pca_model(&self) -> Result<PcaModel> {
        let bytes = BASE64.decode(&self.pca).map_err(|e| Error::Container(format!("pca block: {e}")))?;
        let model = parse_model(&bytes).map_err(|e| Error::Container(e.to_string()))?;
        if model.k != self.k {
            return Err(Error::Container(format!("pca block has k={}, manifest k={}", model.k, self.k)));
        }
        Ok(model)
    }

    pub fn set_pca_block(&mut self, bytes: &[u8]) {
        self.pca = BASE64.encode(bytes);
    }

    /// Canonical JSON text: sorted keys, shortest round-trip float formatting.
    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Container(e.to_string()))?;
        serde_json::to_string(&value).map_err(|e| Error::Container(e.to_string()))
    }

    /// Structural checks that do not involve block offsets.
    pub fn validate(&self) -> Result<()> {
        if self.version != VERSION {
            return Err(Error::Container(format!("unsupported manifest version {}", self.version)));
        }
        if self.images.len() < 7 {
            return Err(Error::Container(format!("{} images, at least 7 required", self.images.len())));
        }
        check_k(self.k).map_err(|e| Error::Container(e.to_string()))?;
        let expected = ImageTag::sequence(self.k);
        let tags: Vec<ImageTag> = self.images.iter().map(|e| e.tag).collect();
        if tags != expected {
            return Err(Error::Container(format!("image list does not match k={}", self.k)));
        }
        if let Some(e) = self.images.iter().find(|e| e.tag.is_coordinate() && e.mode != CodecMode::Lossless) {
            return Err(Error::Container(format!("{} must be coded lossless", e.tag)));
        }
        if self.n_real == 0 || !self.side.is_power_of_two() || self.side * self.side < self.n_real {
            return Err(Error::Container(format!("{} primitives do not fit side {}", self.n_real, self.side)));
        }
        self.quant.validate(self.k)?;
        self.pca_model()?;
        Ok(())
    }
}

/// Writes the container; entry offsets and lengths are filled from `blocks`.
pub fn pack_container(manifest: &Manifest, blocks: &[Vec<u8>]) -> Result<Vec<u8>> {
    if blocks.is_empty() {
        return Err(Error::Container("no image blocks".into()));
    }
    if blocks.len() != manifest.images.len() {
        return Err(Error::Container(format!(
            "{} blocks for {} manifest entries",
            blocks.len(),
            manifest.images.len()
        )));
    }
    let mut manifest = manifest.clone();
    let mut offset = 0u64;
    for (entry, block) in manifest.images.iter_mut().zip(blocks) {
        entry.offset = offset;
        entry.length = block.len() as u64;
        offset += entry.length;
    }
    manifest.validate()?;
    let json = manifest.to_canonical_json()?;
    let mut out = Vec::with_capacity(FIXED_HEADER + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for block in blocks {
        out.extend_from_slice(block);
    }
    Ok(out)
}

fn read_header(bytes: &[u8]) -> Result<(Manifest, usize)> {
    if bytes.len() < FIXED_HEADER || &bytes[..4] != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Container(format!("unsupported container version {version}")));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let end = FIXED_HEADER + len;
    let text = bytes.get(FIXED_HEADER..end).ok_or_else(|| Error::Container("truncated manifest".into()))?;
    let manifest: Manifest =
        serde_json::from_slice(text).map_err(|e| Error::Container(format!("manifest: {e}")))?;
    manifest.validate()?;
    Ok((manifest, end))
}

pub fn unpack_container(bytes: &[u8]) -> Result<(Manifest, Vec<Vec<u8>>)> {
    let (manifest, payload_start) = read_header(bytes)?;
    let payload = &bytes[payload_start..];
    let mut spans: Vec<(u64, u64)> = manifest.images.iter().map(|e| (e.offset, e.length)).collect();
    spans.sort();
    let mut cursor = 0u64;
    for &(offset, length) in &spans {
        if offset < cursor {
            return Err(Error::Container("overlapping image blocks".into()));
        }
        cursor = offset
            .checked_add(length)
            .ok_or_else(|| Error::Container("block length overflow".into()))?;
    }
    if cursor > payload.len() as u64 {
        return Err(Error::Container(format!(
            "truncated container: blocks need {cursor} bytes, {} present",
            payload.len()
        )));
    }
    if cursor < payload.len() as u64 {
        return Err(Error::Container("trailing bytes after last block".into()));
    }
    let blocks = manifest
        .images
        .iter()
        .map(|e| payload[e.offset as usize..(e.offset + e.length) as usize].to_vec())
        .collect();
    Ok((manifest, blocks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateReport {
    pub header_bytes: u64,
    pub images: Vec<(ImageTag, u64)>,
    pub total_bytes: u64,
    pub n_primitives: usize,
    /// Bits per primitive over the whole container.
    pub bpp: f64,
}

pub fn bits_per_primitive(total_bytes: u64, n: usize) -> f64 {
    8.0 * total_bytes as f64 / n as f64
}

pub fn bitrate_report(container: &[u8]) -> Result<BitrateReport> {
    let (manifest, payload_start) = read_header(container)?;
    let total = container.len() as u64;
    Ok(BitrateReport {
        header_bytes: payload_start as u64,
        images: manifest.images.iter().map(|e| (e.tag, e.length)).collect(),
        total_bytes: total,
        n_primitives: manifest.n_real,
        bpp: bits_per_primitive(total, manifest.n_real),
    })
}
