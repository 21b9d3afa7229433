//! Packing of quantized primitives into the 7 + k/3 three-channel 10-bit
//! attribute images, and the inverse.
//!
//! Image order and channel mapping:
//!
//! | image      | ch0        | ch1        | ch2        |
//! |------------|------------|------------|------------|
//! | coord_hi   | x >> 10    | y >> 10    | z >> 10    |
//! | coord_lo   | x & 1023   | y & 1023   | z & 1023   |
//! | sh_dc      | dc0        | dc1        | dc2        |
//! | ac_t       | coeff 3t   | coeff 3t+1 | coeff 3t+2 |
//! | scale      | s0         | s1         | s2         |
//! | opacity    | opacity    | 512        | 512        |
//! | rot_0      | r0         | r1         | r2         |
//! | rot_1      | r3         | 512        | 512        |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{GaussianCloud, CHANNELS};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::morton::morton2_decode;
use crate::pca::{check_k, reconstruct, AcCoefficients, PcaModel};
use crate::plas::FeatureGrid;
use crate::quant::{join_hi_lo, split_hi_lo, QuantizationParams, ATTR_BITS, COORD_BITS, MID_VALUE};

pub const SAMPLE_LIMIT: u16 = 1 << ATTR_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ImageTag {
    CoordHi,
    CoordLo,
    ShDc,
    Ac(usize),
    Scale,
    Opacity,
    Rot0,
    Rot1,
}

impl ImageTag {
    /// All tags for `k` retained coefficients, in container order.
    pub fn sequence(k: usize) -> Vec<ImageTag> {
        let mut tags = vec![ImageTag::CoordHi, ImageTag::CoordLo, ImageTag::ShDc];
        tags.extend((0..k / 3).map(ImageTag::Ac));
        tags.extend([ImageTag::Scale, ImageTag::Opacity, ImageTag::Rot0, ImageTag::Rot1]);
        tags
    }

    pub fn is_coordinate(self) -> bool {
        matches!(self, ImageTag::CoordHi | ImageTag::CoordLo)
    }

    /// Attribute group used for per-group codec settings.
    pub fn group(self) -> &'static str {
        match self {
            ImageTag::CoordHi | ImageTag::CoordLo => "coords",
            ImageTag::ShDc => "sh_dc",
            ImageTag::Ac(_) => "ac",
            ImageTag::Scale => "scale",
            ImageTag::Opacity => "opacity",
            ImageTag::Rot0 | ImageTag::Rot1 => "rotation",
        }
    }
}

impl fmt::Display for ImageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageTag::CoordHi => f.write_str("coord_hi"),
            ImageTag::CoordLo => f.write_str("coord_lo"),
            ImageTag::ShDc => f.write_str("sh_dc"),
            ImageTag::Ac(t) => write!(f, "ac_{t}"),
            ImageTag::Scale => f.write_str("scale"),
            ImageTag::Opacity => f.write_str("opacity"),
            ImageTag::Rot0 => f.write_str("rot_0"),
            ImageTag::Rot1 => f.write_str("rot_1"),
        }
    }
}

impl FromStr for ImageTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coord_hi" => ImageTag::CoordHi,
            "coord_lo" => ImageTag::CoordLo,
            "sh_dc" => ImageTag::ShDc,
            "scale" => ImageTag::Scale,
            "opacity" => ImageTag::Opacity,
            "rot_0" => ImageTag::Rot0,
            "rot_1" => ImageTag::Rot1,
            _ => match s.strip_prefix("ac_").and_then(|t| t.parse().ok()) {
                Some(t) if t < 15 => ImageTag::Ac(t),
                _ => return Err(Error::Container(format!("unknown image tag '{s}'"))),
            },
        })
    }
}

impl Serialize for ImageTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ImageTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// M×M image with three 10-bit channels, stored as three row-major planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image10 {
    pub side: usize,
    pub samples: Vec<u16>,
}

impl Image10 {
    pub fn new(side: usize) -> Self {
        Image10 { side, samples: vec![0; 3 * side * side] }
    }

    pub fn from_samples(side: usize, samples: Vec<u16>) -> Result<Self> {
        if samples.len() != 3 * side * side {
            return Err(Error::Shape(format!("{} samples for a {side}×{side}×3 image", samples.len())));
        }
        Ok(Image10 { side, samples })
    }

    pub fn plane(&self, c: usize) -> &[u16] {
        let n = self.side * self.side;
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, pixel: usize) -> u16 {
        self.samples[c * self.side * self.side + pixel]
    }

    pub fn set(&mut self, c: usize, pixel: usize, v: u16) {
        let n = self.side * self.side;
        self.samples[c * n + pixel] = v;
    }

    pub fn check_range(&self) -> Result<()> {
        match self.samples.iter().position(|&s| s >= SAMPLE_LIMIT) {
            Some(i) => Err(Error::Corruption(format!("sample {} = {} exceeds 10 bits", i, self.samples[i]))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMapSet {
    pub side: usize,
    pub n_real: usize,
    pub k: usize,
    pub images: Vec<(ImageTag, Image10)>,
}

impl AttributeMapSet {
    pub fn image(&self, tag: ImageTag) -> Result<&Image10> {
        self.images
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, img)| img)
            .ok_or_else(|| Error::Container(format!("missing image {tag}")))
    }
}

/// Number of image samples per primitive for `k` coefficients.
fn row_width(k: usize) -> usize {
    3 * (7 + k / 3)
}

/// All image samples of primitive `i`, image-major in [`ImageTag::sequence`]
/// order (three channels per image).
pub fn quantize_row(
    cloud: &GaussianCloud,
    coeffs: &AcCoefficients,
    params: &QuantizationParams,
    i: usize,
    out: &mut [u16],
) {
    let k = coeffs.k;
    let q = params.quantize_position(cloud.position(i));
    for a in 0..3 {
        let (hi, lo) = split_hi_lo(q[a]).expect("20-bit coordinate");
        out[a] = hi;
        out[3 + a] = lo;
    }
    for c in 0..3 {
        out[6 + c] = params.sh_dc.quantize(c, cloud.sh_dc[3 * i + c]) as u16;
    }
    let ac = coeffs.row(i);
    for (j, &v) in ac.iter().enumerate() {
        out[9 + j] = params.ac_coeffs.quantize(j, v) as u16;
    }
    let base = 9 + k;
    for c in 0..3 {
        out[base + c] = params.scale.quantize(c, cloud.scale[3 * i + c]) as u16;
    }
    out[base + 3] = params.opacity.quantize(0, cloud.opacity[i]) as u16;
    out[base + 4] = MID_VALUE;
    out[base + 5] = MID_VALUE;
    for c in 0..3 {
        out[base + 6 + c] = params.rotation.quantize(c, cloud.rotation[4 * i + c]) as u16;
    }
    out[base + 9] = params.rotation.quantize(3, cloud.rotation[4 * i + 3]) as u16;
    out[base + 10] = MID_VALUE;
    out[base + 11] = MID_VALUE;
}

/// Quantized sample rows for every primitive, `row_width(k)` samples each.
pub fn quantize_all(cloud: &GaussianCloud, coeffs: &AcCoefficients, params: &QuantizationParams) -> Vec<u16> {
    let w = row_width(coeffs.k);
    let mut rows = vec![0u16; cloud.len() * w];
    rows.par_chunks_mut(w).enumerate().for_each(|(i, out)| quantize_row(cloud, coeffs, params, i, out));
    rows
}

/// Dequantizes one sample row into a 59-channel row (SH AC left at zero) and
/// the k dequantized coefficients.
fn dequantize_row(row: &[u16], params: &QuantizationParams, k: usize, ac_out: &mut [f32]) -> [f32; CHANNELS] {
    let mut out = [0f32; CHANNELS];
    for a in 0..3 {
        out[a] = params.positions.dequantize(a, join_hi_lo(row[a], row[3 + a]));
    }
    for c in 0..3 {
        out[3 + c] = params.sh_dc.dequantize(c, row[6 + c].into());
    }
    for j in 0..k {
        ac_out[j] = params.ac_coeffs.dequantize(j, row[9 + j].into());
    }
    let base = 9 + k;
    for c in 0..3 {
        out[52 + c] = params.scale.dequantize(c, row[base + c].into());
    }
    out[51] = params.opacity.dequantize(0, row[base + 3].into());
    for c in 0..3 {
        out[55 + c] = params.rotation.dequantize(c, row[base + 6 + c].into());
    }
    out[58] = params.rotation.dequantize(3, row[base + 9].into());
    out
}

fn rows_to_cloud(rows: &[u16], n: usize, params: &QuantizationParams, pca: &PcaModel, k: usize) -> Result<GaussianCloud> {
    let w = row_width(k);
    let mut cloud = GaussianCloud::zeros(n);
    let mut coeffs = AcCoefficients { k, coeffs: vec![0.0; n * k] };
    for i in 0..n {
        let row = dequantize_row(&rows[i * w..(i + 1) * w], params, k, &mut coeffs.coeffs[i * k..(i + 1) * k]);
        cloud.set_row(i, &row);
    }
    cloud.sh_ac = reconstruct(pca, &coeffs)?;
    Ok(cloud)
}

/// The cloud a lossless decode must reproduce: every attribute quantized and
/// dequantized, SH AC rebuilt from the quantized coefficients.
pub fn quantized_cloud(
    cloud: &GaussianCloud,
    coeffs: &AcCoefficients,
    params: &QuantizationParams,
    pca: &PcaModel,
) -> Result<GaussianCloud> {
    let rows = quantize_all(cloud, coeffs, params);
    rows_to_cloud(&rows, cloud.len(), params, pca, coeffs.k)
}

pub fn assemble(
    cloud: &GaussianCloud,
    coeffs: &AcCoefficients,
    layout: &GridLayout,
    params: &QuantizationParams,
) -> Result<AttributeMapSet> {
    check_k(coeffs.k)?;
    if layout.n_real != cloud.len() || coeffs.len() != cloud.len() {
        return Err(Error::Shape(format!(
            "layout holds {} primitives, cloud {}, coefficients {}",
            layout.n_real,
            cloud.len(),
            coeffs.len()
        )));
    }
    params.validate(coeffs.k)?;
    let k = coeffs.k;
    let w = row_width(k);
    let rows = quantize_all(cloud, coeffs, params);
    let pixels = layout.side * layout.side;
    let tags = ImageTag::sequence(k);
    let images = tags
        .iter()
        .enumerate()
        .map(|(t, &tag)| {
            let mut img = Image10::new(layout.side);
            for c in 0..3 {
                for p in 0..pixels {
                    let src = layout.source(p) as usize;
                    img.set(c, p, rows[src * w + 3 * t + c]);
                }
            }
            (tag, img)
        })
        .collect();
    Ok(AttributeMapSet { side: layout.side, n_real: cloud.len(), k, images })
}

/// Reads the first `n_real` cells in 2D scan order back into a cloud.
pub fn disassemble(maps: &AttributeMapSet, params: &QuantizationParams, pca: &PcaModel) -> Result<GaussianCloud> {
    check_k(maps.k)?;
    params.validate(maps.k)?;
    if maps.n_real == 0 || maps.n_real > maps.side * maps.side {
        return Err(Error::Container(format!("{} primitives in a {}×{} grid", maps.n_real, maps.side, maps.side)));
    }
    let tags = ImageTag::sequence(maps.k);
    let images: Vec<&Image10> = tags.iter().map(|&t| maps.image(t)).collect::<Result<_>>()?;
    for img in &images {
        if img.side != maps.side {
            return Err(Error::Container("image side mismatch".into()));
        }
        img.check_range()?;
    }
    let w = row_width(maps.k);
    let mut rows = vec![0u16; maps.n_real * w];
    for (rank, row) in rows.chunks_mut(w).enumerate() {
        let (col, r) = morton2_decode(rank as u64);
        let p = r as usize * maps.side + col as usize;
        for (t, img) in images.iter().enumerate() {
            for c in 0..3 {
                row[3 * t + c] = img.get(c, p);
            }
        }
    }
    rows_to_cloud(&rows, maps.n_real, params, pca, maps.k)
}

/// Per-group weights used by MiniPLAS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub coords: f64,
    pub sh_dc: f64,
    pub ac: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl Default for ChannelWeights {
    fn default() -> Self {
        ChannelWeights { coords: 1.0, sh_dc: 1.0, ac: 1.0, opacity: 1.0, scale: 1.0, rotation: 1.0 }
    }
}

impl ChannelWeights {
    fn expand(&self, k: usize) -> Vec<f64> {
        let mut w = vec![self.coords; 3];
        w.extend([self.sh_dc; 3]);
        w.extend(std::iter::repeat_n(self.ac, k));
        w.extend([self.scale; 3]);
        w.push(self.opacity);
        w.extend([self.rotation; 4]);
        w
    }
}

/// Features per pixel: every quantized channel scaled to [0, 1]
/// (coordinates at full 20-bit precision, padding channels dropped).
pub fn feature_grid(
    cloud: &GaussianCloud,
    coeffs: &AcCoefficients,
    layout: &GridLayout,
    params: &QuantizationParams,
    weights: &ChannelWeights,
) -> Result<FeatureGrid> {
    if layout.n_real != cloud.len() {
        return Err(Error::Shape("layout does not match cloud".into()));
    }
    let k = coeffs.k;
    let w = row_width(k);
    let rows = quantize_all(cloud, coeffs, params);
    let channels = 14 + k;
    let coord_scale = 1.0 / ((1u32 << COORD_BITS) - 1) as f32;
    let attr_scale = 1.0 / (SAMPLE_LIMIT - 1) as f32;
    let pixels = layout.side * layout.side;
    let mut data = vec![0f32; pixels * channels];
    data.par_chunks_mut(channels).enumerate().for_each(|(p, out)| {
        let row = &rows[layout.source(p) as usize * w..][..w];
        for a in 0..3 {
            out[a] = join_hi_lo(row[a], row[3 + a]) as f32 * coord_scale;
        }
        // dc, ac, scale, opacity
        for j in 0..(3 + k + 4) {
            out[3 + j] = f32::from(row[6 + j]) * attr_scale;
        }
        let base = 9 + k;
        for c in 0..3 {
            out[10 + k + c] = f32::from(row[base + 6 + c]) * attr_scale;
        }
        out[13 + k] = f32::from(row[base + 9]) * attr_scale;
    });
    FeatureGrid::new(layout.side, channels, data, weights.expand(k))
}
