//! Attribute quantization and 20-bit coordinate splitting.

use serde::{Deserialize, Serialize};

use crate::cloud::GaussianCloud;
use crate::error::{Error, Result};
use crate::pca::AcCoefficients;

pub const COORD_BITS: u32 = 20;
pub const ATTR_BITS: u32 = 10;
/// Fill value for unused channels of 10-bit images.
pub const MID_VALUE: u16 = 1 << (ATTR_BITS - 1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    fn scan(values: impl Iterator<Item = f32>) -> ChannelRange {
        let (min, max) = values.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        ChannelRange { min: min.into(), max: max.into() }
    }
}

pub fn quantize(value: f64, range: ChannelRange, bits: u32) -> u32 {
    if range.is_constant() {
        return 0;
    }
    let levels = ((1u64 << bits) - 1) as f64;
    let t = ((value - range.min) / (range.max - range.min)).clamp(0.0, 1.0);
    (t * levels).round() as u32
}

pub fn dequantize(q: u32, range: ChannelRange, bits: u32) -> f64 {
    if range.is_constant() {
        return range.min;
    }
    let levels = ((1u64 << bits) - 1) as f64;
    range.min + f64::from(q) / levels * (range.max - range.min)
}

pub fn split_hi_lo(q20: u32) -> Result<(u16, u16)> {
    if q20 >= 1 << COORD_BITS {
        return Err(Error::Range { value: q20.into(), limit: 1 << COORD_BITS });
    }
    Ok(((q20 >> ATTR_BITS) as u16, (q20 & 0x3ff) as u16))
}

pub fn join_hi_lo(hi: u16, lo: u16) -> u32 {
    (u32::from(hi) << ATTR_BITS) | u32::from(lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub bits: u32,
    pub ranges: Vec<ChannelRange>,
}

impl GroupParams {
    pub fn quantize(&self, channel: usize, value: f32) -> u32 {
        quantize(value.into(), self.ranges[channel], self.bits)
    }

    pub fn dequantize(&self, channel: usize, q: u32) -> f32 {
        dequantize(q, self.ranges[channel], self.bits) as f32
    }

    fn from_scan(bits: u32, width: usize, data: &[f32]) -> GroupParams {
        let n = data.len() / width.max(1);
        let ranges = (0..width)
            .map(|c| ChannelRange::scan((0..n).map(|i| data[i * width + c])))
            .collect();
        GroupParams { bits, ranges }
    }
}

/// Ranges and bit depths for every channel group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationParams {
    pub positions: GroupParams,
    pub sh_dc: GroupParams,
    pub ac_coeffs: GroupParams,
    pub opacity: GroupParams,
    pub scale: GroupParams,
    pub rotation: GroupParams,
}

impl QuantizationParams {
    pub fn quantize_position(&self, p: [f32; 3]) -> [u32; 3] {
        [0, 1, 2].map(|a| self.positions.quantize(a, p[a]))
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let groups = [
            ("positions", &self.positions, 3, COORD_BITS),
            ("sh_dc", &self.sh_dc, 3, ATTR_BITS),
            ("ac_coeffs", &self.ac_coeffs, k, ATTR_BITS),
            ("opacity", &self.opacity, 1, ATTR_BITS),
            ("scale", &self.scale, 3, ATTR_BITS),
            ("rotation", &self.rotation, 4, ATTR_BITS),
        ];
        for (name, g, width, bits) in groups {
            if g.ranges.len() != width || g.bits != bits {
                return Err(Error::Container(format!("bad quantization params for {name}")));
            }
            if g.ranges.iter().any(|r| !r.min.is_finite() || !r.max.is_finite() || r.max < r.min) {
                return Err(Error::Container(format!("invalid range in {name}")));
            }
        }
        Ok(())
    }
}

/// Per-channel min/max over all primitives. Positions share one cubic box
/// spanning the extremes of all three axes.
pub fn compute_ranges(cloud: &GaussianCloud, coeffs: &AcCoefficients) -> QuantizationParams {
    let axes = ChannelRange::scan(cloud.positions.iter().copied());
    QuantizationParams {
        positions: GroupParams { bits: COORD_BITS, ranges: vec![axes; 3] },
        sh_dc: GroupParams::from_scan(ATTR_BITS, 3, &cloud.sh_dc),
        ac_coeffs: GroupParams::from_scan(ATTR_BITS, coeffs.k, &coeffs.coeffs),
        opacity: GroupParams::from_scan(ATTR_BITS, 1, &cloud.opacity),
        scale: GroupParams::from_scan(ATTR_BITS, 3, &cloud.scale),
        rotation: GroupParams::from_scan(ATTR_BITS, 4, &cloud.rotation),
    }
}
