//! Morton (Z-order) codes.
//!
//! 3D codes interleave x, y, z so that bit `j` of x lands at `3j`, y at
//! `3j + 1`, z at `3j + 2`. 2D codes put the column at even bits and the row
//! at odd bits.

use crate::cloud::GaussianCloud;
use crate::error::{Error, Result};
use crate::quant::QuantizationParams;

pub const MORTON3_BITS: u32 = 20;
pub const MORTON2_BITS: u32 = 20;

fn spread3(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    x = (x | (x << 2)) & 0x1249249249249249;
    x
}

fn spread2(v: u64) -> u64 {
    let mut x = v & 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000ffff0000ffff;
    x = (x | (x << 8)) & 0x00ff00ff00ff00ff;
    x = (x | (x << 4)) & 0x0f0f0f0f0f0f0f0f;
    x = (x | (x << 2)) & 0x3333333333333333;
    x = (x | (x << 1)) & 0x5555555555555555;
    x
}

fn compact2(v: u64) -> u64 {
    let mut x = v & 0x5555555555555555;
    x = (x | (x >> 1)) & 0x3333333333333333;
    x = (x | (x >> 2)) & 0x0f0f0f0f0f0f0f0f;
    x = (x | (x >> 4)) & 0x00ff00ff00ff00ff;
    x = (x | (x >> 8)) & 0x0000ffff0000ffff;
    x = (x | (x >> 16)) & 0x00000000ffffffff;
    x
}

/// 60-bit code from three 20-bit coordinates.
pub fn morton3_encode(xq: u32, yq: u32, zq: u32) -> Result<u64> {
    let limit = 1u64 << MORTON3_BITS;
    for v in [xq, yq, zq] {
        if u64::from(v) >= limit {
            return Err(Error::Range { value: v.into(), limit });
        }
    }
    Ok(spread3(xq.into()) | (spread3(yq.into()) << 1) | (spread3(zq.into()) << 2))
}

pub fn morton2_encode(col: u32, row: u32) -> u64 {
    spread2(col.into()) | (spread2(row.into()) << 1)
}

/// Grid cell `(col, row)` visited at scan position `rank`.
pub fn morton2_decode(rank: u64) -> (u32, u32) {
    (compact2(rank) as u32, compact2(rank >> 1) as u32)
}

/// Permutation ordering primitives by the 3D Morton code of their quantized
/// positions. Equal codes keep their original relative order.
pub fn sort_by_morton(cloud: &GaussianCloud, params: &QuantizationParams) -> Vec<usize> {
    let codes = morton_codes(cloud, params);
    let mut perm: Vec<usize> = (0..cloud.len()).collect();
    perm.sort_by_key(|&i| codes[i]);
    perm
}

pub fn morton_codes(cloud: &GaussianCloud, params: &QuantizationParams) -> Vec<u64> {
    (0..cloud.len())
        .map(|i| {
            let [x, y, z] = params.quantize_position(cloud.position(i));
            morton3_encode(x, y, z).expect("20-bit quantized coordinates")
        })
        .collect()
}
