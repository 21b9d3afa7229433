//! Built-in fallback codec: left-neighbour prediction per plane, zigzag
//! residuals split into low/high byte planes, then DEFLATE.
//!
//! The lossy mode drops `qp` low bits before coding and restores each
//! sample to the centre of its bucket.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::maps::Image10;

pub const MAX_QP: u32 = 9;

fn zigzag(d: i32) -> u16 {
    ((d << 1) ^ (d >> 31)) as u16
}

fn unzigzag(z: u16) -> i32 {
    let z = i32::from(z);
    (z >> 1) ^ -(z & 1)
}

fn residuals(plane: &[u16], side: usize) -> Vec<u16> {
    let mut out = Vec::with_capacity(plane.len());
    for r in 0..side {
        for c in 0..side {
            let cur = i32::from(plane[r * side + c]);
            let pred = match (r, c) {
                (0, 0) => 0,
                (_, 0) => i32::from(plane[(r - 1) * side]),
                _ => i32::from(plane[r * side + c - 1]),
            };
            out.push(zigzag(cur - pred));
        }
    }
    out
}

fn unresiduals(res: &[u16], side: usize) -> Vec<u16> {
    let mut plane = vec![0u16; res.len()];
    for r in 0..side {
        for c in 0..side {
            let pred = match (r, c) {
                (0, 0) => 0,
                (_, 0) => i32::from(plane[(r - 1) * side]),
                _ => i32::from(plane[r * side + c - 1]),
            };
            plane[r * side + c] = (pred + unzigzag(res[r * side + c])) as u16;
        }
    }
    plane
}

pub fn encode_lossless(image: &Image10) -> Result<Vec<u8>> {
    image.check_range()?;
    let n = image.side * image.side;
    let mut raw = Vec::with_capacity(6 * n);
    for c in 0..3 {
        let res = residuals(image.plane(c), image.side);
        raw.extend(res.iter().map(|&v| v as u8));
        raw.extend(res.iter().map(|&v| (v >> 8) as u8));
    }
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
    enc.write_all(&raw)?;
    Ok(enc.finish()?)
}

pub fn decode_lossless(bytes: &[u8], side: usize) -> Result<Image10> {
    let n = side * side;
    let mut raw = Vec::with_capacity(6 * n);
    DeflateDecoder::new(bytes)
        .take(6 * n as u64 + 1)
        .read_to_end(&mut raw)
        .map_err(|e| Error::Format(format!("deflate stream: {e}")))?;
    if raw.len() != 6 * n {
        return Err(Error::Format(format!("decoded {} bytes, expected {}", raw.len(), 6 * n)));
    }
    let mut samples = Vec::with_capacity(3 * n);
    for plane in raw.chunks_exact(2 * n) {
        let (lo, hi) = plane.split_at(n);
        let res: Vec<u16> = lo.iter().zip(hi).map(|(&l, &h)| u16::from(l) | u16::from(h) << 8).collect();
        samples.extend(unresiduals(&res, side));
    }
    let image = Image10 { side, samples };
    image.check_range()?;
    Ok(image)
}

fn check_qp(qp: u32) -> Result<()> {
    if qp > MAX_QP {
        return Err(Error::Config(format!("internal codec qp must be <= {MAX_QP}, got {qp}")));
    }
    Ok(())
}

pub fn drop_bits(v: u16, qp: u32) -> u16 {
    v >> qp
}

pub fn restore_bits(q: u16, qp: u32) -> u16 {
    if qp == 0 {
        q
    } else {
        (q << qp) + (1 << (qp - 1))
    }
}

pub fn encode_lossy(image: &Image10, qp: u32) -> Result<Vec<u8>> {
    check_qp(qp)?;
    image.check_range()?;
    let shifted = Image10 { side: image.side, samples: image.samples.iter().map(|&v| drop_bits(v, qp)).collect() };
    encode_lossless(&shifted)
}

pub fn decode_lossy(bytes: &[u8], side: usize, qp: u32) -> Result<Image10> {
    check_qp(qp)?;
    let shifted = decode_lossless(bytes, side)?;
    if let Some(v) = shifted.samples.iter().find(|&&v| u32::from(v) >= 1 << (10 - qp)) {
        return Err(Error::Corruption(format!("sample {v} too large for qp {qp}")));
    }
    Ok(Image10 { side, samples: shifted.samples.iter().map(|&q| restore_bits(q, qp)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shift_arithmetic() {
        assert_eq!(drop_bits(7, 2), 1);
        assert_eq!(restore_bits(1, 2), 6);
        assert_eq!(restore_bits(drop_bits(1023, 6), 6), 1023 - 63 + 32);
    }

    #[test]
    fn constant_image_compresses() {
        let img = Image10::from_samples(16, vec![300; 3 * 256]).unwrap();
        let bytes = encode_lossless(&img).unwrap();
        assert!(bytes.len() < 3 * 256 * 2);
        assert_eq!(decode_lossless(&bytes, 16).unwrap(), img);
    }

    #[test]
    fn wrong_side_is_format_error() {
        let img = Image10::from_samples(4, vec![5; 48]).unwrap();
        let bytes = encode_lossless(&img).unwrap();
        assert!(matches!(decode_lossless(&bytes, 8), Err(Error::Format(_))));
        assert!(matches!(decode_lossless(&bytes, 2), Err(Error::Format(_))));
        assert!(decode_lossless(&[1, 2, 3], 4).is_err());
    }

    #[test]
    fn qp_limit() {
        let img = Image10::new(2);
        assert!(matches!(encode_lossy(&img, 10), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn lossless_roundtrip(side in 1usize..9, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = Image10::from_samples(side, (0..3 * side * side).map(|_| rng.gen_range(0..1024)).collect()).unwrap();
            let bytes = encode_lossless(&img).unwrap();
            prop_assert_eq!(decode_lossless(&bytes, side).unwrap(), img);
        }

        #[test]
        fn lossy_error_bound(qp in 0u32..=9, samples in proptest::collection::vec(0u16..1024, 3 * 16)) {
            let img = Image10::from_samples(4, samples).unwrap();
            let out = decode_lossy(&encode_lossy(&img, qp).unwrap(), 4, qp).unwrap();
            let bound = if qp == 0 { 0 } else { 1i32 << (qp - 1) };
            for (a, b) in img.samples.iter().zip(&out.samples) {
                prop_assert!((i32::from(*a) - i32::from(*b)).abs() <= bound);
                prop_assert!(*b < 1024);
            }
        }
    }
}
