//! Gaussian cloud data model.
//!
//! Attributes are kept exactly as a 3DGS training run stores them: log-scales,
//! unnormalized quaternions, and raw (pre-sigmoid) opacity.

use crate::error::{Error, Result};

pub const SH_AC_CHANNELS: usize = 45;
/// Float channels per primitive: 3 position + 3 DC + 45 AC + 1 opacity + 3 scale + 4 rotation.
pub const CHANNELS: usize = 59;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    /// N×3, row-major.
    pub positions: Vec<f32>,
    /// N×3.
    pub sh_dc: Vec<f32>,
    /// N×45, channel `c` of primitive `i` at `i * 45 + c`.
    pub sh_ac: Vec<f32>,
    /// N×1.
    pub opacity: Vec<f32>,
    /// N×3.
    pub scale: Vec<f32>,
    /// N×4.
    pub rotation: Vec<f32>,
}

impl GaussianCloud {
    /// All-zero cloud with `n` primitives.
    pub fn zeros(n: usize) -> Self {
        GaussianCloud {
            positions: vec![0.0; n * 3],
            sh_dc: vec![0.0; n * 3],
            sh_ac: vec![0.0; n * SH_AC_CHANNELS],
            opacity: vec![0.0; n],
            scale: vec![0.0; n * 3],
            rotation: vec![0.0; n * 4],
        }
    }

    pub fn len(&self) -> usize {
        self.opacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity.is_empty()
    }

    pub fn position(&self, i: usize) -> [f32; 3] {
        [self.positions[3 * i], self.positions[3 * i + 1], self.positions[3 * i + 2]]
    }

    pub fn sh_ac_row(&self, i: usize) -> &[f32] {
        &self.sh_ac[i * SH_AC_CHANNELS..(i + 1) * SH_AC_CHANNELS]
    }

    /// The 59 channels of primitive `i` in file order.
    pub fn row(&self, i: usize) -> [f32; CHANNELS] {
        let mut out = [0.0; CHANNELS];
        out[0..3].copy_from_slice(&self.positions[3 * i..3 * i + 3]);
        out[3..6].copy_from_slice(&self.sh_dc[3 * i..3 * i + 3]);
        out[6..51].copy_from_slice(self.sh_ac_row(i));
        out[51] = self.opacity[i];
        out[52..55].copy_from_slice(&self.scale[3 * i..3 * i + 3]);
        out[55..59].copy_from_slice(&self.rotation[4 * i..4 * i + 4]);
        out
    }

    pub fn set_row(&mut self, i: usize, row: &[f32; CHANNELS]) {
        self.positions[3 * i..3 * i + 3].copy_from_slice(&row[0..3]);
        self.sh_dc[3 * i..3 * i + 3].copy_from_slice(&row[3..6]);
        self.sh_ac[i * SH_AC_CHANNELS..(i + 1) * SH_AC_CHANNELS].copy_from_slice(&row[6..51]);
        self.opacity[i] = row[51];
        self.scale[3 * i..3 * i + 3].copy_from_slice(&row[52..55]);
        self.rotation[4 * i..4 * i + 4].copy_from_slice(&row[55..59]);
    }

    pub fn from_rows(rows: &[[f32; CHANNELS]]) -> Self {
        let mut cloud = GaussianCloud::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            cloud.set_row(i, row);
        }
        cloud
    }

    /// New cloud whose primitive `j` is `self`'s primitive `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = GaussianCloud::zeros(perm.len());
        for (dst, &src) in perm.iter().enumerate() {
            out.set_row(dst, &self.row(src));
        }
        out
    }

    /// Checks shape consistency and rejects non-finite values.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Shape("cloud has no primitives".into()));
        }
        let shapes = [
            ("positions", self.positions.len(), 3),
            ("sh_dc", self.sh_dc.len(), 3),
            ("sh_ac", self.sh_ac.len(), SH_AC_CHANNELS),
            ("scale", self.scale.len(), 3),
            ("rotation", self.rotation.len(), 4),
        ];
        for (name, len, width) in shapes {
            if len != n * width {
                return Err(Error::Shape(format!(
                    "{name} holds {len} values, expected {n}×{width}"
                )));
            }
        }
        for i in 0..n {
            if let Some(c) = self.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::Data {
                    index: i,
                    msg: format!("non-finite value in channel {c}"),
                });
            }
        }
        Ok(())
    }

    /// Rows sorted by their bit patterns; two clouds are equal as point sets
    /// iff their canonical rows are equal.
    pub fn canonical_rows(&self) -> Vec<[u32; CHANNELS]> {
        let mut rows: Vec<[u32; CHANNELS]> = (0..self.len())
            .map(|i| self.row(i).map(f32::to_bits))
            .collect();
        rows.sort_unstable();
        rows
    }

    pub fn same_point_set(&self, other: &GaussianCloud) -> bool {
        self.len() == other.len() && self.canonical_rows() == other.canonical_rows()
    }
}
