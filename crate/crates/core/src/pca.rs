//! Low-rank representation of the 45 SH AC channels.
//!
//! Three reductions are supported:
//! - `Joint`: one PCA over all 45 channels.
//! - `PerColor`: independent 15-channel PCAs for the R, G and B slices,
//!   merged into one global descending-variance order.
//! - `OrderClip`: no PCA; channels are reordered so lower SH orders come
//!   first (coefficient-major, colors interleaved) and the tail is clipped.
//!
//! Each component's sign is fixed so its largest-magnitude entry is
//! positive.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::SH_AC_CHANNELS;
use crate::error::{Error, Result};

const D: usize = SH_AC_CHANNELS;
const COLOR_DIM: usize = D / 3;
const ROW_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaMode {
    Joint,
    PerColor,
    OrderClip,
}

impl PcaMode {
    fn code(self) -> u32 {
        match self {
            PcaMode::Joint => 0,
            PcaMode::PerColor => 1,
            PcaMode::OrderClip => 2,
        }
    }

    fn from_code(code: u32) -> Option<PcaMode> {
        match code {
            0 => Some(PcaMode::Joint),
            1 => Some(PcaMode::PerColor),
            2 => Some(PcaMode::OrderClip),
            _ => None,
        }
    }
}

impl std::fmt::Display for PcaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PcaMode::Joint => "joint",
            PcaMode::PerColor => "per-color",
            PcaMode::OrderClip => "order-clip",
        })
    }
}

impl std::str::FromStr for PcaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(PcaMode::Joint),
            "per-color" => Ok(PcaMode::PerColor),
            "order-clip" => Ok(PcaMode::OrderClip),
            _ => Err(Error::Config(format!("unknown pca mode '{s}'"))),
        }
    }
}

/// Fitted (or decoder-side) reduction model.
///
/// `components[j]` is the j-th basis column. A freshly fitted model holds all
/// 45; a parsed model holds only the `k` transported ones and no `evr`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mode: PcaMode,
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub evr: Vec<f64>,
    pub k: usize,
}

/// N×k projection coefficients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AcCoefficients {
    pub k: usize,
    pub coeffs: Vec<f32>,
}

impl AcCoefficients {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.coeffs.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.coeffs[i * self.k..(i + 1) * self.k]
    }

    /// New coefficient set whose row `j` is row `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> AcCoefficients {
        let mut coeffs = Vec::with_capacity(perm.len() * self.k);
        for &src in perm {
            coeffs.extend_from_slice(self.row(src));
        }
        AcCoefficients { k: self.k, coeffs }
    }
}

pub fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > D || !k.is_multiple_of(3) {
        return Err(Error::Config(format!("k must be a multiple of 3 in 3..=45, got {k}")));
    }
    Ok(())
}

/// Channel kept at position `j` in order-clip mode: coefficient `j / 3` of
/// color `j % 3`.
pub fn order_clip_channel(j: usize) -> usize {
    (j % 3) * COLOR_DIM + j / 3
}

fn unit(c: usize) -> Vec<f64> {
    let mut v = vec![0.0; D];
    v[c] = 1.0;
    v
}

fn rows_of(sh_ac: &[f32]) -> Result<usize> {
    if !sh_ac.len().is_multiple_of(D) {
        return Err(Error::Shape(format!("sh_ac length {} is not a multiple of 45", sh_ac.len())));
    }
    Ok(sh_ac.len() / D)
}

/// Column means, summed in fixed-size chunks so the result does not depend
/// on the thread count.
fn column_mean(sh_ac: &[f32], n: usize) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = sh_ac
        .par_chunks(ROW_CHUNK * D)
        .map(|chunk| {
            let mut s = vec![0.0; D];
            for row in chunk.chunks_exact(D) {
                for (acc, &v) in s.iter_mut().zip(row) {
                    *acc += f64::from(v);
                }
            }
            s
        })
        .collect();
    let mut sum = vec![0.0; D];
    for s in partial {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// Sample covariance with 1/(N−1) normalization.
pub fn covariance(sh_ac: &[f32]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = rows_of(sh_ac)?;
    if n < 2 {
        return Err(Error::InsufficientData { need: 2, got: n });
    }
    let mean = column_mean(sh_ac, n);
    let partial: Vec<DMatrix<f64>> = sh_ac
        .par_chunks(ROW_CHUNK * D)
        .map(|chunk| {
            let rows = chunk.len() / D;
            let x = DMatrix::from_fn(rows, D, |r, c| f64::from(chunk[r * D + c]) - mean[c]);
            x.tr_mul(&x)
        })
        .collect();
    let mut cov = DMatrix::zeros(D, D);
    for p in partial {
        cov += p;
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

/// Descending eigenpairs of a symmetric matrix. Directions with no variance
/// are replaced by a Gram–Schmidt completion from the identity columns.
fn eigen_sorted(cov: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = top * 1e-12;
    let mut values = Vec::with_capacity(dim);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for &i in &idx {
        let value = eig.eigenvalues[i];
        if value > floor && value > 0.0 {
            values.push(value);
            vectors.push(eig.eigenvectors.column(i).iter().copied().collect());
        }
    }
    // deterministic completion for the null space
    let mut e = 0;
    while vectors.len() < dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for u in &vectors {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= dot * b;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            values.push(0.0);
            vectors.push(v);
        }
    }
    for v in &mut vectors {
        fix_sign(v);
    }
    (values, vectors)
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

fn ratios(variances: &[f64]) -> Vec<f64> {
    let total: f64 = variances.iter().sum();
    if total > 0.0 {
        variances.iter().map(|v| v / total).collect()
    } else {
        let mut evr = vec![0.0; variances.len()];
        evr[0] = 1.0;
        evr
    }
}

/// Fits a reduction model on the N×45 `sh_ac` matrix (row-major).
pub fn fit(sh_ac: &[f32], mode: PcaMode) -> Result<PcaModel> {
    let n = rows_of(sh_ac)?;
    match mode {
        PcaMode::Joint => {
            let (mean, cov) = covariance(sh_ac)?;
            let (values, components) = eigen_sorted(&cov);
            Ok(PcaModel { mode, mean, components, evr: ratios(&values), k: D })
        }
        PcaMode::PerColor => {
            let (mean, cov) = covariance(sh_ac)?;
            // (variance, color, rank within color, padded vector)
            let mut all = Vec::with_capacity(D);
            for color in 0..3 {
                let off = color * COLOR_DIM;
                let block = cov.view((off, off), (COLOR_DIM, COLOR_DIM)).into_owned();
                let (values, vectors) = eigen_sorted(&block);
                for (rank, (value, v)) in values.into_iter().zip(vectors).enumerate() {
                    let mut full = vec![0.0; D];
                    full[off..off + COLOR_DIM].copy_from_slice(&v);
                    all.push((value, color, rank, full));
                }
            }
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            let values: Vec<f64> = all.iter().map(|a| a.0).collect();
            let components = all.into_iter().map(|a| a.3).collect();
            Ok(PcaModel { mode, mean, components, evr: ratios(&values), k: D })
        }
        PcaMode::OrderClip => {
            if n == 0 {
                return Err(Error::InsufficientData { need: 1, got: 0 });
            }
            let variances: Vec<f64> = if n < 2 {
                vec![0.0; D]
            } else {
                let (_, cov) = covariance(sh_ac)?;
                (0..D).map(|j| cov[(order_clip_channel(j), order_clip_channel(j))]).collect()
            };
            Ok(PcaModel {
                mode,
                mean: vec![0.0; D],
                components: (0..D).map(|j| unit(order_clip_channel(j))).collect(),
                evr: ratios(&variances),
                k: D,
            })
        }
    }
}

impl PcaModel {
    /// Model for data without usable variance (e.g. a single primitive):
    /// mean equals the first row, identity basis.
    pub fn degenerate(sh_ac: &[f32], mode: PcaMode) -> Result<PcaModel> {
        if mode == PcaMode::OrderClip {
            return fit(sh_ac, mode);
        }
        let row = sh_ac.get(..D).ok_or(Error::InsufficientData { need: 1, got: 0 })?;
        let mut evr = vec![0.0; D];
        evr[0] = 1.0;
        Ok(PcaModel {
            mode,
            mean: row.iter().map(|&v| f64::from(v)).collect(),
            components: (0..D).map(unit).collect(),
            evr,
            k: D,
        })
    }

    /// Cumulative explained variance of the first `k` components.
    pub fn cumulative_evr(&self, k: usize) -> f64 {
        self.evr.iter().take(k).sum()
    }

    /// The model as the decoder sees it: `k` components, values rounded to
    /// 32-bit floats.
    pub fn transported(&self, k: usize) -> Result<PcaModel> {
        parse_model(&serialize_model(self, k)?)
    }
}

pub fn project(model: &PcaModel, sh_ac: &[f32], k: usize) -> Result<AcCoefficients> {
    check_k(k)?;
    if k > model.components.len() {
        return Err(Error::Shape(format!("model holds {} components, asked for {k}", model.components.len())));
    }
    let n = rows_of(sh_ac)?;
    let mut coeffs = vec![0f32; n * k];
    coeffs.par_chunks_mut(k).zip(sh_ac.par_chunks(D)).for_each(|(out, row)| {
        let centered: Vec<f64> = row.iter().zip(&model.mean).map(|(&v, m)| f64::from(v) - m).collect();
        for (o, comp) in out.iter_mut().zip(&model.components) {
            *o = centered.iter().zip(comp).map(|(a, b)| a * b).sum::<f64>() as f32;
        }
    });
    Ok(AcCoefficients { k, coeffs })
}

pub fn reconstruct(model: &PcaModel, coeffs: &AcCoefficients) -> Result<Vec<f32>> {
    if coeffs.k > model.components.len() || coeffs.k == 0 || !coeffs.coeffs.len().is_multiple_of(coeffs.k) {
        return Err(Error::Shape(format!(
            "coefficients with k={} do not fit a model of {} components",
            coeffs.k,
            model.components.len()
        )));
    }
    let mut out = vec![0f32; coeffs.len() * D];
    out.par_chunks_mut(D).zip(coeffs.coeffs.par_chunks(coeffs.k)).for_each(|(dst, c)| {
        for (ch, d) in dst.iter_mut().enumerate() {
            let mut acc = model.mean[ch];
            for (j, &cj) in c.iter().enumerate() {
                acc += f64::from(cj) * model.components[j][ch];
            }
            *d = acc as f32;
        }
    });
    Ok(out)
}

const PCA_HEADER: usize = 8;

/// `u32 mode, u32 k, 45 × f32 mean, k × 45 × f32 basis` (little-endian,
/// component-major). Order-clip models omit the basis.
pub fn serialize_model(model: &PcaModel, k: usize) -> Result<Vec<u8>> {
    check_k(k)?;
    if k > model.components.len() {
        return Err(Error::Shape(format!("model holds {} components, asked for {k}", model.components.len())));
    }
    let mut out = Vec::with_capacity(PCA_HEADER + 4 * D * (k + 1));
    out.extend(model.mode.code().to_le_bytes());
    out.extend((k as u32).to_le_bytes());
    for &m in &model.mean {
        out.extend((m as f32).to_le_bytes());
    }
    if model.mode != PcaMode::OrderClip {
        for comp in &model.components[..k] {
            for &v in comp {
                out.extend((v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn parse_model(bytes: &[u8]) -> Result<PcaModel> {
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| b.try_into().unwrap())
            .ok_or_else(|| Error::Parse("truncated pca block".into()))
    };
    let mode = PcaMode::from_code(u32::from_le_bytes(word(0)?))
        .ok_or_else(|| Error::Parse("unknown pca mode".into()))?;
    let k = u32::from_le_bytes(word(1)?) as usize;
    check_k(k).map_err(|e| Error::Parse(e.to_string()))?;
    let basis_len = if mode == PcaMode::OrderClip { 0 } else { k * D };
    let expected = PCA_HEADER + 4 * (D + basis_len);
    if bytes.len() != expected {
        return Err(Error::Parse(format!("pca block is {} bytes, expected {expected}", bytes.len())));
    }
    let float = |i: usize| f64::from(f32::from_le_bytes(word(i).unwrap()));
    let mean = (0..D).map(|c| float(2 + c)).collect();
    let components = if mode == PcaMode::OrderClip {
        (0..k).map(|j| unit(order_clip_channel(j))).collect()
    } else {
        (0..k).map(|j| (0..D).map(|c| float(2 + D + j * D + c)).collect()).collect()
    };
    Ok(PcaModel { mode, mean, components, evr: Vec::new(), k })
}
