//! Attribute-domain quality metrics and the layout study.

use std::collections::HashMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::cloud::GaussianCloud;
use crate::codec::CodecBackend;
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::maps::{assemble, feature_grid};
use crate::morton::{morton3_encode, sort_by_morton};
use crate::pca::{fit, PcaMode, PcaModel};
use crate::pipeline::{encode_maps, prepare, EncodeConfig, QpMap};
use crate::plas::{run_miniplas, smoothness_cost};
use crate::quant::{ChannelRange, COORD_BITS};

/// Channel groups of a primitive row, as `(name, first, end)`.
pub const GROUPS: [(&str, usize, usize); 6] = [
    ("position", 0, 3),
    ("sh_dc", 3, 6),
    ("sh_ac", 6, 51),
    ("opacity", 51, 52),
    ("scale", 52, 55),
    ("rotation", 55, 59),
];

fn serialize_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub group: String,
    /// Infinite when the group matches exactly.
    #[serde(serialize_with = "serialize_psnr")]
    pub psnr: f64,
    pub mse: f64,
    pub peak: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub n: usize,
    /// Primitives whose quantized position was shared with another one.
    pub ambiguous: usize,
    /// Primitives paired by Morton rank instead of by position.
    pub fallback_matched: usize,
    pub groups: Vec<GroupMetrics>,
    /// PSNR over all non-position groups, each normalized by its own peak.
    #[serde(serialize_with = "serialize_psnr")]
    pub attribute_psnr: f64,
}

impl CompareReport {
    pub fn group(&self, name: &str) -> Option<&GroupMetrics> {
        self.groups.iter().find(|g| g.group == name)
    }
}

fn psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Pairs each primitive of `a` with one of `b`. Returns `pairs[i] = j`,
/// the ambiguous count and the number of fallback pairs.
pub fn match_primitives(a: &GaussianCloud, b: &GaussianCloud) -> Result<(Vec<usize>, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::Data {
            index: a.len().min(b.len()),
            msg: format!("primitive counts differ: {} vs {}", a.len(), b.len()),
        });
    }
    let n = a.len();
    let (lo, hi) = a
        .positions
        .iter()
        .chain(&b.positions)
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = ChannelRange { min: lo.into(), max: hi.into() };
    let key = |p: [f32; 3]| p.map(|v| crate::quant::quantize(f64::from(v), range, COORD_BITS));
    let keys_a: Vec<[u32; 3]> = (0..n).map(|i| key(a.position(i))).collect();
    let keys_b: Vec<[u32; 3]> = (0..n).map(|i| key(b.position(i))).collect();

    let mut buckets: HashMap<[u32; 3], Vec<usize>> = HashMap::new();
    for (j, k) in keys_b.iter().enumerate() {
        buckets.entry(*k).or_default().push(j);
    }
    let mut count_a: HashMap<[u32; 3], usize> = HashMap::new();
    for k in &keys_a {
        *count_a.entry(*k).or_default() += 1;
    }
    let ambiguous = keys_a.iter().filter(|k| count_a[*k] > 1).count();

    let mut pairs = vec![usize::MAX; n];
    let mut used = vec![false; n];
    // exact key first, then the 26 neighboring keys
    for pass in 0..2 {
        for i in 0..n {
            if pairs[i] != usize::MAX {
                continue;
            }
            let k = keys_a[i];
            let candidates: Vec<[u32; 3]> = if pass == 0 {
                vec![k]
            } else {
                let mut c = Vec::with_capacity(26);
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dz in -1i64..=1 {
                            let q = [k[0] as i64 + dx, k[1] as i64 + dy, k[2] as i64 + dz];
                            if q.iter().all(|&v| v >= 0) && (dx, dy, dz) != (0, 0, 0) {
                                c.push(q.map(|v| v as u32));
                            }
                        }
                    }
                }
                c
            };
            for c in candidates {
                if let Some(list) = buckets.get_mut(&c) {
                    if let Some(pos) = list.iter().position(|&j| !used[j]) {
                        let j = list.remove(pos);
                        used[j] = true;
                        pairs[i] = j;
                        break;
                    }
                }
            }
        }
    }

    // whatever is left is paired in Morton order
    let morton = |k: [u32; 3]| morton3_encode(k[0], k[1], k[2]).unwrap_or(u64::MAX);
    let mut rest_a: Vec<usize> = (0..n).filter(|&i| pairs[i] == usize::MAX).collect();
    let mut rest_b: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
    rest_a.sort_by_key(|&i| morton(keys_a[i]));
    rest_b.sort_by_key(|&j| morton(keys_b[j]));
    let fallback = rest_a.len();
    for (i, j) in rest_a.into_iter().zip(rest_b) {
        pairs[i] = j;
    }
    Ok((pairs, ambiguous, fallback))
}

/// Per-group PSNR and maximum error of `decoded` against `original`.
/// The peak of each group is its value range in `original`.
pub fn compare(original: &GaussianCloud, decoded: &GaussianCloud) -> Result<CompareReport> {
    let (pairs, ambiguous, fallback_matched) = match_primitives(original, decoded)?;
    let n = original.len();
    let rows_a: Vec<_> = (0..n).map(|i| original.row(i)).collect();
    let rows_b: Vec<_> = (0..n).map(|i| decoded.row(pairs[i])).collect();

    let mut groups = Vec::new();
    let mut norm_sum = 0.0;
    let mut norm_count = 0usize;
    for &(name, start, end) in &GROUPS {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sq, mut max_error) = (0.0f64, 0.0f64);
        for (ra, rb) in rows_a.iter().zip(&rows_b) {
            for c in start..end {
                let (va, vb) = (f64::from(ra[c]), f64::from(rb[c]));
                lo = lo.min(va);
                hi = hi.max(va);
                let d = (va - vb).abs();
                sq += d * d;
                max_error = max_error.max(d);
            }
        }
        let count = (n * (end - start)).max(1);
        let mse = sq / count as f64;
        let peak = if hi > lo { hi - lo } else { 1.0 };
        if name != "position" {
            norm_sum += mse / (peak * peak);
            norm_count += 1;
        }
        groups.push(GroupMetrics { group: name.to_string(), psnr: psnr(mse, peak), mse, peak, max_error });
    }
    let attribute_psnr = psnr(norm_sum / norm_count as f64, 1.0);
    Ok(CompareReport { n, ambiguous, fallback_matched, groups, attribute_psnr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    pub layout: String,
    pub smoothness: f64,
    /// Sum of image block sizes under the internal lossless codec.
    pub compressed_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvrCurve {
    pub mode: PcaMode,
    /// Cumulative ratio for k = 1..=45.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub side: usize,
    pub layouts: Vec<LayoutRow>,
    pub evr: Vec<EvrCurve>,
}

impl AnalysisReport {
    pub fn layout(&self, name: &str) -> Option<&LayoutRow> {
        self.layouts.iter().find(|l| l.layout == name)
    }
}

/// Compares layouts of the same quantized data: seeded random, row-major
/// and Morton placement of the Morton-sorted primitives, and Morton
/// placement refined by MiniPLAS with the configured schedule.
pub fn analyze(cloud: &GaussianCloud, cfg: &EncodeConfig) -> Result<AnalysisReport> {
    let p = prepare(cloud, cfg)?;
    let perm = sort_by_morton(cloud, &p.params);
    let sorted = cloud.permuted(&perm);
    let coeffs = p.coeffs.permuted(&perm);
    let n = sorted.len();

    let measure = |name: &str, layout: &GridLayout| -> Result<LayoutRow> {
        let grid = feature_grid(&sorted, &coeffs, layout, &p.params, &cfg.weights)?;
        let maps = assemble(&sorted, &coeffs, layout, &p.params)?;
        let blocks = encode_maps(&maps, &QpMap::default(), &CodecBackend::Internal)?;
        Ok(LayoutRow {
            layout: name.to_string(),
            smoothness: smoothness_cost(&grid),
            compressed_bytes: blocks.iter().map(|b| b.len() as u64).sum(),
        })
    };

    let morton = GridLayout::morton(n)?;
    let mut layouts = vec![
        measure("random", &GridLayout::random(n, cfg.schedule.seed)?)?,
        measure("row-major", &GridLayout::row_major(n)?)?,
        measure("morton2", &morton)?,
    ];
    let grid = feature_grid(&sorted, &coeffs, &morton, &p.params, &cfg.weights)?;
    let (_, refined, _) = run_miniplas(grid, morton.clone(), &cfg.schedule)?;
    layouts.push(measure(&format!("morton2+miniplas({})", cfg.schedule.mbs), &refined)?);

    let evr = evr_curves(&cloud.sh_ac)?;
    Ok(AnalysisReport { n, side: morton.side, layouts, evr })
}

pub fn evr_curves(sh_ac: &[f32]) -> Result<Vec<EvrCurve>> {
    [PcaMode::Joint, PcaMode::PerColor, PcaMode::OrderClip]
        .into_iter()
        .map(|mode| {
            let model = match fit(sh_ac, mode) {
                Err(Error::InsufficientData { .. }) => PcaModel::degenerate(sh_ac, mode)?,
                other => other?,
            };
            Ok(EvrCurve { mode, cumulative: (1..=45).map(|k| model.cumulative_evr(k)).collect() })
        })
        .collect()
}
