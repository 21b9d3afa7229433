//! End-to-end encode and decode.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::GaussianCloud;
use crate::codec::{decode_image, encode_image, CodecBackend, CodecMode};
use crate::container::{bitrate_report, pack_container, unpack_container, BitrateReport, ImageEntry, Manifest, VERSION};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::maps::{assemble, disassemble, feature_grid, quantized_cloud, AttributeMapSet, ChannelWeights, ImageTag};
use crate::morton::sort_by_morton;
use crate::pca::{check_k, fit, project, serialize_model, AcCoefficients, PcaMode, PcaModel};
use crate::plas::{run_miniplas, MiniplasReport, PlasSchedule};
use crate::quant::{compute_ranges, QuantizationParams};

/// Codec qp per attribute group. Zero means lossless; coordinates are
/// always lossless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QpMap {
    pub sh_dc: u32,
    pub ac: u32,
    pub scale: u32,
    pub opacity: u32,
    pub rotation: u32,
}

impl QpMap {
    pub fn uniform(qp: u32) -> Self {
        QpMap { sh_dc: qp, ac: qp, scale: qp, opacity: qp, rotation: qp }
    }

    pub fn for_tag(&self, tag: ImageTag) -> u32 {
        match tag {
            ImageTag::CoordHi | ImageTag::CoordLo => 0,
            ImageTag::ShDc => self.sh_dc,
            ImageTag::Ac(_) => self.ac,
            ImageTag::Scale => self.scale,
            ImageTag::Opacity => self.opacity,
            ImageTag::Rot0 | ImageTag::Rot1 => self.rotation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub k: usize,
    pub pca_mode: PcaMode,
    pub schedule: PlasSchedule,
    /// Disable to get the plain two-stage Morton layout.
    pub miniplas: bool,
    pub qp: QpMap,
    pub weights: ChannelWeights,
    pub backend: CodecBackend,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            k: 12,
            pca_mode: PcaMode::Joint,
            schedule: PlasSchedule::default(),
            miniplas: true,
            qp: QpMap::default(),
            weights: ChannelWeights::default(),
            backend: CodecBackend::Internal,
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub morton3d: f64,
    pub morton2d: f64,
    pub pca: f64,
    pub miniplas: f64,
    /// Sum of the four map-generation stages above.
    pub map_generation: f64,
    pub assemble: f64,
    pub encode: f64,
    pub pack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeReport {
    pub n: usize,
    pub side: usize,
    pub k: usize,
    pub pca_mode: PcaMode,
    pub cumulative_evr: f64,
    pub miniplas: MiniplasReport,
    pub bitrate: BitrateReport,
    pub times: StageTimes,
}

/// Quantities shared by the encoder and by reference computations.
pub struct Prepared {
    pub model: PcaModel,
    /// Decoder-side model (k components, f32-rounded).
    pub transported: PcaModel,
    pub coeffs: AcCoefficients,
    pub params: QuantizationParams,
}

pub fn prepare(cloud: &GaussianCloud, cfg: &EncodeConfig) -> Result<Prepared> {
    cloud.validate()?;
    check_k(cfg.k)?;
    let model = match fit(&cloud.sh_ac, cfg.pca_mode) {
        Err(Error::InsufficientData { .. }) => PcaModel::degenerate(&cloud.sh_ac, cfg.pca_mode)?,
        other => other?,
    };
    let transported = model.transported(cfg.k)?;
    let coeffs = project(&transported, &cloud.sh_ac, cfg.k)?;
    let params = compute_ranges(cloud, &coeffs);
    Ok(Prepared { model, transported, coeffs, params })
}

/// What a fully lossless encode/decode of `cloud` yields, as a point set.
pub fn quantized_reference(cloud: &GaussianCloud, cfg: &EncodeConfig) -> Result<GaussianCloud> {
    let p = prepare(cloud, cfg)?;
    quantized_cloud(cloud, &p.coeffs, &p.params, &p.transported)
}

/// Result of the map-generation half of the encoder.
pub struct MapStage {
    pub prepared: Prepared,
    pub maps: AttributeMapSet,
    pub layout: GridLayout,
    pub miniplas: MiniplasReport,
    pub times: StageTimes,
}

pub fn generate_maps(cloud: &GaussianCloud, cfg: &EncodeConfig) -> Result<MapStage> {
    let mut times = StageTimes::default();

    let t = Instant::now();
    let prepared = prepare(cloud, cfg)?;
    times.pca = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let perm = sort_by_morton(cloud, &prepared.params);
    let sorted = cloud.permuted(&perm);
    let coeffs = prepared.coeffs.permuted(&perm);
    times.morton3d = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut layout = GridLayout::morton(sorted.len())?;
    times.morton2d = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut miniplas = MiniplasReport::default();
    if cfg.miniplas {
        cfg.schedule.validate()?;
        let grid = feature_grid(&sorted, &coeffs, &layout, &prepared.params, &cfg.weights)?;
        let (_, refined, report) = run_miniplas(grid, layout, &cfg.schedule)?;
        layout = refined;
        miniplas = report;
    }
    times.miniplas = t.elapsed().as_secs_f64();
    times.map_generation = times.pca + times.morton3d + times.morton2d + times.miniplas;

    let t = Instant::now();
    let maps = assemble(&sorted, &coeffs, &layout, &prepared.params)?;
    times.assemble = t.elapsed().as_secs_f64();

    Ok(MapStage { prepared, maps, layout, miniplas, times })
}

/// Codec setting for each image of a map set.
pub fn image_settings(k: usize, qp: &QpMap) -> Vec<(ImageTag, CodecMode, u32)> {
    ImageTag::sequence(k)
        .into_iter()
        .map(|tag| {
            let q = qp.for_tag(tag);
            let mode = if q == 0 { CodecMode::Lossless } else { CodecMode::Lossy };
            (tag, mode, q)
        })
        .collect()
}

/// Encodes every image, at most `backend.max_parallel()` at a time.
pub fn encode_maps(maps: &AttributeMapSet, qp: &QpMap, backend: &CodecBackend) -> Result<Vec<Vec<u8>>> {
    let settings = image_settings(maps.k, qp);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(backend.max_parallel().max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        settings
            .par_iter()
            .map(|&(tag, mode, q)| encode_image(maps.image(tag)?, mode, q, backend))
            .collect()
    })
}

pub struct EncodeOutput {
    pub container: Vec<u8>,
    pub report: EncodeReport,
}

pub fn encode_cloud(cloud: &GaussianCloud, cfg: &EncodeConfig) -> Result<EncodeOutput> {
    let stage = generate_maps(cloud, cfg)?;
    let mut times = stage.times;

    let t = Instant::now();
    let blocks = encode_maps(&stage.maps, &cfg.qp, &cfg.backend)?;
    times.encode = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut manifest = Manifest {
        version: VERSION,
        n_real: stage.maps.n_real,
        side: stage.maps.side,
        k: cfg.k,
        pca: String::new(),
        quant: stage.prepared.params.clone(),
        images: image_settings(cfg.k, &cfg.qp)
            .into_iter()
            .map(|(tag, mode, qp)| ImageEntry { tag, mode, qp, offset: 0, length: 0 })
            .collect(),
        backend: cfg.backend.id(),
        miniplas: cfg.schedule.clone(),
    };
    manifest.set_pca_block(&serialize_model(&stage.prepared.transported, cfg.k)?);
    let container = pack_container(&manifest, &blocks)?;
    times.pack = t.elapsed().as_secs_f64();

    let report = EncodeReport {
        n: cloud.len(),
        side: stage.maps.side,
        k: cfg.k,
        pca_mode: cfg.pca_mode,
        cumulative_evr: stage.prepared.model.cumulative_evr(cfg.k),
        miniplas: stage.miniplas,
        bitrate: bitrate_report(&container)?,
        times,
    };
    Ok(EncodeOutput { container, report })
}

/// Decodes the image blocks of a container back into maps.
pub fn decode_maps(container: &[u8], backend: Option<&CodecBackend>) -> Result<(Manifest, AttributeMapSet)> {
    let (manifest, blocks) = unpack_container(container)?;
    let internal = CodecBackend::Internal;
    let backend = match backend {
        Some(b) => b,
        None if manifest.backend == internal.id() => &internal,
        None => {
            return Err(Error::Config(format!(
                "container was coded with '{}'; configure that backend to decode",
                manifest.backend
            )))
        }
    };
    if backend.id() != manifest.backend {
        return Err(Error::Config(format!(
            "container was coded with '{}', got backend '{}'",
            manifest.backend,
            backend.id()
        )));
    }
    let images = manifest
        .images
        .par_iter()
        .zip(blocks.par_iter())
        .map(|(entry, block)| Ok((entry.tag, decode_image(block, manifest.side, entry.mode, entry.qp, backend)?)))
        .collect::<Result<Vec<_>>>()?;
    let maps = AttributeMapSet { side: manifest.side, n_real: manifest.n_real, k: manifest.k, images };
    Ok((manifest, maps))
}

pub fn decode_container(container: &[u8], backend: Option<&CodecBackend>) -> Result<GaussianCloud> {
    let (manifest, maps) = decode_maps(container, backend)?;
    let model = manifest.pca_model()?;
    disassemble(&maps, &manifest.quant, &model)
}
