//! Synthetic Gaussian clouds: clustered positions with smooth attribute
//! fields, so tests and benchmarks run without real captures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{GaussianCloud, CHANNELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub clusters: usize,
    pub seed: u64,
    /// Scales per-primitive noise added on top of the smooth fields.
    pub noise: f32,
}

impl SynthConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthConfig { n, clusters: 16, seed, noise: 1.0 }
    }
}

const FIELDS: usize = 8;

struct Field {
    freq: [f32; 3],
    phase: f32,
}

impl Field {
    fn eval(&self, p: [f32; 3]) -> f32 {
        (self.freq[0] * p[0] + self.freq[1] * p[1] + self.freq[2] * p[2] + self.phase).sin()
    }
}

/// SH degree (1, 2 or 3) of coefficient `j` within one color's 15.
fn sh_degree(j: usize) -> usize {
    match j {
        0..=2 => 1,
        3..=7 => 2,
        _ => 3,
    }
}

pub fn generate(cfg: &SynthConfig) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = Normal::new(0.0f32, 1.0).unwrap();
    let clusters = cfg.clusters.max(1);

    let centers: Vec<[f32; 3]> = (0..clusters).map(|_| [0; 3].map(|_| rng.gen_range(-5.0..5.0))).collect();
    let sigmas: Vec<[f32; 3]> = (0..clusters).map(|_| [0; 3].map(|_| rng.gen_range(0.05..0.8))).collect();
    let offsets: Vec<[f32; CHANNELS]> = (0..clusters)
        .map(|_| {
            let mut o = [0f32; CHANNELS];
            o.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
            o
        })
        .collect();
    let fields: Vec<Field> = (0..FIELDS)
        .map(|_| Field {
            freq: [0; 3].map(|_| rng.gen_range(-1.5..1.5)),
            phase: rng.gen_range(0.0..std::f32::consts::TAU),
        })
        .collect();
    // channel mixing weights for the 45 AC channels
    let mix: Vec<[f32; FIELDS]> = (0..45)
        .map(|_| [0; FIELDS].map(|_| rng.gen_range(-1.0..1.0)))
        .collect();

    let mut cloud = GaussianCloud::zeros(cfg.n);
    for i in 0..cfg.n {
        let c = rng.gen_range(0..clusters);
        let p: [f32; 3] = [0, 1, 2].map(|a| centers[c][a] + sigmas[c][a] * std.sample(&mut rng));
        let f: Vec<f32> = fields.iter().map(|fl| fl.eval(p)).collect();
        let off = &offsets[c];
        let mut noise = |scale: f32| cfg.noise * scale * std.sample(&mut rng);

        let mut row = [0f32; CHANNELS];
        row[..3].copy_from_slice(&p);
        for k in 0..3 {
            row[3 + k] = 0.8 * f[k] + off[3 + k] + noise(0.05);
        }
        for ch in 0..45 {
            let decay = match sh_degree(ch % 15) {
                1 => 0.3,
                2 => 0.15,
                _ => 0.075,
            };
            let smooth: f32 = mix[ch].iter().zip(&f).map(|(w, v)| w * v).sum::<f32>() / FIELDS as f32;
            row[6 + ch] = decay * (smooth + off[6 + ch]) + noise(0.02 * decay);
        }
        row[51] = 2.0 * f[3] + 4.0 * off[51] + noise(0.3);
        for k in 0..3 {
            row[52 + k] = -4.0 + 0.8 * f[4 + k % 3] + off[52 + k] + noise(0.1);
        }
        row[55] = 1.0 + 0.3 * f[7] + noise(0.05);
        for k in 1..4 {
            row[55 + k] = 0.3 * f[k + 3] + off[55 + k] + noise(0.05);
        }
        cloud.set_row(i, &row);
    }
    cloud
}
