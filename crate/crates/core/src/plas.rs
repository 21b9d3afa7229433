//! MiniPLAS: blockwise pixel-permutation refinement of a grid layout.
//!
//! Each pass blurs the current grid into a target, splits every aligned B×B
//! block into random groups of four pixels, and gives each group the
//! assignment (of 24) that best matches the target. Blocks never exchange
//! pixels, so a pass is embarrassingly parallel and its result does not
//! depend on how blocks are scheduled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{GridLayout, PADDING};

/// C feature channels over an M×M grid, stored pixel-major:
/// channel `c` of pixel `p` is `data[p * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub side: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub weights: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(side: usize, channels: usize, data: Vec<f32>, weights: Vec<f64>) -> Result<Self> {
        if data.len() != side * side * channels || weights.len() != channels {
            return Err(Error::Shape(format!(
                "feature grid {side}×{side}×{channels} got {} samples and {} weights",
                data.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("channel weights must be finite and non-negative".into()));
        }
        Ok(FeatureGrid { side, channels, data, weights })
    }

    pub fn pixel(&self, p: usize) -> &[f32] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn get(&self, col: usize, row: usize, c: usize) -> f32 {
        self.data[(row * self.side + col) * self.channels + c]
    }
}

/// Weighted mean squared difference over horizontally and vertically
/// adjacent pixel pairs.
pub fn smoothness_cost(grid: &FeatureGrid) -> f64 {
    let m = grid.side;
    if m < 2 {
        return 0.0;
    }
    let ch = grid.channels;
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|r| {
            let mut acc = 0.0;
            for col in 0..m {
                let p = r * m + col;
                let here = &grid.data[p * ch..(p + 1) * ch];
                if col + 1 < m {
                    let right = &grid.data[(p + 1) * ch..(p + 2) * ch];
                    acc += weighted_sq(here, right, &grid.weights);
                }
                if r + 1 < m {
                    let below = &grid.data[(p + m) * ch..(p + m + 1) * ch];
                    acc += weighted_sq(here, below, &grid.weights);
                }
            }
            acc
        })
        .collect();
    let pairs = 2 * m * (m - 1);
    rows.iter().sum::<f64>() / pairs as f64
}

fn weighted_sq(a: &[f32], b: &[f32], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), w)| {
            let d = f64::from(*x) - f64::from(*y);
            w * d * d
        })
        .sum()
}

/// 3×3 box filter per channel with clamped edges.
pub fn blur_target(grid: &FeatureGrid) -> FeatureGrid {
    let m = grid.side;
    let ch = grid.channels;
    let clamp = |i: isize| i.clamp(0, m as isize - 1) as usize;
    // horizontal then vertical; each pass sums three taps
    let mut horiz = vec![0f32; grid.data.len()];
    horiz.par_chunks_mut(m * ch).enumerate().for_each(|(r, out)| {
        for col in 0..m {
            for c in 0..ch {
                let mut s = 0.0;
                for dc in -1isize..=1 {
                    s += grid.data[(r * m + clamp(col as isize + dc)) * ch + c];
                }
                out[col * ch + c] = s;
            }
        }
    });
    let mut data = vec![0f32; grid.data.len()];
    data.par_chunks_mut(m * ch).enumerate().for_each(|(r, out)| {
        for col in 0..m {
            for c in 0..ch {
                let mut s = 0.0;
                for dr in -1isize..=1 {
                    s += horiz[(clamp(r as isize + dr) * m + col) * ch + c];
                }
                out[col * ch + c] = s / 9.0;
            }
        }
    });
    FeatureGrid { side: m, channels: ch, data, weights: grid.weights.clone() }
}

/// Weighted squared distance of every pixel to `target`, summed.
pub fn target_cost(grid: &FeatureGrid, target: &FeatureGrid) -> f64 {
    let ch = grid.channels;
    let per_row: Vec<f64> = grid
        .data
        .par_chunks(grid.side * ch)
        .zip(target.data.par_chunks(grid.side * ch))
        .map(|(a, b)| {
            a.chunks_exact(ch)
                .zip(b.chunks_exact(ch))
                .map(|(x, t)| weighted_sq(x, t, &grid.weights))
                .sum::<f64>()
        })
        .collect();
    per_row.iter().sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlasSchedule {
    pub mbs: usize,
    pub iterations_per_size: usize,
    pub seed: u64,
}

impl Default for PlasSchedule {
    fn default() -> Self {
        PlasSchedule { mbs: 4, iterations_per_size: 1, seed: 0 }
    }
}

impl PlasSchedule {
    pub fn validate(&self) -> Result<()> {
        if !self.mbs.is_power_of_two() || self.mbs < 4 {
            return Err(Error::Config(format!("mbs must be a power of two >= 4, got {}", self.mbs)));
        }
        if self.iterations_per_size == 0 {
            return Err(Error::Config("iterations_per_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Halving sequence from `mbs` down to 4.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut b = self.mbs;
        while b >= 4 {
            sizes.push(b);
            b /= 2;
        }
        sizes
    }

    /// Block sizes that fit a grid of the given side.
    pub fn block_sizes_for(&self, side: usize) -> Vec<usize> {
        self.block_sizes().into_iter().filter(|&b| b <= side).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub block_size: usize,
    pub pass_index: usize,
    /// Global smoothness before and after the pass.
    pub cost_before: f64,
    pub cost_after: f64,
    /// Distance to this pass's (frozen) blurred target before and after.
    pub target_before: f64,
    pub target_after: f64,
    pub op_count: u64,
}

impl PassReport {
    pub fn cost_delta(&self) -> f64 {
        self.cost_after - self.cost_before
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MiniplasReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub passes: Vec<PassReport>,
}

const PERMS4: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Number of candidate assignments one pass evaluates.
pub fn pass_op_count(side: usize, block: usize) -> u64 {
    let blocks = (side / block) as u64;
    blocks * blocks * (block * block / 4) as u64 * 24
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn block_seed(seed: u64, pass_index: usize, bx: usize, by: usize) -> u64 {
    let h = splitmix(seed ^ splitmix(pass_index as u64));
    splitmix(h ^ splitmix(((bx as u64) << 32) | by as u64))
}

/// Best assignment for one group: `perm[j]` is the group member that moves
/// to position `j`. Lexicographically first among equal costs. Also returns
/// the number of candidates examined.
pub fn best_assignment(cost: &[[f64; 4]; 4], allowed: impl Fn(&[usize; 4]) -> bool) -> ([usize; 4], u64) {
    let mut best = PERMS4[0];
    let mut best_cost = f64::INFINITY;
    let mut examined = 0;
    for perm in &PERMS4 {
        examined += 1;
        if !allowed(perm) {
            continue;
        }
        let c = cost[perm[0]][0] + cost[perm[1]][1] + cost[perm[2]][2] + cost[perm[3]][3];
        if c < best_cost {
            best_cost = c;
            best = *perm;
        }
    }
    (best, examined)
}

/// One MiniPLAS pass at block size `block`. Returns the updated grid and
/// layout plus a pass report.
pub fn optimize_pass(
    grid: &FeatureGrid,
    layout: &GridLayout,
    block: usize,
    seed: u64,
    pass_index: usize,
) -> Result<(FeatureGrid, GridLayout, PassReport)> {
    let m = grid.side;
    if layout.side != m {
        return Err(Error::Shape(format!("grid side {m} but layout side {}", layout.side)));
    }
    if block < 4 || !block.is_power_of_two() || !m.is_multiple_of(block) {
        return Err(Error::Config(format!("block size {block} does not tile a {m}×{m} grid")));
    }
    let ch = grid.channels;
    let target = blur_target(grid);
    let blocks_per_side = m / block;

    // (destination pixel, source pixel) moves, computed per block
    let moves: Vec<(Vec<(usize, usize)>, u64)> = (0..blocks_per_side * blocks_per_side)
        .into_par_iter()
        .map(|b| {
            let (bx, by) = (b % blocks_per_side, b / blocks_per_side);
            let mut cells: Vec<usize> = Vec::with_capacity(block * block);
            for r in 0..block {
                for c in 0..block {
                    cells.push((by * block + r) * m + bx * block + c);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(block_seed(seed, pass_index, bx, by));
            cells.shuffle(&mut rng);

            let mut out = Vec::new();
            let mut ops = 0;
            for group in cells.chunks_exact(4) {
                let mut cost = [[0f64; 4]; 4];
                for (i, &src) in group.iter().enumerate() {
                    let x = &grid.data[src * ch..(src + 1) * ch];
                    for (j, &dst) in group.iter().enumerate() {
                        let t = &target.data[dst * ch..(dst + 1) * ch];
                        cost[i][j] = weighted_sq(x, t, &grid.weights);
                    }
                }
                // padding only trades places with padding
                let pad: [bool; 4] = std::array::from_fn(|i| layout.order[group[i]] == PADDING);
                let (perm, examined) = best_assignment(&cost, |perm| (0..4).all(|j| pad[perm[j]] == pad[j]));
                ops += examined;
                for j in 0..4 {
                    if perm[j] != j {
                        out.push((group[j], group[perm[j]]));
                    }
                }
            }
            (out, ops)
        })
        .collect();

    let mut data = grid.data.clone();
    let mut order = layout.order.clone();
    let op_count = moves.iter().map(|m| m.1).sum();
    for &(dst, src) in moves.iter().flat_map(|m| &m.0) {
        data[dst * ch..(dst + 1) * ch].copy_from_slice(&grid.data[src * ch..(src + 1) * ch]);
        order[dst] = layout.order[src];
    }
    let next = FeatureGrid { side: m, channels: ch, data, weights: grid.weights.clone() };
    let report = PassReport {
        block_size: block,
        pass_index,
        cost_before: smoothness_cost(grid),
        cost_after: smoothness_cost(&next),
        target_before: target_cost(grid, &target),
        target_after: target_cost(&next, &target),
        op_count,
    };
    Ok((next, GridLayout { order, ..layout.clone() }, report))
}

/// Runs the whole schedule, largest blocks first. Block sizes larger than the
/// grid are skipped.
pub fn run_miniplas(
    grid: FeatureGrid,
    layout: GridLayout,
    schedule: &PlasSchedule,
) -> Result<(FeatureGrid, GridLayout, MiniplasReport)> {
    schedule.validate()?;
    let initial_cost = smoothness_cost(&grid);
    let mut report = MiniplasReport { initial_cost, final_cost: initial_cost, passes: Vec::new() };
    let (mut grid, mut layout) = (grid, layout);
    let mut pass_index = 0;
    for block in schedule.block_sizes_for(grid.side) {
        for _ in 0..schedule.iterations_per_size {
            let (g, l, pass) = optimize_pass(&grid, &layout, block, schedule.seed, pass_index)?;
            grid = g;
            layout = l;
            report.final_cost = pass.cost_after;
            report.passes.push(pass);
            pass_index += 1;
        }
    }
    Ok((grid, layout, report))
}
