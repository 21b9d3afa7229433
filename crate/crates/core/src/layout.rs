//! Placement of (sorted) primitives onto a square grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::morton::{morton2_decode, morton2_encode};

/// Marks a grid cell that holds no primitive.
pub const PADDING: u32 = u32::MAX;

/// Assignment of primitive indices to grid pixels.
///
/// `order[row * side + col]` is the primitive at that pixel, or [`PADDING`].
/// Padding pixels replicate the attributes of primitive `tail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub side: usize,
    pub order: Vec<u32>,
    pub n_real: usize,
    pub tail: u32,
}

/// Smallest power of two `m` with `m * m >= n`.
pub fn grid_side(n: usize) -> usize {
    let mut m = 1usize;
    while m * m < n {
        m *= 2;
    }
    m
}

impl GridLayout {
    /// Two-stage Morton placement: primitive `i` of an already Morton-sorted
    /// sequence goes to the cell at 2D scan rank `i`.
    pub fn morton(n: usize) -> Result<GridLayout> {
        if n == 0 {
            return Err(Error::Shape("layout needs at least one primitive".into()));
        }
        let side = grid_side(n);
        let mut order = vec![PADDING; side * side];
        for i in 0..n {
            let (c, r) = morton2_decode(i as u64);
            order[r as usize * side + c as usize] = i as u32;
        }
        Ok(GridLayout { side, order, n_real: n, tail: (n - 1) as u32 })
    }

    /// Row-by-row placement, kept as an analysis baseline.
    pub fn row_major(n: usize) -> Result<GridLayout> {
        if n == 0 {
            return Err(Error::Shape("layout needs at least one primitive".into()));
        }
        let side = grid_side(n);
        let mut order = vec![PADDING; side * side];
        for (i, cell) in order.iter_mut().take(n).enumerate() {
            *cell = i as u32;
        }
        Ok(GridLayout { side, order, n_real: n, tail: (n - 1) as u32 })
    }

    /// Seeded random placement over the Morton cells, for analysis baselines.
    pub fn random(n: usize, seed: u64) -> Result<GridLayout> {
        let mut layout = GridLayout::morton(n)?;
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for cell in layout.order.iter_mut().filter(|c| **c != PADDING) {
            *cell = ids[*cell as usize];
        }
        Ok(layout)
    }

    pub fn cell(&self, col: usize, row: usize) -> u32 {
        self.order[row * self.side + col]
    }

    /// Primitive at 2D scan rank `rank`.
    pub fn at_rank(&self, rank: usize) -> u32 {
        let (c, r) = morton2_decode(rank as u64);
        self.cell(c as usize, r as usize)
    }

    /// Primitive whose attributes fill pixel `idx`.
    pub fn source(&self, idx: usize) -> u32 {
        match self.order[idx] {
            PADDING => self.tail,
            p => p,
        }
    }

    /// Every primitive appears exactly once and padding occupies exactly the
    /// scan ranks `>= n_real`.
    pub fn check_morton_invariants(&self) -> Result<()> {
        if self.order.len() != self.side * self.side || self.side * self.side < self.n_real {
            return Err(Error::Shape("layout size does not match side".into()));
        }
        let mut seen = vec![false; self.n_real];
        for (idx, &p) in self.order.iter().enumerate() {
            let rank = morton2_encode((idx % self.side) as u32, (idx / self.side) as u32) as usize;
            if p == PADDING {
                if rank < self.n_real {
                    return Err(Error::Shape(format!("padding at scan rank {rank}")));
                }
                continue;
            }
            if rank >= self.n_real {
                return Err(Error::Shape(format!("primitive {p} at padding rank {rank}")));
            }
            let slot = seen
                .get_mut(p as usize)
                .ok_or_else(|| Error::Shape(format!("primitive index {p} out of range")))?;
            if *slot {
                return Err(Error::Shape(format!("primitive {p} placed twice")));
            }
            *slot = true;
        }
        Ok(())
    }
}
