use super::geometry::{SimBox, Vec3};
use crate::error::{Error, Result};

/// Axis-aligned sub-box owned by one rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Brick {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Brick {
    pub fn volume(&self) -> f64 {
        (0..3).map(|d| self.hi[d] - self.lo[d]).product()
    }

    /// Euclidean distance from `p` to the closed brick (0 inside).
    pub fn distance_to(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let out = (self.lo[d] - p[d]).max(p[d] - self.hi[d]).max(0.0);
            s += out * out;
        }
        s.sqrt()
    }
}

/// Regular brick tiling of the box, one brick per logical rank.
#[derive(Clone, Debug)]
pub struct RankSet {
    grid: [usize; 3],
    bricks: Vec<Brick>,
    lengths: Vec3,
}

impl RankSet {
    pub fn n_ranks(&self) -> usize {
        self.bricks.len()
    }

    pub fn grid(&self) -> [usize; 3] {
        self.grid
    }

    pub fn bricks(&self) -> &[Brick] {
        &self.bricks
    }

    pub fn brick(&self, rank: usize) -> &Brick {
        &self.bricks[rank]
    }

    /// Rank whose brick contains `x` (clamped for positions outside the box).
    pub fn owner_of(&self, x: Vec3) -> usize {
        let mut cell = [0usize; 3];
        for d in 0..3 {
            let g = self.grid[d];
            let c = (x[d] / self.lengths[d] * g as f64).floor();
            cell[d] = if c < 0.0 { 0 } else { (c as usize).min(g - 1) };
        }
        cell[0] + self.grid[0] * (cell[1] + self.grid[1] * cell[2])
    }
}

fn prime_factors_desc(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out.reverse();
    out
}

/// Tiles the box into `n_ranks` bricks, splitting the currently longest
/// brick axis for each prime factor (ties go to the lowest axis).
pub fn decompose(sim_box: &SimBox, n_ranks: usize) -> Result<RankSet> {
    if n_ranks == 0 {
        return Err(Error::NoRanks);
    }
    let lengths = sim_box.lengths();
    let mut grid = [1usize; 3];
    for f in prime_factors_desc(n_ranks) {
        let mut axis = 0;
        for d in 1..3 {
            if lengths[d] / grid[d] as f64 > lengths[axis] / grid[axis] as f64 {
                axis = d;
            }
        }
        grid[axis] *= f;
    }
    let edge = |d: usize, i: usize| if i == grid[d] { lengths[d] } else { lengths[d] * i as f64 / grid[d] as f64 };
    let mut bricks = Vec::with_capacity(n_ranks);
    for iz in 0..grid[2] {
        for iy in 0..grid[1] {
            for ix in 0..grid[0] {
                bricks.push(Brick {
                    lo: [edge(0, ix), edge(1, iy), edge(2, iz)],
                    hi: [edge(0, ix + 1), edge(1, iy + 1), edge(2, iz + 1)],
                });
            }
        }
    }
    Ok(RankSet { grid, bricks, lengths })
}
