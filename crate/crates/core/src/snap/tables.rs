//! Index maps and coupling coefficients. Angular momenta are stored doubled
//! (`j = 2·J`) so half-integer values stay integral.

use crate::error::{Error, Result};

/// Flat `(j, mb, ma)` index, `j` slowest and `ma` fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantumIndex {
    twojmax: usize,
    block_start: Vec<usize>,
    len: usize,
}

impl QuantumIndex {
    pub fn new(twojmax: usize) -> Self {
        let mut block_start = Vec::with_capacity(twojmax + 1);
        let mut len = 0;
        for j in 0..=twojmax {
            block_start.push(len);
            len += (j + 1) * (j + 1);
        }
        QuantumIndex { twojmax, block_start, len }
    }

    pub fn twojmax(&self) -> usize {
        self.twojmax
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn block_start(&self, j: usize) -> usize {
        self.block_start[j]
    }

    #[inline]
    pub fn flat(&self, j: usize, mb: usize, ma: usize) -> usize {
        self.block_start[j] + mb * (j + 1) + ma
    }

    /// Inverse of [`QuantumIndex::flat`].
    pub fn unflat(&self, q: usize) -> (usize, usize, usize) {
        let j = self.block_start.partition_point(|&s| s <= q) - 1;
        let r = q - self.block_start[j];
        (j, r / (j + 1), r % (j + 1))
    }
}

fn factorial(n: i64) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn delta_cg(j1: i64, j2: i64, j: i64) -> f64 {
    let s = factorial((j1 + j2 + j) / 2 + 1);
    (factorial((j1 + j2 - j) / 2) * factorial((j1 - j2 + j) / 2) * factorial((-j1 + j2 + j) / 2) / s).sqrt()
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m1+m2>` from the Racah
/// factorial sum. All arguments doubled; `m` values are signed projections.
pub fn clebsch_gordan(j1: i64, m1: i64, j2: i64, m2: i64, j: i64) -> f64 {
    let m = m1 + m2;
    if m1.abs() > j1 || m2.abs() > j2 || m.abs() > j || j < (j1 - j2).abs() || j > j1 + j2 || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 {
        return 0.0;
    }
    let zmin = 0.max(-(j - j2 + m1) / 2).max(-(j - j1 - m2) / 2);
    let zmax = ((j1 + j2 - j) / 2).min((j1 - m1) / 2).min((j2 + m2) / 2);
    let mut sum = 0.0;
    for z in zmin..=zmax {
        let sign = if z % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign
            / (factorial(z)
                * factorial((j1 + j2 - j) / 2 - z)
                * factorial((j1 - m1) / 2 - z)
                * factorial((j2 + m2) / 2 - z)
                * factorial((j - j2 + m1) / 2 + z)
                * factorial((j - j1 - m2) / 2 + z));
    }
    let norm = (factorial((j1 + m1) / 2)
        * factorial((j1 - m1) / 2)
        * factorial((j2 + m2) / 2)
        * factorial((j2 - m2) / 2)
        * factorial((j + m) / 2)
        * factorial((j - m) / 2)
        * (j + 1) as f64)
        .sqrt();
    sum * delta_cg(j1, j2, j) * norm
}

/// One element of the coupled product of two U blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZEntry {
    pub j1: usize,
    pub j2: usize,
    pub j: usize,
    pub mb: usize,
    pub ma: usize,
    pub ma1min: usize,
    pub ma2max: usize,
    pub na: usize,
    pub mb1min: usize,
    pub mb2max: usize,
    pub nb: usize,
    /// Offset of the `(j1, j2, j)` coefficient block.
    pub cg_offset: usize,
    /// Flat index of `(j, mb, ma)`.
    pub jju: usize,
    /// β index and multiplicity factor for the adjoint accumulation.
    pub beta_index: usize,
    pub beta_factor: f64,
}

/// Coupling triples `(j1, j2, j)` with `j1 ≥ j2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub j1: usize,
    pub j2: usize,
    pub j: usize,
}

#[derive(Clone, Debug)]
pub struct CouplingTables {
    pub index: QuantumIndex,
    /// Coefficients per triple, stored `[m1][m2]` with `m1` over `0..=j1`.
    pub cg: Vec<f64>,
    pub cg_triples: Vec<(Triple, usize)>,
    /// Contraction plan, grouped by triple; only rows `mb ≤ j/2`.
    pub z_entries: Vec<ZEntry>,
    /// `(triple, first z entry, entry count)` for each triple.
    pub z_blocks: Vec<(Triple, usize, usize)>,
    /// Descriptor triples (`j ≥ j1`) in β order: `j`, then `j1`, then `j2`.
    pub b_triples: Vec<Triple>,
    /// Square root lookup `sqrt(p / q)`.
    pub root: Vec<f64>,
}

impl CouplingTables {
    pub fn new(twojmax: usize) -> Self {
        let index = QuantumIndex::new(twojmax);
        let jm = twojmax;
        let mut cg = Vec::new();
        let mut cg_triples = Vec::new();
        let mut cg_block = std::collections::HashMap::new();
        for j1 in 0..=jm {
            for j2 in 0..=j1 {
                for j in (j1 - j2..=jm.min(j1 + j2)).step_by(2) {
                    let t = Triple { j1, j2, j };
                    cg_block.insert((j1, j2, j), cg.len());
                    cg_triples.push((t, cg.len()));
                    for m1 in 0..=j1 {
                        let aa2 = 2 * m1 as i64 - j1 as i64;
                        for m2 in 0..=j2 {
                            let bb2 = 2 * m2 as i64 - j2 as i64;
                            cg.push(clebsch_gordan(j1 as i64, aa2, j2 as i64, bb2, j as i64));
                        }
                    }
                }
            }
        }

        let mut b_triples = Vec::new();
        for j in 0..=jm {
            for j1 in 0..=j {
                for j2 in 0..=j1 {
                    if j >= j1 - j2 && j <= j1 + j2 && (j1 + j2 + j) % 2 == 0 {
                        b_triples.push(Triple { j1, j2, j });
                    }
                }
            }
        }
        let b_pos = |j1: usize, j2: usize, j: usize| b_triples.iter().position(|t| *t == Triple { j1, j2, j }).expect("descriptor triple");

        let mut z_entries = Vec::new();
        let mut z_blocks = Vec::new();
        for &(t, cg_offset) in &cg_triples {
            let Triple { j1, j2, j } = t;
            let (beta_index, beta_factor) = if j >= j1 {
                let f = if j1 == j {
                    if j2 == j {
                        3.0
                    } else {
                        2.0
                    }
                } else {
                    1.0
                };
                (b_pos(j1, j2, j), f)
            } else if j >= j2 {
                let f = if j2 == j { 2.0 } else { 1.0 };
                (b_pos(j, j2, j1), f * (j1 + 1) as f64 / (j + 1) as f64)
            } else {
                (b_pos(j2, j, j1), (j1 + 1) as f64 / (j + 1) as f64)
            };
            let start = z_entries.len();
            let (ji1, ji2, ji) = (j1 as i64, j2 as i64, j as i64);
            for mb in 0..=j / 2 {
                for ma in 0..=j {
                    let (mai, mbi) = (ma as i64, mb as i64);
                    let ma1min = 0.max((2 * mai - ji - ji2 + ji1) / 2);
                    let ma2max = (2 * mai - ji - (2 * ma1min - ji1) + ji2) / 2;
                    let na = ji1.min((2 * mai - ji + ji2 + ji1) / 2) - ma1min + 1;
                    let mb1min = 0.max((2 * mbi - ji - ji2 + ji1) / 2);
                    let mb2max = (2 * mbi - ji - (2 * mb1min - ji1) + ji2) / 2;
                    let nb = ji1.min((2 * mbi - ji + ji2 + ji1) / 2) - mb1min + 1;
                    z_entries.push(ZEntry {
                        j1,
                        j2,
                        j,
                        mb,
                        ma,
                        ma1min: ma1min as usize,
                        ma2max: ma2max as usize,
                        na: na.max(0) as usize,
                        mb1min: mb1min as usize,
                        mb2max: mb2max as usize,
                        nb: nb.max(0) as usize,
                        cg_offset,
                        jju: index.flat(j, mb, ma),
                        beta_index,
                        beta_factor,
                    });
                }
            }
            z_blocks.push((t, start, z_entries.len() - start));
        }

        let root = (0..=jm + 1).flat_map(|p| (0..=jm + 1).map(move |q| if q == 0 { 0.0 } else { (p as f64 / q as f64).sqrt() })).collect();
        CouplingTables { index, cg, cg_triples, z_entries, z_blocks, b_triples, root }
    }

    pub fn twojmax(&self) -> usize {
        self.index.twojmax()
    }

    pub fn n_descriptors(&self) -> usize {
        self.b_triples.len()
    }

    #[inline]
    pub fn root(&self, p: usize, q: usize) -> f64 {
        self.root[p * (self.twojmax() + 2) + q]
    }

    /// Coefficient block of a triple, indexed `[m1 * (j2 + 1) + m2]`.
    pub fn cg_block(&self, j1: usize, j2: usize, j: usize) -> Option<&[f64]> {
        self.cg_triples
            .iter()
            .find(|(t, _)| *t == Triple { j1, j2, j })
            .map(|&(_, off)| &self.cg[off..off + (j1 + 1) * (j2 + 1)])
    }

    pub fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.n_descriptors() {
            return Err(Error::DimensionMismatch { expected: self.n_descriptors(), got: beta.len() });
        }
        Ok(())
    }
}

/// Twice an angular momentum given as an integer or half-integer.
pub fn twojmax_of(jmax: f64) -> Result<usize> {
    let t = 2.0 * jmax;
    if !(t >= 0.0) || t.fract() != 0.0 {
        return Err(Error::InvalidParameter(format!("jmax must be a non-negative multiple of 1/2, got {jmax}")));
    }
    Ok(t as usize)
}
