//! Generic two-body force engine and the Lennard-Jones kernel.

use rayon::prelude::*;

use crate::domain::geometry::{norm2, sub};
use crate::domain::{AtomStore, Vec3};
use crate::error::{Error, Result};
use crate::memspace::{ScatterAccumulator, ScatterSink, Space, Strategy};
use crate::neighbor::{ListStyle, NeighborList};

/// Neighbors handled by one work item in [`ExecMode::NeighborParallel`].
pub const NEIGHBOR_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub cutoff: f64,
}

impl PairParams {
    pub fn new(epsilon: f64, sigma: f64, cutoff: f64) -> Result<Self> {
        if !(epsilon > 0.0 && sigma > 0.0 && cutoff > sigma) {
            return Err(Error::InvalidParameter(format!(
                "lj parameters need positive epsilon/sigma and cutoff > sigma (got {epsilon}, {sigma}, {cutoff})"
            )));
        }
        Ok(PairParams { epsilon, sigma, cutoff })
    }
}

/// Energy and `-dU/dr / r` of the 12-6 potential.
pub fn u2_lj(r: f64, p: &PairParams) -> Result<(f64, f64)> {
    if r == 0.0 {
        return Err(Error::CoincidentAtoms(r));
    }
    Ok(lj_r2(r * r, p))
}

#[inline]
fn lj_r2(r2: f64, p: &PairParams) -> (f64, f64) {
    let s2 = p.sigma * p.sigma / r2;
    let s6 = s2 * s2 * s2;
    let s12 = s6 * s6;
    (4.0 * p.epsilon * (s12 - s6), 24.0 * p.epsilon * (2.0 * s12 - s6) / r2)
}

/// A central two-body interaction evaluated from the squared distance.
pub trait PairKernel: Sync {
    /// Largest cutoff over all species pairs.
    fn cutoff(&self) -> f64;
    /// `(energy, -dU/dr / r)`, or `None` outside the pair cutoff.
    fn eval(&self, r2: f64, si: u32, sk: u32) -> Option<(f64, f64)>;
}

/// Lennard-Jones with per-species-pair coefficients, truncated at the cutoff.
#[derive(Clone, Debug)]
pub struct LjKernel {
    n_species: usize,
    table: Vec<PairParams>,
    shift: Vec<f64>,
}

impl LjKernel {
    pub fn uniform(p: PairParams) -> Self {
        LjKernel { n_species: 1, table: vec![p], shift: vec![0.0] }
    }

    /// Kernel for `n_species` types with every pair set to `p`.
    pub fn with_species(n_species: usize, p: PairParams) -> Self {
        let n = n_species.max(1);
        LjKernel { n_species: n, table: vec![p; n * n], shift: vec![0.0; n * n] }
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn set(&mut self, a: usize, b: usize, p: PairParams) -> Result<()> {
        if a >= self.n_species || b >= self.n_species {
            return Err(Error::InvalidParameter(format!("species pair ({a}, {b}) outside {} species", self.n_species)));
        }
        self.table[a * self.n_species + b] = p;
        self.table[b * self.n_species + a] = p;
        Ok(())
    }

    pub fn params(&self, a: usize, b: usize) -> &PairParams {
        &self.table[a * self.n_species + b]
    }

    /// Shifts every pair energy so it vanishes at its cutoff.
    pub fn shifted(mut self) -> Self {
        self.shift = self.table.iter().map(|p| lj_r2(p.cutoff * p.cutoff, p).0).collect();
        self
    }
}

impl PairKernel for LjKernel {
    fn cutoff(&self) -> f64 {
        self.table.iter().map(|p| p.cutoff).fold(0.0, f64::max)
    }

    #[inline]
    fn eval(&self, r2: f64, si: u32, sk: u32) -> Option<(f64, f64)> {
        let idx = if self.n_species == 1 { 0 } else { si as usize * self.n_species + sk as usize };
        let p = &self.table[idx];
        if r2 >= p.cutoff * p.cutoff {
            return None;
        }
        let (e, f) = lj_r2(r2, p);
        Some((e - self.shift[idx], f))
    }
}

/// Lennard-Jones with the per-pair prefactors folded into four
/// coefficients, evaluated from `1/r^2` only.
#[derive(Clone, Debug)]
pub struct LjOptKernel {
    n_species: usize,
    coeff: Vec<[f64; 6]>,
    cutoff: f64,
}

impl LjOptKernel {
    pub fn new(base: &LjKernel) -> Self {
        let coeff = base
            .table
            .iter()
            .zip(&base.shift)
            .map(|(p, &shift)| {
                let s6 = p.sigma.powi(6);
                [48.0 * p.epsilon * s6 * s6, 24.0 * p.epsilon * s6, 4.0 * p.epsilon * s6 * s6, 4.0 * p.epsilon * s6, p.cutoff * p.cutoff, shift]
            })
            .collect();
        LjOptKernel { n_species: base.n_species, coeff, cutoff: PairKernel::cutoff(base) }
    }
}

impl PairKernel for LjOptKernel {
    fn cutoff(&self) -> f64 {
        self.cutoff
    }

    #[inline]
    fn eval(&self, r2: f64, si: u32, sk: u32) -> Option<(f64, f64)> {
        let c = &self.coeff[if self.n_species == 1 { 0 } else { si as usize * self.n_species + sk as usize }];
        if r2 >= c[4] {
            return None;
        }
        let r2inv = 1.0 / r2;
        let r6inv = r2inv * r2inv * r2inv;
        Some((r6inv * (c[2] * r6inv - c[3]) - c[5], r6inv * (c[0] * r6inv - c[1]) * r2inv))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExecMode {
    AtomParallel,
    NeighborParallel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairConfig {
    pub mode: ExecMode,
    pub strategy: Strategy,
    /// Space the neighbor table is read from.
    pub space: Space,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { mode: ExecMode::AtomParallel, strategy: Strategy::Serial, space: Space::Host }
    }
}

/// Total energy, forces on every row (locals then ghosts) and the
/// `[xx, yy, zz, xy, xz, yz]` virial.
#[derive(Clone, Debug, PartialEq)]
pub struct PairResult {
    pub energy: f64,
    pub forces: Vec<Vec3>,
    pub virial: [f64; 6],
}

#[derive(Clone, Copy, Default)]
struct Partial {
    force: Vec3,
    energy: f64,
    virial: [f64; 6],
    coincident: bool,
}

impl Partial {
    fn merge(&mut self, o: &Partial) {
        for d in 0..3 {
            self.force[d] += o.force[d];
        }
        self.energy += o.energy;
        for d in 0..6 {
            self.virial[d] += o.virial[d];
        }
        self.coincident |= o.coincident;
    }
}

/// Evaluates `kernel` over `list`.
///
/// Full lists write only the owning atom's force; half lists push the
/// reaction force through a [`ScatterAccumulator`] with `config.strategy`.
/// Ghost rows of the result must be folded back with reverse communication
/// when the list was built with newton on.
pub fn compute_pair<K: PairKernel>(kernel: &K, store: &mut AtomStore, list: &mut NeighborList, config: PairConfig) -> Result<PairResult> {
    list.check_current(store)?;
    list.sync(config.space);
    let positions = store.positions_host();
    let species = &store.species;
    let n_local = store.n_local();
    let n_total = store.n_total();
    let style = list.style();
    let newton = list.newton();
    let counts = list.counts();
    let table = list.table(config.space)?;

    let pair_range = |i: usize, lo: usize, hi: usize, sink: &mut ScatterSink<'_>| -> Partial {
        let xi = positions[i];
        let mut p = Partial::default();
        for slot in lo..hi {
            let k = table.at2(i, slot) as usize;
            let d = sub(xi, positions[k]);
            let r2 = norm2(d);
            if r2 == 0.0 {
                p.coincident = true;
                continue;
            }
            let Some((e, fs)) = kernel.eval(r2, species[i], species[k]) else { continue };
            let f = [fs * d[0], fs * d[1], fs * d[2]];
            let both = style == ListStyle::Half && (k < n_local || newton);
            let w = if both { 1.0 } else { 0.5 };
            for c in 0..3 {
                p.force[c] += f[c];
            }
            if both {
                sink.add3(k, [-f[0], -f[1], -f[2]]);
            }
            p.energy += w * e;
            let v = &mut p.virial;
            v[0] += w * d[0] * f[0];
            v[1] += w * d[1] * f[1];
            v[2] += w * d[2] * f[2];
            v[3] += w * d[0] * f[1];
            v[4] += w * d[0] * f[2];
            v[5] += w * d[1] * f[2];
        }
        p
    };

    let strategy = if style == ListStyle::Full { Strategy::Serial } else { config.strategy };
    let acc = ScatterAccumulator::new(3 * n_total, strategy);
    let (per_atom, scatter) = match config.mode {
        ExecMode::AtomParallel => {
            if style == ListStyle::Full {
                let parts = (0..n_local).into_par_iter().map(|i| pair_range(i, 0, counts[i] as usize, &mut ScatterSink::Buffer(&mut []))).collect();
                (parts, Vec::new())
            } else {
                let (scatter, parts) = acc.run(n_local, |i, sink| pair_range(i, 0, counts[i] as usize, sink));
                (parts, scatter)
            }
        }
        ExecMode::NeighborParallel => {
            let mut items = Vec::new();
            for (i, &c) in counts.iter().enumerate() {
                let c = c as usize;
                items.extend((0..c).step_by(NEIGHBOR_CHUNK).map(|lo| (i, lo, (lo + NEIGHBOR_CHUNK).min(c))));
            }
            let (scatter, parts): (Vec<f64>, Vec<Partial>) = if style == ListStyle::Full {
                let parts = items.par_iter().map(|&(i, lo, hi)| pair_range(i, lo, hi, &mut ScatterSink::Buffer(&mut []))).collect();
                (Vec::new(), parts)
            } else {
                acc.run(items.len(), |t, sink| {
                    let (i, lo, hi) = items[t];
                    pair_range(i, lo, hi, sink)
                })
            };
            let mut per_atom = vec![Partial::default(); n_local];
            for (&(i, _, _), p) in items.iter().zip(&parts) {
                per_atom[i].merge(p);
            }
            (per_atom, scatter)
        }
    };
    finish(per_atom, scatter, n_total)
}

fn finish(per_atom: Vec<Partial>, scatter: Vec<f64>, n_total: usize) -> Result<PairResult> {
    if per_atom.iter().any(|p| p.coincident) {
        return Err(Error::CoincidentAtoms(0.0));
    }
    let mut forces = vec![[0.0; 3]; n_total];
    if !scatter.is_empty() {
        for (f, s) in forces.iter_mut().zip(scatter.chunks_exact(3)) {
            *f = [s[0], s[1], s[2]];
        }
    }
    let mut energy = 0.0;
    let mut virial = [0.0; 6];
    for (i, p) in per_atom.iter().enumerate() {
        for d in 0..3 {
            forces[i][d] += p.force[d];
        }
        energy += p.energy;
        for d in 0..6 {
            virial[d] += p.virial[d];
        }
    }
    Ok(PairResult { energy, forces, virial })
}
