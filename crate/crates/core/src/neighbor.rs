//! Cell-list construction of full and half neighbor lists.
//!
//! Lists live in a 2-D over-allocated table (`[n_local, max_neighbors]`):
//! row-major in the host space so each atom's neighbors are contiguous, and
//! transposed in the device space so consecutive atoms interleave.

use rayon::prelude::*;

use crate::domain::geometry::{norm2, sub};
use crate::domain::{AtomStore, SimBox, Vec3};
use crate::error::{Error, Result};
use crate::memspace::{DualArray, Space, View};

pub const GROWTH_FACTOR: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ListStyle {
    Full,
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ListSettings {
    pub cutoff: f64,
    pub skin: f64,
    pub style: ListStyle,
    pub newton: bool,
}

impl ListSettings {
    pub fn new(cutoff: f64, skin: f64, style: ListStyle, newton: bool) -> Self {
        ListSettings { cutoff, skin, style, newton }
    }

    pub fn reach(&self) -> f64 {
        self.cutoff + self.skin
    }
}

#[derive(Clone, Debug)]
pub struct NeighborList {
    settings: ListSettings,
    table: DualArray<u32>,
    counts: Vec<u32>,
    max_neighbors: usize,
    n_local: usize,
    reference: Vec<Vec3>,
    grow_events: usize,
}

/// Uniform bins over the bounding box of all rows.
struct Bins {
    lo: Vec3,
    inv_width: Vec3,
    dims: [usize; 3],
    start: Vec<usize>,
    atoms: Vec<u32>,
}

impl Bins {
    fn new(positions: &[Vec3], reach: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in positions {
            for d in 0..3 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
        if positions.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let mut width = reach.max(1e-12);
        let limit = 8 * positions.len().max(1) + 27;
        let mut dims;
        loop {
            dims = [0usize; 3];
            for d in 0..3 {
                dims[d] = (((hi[d] - lo[d]) / width).floor() as usize).max(1);
            }
            if dims[0] * dims[1] * dims[2] <= limit {
                break;
            }
            width *= 2.0;
        }
        let mut inv_width = [0.0; 3];
        for d in 0..3 {
            let extent = (hi[d] - lo[d]).max(width);
            inv_width[d] = dims[d] as f64 / extent;
        }
        let mut bins = Bins { lo, inv_width, dims, start: Vec::new(), atoms: Vec::new() };
        let n_bins = dims[0] * dims[1] * dims[2];
        let ids: Vec<usize> = positions.iter().map(|x| bins.flat(bins.coord(*x))).collect();
        let mut count = vec![0usize; n_bins + 1];
        for &b in &ids {
            count[b + 1] += 1;
        }
        for b in 0..n_bins {
            count[b + 1] += count[b];
        }
        let mut cursor = count.clone();
        let mut atoms = vec![0u32; positions.len()];
        for (i, &b) in ids.iter().enumerate() {
            atoms[cursor[b]] = i as u32;
            cursor[b] += 1;
        }
        bins.start = count;
        bins.atoms = atoms;
        bins
    }

    fn coord(&self, x: Vec3) -> [usize; 3] {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let v = ((x[d] - self.lo[d]) * self.inv_width[d]).floor();
            c[d] = if v < 0.0 { 0 } else { (v as usize).min(self.dims[d] - 1) };
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn for_each_candidate(&self, x: Vec3, mut f: impl FnMut(usize)) {
        let c = self.coord(x);
        let range = |d: usize| c[d].saturating_sub(1)..=(c[d] + 1).min(self.dims[d] - 1);
        for bz in range(2) {
            for by in range(1) {
                for bx in range(0) {
                    let b = self.flat([bx, by, bz]);
                    for &j in &self.atoms[self.start[b]..self.start[b + 1]] {
                        f(j as usize);
                    }
                }
            }
        }
    }
}

impl NeighborList {
    /// Builds a list for the local atoms of `store`.
    ///
    /// Half lists assign a local pair to the atom with the smaller global id.
    /// A local/ghost pair is kept by both sides with `newton` off; with it on,
    /// only by the side whose `(owner rank, global id)` is smaller.
    pub fn build(store: &mut AtomStore, sim_box: &SimBox, settings: ListSettings) -> Result<Self> {
        Self::build_with_capacity(store, sim_box, settings, None)
    }

    pub fn build_with_capacity(
        store: &mut AtomStore,
        sim_box: &SimBox,
        settings: ListSettings,
        capacity: Option<usize>,
    ) -> Result<Self> {
        if !(settings.cutoff > 0.0) || settings.skin < 0.0 {
            return Err(Error::InvalidParameter(format!("neighbor cutoff {} / skin {}", settings.cutoff, settings.skin)));
        }
        crate::domain::check_ghost_cutoff(sim_box, settings.reach())?;
        let positions = store.positions_host();
        let n_local = store.n_local();
        let reach2 = settings.reach() * settings.reach();
        let bins = Bins::new(&positions, settings.reach());

        let mut cap = capacity.unwrap_or_else(|| estimate_capacity(&positions, n_local, settings));
        cap = cap.max(1);
        let mut grow_events = 0;
        let store_ref = &*store;
        let accept = |i: usize, j: usize| -> bool {
            match settings.style {
                ListStyle::Full => true,
                ListStyle::Half => {
                    let gi = store_ref.global_ids[i];
                    let gj = store_ref.global_ids[j];
                    if j < n_local {
                        gi < gj
                    } else if settings.newton {
                        (store_ref.rank, gi) < (store_ref.owner_rank(j), gj)
                    } else {
                        true
                    }
                }
            }
        };
        loop {
            let mut data = vec![0u32; n_local.max(1) * cap];
            let mut counts = vec![0u32; n_local];
            data.par_chunks_mut(cap).zip(counts.par_iter_mut()).enumerate().for_each(|(i, (row, count))| {
                let xi = positions[i];
                let mut n = 0usize;
                bins.for_each_candidate(xi, |j| {
                    if j == i || !accept(i, j) {
                        return;
                    }
                    if norm2(sub(positions[j], xi)) < reach2 {
                        if n < cap {
                            row[n] = j as u32;
                        }
                        n += 1;
                    }
                });
                *count = n as u32;
            });
            let needed = counts.iter().copied().max().unwrap_or(0) as usize;
            if needed > cap {
                cap = ((cap as f64 * GROWTH_FACTOR).ceil() as usize).max(needed);
                grow_events += 1;
                continue;
            }
            for row in data.chunks_mut(cap).zip(&counts) {
                row.0[*row.1 as usize..].fill(u32::MAX);
            }
            let table = DualArray::from_rows(n_local.max(1), cap, &data)?;
            return Ok(NeighborList {
                settings,
                table,
                counts,
                max_neighbors: cap,
                n_local,
                reference: positions[..n_local].to_vec(),
                grow_events,
            });
        }
    }

    pub fn settings(&self) -> ListSettings {
        self.settings
    }

    pub fn style(&self) -> ListStyle {
        self.settings.style
    }

    pub fn newton(&self) -> bool {
        self.settings.newton
    }

    pub fn cutoff(&self) -> f64 {
        self.settings.cutoff
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn max_neighbors(&self) -> usize {
        self.max_neighbors
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of capacity growths needed during the build.
    pub fn grow_events(&self) -> usize {
        self.grow_events
    }

    pub fn total_entries(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Neighbors of local atom `i`, from the contiguous host table.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        let raw = self.table.view(Space::Host).expect("host table is current").raw();
        let base = i * self.max_neighbors;
        &raw[base..base + self.counts[i] as usize]
    }

    /// Makes the table readable in `space`.
    pub fn sync(&mut self, space: Space) {
        self.table.sync(space);
    }

    pub fn table(&self, space: Space) -> Result<View<'_, u32>> {
        self.table.view(space)
    }

    pub fn table_array(&self) -> &DualArray<u32> {
        &self.table
    }

    /// Largest displacement of a local atom since the build.
    pub fn max_displacement(&self, store: &mut AtomStore) -> (usize, f64) {
        let now = store.positions_host();
        self.reference
            .iter()
            .zip(&now)
            .enumerate()
            .map(|(i, (a, b))| (i, norm2(sub(*a, *b)).sqrt()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    /// True when some atom moved more than half the skin.
    pub fn needs_rebuild(&self, store: &mut AtomStore) -> bool {
        store.n_local() != self.n_local || self.max_displacement(store).1 > 0.5 * self.settings.skin
    }

    pub fn check_current(&self, store: &mut AtomStore) -> Result<()> {
        if store.n_local() != self.n_local {
            return Err(Error::DimensionMismatch { expected: self.n_local, got: store.n_local() });
        }
        let (atom, displacement) = self.max_displacement(store);
        let limit = 0.5 * self.settings.skin;
        if displacement > limit {
            return Err(Error::StaleNeighborList { atom, displacement, limit });
        }
        Ok(())
    }
}

fn estimate_capacity(positions: &[Vec3], n_local: usize, settings: ListSettings) -> usize {
    if n_local == 0 || positions.len() < 2 {
        return 8;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for x in positions {
        for d in 0..3 {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let r = settings.reach();
    let vol: f64 = (0..3).map(|d| (hi[d] - lo[d]).max(r)).product();
    let mut n = positions.len() as f64 / vol * 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
    if settings.style == ListStyle::Half {
        n *= 0.5;
    }
    (n * 1.2) as usize + 8
}
