use rayon::prelude::*;

use super::decomp::{decompose, RankSet};
use super::geometry::{SimBox, Vec3};
use super::store::{AtomRecord, AtomStore, GhostLink};
use crate::error::{Error, Result};
use crate::memspace::Space;

/// Checks that a ghost layer of `cutoff` cannot reach two images of one atom.
pub fn check_ghost_cutoff(sim_box: &SimBox, cutoff: f64) -> Result<()> {
    if let Some(l) = sim_box.min_periodic_length() {
        if cutoff >= 0.5 * l {
            return Err(Error::GhostCutoffTooLarge { cutoff, half_length: 0.5 * l });
        }
    }
    Ok(())
}

fn candidate_shifts(sim_box: &SimBox, x: Vec3, cutoff: f64) -> Vec<[i8; 3]> {
    let l = sim_box.lengths();
    let per = sim_box.periodic();
    let mut axes: [Vec<i8>; 3] = [vec![0], vec![0], vec![0]];
    for d in 0..3 {
        if per[d] {
            if x[d] < cutoff {
                axes[d].push(1);
            }
            if l[d] - x[d] < cutoff {
                axes[d].push(-1);
            }
        }
    }
    let mut out = Vec::new();
    for &sx in &axes[0] {
        for &sy in &axes[1] {
            for &sz in &axes[2] {
                out.push([sx, sy, sz]);
            }
        }
    }
    out
}

/// Builds per-rank stores with ghost layers from atoms already assigned to
/// their owning ranks.
///
/// Phase one packs, for each (source, destination) pair, the source atoms
/// whose images lie within `cutoff` of the destination brick; phase two
/// unpacks them as ghosts in source-rank order.
pub fn exchange_ghosts(sim_box: &SimBox, ranks: &RankSet, locals: &[Vec<AtomRecord>], cutoff: f64) -> Result<Vec<AtomStore>> {
    check_ghost_cutoff(sim_box, cutoff)?;
    let n = ranks.n_ranks();
    if locals.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: locals.len() });
    }
    let sends: Vec<Vec<Vec<(usize, [i8; 3])>>> = (0..n)
        .into_par_iter()
        .map(|src| {
            let mut out = vec![Vec::new(); n];
            for (a, atom) in locals[src].iter().enumerate() {
                for shift in candidate_shifts(sim_box, atom.position, cutoff) {
                    let p = sim_box.image_position(atom.position, shift);
                    for (dst, list) in out.iter_mut().enumerate() {
                        if dst == src && shift == [0, 0, 0] {
                            continue;
                        }
                        if ranks.brick(dst).distance_to(p) < cutoff {
                            list.push((a, shift));
                        }
                    }
                }
            }
            out
        })
        .collect();

    (0..n)
        .into_par_iter()
        .map(|dst| {
            let mut records = Vec::new();
            let mut links = Vec::new();
            let mut blocks = Vec::with_capacity(n);
            for (src, src_sends) in sends.iter().enumerate() {
                let start = links.len();
                for &(a, image) in &src_sends[dst] {
                    let atom = &locals[src][a];
                    records.push((atom.id, atom.species, sim_box.image_position(atom.position, image)));
                    links.push(GhostLink { owner_rank: src, owner_index: a, image });
                }
                blocks.push(start..links.len());
            }
            AtomStore::assemble(dst, &locals[dst], &records, links, sends[dst].clone(), blocks)
        })
        .collect()
}

/// Refreshes ghost positions from their owners.
pub fn forward_comm(sim_box: &SimBox, stores: &mut [AtomStore]) {
    for s in stores.iter_mut() {
        s.positions.sync(Space::Host);
    }
    let buffers: Vec<Vec<Vec<Vec3>>> = stores
        .par_iter()
        .map(|s| {
            let v = s.positions.view(Space::Host).expect("synced");
            s.sends
                .iter()
                .map(|list| list.iter().map(|&(a, image)| sim_box.image_position(v.vec3(a), image)).collect())
                .collect()
        })
        .collect();
    stores.par_iter_mut().for_each(|s| {
        if s.n_ghost() == 0 {
            return;
        }
        let rank = s.rank;
        let n_local = s.n_local();
        let blocks = s.ghost_blocks.clone();
        let mut v = s.positions.view_mut(Space::Host).expect("host is current");
        for (src, block) in blocks.iter().enumerate() {
            for (k, x) in block.clone().zip(&buffers[src][rank]) {
                v.set_vec3(n_local + k, *x);
            }
        }
    });
}

/// Folds ghost forces into their owners and zeroes the ghost rows.
pub fn reverse_comm(stores: &mut [AtomStore]) {
    for s in stores.iter_mut() {
        s.forces.sync(Space::Host);
    }
    let buffers: Vec<Vec<Vec<Vec3>>> = stores
        .par_iter_mut()
        .map(|s| {
            let n_local = s.n_local();
            let blocks = s.ghost_blocks.clone();
            let mut f = s.forces.view_mut(Space::Host).expect("host is current");
            blocks
                .iter()
                .map(|block| {
                    block
                        .clone()
                        .map(|k| {
                            let v = f.vec3(n_local + k);
                            f.set_vec3(n_local + k, [0.0; 3]);
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    stores.par_iter_mut().for_each(|s| {
        let rank = s.rank;
        let sends = std::mem::take(&mut s.sends);
        {
            let mut f = s.forces.view_mut(Space::Host).expect("host is current");
            for (dst, list) in sends.iter().enumerate() {
                let Some(buf) = buffers[dst].get(rank) else { continue };
                for (&(a, _), g) in list.iter().zip(buf) {
                    let cur = f.vec3(a);
                    f.set_vec3(a, [cur[0] + g[0], cur[1] + g[1], cur[2] + g[2]]);
                }
            }
        }
        s.sends = sends;
    });
}

/// The set of logical ranks with their stores.
#[derive(Clone, Debug)]
pub struct Decomposition {
    sim_box: SimBox,
    ranks: RankSet,
    ghost_cutoff: f64,
    stores: Vec<AtomStore>,
}

impl Decomposition {
    pub fn new(sim_box: SimBox, n_ranks: usize, atoms: &[AtomRecord], ghost_cutoff: f64) -> Result<Self> {
        let ranks = decompose(&sim_box, n_ranks)?;
        let mut d = Decomposition { sim_box, ranks, ghost_cutoff, stores: Vec::new() };
        d.distribute(atoms.to_vec())?;
        Ok(d)
    }

    fn distribute(&mut self, atoms: Vec<AtomRecord>) -> Result<()> {
        let mut locals = vec![Vec::new(); self.ranks.n_ranks()];
        for mut a in atoms {
            a.position = self.sim_box.wrap(a.position);
            locals[self.ranks.owner_of(a.position)].push(a);
        }
        self.stores = exchange_ghosts(&self.sim_box, &self.ranks, &locals, self.ghost_cutoff)?;
        Ok(())
    }

    /// Wraps positions, migrates atoms to their current owners and rebuilds ghosts.
    pub fn redistribute(&mut self) -> Result<()> {
        let atoms: Vec<AtomRecord> = self.stores.iter_mut().flat_map(|s| s.local_records()).collect();
        self.distribute(atoms)
    }

    pub fn sim_box(&self) -> &SimBox {
        &self.sim_box
    }

    pub fn ranks(&self) -> &RankSet {
        &self.ranks
    }

    pub fn ghost_cutoff(&self) -> f64 {
        self.ghost_cutoff
    }

    pub fn stores(&self) -> &[AtomStore] {
        &self.stores
    }

    pub fn stores_mut(&mut self) -> &mut [AtomStore] {
        &mut self.stores
    }

    pub fn n_atoms(&self) -> usize {
        self.stores.iter().map(AtomStore::n_local).sum()
    }

    pub fn forward_comm(&mut self) {
        forward_comm(&self.sim_box, &mut self.stores);
    }

    pub fn reverse_comm(&mut self) {
        reverse_comm(&mut self.stores);
    }

    /// All owned atoms, sorted by id.
    pub fn gather(&mut self) -> Vec<AtomRecord> {
        let mut all: Vec<AtomRecord> = self.stores.iter_mut().flat_map(|s| s.local_records()).collect();
        all.sort_by_key(|a| a.id);
        all
    }

    /// Owned-atom forces keyed by id, sorted by id.
    pub fn gather_forces(&mut self) -> Vec<(u64, Vec3)> {
        let mut all = Vec::new();
        for s in &mut self.stores {
            let f = s.forces_host();
            all.extend((0..s.n_local()).map(|i| (s.global_ids[i], f[i])));
        }
        all.sort_by_key(|p| p.0);
        all
    }
}
