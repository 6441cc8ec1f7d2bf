use std::ops::Range;

use super::geometry::Vec3;
use crate::error::Result;
use crate::memspace::{DualArray, Space};

/// Rank-independent description of one atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomRecord {
    pub id: u64,
    pub species: u32,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Where a ghost row comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GhostLink {
    pub owner_rank: usize,
    pub owner_index: usize,
    /// Periodic image shift in box lengths.
    pub image: [i8; 3],
}

/// Per-rank atom data: `n_local` owned rows followed by `n_ghost` ghost rows.
///
/// Array extents are padded to at least one row because a [`DualArray`]
/// cannot have a zero extent; only the first `n_local + n_ghost` rows are
/// meaningful.
#[derive(Clone, Debug)]
pub struct AtomStore {
    pub rank: usize,
    n_local: usize,
    n_ghost: usize,
    pub positions: DualArray<f64>,
    pub velocities: DualArray<f64>,
    pub forces: DualArray<f64>,
    pub global_ids: Vec<u64>,
    pub species: Vec<u32>,
    pub ghosts: Vec<GhostLink>,
    /// `sends[dst]`: local atoms (and image shifts) ghosted on rank `dst`, in ghost order.
    pub(crate) sends: Vec<Vec<(usize, [i8; 3])>>,
    /// `ghost_blocks[src]`: ghost row range received from rank `src`, relative to the first ghost.
    pub(crate) ghost_blocks: Vec<Range<usize>>,
}

fn rows_array(rows: usize, data: &[f64]) -> Result<DualArray<f64>> {
    if rows == 0 {
        DualArray::from_rows(1, 3, &[0.0; 3])
    } else {
        DualArray::from_rows(rows, 3, data)
    }
}

impl AtomStore {
    /// Store holding `locals` as owned atoms and the given ghosts.
    pub(crate) fn assemble(
        rank: usize,
        locals: &[AtomRecord],
        ghost_records: &[(u64, u32, Vec3)],
        ghosts: Vec<GhostLink>,
        sends: Vec<Vec<(usize, [i8; 3])>>,
        ghost_blocks: Vec<Range<usize>>,
    ) -> Result<Self> {
        let n_local = locals.len();
        let n_ghost = ghost_records.len();
        let n_all = n_local + n_ghost;
        let mut pos = Vec::with_capacity(3 * n_all);
        let mut vel = Vec::with_capacity(3 * n_local);
        let mut ids = Vec::with_capacity(n_all);
        let mut species = Vec::with_capacity(n_all);
        for a in locals {
            pos.extend_from_slice(&a.position);
            vel.extend_from_slice(&a.velocity);
            ids.push(a.id);
            species.push(a.species);
        }
        for (id, sp, x) in ghost_records {
            pos.extend_from_slice(x);
            ids.push(*id);
            species.push(*sp);
        }
        Ok(AtomStore {
            rank,
            n_local,
            n_ghost,
            positions: rows_array(n_all, &pos)?,
            velocities: rows_array(n_local, &vel)?,
            forces: rows_array(n_all, &vec![0.0; 3 * n_all])?,
            global_ids: ids,
            species,
            ghosts,
            sends,
            ghost_blocks,
        })
    }

    /// A single-rank store without ghosts.
    pub fn from_records(rank: usize, locals: &[AtomRecord]) -> Result<Self> {
        Self::assemble(rank, locals, &[], Vec::new(), Vec::new(), Vec::new())
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_ghost(&self) -> usize {
        self.n_ghost
    }

    pub fn n_total(&self) -> usize {
        self.n_local + self.n_ghost
    }

    /// Owner rank of row `i` (the home rank for locals).
    pub fn owner_rank(&self, i: usize) -> usize {
        if i < self.n_local {
            self.rank
        } else {
            self.ghosts[i - self.n_local].owner_rank
        }
    }

    /// Local index of the atom that row `i` represents on its owner rank.
    pub fn owner_index(&self, i: usize) -> usize {
        if i < self.n_local {
            i
        } else {
            self.ghosts[i - self.n_local].owner_index
        }
    }

    /// Host-space positions of all rows.
    pub fn positions_host(&mut self) -> Vec<Vec3> {
        self.positions.sync(Space::Host);
        let v = self.positions.view(Space::Host).expect("synced");
        (0..self.n_total()).map(|i| v.vec3(i)).collect()
    }

    pub fn local_records(&mut self) -> Vec<AtomRecord> {
        self.positions.sync(Space::Host);
        self.velocities.sync(Space::Host);
        let p = self.positions.view(Space::Host).expect("synced");
        let v = self.velocities.view(Space::Host).expect("synced");
        (0..self.n_local)
            .map(|i| AtomRecord { id: self.global_ids[i], species: self.species[i], position: p.vec3(i), velocity: v.vec3(i) })
            .collect()
    }

    /// Overwrites host forces (all rows) and marks them modified.
    pub fn set_forces(&mut self, forces: &[Vec3]) -> Result<()> {
        let n = self.n_total();
        let mut f = self.forces.view_mut(Space::Host)?;
        for (i, v) in forces.iter().take(n).enumerate() {
            f.set_vec3(i, *v);
        }
        Ok(())
    }

    pub fn forces_host(&mut self) -> Vec<Vec3> {
        self.forces.sync(Space::Host);
        let v = self.forces.view(Space::Host).expect("synced");
        (0..self.n_total()).map(|i| v.vec3(i)).collect()
    }
}
