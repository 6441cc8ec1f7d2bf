//! Bond-order gated four-body torsions and three-body bends.
//!
//! Candidate quads are compressed in two passes: a count per pivot atom, a
//! scan into per-atom spans, then a fill. The force kernel then runs over
//! the dense quad table instead of branching over neighbor triples.

use rayon::prelude::*;

use crate::domain::geometry::{cross, dot, minimum_image, norm2, sub};
use crate::domain::{AtomRecord, AtomStore, Decomposition, SimBox, Vec3};
use crate::error::{Error, Result};
use crate::memspace::{DualArray, ScatterAccumulator, Space, Strategy};
use crate::neighbor::{ListSettings, ListStyle, NeighborList, GROWTH_FACTOR};

/// Squared sine below which a dihedral is treated as degenerate.
const DEGENERATE_SIN2: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BondParams {
    pub r_bond: f64,
    pub r0: f64,
    pub p: f64,
    pub bo_min: f64,
}

impl BondParams {
    /// Bond order `exp(-(r/r0)^p)`.
    #[inline]
    pub fn bond_order(&self, r: f64) -> f64 {
        (-(r / self.r0).powf(self.p)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorsionParams {
    pub bond: BondParams,
    pub bo_threshold: f64,
    pub k_t: f64,
    pub k_b: f64,
}

impl Default for TorsionParams {
    fn default() -> Self {
        TorsionParams { bond: BondParams { r_bond: 1.6, r0: 1.2, p: 2.0, bo_min: 0.01 }, bo_threshold: 0.01, k_t: 1.0, k_b: 1.0 }
    }
}

/// Symmetric bond relation over owned atoms in 2-D tables `[n_atoms, max_bonds]`.
#[derive(Clone, Debug)]
pub struct BondTable {
    pub bonds: DualArray<u32>,
    pub bond_order: DualArray<f64>,
    pub counts: Vec<u32>,
    max_bonds: usize,
    n_atoms: usize,
    candidates: u64,
}

impl BondTable {
    /// Bonds from a full neighbor list of a single-rank store; ghost
    /// entries are folded onto the atoms they image.
    pub fn build(store: &mut AtomStore, list: &NeighborList, params: &BondParams) -> Result<Self> {
        Self::build_with_capacity(store, list, params, 4)
    }

    pub fn build_with_capacity(store: &mut AtomStore, list: &NeighborList, params: &BondParams, capacity: usize) -> Result<Self> {
        if list.style() != ListStyle::Full {
            return Err(Error::InvalidParameter("bond detection needs a full neighbor list".into()));
        }
        if list.cutoff() + list.settings().skin < params.r_bond {
            return Err(Error::InvalidParameter(format!("neighbor reach {} below bond cutoff {}", list.cutoff(), params.r_bond)));
        }
        if store.ghosts.iter().any(|g| g.owner_rank != store.rank) {
            return Err(Error::RequiresSingleRank("torsion"));
        }
        let n = store.n_local();
        let x = store.positions_host();
        let rb2 = params.r_bond * params.r_bond;
        let mut cap = capacity.max(1);
        loop {
            let mut idx = vec![0u32; n.max(1) * cap];
            let mut bo = vec![0.0f64; n.max(1) * cap];
            let mut counts = vec![0u32; n];
            let coincident = idx
                .par_chunks_mut(cap)
                .zip(bo.par_chunks_mut(cap))
                .zip(counts.par_iter_mut())
                .enumerate()
                .map(|(i, ((row, bo_row), count))| {
                    let mut c = 0;
                    let mut bad = false;
                    for &j in list.neighbors(i) {
                        let r2 = norm2(sub(x[j as usize], x[i]));
                        if r2 == 0.0 {
                            bad = true;
                            continue;
                        }
                        if r2 >= rb2 {
                            continue;
                        }
                        let b = params.bond_order(r2.sqrt());
                        if b <= params.bo_min {
                            continue;
                        }
                        if c < cap {
                            row[c] = store.owner_index(j as usize) as u32;
                            bo_row[c] = b;
                        }
                        c += 1;
                    }
                    *count = c as u32;
                    bad
                })
                .reduce(|| false, |a, b| a || b);
            if coincident {
                return Err(Error::CoincidentAtoms(0.0));
            }
            let needed = counts.iter().copied().max().unwrap_or(0) as usize;
            if needed > cap {
                cap = ((cap as f64 * GROWTH_FACTOR).ceil() as usize).max(needed);
                continue;
            }
            // Mirror each order from the lower-index side so both rows hold the same bits.
            for i in 0..n {
                for c in 0..counts[i] as usize {
                    let j = idx[i * cap + c] as usize;
                    if j < i {
                        if let Some(m) = (0..counts[j] as usize).find(|&m| idx[j * cap + m] as usize == i) {
                            bo[i * cap + c] = bo[j * cap + m];
                        }
                    }
                }
            }
            return Ok(BondTable {
                bonds: DualArray::from_rows(n.max(1), cap, &idx)?,
                bond_order: DualArray::from_rows(n.max(1), cap, &bo)?,
                counts,
                max_bonds: cap,
                n_atoms: n,
                candidates: raw_candidates(store, list),
            });
        }
    }

    /// Convenience: single-rank decomposition and full list at the bond cutoff.
    pub fn from_atoms(sim_box: &SimBox, atoms: &[AtomRecord], params: &BondParams) -> Result<Self> {
        let mut d = Decomposition::new(*sim_box, 1, atoms, params.r_bond)?;
        let store = &mut d.stores_mut()[0];
        let list = NeighborList::build(store, sim_box, ListSettings::new(params.r_bond, 0.0, ListStyle::Full, false))?;
        Self::build(store, &list, params)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn max_bonds(&self) -> usize {
        self.max_bonds
    }

    pub fn total_bonds(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn partners(&self, i: usize) -> &[u32] {
        let raw = self.bonds.view(Space::Host).expect("host current").raw();
        &raw[i * self.max_bonds..i * self.max_bonds + self.counts[i] as usize]
    }

    pub fn orders(&self, i: usize) -> &[f64] {
        let raw = self.bond_order.view(Space::Host).expect("host current").raw();
        &raw[i * self.max_bonds..i * self.max_bonds + self.counts[i] as usize]
    }

    /// Bond order of `(i, j)`, if bonded.
    pub fn order_of(&self, i: usize, j: usize) -> Option<f64> {
        self.partners(i).iter().position(|&k| k as usize == j).map(|s| self.orders(i)[s])
    }

    /// Number of `(i, j, k, l)` tuples over the raw neighbor list with `j > i`,
    /// against which surviving quads are measured.
    pub fn candidate_quads(&self) -> u64 {
        self.candidates
    }
}

fn raw_candidates(store: &AtomStore, list: &NeighborList) -> u64 {
    let counts = list.counts();
    (0..store.n_local())
        .into_par_iter()
        .map(|i| {
            let ni = counts[i] as u64;
            list.neighbors(i)
                .iter()
                .map(|&j| store.owner_index(j as usize))
                .filter(|&j| j > i)
                .map(|j| ni.saturating_sub(1) * (counts[j] as u64).saturating_sub(1))
                .sum::<u64>()
        })
        .sum()
}

/// Quads `(i, j, k, l)` grouped by pivot `i` in contiguous spans.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadTable {
    pub quads: Vec<[u32; 4]>,
    pub per_atom_start: Vec<usize>,
    pub total: usize,
}

impl QuadTable {
    pub fn of_atom(&self, i: usize) -> &[[u32; 4]] {
        &self.quads[self.per_atom_start[i]..self.per_atom_start[i + 1]]
    }
}

/// Angles `(i, j, k)` centred on `i` with `j < k`, grouped by `i`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripleTable {
    pub triples: Vec<[u32; 3]>,
    pub per_atom_start: Vec<usize>,
}

/// Visits the quads of pivot `i` in a fixed order.
fn for_each_quad(bonds: &BondTable, i: usize, threshold: f64, mut f: impl FnMut([u32; 4])) {
    let pi = bonds.partners(i);
    let oi = bonds.orders(i);
    for (a, &j) in pi.iter().enumerate() {
        if (j as usize) <= i {
            continue;
        }
        let bo_ij = oi[a];
        let pj = bonds.partners(j as usize);
        let oj = bonds.orders(j as usize);
        for (b, &k) in pi.iter().enumerate() {
            if k == j {
                continue;
            }
            for (c, &l) in pj.iter().enumerate() {
                if l as usize == i || l == k {
                    continue;
                }
                if bo_ij * oi[b] * oj[c] > threshold {
                    f([i as u32, j, k, l]);
                }
            }
        }
    }
}

fn for_each_triple(bonds: &BondTable, i: usize, mut f: impl FnMut([u32; 3])) {
    let pi = bonds.partners(i);
    for (a, &j) in pi.iter().enumerate() {
        for &k in &pi[a + 1..] {
            let (lo, hi) = if j < k { (j, k) } else { (k, j) };
            f([i as u32, lo, hi]);
        }
    }
}

fn spans(counts: &[usize]) -> Vec<usize> {
    let mut start = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0;
    start.push(0);
    for &c in counts {
        acc += c;
        start.push(acc);
    }
    start
}

fn split_spans<'a, T>(mut data: &'a mut [T], start: &[usize]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(start.len().saturating_sub(1));
    for w in start.windows(2) {
        let (head, rest) = std::mem::take(&mut data).split_at_mut(w[1] - w[0]);
        out.push(head);
        data = rest;
    }
    out
}

/// Two-pass compression of quads (and, in the same passes, triples).
pub fn enumerate_interactions(bonds: &BondTable, bo_threshold: f64) -> (QuadTable, TripleTable) {
    let n = bonds.n_atoms();
    let counts: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut q = 0;
            for_each_quad(bonds, i, bo_threshold, |_| q += 1);
            let c = bonds.counts[i] as usize;
            (q, c * c.saturating_sub(1) / 2)
        })
        .collect();
    let quad_start = spans(&counts.iter().map(|c| c.0).collect::<Vec<_>>());
    let triple_start = spans(&counts.iter().map(|c| c.1).collect::<Vec<_>>());
    let mut quads = vec![[0u32; 4]; quad_start[n]];
    let mut triples = vec![[0u32; 3]; triple_start[n]];
    split_spans(&mut quads, &quad_start).into_par_iter().zip(split_spans(&mut triples, &triple_start)).enumerate().for_each(
        |(i, (qspan, tspan))| {
            let mut cursor = 0;
            for_each_quad(bonds, i, bo_threshold, |q| {
                qspan[cursor] = q;
                cursor += 1;
            });
            let mut cursor = 0;
            for_each_triple(bonds, i, |t| {
                tspan[cursor] = t;
                cursor += 1;
            });
        },
    );
    let total = quads.len();
    (QuadTable { quads, per_atom_start: quad_start, total }, TripleTable { triples, per_atom_start: triple_start })
}

pub fn enumerate_quads(bonds: &BondTable, bo_threshold: f64) -> QuadTable {
    enumerate_interactions(bonds, bo_threshold).0
}

/// Fraction of raw-list candidate quads that survive the bond constraints.
pub fn divergence_metric(bonds: &BondTable, quads: &QuadTable) -> f64 {
    let c = bonds.candidate_quads();
    if c == 0 {
        0.0
    } else {
        quads.total as f64 / c as f64
    }
}

/// Energy `k (1 + cos φ)` of the dihedral `k-i-j-l` and its gradient with
/// respect to `[x_i, x_j, x_k, x_l]`; `None` when degenerate.
pub fn dihedral_term(b1: Vec3, b2: Vec3, b3: Vec3, k: f64) -> Option<(f64, [Vec3; 4])> {
    let n1 = cross(b1, b2);
    let n2 = cross(b2, b3);
    let n1s = norm2(n1);
    let n2s = norm2(n2);
    if n1s <= DEGENERATE_SIN2 * norm2(b1) * norm2(b2) || n2s <= DEGENERATE_SIN2 * norm2(b2) * norm2(b3) {
        return None;
    }
    let inv = 1.0 / (n1s * n2s).sqrt();
    let c = dot(n1, n2) * inv;
    let g1 = [0, 1, 2].map(|d| n2[d] * inv - c * n1[d] / n1s);
    let g2 = [0, 1, 2].map(|d| n1[d] * inv - c * n2[d] / n2s);
    let d1 = cross(b2, g1);
    let g1b1 = cross(g1, b1);
    let b3g2 = cross(b3, g2);
    let d2 = [0, 1, 2].map(|d| g1b1[d] + b3g2[d]);
    let d3 = cross(g2, b2);
    let gi = [0, 1, 2].map(|d| k * (d1[d] - d2[d]));
    let gj = [0, 1, 2].map(|d| k * (d2[d] - d3[d]));
    let gk = [0, 1, 2].map(|d| -k * d1[d]);
    let gl = [0, 1, 2].map(|d| k * d3[d]);
    Some((k * (1.0 + c), [gi, gj, gk, gl]))
}

/// Energy `k (1 + cos θ)` of the angle `j-i-k` and its gradient with respect
/// to `[x_i, x_j, x_k]`.
pub fn angle_term(a: Vec3, b: Vec3, k: f64) -> Option<(f64, [Vec3; 3])> {
    let aa = norm2(a);
    let bb = norm2(b);
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    let inv = 1.0 / (aa * bb).sqrt();
    let c = dot(a, b) * inv;
    let ga = [0, 1, 2].map(|d| k * (b[d] * inv - c * a[d] / aa));
    let gb = [0, 1, 2].map(|d| k * (a[d] * inv - c * b[d] / bb));
    let gi = [0, 1, 2].map(|d| -ga[d] - gb[d]);
    Some((k * (1.0 + c), [gi, ga, gb]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorsionResult {
    pub energy: f64,
    pub forces: Vec<Vec3>,
    pub degenerate: usize,
}

fn quad_vectors(sim_box: &SimBox, x: &[Vec3], q: [u32; 4]) -> (Vec3, Vec3, Vec3) {
    let [i, j, k, l] = q.map(|v| x[v as usize]);
    (minimum_image(sub(i, k), sim_box), minimum_image(sub(j, i), sim_box), minimum_image(sub(l, j), sim_box))
}

/// Quad-parallel torsion energy and forces over a compressed table.
pub fn compute_torsion(quads: &QuadTable, sim_box: &SimBox, positions: &[Vec3], k_t: f64, strategy: Strategy) -> TorsionResult {
    let acc = ScatterAccumulator::new(3 * positions.len(), strategy);
    let (f, parts) = acc.run(quads.total, |t, sink| {
        let q = quads.quads[t];
        let (b1, b2, b3) = quad_vectors(sim_box, positions, q);
        match dihedral_term(b1, b2, b3, k_t) {
            Some((e, g)) => {
                for (a, gv) in q.iter().zip(g) {
                    sink.add3(*a as usize, [-gv[0], -gv[1], -gv[2]]);
                }
                (e, false)
            }
            None => (0.0, true),
        }
    });
    TorsionResult {
        energy: parts.iter().map(|p| p.0).sum(),
        forces: f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        degenerate: parts.iter().filter(|p| p.1).count(),
    }
}

/// Triple-parallel bending energy and forces.
pub fn compute_bending(triples: &TripleTable, sim_box: &SimBox, positions: &[Vec3], k_b: f64, strategy: Strategy) -> TorsionResult {
    let acc = ScatterAccumulator::new(3 * positions.len(), strategy);
    let (f, parts) = acc.run(triples.triples.len(), |t, sink| {
        let tr = triples.triples[t];
        let [i, j, k] = tr.map(|v| positions[v as usize]);
        match angle_term(minimum_image(sub(j, i), sim_box), minimum_image(sub(k, i), sim_box), k_b) {
            Some((e, g)) => {
                for (a, gv) in tr.iter().zip(g) {
                    sink.add3(*a as usize, [-gv[0], -gv[1], -gv[2]]);
                }
                (e, false)
            }
            None => (0.0, true),
        }
    });
    TorsionResult {
        energy: parts.iter().map(|p| p.0).sum(),
        forces: f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        degenerate: parts.iter().filter(|p| p.1).count(),
    }
}

/// Serial reference: the nested loop over bonded neighbors, evaluated in place.
pub fn compute_torsion_direct(bonds: &BondTable, sim_box: &SimBox, positions: &[Vec3], k_t: f64, bo_threshold: f64) -> TorsionResult {
    let mut forces = vec![[0.0; 3]; positions.len()];
    let mut energy = 0.0;
    let mut degenerate = 0;
    for i in 0..bonds.n_atoms() {
        for_each_quad(bonds, i, bo_threshold, |q| {
            let (b1, b2, b3) = quad_vectors(sim_box, positions, q);
            match dihedral_term(b1, b2, b3, k_t) {
                Some((e, g)) => {
                    energy += e;
                    for (a, gv) in q.iter().zip(g) {
                        for d in 0..3 {
                            forces[*a as usize][d] -= gv[d];
                        }
                    }
                }
                None => degenerate += 1,
            }
        });
    }
    TorsionResult { energy, forces, degenerate }
}

/// Torsion plus bending on a gathered single-rank system.
#[derive(Clone, Debug)]
pub struct TorsionTerm {
    pub params: TorsionParams,
    pub strategy: Strategy,
    pub last_degenerate: usize,
    pub last_quads: usize,
}

impl TorsionTerm {
    pub fn new(params: TorsionParams, strategy: Strategy) -> Self {
        TorsionTerm { params, strategy, last_degenerate: 0, last_quads: 0 }
    }

    pub fn evaluate(&mut self, sim_box: &SimBox, atoms: &[AtomRecord]) -> Result<(f64, Vec<Vec3>)> {
        let bonds = BondTable::from_atoms(sim_box, atoms, &self.params.bond)?;
        let (quads, triples) = enumerate_interactions(&bonds, self.params.bo_threshold);
        let x: Vec<Vec3> = atoms.iter().map(|a| sim_box.wrap(a.position)).collect();
        let t = compute_torsion(&quads, sim_box, &x, self.params.k_t, self.strategy);
        let b = compute_bending(&triples, sim_box, &x, self.params.k_b, self.strategy);
        self.last_degenerate = t.degenerate + b.degenerate;
        self.last_quads = quads.total;
        let forces = t.forces.iter().zip(&b.forces).map(|(p, q)| [p[0] + q[0], p[1] + q[1], p[2] + q[2]]).collect();
        Ok((t.energy + b.energy, forces))
    }
}

impl crate::md::ExtraTerm for TorsionTerm {
    fn name(&self) -> &str {
        "torsion"
    }

    fn compute(&mut self, sim_box: &SimBox, atoms: &[AtomRecord]) -> Result<(f64, Vec<Vec3>)> {
        self.evaluate(sim_box, atoms)
    }
}
