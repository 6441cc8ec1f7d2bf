//! Spectral neighbor analysis potential: per-atom U sums, the adjoint Y,
//! bispectrum descriptors B and forces from `dE/dr = Σ Re(dU · conj(Y))`.

mod tables;

use std::path::Path;

use num_complex::Complex64 as C;
use rayon::prelude::*;

pub use tables::{clebsch_gordan, twojmax_of, CouplingTables, QuantumIndex, Triple, ZEntry};

use crate::domain::geometry::{norm2, sub};
use crate::domain::{AtomStore, Vec3};
use crate::error::{Error, Result};
use crate::memspace::{DualArray, ScatterAccumulator, ScatterSink, Space, Strategy};
use crate::neighbor::{ListStyle, NeighborList};
use crate::pair::PairConfig;

/// Polar-angle scale of the hypersphere map: `θ0 = RFAC0 · π · r / rc`.
pub const RFAC0: f64 = 0.99;

#[derive(Clone, Debug, PartialEq)]
pub struct SnapParams {
    pub twojmax: usize,
    pub rcut: f64,
    pub beta: Vec<f64>,
}

impl SnapParams {
    /// Reads `jmax` and then the β values, whitespace separated, `#` comments.
    pub fn parse_coefficients(text: &str, rcut: f64) -> Result<Self> {
        let mut tokens = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
        let first = tokens.next().ok_or_else(|| Error::InvalidParameter("empty SNAP coefficient file".into()))?;
        let jmax: f64 = first.parse().map_err(|_| Error::InvalidParameter(format!("bad jmax '{first}'")))?;
        let twojmax = twojmax_of(jmax)?;
        let beta = tokens.map(|t| t.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad beta value '{t}'")))).collect::<Result<Vec<_>>>()?;
        let tables = CouplingTables::new(twojmax);
        tables.check_beta(&beta)?;
        Ok(SnapParams { twojmax, rcut, beta })
    }

    pub fn read_coefficients(path: &Path, rcut: f64) -> Result<Self> {
        Self::parse_coefficients(&std::fs::read_to_string(path)?, rcut)
    }
}

/// Scheduling knobs; none of them changes the computed values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapKnobs {
    /// Neighbors summed per partial U accumulation.
    pub batch_u: usize,
    /// Contraction entries per Y work batch.
    pub batch_y: usize,
    /// Atoms per Y tile.
    pub tile_v: usize,
    /// Space holding U and Y; `Device` stores them atom-fastest.
    pub space: Space,
    /// All three force directions in one recursion pass.
    pub fused: bool,
}

impl Default for SnapKnobs {
    fn default() -> Self {
        SnapKnobs { batch_u: 1, batch_y: 1, tile_v: 4, space: Space::Host, fused: true }
    }
}

/// Per-(atom, neighbor) hypersphere parameters and switching values.
#[derive(Clone, Debug, Default)]
pub struct NeighborMap {
    pub start: Vec<usize>,
    pub rij: Vec<Vec3>,
    pub neighbor: Vec<u32>,
    pub a: Vec<C>,
    pub b: Vec<C>,
    pub fc: Vec<f64>,
    pub dfc: Vec<f64>,
}

impl NeighborMap {
    pub fn n_atoms(&self) -> usize {
        self.start.len() - 1
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.start[i]..self.start[i + 1]
    }
}

/// Cosine switching function and its derivative.
#[inline]
pub fn switching(r: f64, rcut: f64) -> (f64, f64) {
    if r >= rcut {
        return (0.0, 0.0);
    }
    let x = std::f64::consts::PI * r / rcut;
    (0.5 * (x.cos() + 1.0), -0.5 * std::f64::consts::PI / rcut * x.sin())
}

/// Cayley-Klein parameters of the displacement mapped onto the 3-sphere.
#[inline]
pub fn cayley_klein(d: Vec3, rcut: f64) -> (C, C) {
    let r = norm2(d).sqrt();
    let theta0 = RFAC0 * std::f64::consts::PI * r / rcut;
    let z0 = r / theta0.tan();
    let r0inv = 1.0 / (r * r + z0 * z0).sqrt();
    (C::new(r0inv * z0, -r0inv * d[2]), C::new(r0inv * d[1], -r0inv * d[0]))
}

/// Cartesian derivatives of the Cayley-Klein parameters.
fn cayley_klein_grad(d: Vec3, rcut: f64) -> ([C; 3], [C; 3]) {
    let rsq = norm2(d);
    let r = rsq.sqrt();
    let rscale0 = RFAC0 * std::f64::consts::PI / rcut;
    let theta0 = r * rscale0;
    let z0 = r * theta0.cos() / theta0.sin();
    let dz0dr = z0 / r - (r * rscale0) * (rsq + z0 * z0) / rsq;
    let r0inv = 1.0 / (rsq + z0 * z0).sqrt();
    let u = [d[0] / r, d[1] / r, d[2] / r];
    let dr0invdr = -r0inv.powi(3) * (r + z0 * dz0dr);
    let mut da = [C::new(0.0, 0.0); 3];
    let mut db = [C::new(0.0, 0.0); 3];
    for k in 0..3 {
        let dr0inv = dr0invdr * u[k];
        let dz0 = dz0dr * u[k];
        da[k] = C::new(dz0 * r0inv + z0 * dr0inv, -d[2] * dr0inv);
        db[k] = C::new(d[1] * dr0inv, -d[0] * dr0inv);
    }
    da[2].im -= r0inv;
    db[1].re += r0inv;
    db[0].im -= r0inv;
    (da, db)
}

/// Unweighted Wigner matrices `u_j` for all `j`, by the row recursion.
pub fn compute_u(t: &CouplingTables, a: C, b: C, u: &mut [C]) {
    let q = &t.index;
    u[0] = C::new(1.0, 0.0);
    for j in 1..=q.twojmax() {
        let base = q.block_start(j);
        let prev = q.block_start(j - 1);
        for mb in 0..=j / 2 {
            let row = base + mb * (j + 1);
            u[row..row + j + 1].fill(C::new(0.0, 0.0));
            for ma in 0..j {
                let up = u[prev + mb * j + ma];
                u[row + ma] += t.root(j - ma, j - mb) * (a.conj() * up);
                u[row + ma + 1] -= t.root(ma + 1, j - mb) * (b.conj() * up);
            }
        }
        mirror(u, base, j);
    }
}

/// Fills rows `mb > j/2` from `u[j-mb][j-ma] = (-1)^(ma-mb) conj(u[mb][ma])`.
#[inline]
fn mirror(u: &mut [C], base: usize, j: usize) {
    let mut jju = base;
    let mut jjup = base + (j + 1) * (j + 1) - 1;
    let mut mbpar = 1.0;
    for _mb in 0..=j / 2 {
        let mut mapar = mbpar;
        for _ma in 0..=j {
            u[jjup] = mapar * u[jju].conj();
            mapar = -mapar;
            jju += 1;
            jjup -= 1;
        }
        mbpar = -mbpar;
    }
}

/// `u_j` and its three Cartesian derivatives in one recursion.
fn compute_u_du(t: &CouplingTables, a: C, b: C, da: &[C; 3], db: &[C; 3], u: &mut [C], du: &mut [[C; 3]]) {
    let q = &t.index;
    u[0] = C::new(1.0, 0.0);
    du[0] = [C::new(0.0, 0.0); 3];
    for j in 1..=q.twojmax() {
        let base = q.block_start(j);
        let prev = q.block_start(j - 1);
        for mb in 0..=j / 2 {
            let row = base + mb * (j + 1);
            u[row..row + j + 1].fill(C::new(0.0, 0.0));
            du[row..row + j + 1].fill([C::new(0.0, 0.0); 3]);
            for ma in 0..j {
                let up = u[prev + mb * j + ma];
                let dup = du[prev + mb * j + ma];
                let ra = t.root(j - ma, j - mb);
                let rb = t.root(ma + 1, j - mb);
                u[row + ma] += ra * (a.conj() * up);
                u[row + ma + 1] -= rb * (b.conj() * up);
                for k in 0..3 {
                    du[row + ma][k] += ra * (da[k].conj() * up + a.conj() * dup[k]);
                    du[row + ma + 1][k] -= rb * (db[k].conj() * up + b.conj() * dup[k]);
                }
            }
        }
        mirror(u, base, j);
        let mut jju = base;
        let mut jjup = base + (j + 1) * (j + 1) - 1;
        let mut mbpar = 1.0;
        for _mb in 0..=j / 2 {
            let mut mapar = mbpar;
            for _ma in 0..=j {
                let src = du[jju];
                du[jjup] = [0, 1, 2].map(|k| mapar * src[k].conj());
                mapar = -mapar;
                jju += 1;
                jjup -= 1;
            }
            mbpar = -mbpar;
        }
    }
}

/// `2 Σ Re(x · conj(y))` over the unique half of each block (middle row
/// weighted so the sum equals the full-matrix contraction).
#[inline]
fn half_contract(t: &CouplingTables, x: impl Fn(usize) -> C, y: impl Fn(usize) -> C) -> f64 {
    let q = &t.index;
    let mut s = 0.0;
    for j in 0..=q.twojmax() {
        let mut jju = q.block_start(j);
        let mut mb = 0;
        while 2 * mb < j {
            for _ in 0..=j {
                let (a, b) = (x(jju), y(jju));
                s += a.re * b.re + a.im * b.im;
                jju += 1;
            }
            mb += 1;
        }
        if j % 2 == 0 {
            for ma in 0..=mb {
                let (a, b) = (x(jju), y(jju));
                let w = if ma == mb { 0.5 } else { 1.0 };
                s += w * (a.re * b.re + a.im * b.im);
                jju += 1;
            }
        }
    }
    2.0 * s
}

/// Per-atom complex fields stored as `[atom, re.. | im..]`.
#[derive(Clone, Debug)]
pub struct ComplexField {
    pub data: DualArray<f64>,
    n_atoms: usize,
    len: usize,
}

impl ComplexField {
    fn new(n_atoms: usize, len: usize) -> Result<Self> {
        Ok(ComplexField { data: DualArray::with_default_layouts(&[n_atoms.max(1), 2 * len])?, n_atoms, len })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// Row of atom `i` read from `space`.
    pub fn row(&self, space: Space, i: usize) -> Result<Vec<C>> {
        let v = self.data.view(space)?;
        Ok((0..self.len).map(|q| C::new(v.at2(i, q), v.at2(i, q + self.len))).collect())
    }

    fn fill(&mut self, space: Space, f: impl Fn(usize, &mut [C]) + Sync + Send) -> Result<()> {
        let len = self.len;
        self.data.fill_rows(space, |i, row| {
            let mut buf = vec![C::new(0.0, 0.0); len];
            f(i, &mut buf);
            for (q, c) in buf.iter().enumerate() {
                row[q] = c.re;
                row[q + len] = c.im;
            }
        })
    }
}

/// Intermediate per-atom fields.
#[derive(Clone, Debug)]
pub struct SnapState {
    pub u: ComplexField,
    pub y: ComplexField,
    pub knobs: SnapKnobs,
}

/// Energy, forces on all rows, virial and per-atom descriptors.
#[derive(Clone, Debug)]
pub struct SnapResult {
    pub energy: f64,
    pub forces: Vec<Vec3>,
    pub virial: [f64; 6],
    pub descriptors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Snap {
    pub params: SnapParams,
    pub tables: CouplingTables,
    pub knobs: SnapKnobs,
}

impl Snap {
    pub fn new(params: SnapParams, knobs: SnapKnobs) -> Result<Self> {
        if !(params.rcut > 0.0) {
            return Err(Error::InvalidParameter(format!("SNAP cutoff must be positive, got {}", params.rcut)));
        }
        let tables = CouplingTables::new(params.twojmax);
        tables.check_beta(&params.beta)?;
        if knobs.batch_u == 0 || knobs.batch_y == 0 || knobs.tile_v == 0 {
            return Err(Error::InvalidParameter("SNAP batch and tile sizes must be positive".into()));
        }
        Ok(Snap { params, tables, knobs })
    }

    pub fn n_descriptors(&self) -> usize {
        self.tables.n_descriptors()
    }

    /// Hypersphere parameters of every in-cutoff neighbor of the owned atoms.
    pub fn neighbor_map(&self, store: &mut AtomStore, list: &NeighborList) -> Result<NeighborMap> {
        if list.style() != ListStyle::Full {
            return Err(Error::InvalidParameter("SNAP needs a full neighbor list".into()));
        }
        let x = store.positions_host();
        let rc = self.params.rcut;
        let mut m = NeighborMap { start: vec![0], ..Default::default() };
        let mut order: Vec<u32> = Vec::new();
        for i in 0..store.n_local() {
            // Fixed summation order independent of how atoms were stored.
            order.clear();
            order.extend_from_slice(list.neighbors(i));
            order.sort_by(|&p, &q| {
                let key = |k: u32| (store.global_ids[k as usize], x[k as usize].map(f64::to_bits));
                key(p).cmp(&key(q))
            });
            for &k in &order {
                let d = sub(x[k as usize], x[i]);
                let r2 = norm2(d);
                if r2 == 0.0 {
                    return Err(Error::CoincidentAtoms(0.0));
                }
                if r2 >= rc * rc {
                    continue;
                }
                let (a, b) = cayley_klein(d, rc);
                let (fc, dfc) = switching(r2.sqrt(), rc);
                m.rij.push(d);
                m.neighbor.push(k);
                m.a.push(a);
                m.b.push(b);
                m.fc.push(fc);
                m.dfc.push(dfc);
            }
            m.start.push(m.rij.len());
        }
        Ok(m)
    }

    /// Switched neighbor sums `U_j(i) = Σ_k f_c(r_ik) u_j(r_ik)`.
    pub fn compute_ui(&self, map: &NeighborMap) -> Result<ComplexField> {
        let len = self.tables.index.len();
        let mut u = ComplexField::new(map.n_atoms(), len)?;
        let batch = self.knobs.batch_u;
        let t = &self.tables;
        u.fill(self.knobs.space, |i, total| {
            if i >= map.n_atoms() {
                return;
            }
            let mut scratch = vec![C::new(0.0, 0.0); len];
            let mut partial = vec![C::new(0.0, 0.0); len];
            let range = map.range(i);
            for chunk in range.clone().collect::<Vec<_>>().chunks(batch) {
                partial.fill(C::new(0.0, 0.0));
                for &e in chunk {
                    compute_u(t, map.a[e], map.b[e], &mut scratch);
                    let w = map.fc[e];
                    for (p, s) in partial.iter_mut().zip(&scratch) {
                        *p += w * s;
                    }
                }
                for (tot, p) in total.iter_mut().zip(&partial) {
                    *tot += p;
                }
            }
        })?;
        Ok(u)
    }

    fn contract_z(&self, e: &ZEntry, u: &[C]) -> C {
        let t = &self.tables;
        let q = &t.index;
        let cg = &t.cg[e.cg_offset..];
        let j2p = e.j2 + 1;
        let mut z = C::new(0.0, 0.0);
        let mut jju1 = q.block_start(e.j1) + (e.j1 + 1) * e.mb1min;
        let mut jju2 = q.block_start(e.j2) + j2p * e.mb2max;
        let mut icgb = e.mb1min * j2p + e.mb2max;
        for _ in 0..e.nb {
            let mut suma = C::new(0.0, 0.0);
            let mut ma1 = e.ma1min;
            let mut ma2 = e.ma2max as isize;
            let mut icga = e.ma1min * j2p + e.ma2max;
            for _ in 0..e.na {
                suma += cg[icga] * (u[jju1 + ma1] * u[jju2 + ma2 as usize]);
                ma1 += 1;
                ma2 -= 1;
                icga += e.j2;
            }
            z += cg[icgb] * suma;
            jju1 += e.j1 + 1;
            jju2 = jju2.wrapping_sub(j2p);
            icgb += e.j2;
        }
        z
    }

    /// Adjoint `Y_j = Σ β' Z` (unique half rows), tiled over atoms.
    pub fn compute_yi(&self, u: &ComplexField) -> Result<ComplexField> {
        let len = self.tables.index.len();
        let n = u.n_atoms();
        let space = self.knobs.space;
        let beta = &self.params.beta;
        let entries = &self.tables.z_entries;
        let tile = self.knobs.tile_v;
        let batch = self.knobs.batch_y;
        let rows: Vec<Vec<C>> = (0..n).map(|i| u.row(space, i)).collect::<Result<_>>()?;
        let tiles: Vec<Vec<Vec<C>>> = (0..n.div_ceil(tile))
            .into_par_iter()
            .map(|ti| {
                let atoms = ti * tile..((ti + 1) * tile).min(n);
                let mut ys = vec![vec![C::new(0.0, 0.0); len]; atoms.len()];
                for group in entries.chunks(batch) {
                    for (slot, i) in atoms.clone().enumerate() {
                        for e in group {
                            let z = self.contract_z(e, &rows[i]);
                            ys[slot][e.jju] += beta[e.beta_index] * e.beta_factor * z;
                        }
                    }
                }
                ys
            })
            .collect();
        let flat: Vec<Vec<C>> = tiles.into_iter().flatten().collect();
        let mut y = ComplexField::new(n, len)?;
        y.fill(space, |i, row| {
            if i < flat.len() {
                row.copy_from_slice(&flat[i]);
            }
        })?;
        Ok(y)
    }

    /// Descriptors `B_{j1 j2 j} = Σ Re(Z · conj(U_j))` for every owned atom.
    pub fn compute_bi(&self, u: &ComplexField) -> Result<Vec<Vec<f64>>> {
        let space = self.knobs.space;
        let t = &self.tables;
        let rows: Vec<Vec<C>> = (0..u.n_atoms()).map(|i| u.row(space, i)).collect::<Result<_>>()?;
        Ok(rows
            .par_iter()
            .map(|ui| {
                t.b_triples
                    .iter()
                    .map(|bt| {
                        let &(_, start, count) = t.z_blocks.iter().find(|(tr, _, _)| tr == bt).expect("z block");
                        let block = &t.z_entries[start..start + count];
                        let j = bt.j;
                        let mut s = 0.0;
                        for e in block {
                            let w = if 2 * e.mb == j {
                                match e.ma.cmp(&e.mb) {
                                    std::cmp::Ordering::Less => 1.0,
                                    std::cmp::Ordering::Equal => 0.5,
                                    std::cmp::Ordering::Greater => 0.0,
                                }
                            } else {
                                1.0
                            };
                            if w == 0.0 {
                                continue;
                            }
                            let z = self.contract_z(e, ui);
                            let uu = ui[e.jju];
                            s += w * (uu.re * z.re + uu.im * z.im);
                        }
                        2.0 * s
                    })
                    .collect()
            })
            .collect())
    }

    /// `E = Σ_i β · B_i`.
    pub fn energy_from_descriptors(&self, b: &[Vec<f64>]) -> f64 {
        b.iter().map(|bi| bi.iter().zip(&self.params.beta).map(|(x, w)| x * w).sum::<f64>()).sum()
    }

    /// `E = Σ_i Y:U* / 3`, using that B is cubic in U.
    pub fn energy_from_adjoint(&self, u: &ComplexField, y: &ComplexField) -> Result<f64> {
        let space = self.knobs.space;
        let mut e = 0.0;
        for i in 0..u.n_atoms() {
            let ui = u.row(space, i)?;
            let yi = y.row(space, i)?;
            e += half_contract(&self.tables, |q| ui[q], |q| yi[q]) / 3.0;
        }
        Ok(e)
    }

    /// `dE_i/dr_ik` for one neighbor entry, all directions in one pass.
    fn dedr_fused(&self, map: &NeighborMap, e: usize, yi: &[C], u: &mut [C], du: &mut [[C; 3]]) -> Vec3 {
        let rc = self.params.rcut;
        let (da, db) = cayley_klein_grad(map.rij[e], rc);
        compute_u_du(&self.tables, map.a[e], map.b[e], &da, &db, u, du);
        let r = norm2(map.rij[e]).sqrt();
        let unit = map.rij[e].map(|c| c / r);
        let (sfac, dsfac) = (map.fc[e], map.dfc[e]);
        [0, 1, 2].map(|k| half_contract(&self.tables, |q| dsfac * unit[k] * u[q] + sfac * du[q][k], |q| yi[q]))
    }

    /// Switched derivative matrices of every neighbor entry, `[entry][dir][q]`.
    pub fn compute_duidrj(&self, map: &NeighborMap) -> Vec<[Vec<C>; 3]> {
        let len = self.tables.index.len();
        let rc = self.params.rcut;
        (0..map.rij.len())
            .into_par_iter()
            .map_init(
                || (vec![C::new(0.0, 0.0); len], vec![[C::new(0.0, 0.0); 3]; len]),
                |(u, du), e| {
                    let (da, db) = cayley_klein_grad(map.rij[e], rc);
                    compute_u_du(&self.tables, map.a[e], map.b[e], &da, &db, u, du);
                    let r = norm2(map.rij[e]).sqrt();
                    let (sfac, dsfac) = (map.fc[e], map.dfc[e]);
                    [0, 1, 2].map(|k| {
                        let uk = map.rij[e][k] / r;
                        (0..len).map(|q| dsfac * uk * u[q] + sfac * du[q][k]).collect()
                    })
                },
            )
            .collect()
    }

    /// One direction of `dE_i/dr_ik` from stored derivative matrices.
    pub fn compute_deidrj(&self, map: &NeighborMap, dudr: &[[Vec<C>; 3]], y: &ComplexField, dir: usize) -> Result<Vec<f64>> {
        let owner = entry_owners(map);
        let space = self.knobs.space;
        let rows: Vec<Vec<C>> = (0..y.n_atoms()).map(|i| y.row(space, i)).collect::<Result<_>>()?;
        Ok((0..dudr.len()).into_par_iter().map(|e| half_contract(&self.tables, |q| dudr[e][dir][q], |q| rows[owner[e]][q])).collect())
    }

    /// Full evaluation for one rank: energy, forces on all rows (ghost
    /// rows must be folded back), virial and descriptors.
    pub fn compute(&self, store: &mut AtomStore, list: &NeighborList, strategy: Strategy) -> Result<SnapResult> {
        list.check_current(store)?;
        let map = self.neighbor_map(store, list)?;
        let u = self.compute_ui(&map)?;
        let y = self.compute_yi(&u)?;
        let descriptors = self.compute_bi(&u)?;
        let energy = self.energy_from_descriptors(&descriptors);
        let n_total = store.n_total();
        let space = self.knobs.space;
        let len = self.tables.index.len();
        let owner = entry_owners(&map);
        let acc = ScatterAccumulator::new(3 * n_total, strategy);

        let dedr: Vec<Vec3> = if self.knobs.fused {
            let yrows: Vec<Vec<C>> = (0..y.n_atoms()).map(|i| y.row(space, i)).collect::<Result<_>>()?;
            (0..map.rij.len())
                .into_par_iter()
                .map_init(
                    || (vec![C::new(0.0, 0.0); len], vec![[C::new(0.0, 0.0); 3]; len]),
                    |(u, du), e| self.dedr_fused(&map, e, &yrows[owner[e]], u, du),
                )
                .collect()
        } else {
            let dudr = self.compute_duidrj(&map);
            let parts: Vec<Vec<f64>> = (0..3).map(|d| self.compute_deidrj(&map, &dudr, &y, d)).collect::<Result<_>>()?;
            (0..map.rij.len()).map(|e| [parts[0][e], parts[1][e], parts[2][e]]).collect()
        };

        let (scatter, own) = acc.run(store.n_local(), |i, sink: &mut ScatterSink<'_>| {
            let mut fi = [0.0; 3];
            let mut w = [0.0; 6];
            for e in map.range(i) {
                let g = dedr[e];
                let k = map.neighbor[e] as usize;
                sink.add3(k, [-g[0], -g[1], -g[2]]);
                for d in 0..3 {
                    fi[d] += g[d];
                }
                let r = map.rij[e];
                w[0] -= r[0] * g[0];
                w[1] -= r[1] * g[1];
                w[2] -= r[2] * g[2];
                w[3] -= r[0] * g[1];
                w[4] -= r[0] * g[2];
                w[5] -= r[1] * g[2];
            }
            (fi, w)
        });
        let mut forces: Vec<Vec3> = scatter.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mut virial = [0.0; 6];
        for (i, (fi, w)) in own.iter().enumerate() {
            for d in 0..3 {
                forces[i][d] += fi[d];
            }
            for d in 0..6 {
                virial[d] += w[d];
            }
        }
        Ok(SnapResult { energy, forces, virial, descriptors })
    }

    /// Energy only, skipping Y and the derivative pass.
    pub fn energy(&self, store: &mut AtomStore, list: &NeighborList) -> Result<f64> {
        let map = self.neighbor_map(store, list)?;
        let u = self.compute_ui(&map)?;
        Ok(self.energy_from_descriptors(&self.compute_bi(&u)?))
    }

    /// Intermediate fields for inspection.
    pub fn state(&self, store: &mut AtomStore, list: &NeighborList) -> Result<SnapState> {
        let map = self.neighbor_map(store, list)?;
        let u = self.compute_ui(&map)?;
        let y = self.compute_yi(&u)?;
        Ok(SnapState { u, y, knobs: self.knobs })
    }
}

fn entry_owners(map: &NeighborMap) -> Vec<usize> {
    let mut owner = vec![0; map.rij.len()];
    for i in 0..map.n_atoms() {
        for e in map.range(i) {
            owner[e] = i;
        }
    }
    owner
}

impl crate::md::ForceField for Snap {
    fn name(&self) -> &str {
        "snap"
    }

    fn cutoff(&self) -> f64 {
        self.params.rcut
    }

    fn list_style(&self, _requested: ListStyle) -> ListStyle {
        ListStyle::Full
    }

    fn compute(&self, store: &mut AtomStore, list: &mut NeighborList, config: &PairConfig) -> Result<(f64, Vec<Vec3>, [f64; 6])> {
        let r = Snap::compute(self, store, list, config.strategy)?;
        Ok((r.energy, r.forces, r.virial))
    }
}
