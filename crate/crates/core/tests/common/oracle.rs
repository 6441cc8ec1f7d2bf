//! Brute-force references.

use std::collections::BTreeSet;

use mdkk::domain::geometry::{minimum_image, norm2, sub};
use mdkk::domain::{AtomRecord, SimBox, Vec3};
use mdkk::error::Error;
use mdkk::memspace::{DualArray, LayoutPolicy, Space};
use mdkk::qeq::{shielded_coulomb, QeqParams};
use mdkk::torsion::BondParams;

/// O(N²) minimum-image Lennard-Jones, one species. Atoms must be in id order.
pub fn lj_brute(sim_box: &SimBox, atoms: &[AtomRecord], eps: f64, sigma: f64, rc: f64, shift: bool) -> (f64, Vec<Vec3>) {
    let n = atoms.len();
    let lj = |r2: f64| {
        let s6 = (sigma * sigma / r2).powi(3);
        4.0 * eps * (s6 * s6 - s6)
    };
    let e_cut = if shift { lj(rc * rc) } else { 0.0 };
    let mut energy = 0.0;
    let mut forces = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = minimum_image(sub(atoms[i].position, atoms[j].position), sim_box);
            let r2 = norm2(d);
            if r2 >= rc * rc {
                continue;
            }
            energy += lj(r2) - e_cut;
            let s6 = (sigma * sigma / r2).powi(3);
            let fs = 24.0 * eps * (2.0 * s6 * s6 - s6) / r2;
            for k in 0..3 {
                forces[i][k] += fs * d[k];
                forces[j][k] -= fs * d[k];
            }
        }
    }
    (energy, forces)
}

/// Dense QEq matrix by direct minimum-image evaluation.
pub fn qeq_dense(sim_box: &SimBox, atoms: &[AtomRecord], params: &QeqParams) -> Vec<f64> {
    let n = atoms.len();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let si = params.species[atoms[i].species as usize];
        h[i * n + i] = si.eta;
        for j in 0..n {
            if j == i {
                continue;
            }
            let sj = params.species[atoms[j].species as usize];
            let r = norm2(minimum_image(sub(atoms[j].position, atoms[i].position), sim_box)).sqrt();
            if r < params.cutoff {
                h[i * n + j] += shielded_coulomb(r, (si.gamma * sj.gamma).sqrt());
            }
        }
    }
    h
}

pub fn dense_matvec(h: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| h[i * n + j] * x[j]).sum()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(h: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a = h.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if p != c {
            for k in 0..n {
                a.swap(c * n + k, p * n + k);
            }
            x.swap(c, p);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
            x[r] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c * n + k] * x[k]).sum();
        x[c] = (x[c] - s) / a[c * n + c];
    }
    x
}

/// Bond relation by direct distance checks: `bonded[i]` lists `(j, order)`.
pub fn brute_bonds(sim_box: &SimBox, atoms: &[AtomRecord], p: &BondParams) -> Vec<Vec<(usize, f64)>> {
    let n = atoms.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let r = norm2(minimum_image(sub(atoms[j].position, atoms[i].position), sim_box)).sqrt();
                    let bo = p.bond_order(r);
                    (r < p.r_bond && bo > p.bo_min).then_some((j, bo))
                })
                .collect()
        })
        .collect()
}

/// Every `(i, j, k, l)` with `i < j`, bonds `i-j`, `i-k`, `j-l`, distinct
/// `k != j`, `l != i`, `l != k`, and bond-order product above `threshold`.
pub fn brute_quads(bonds: &[Vec<(usize, f64)>], threshold: f64) -> BTreeSet<[u32; 4]> {
    let n = bonds.len();
    let order = |a: usize, b: usize| bonds[a].iter().find(|p| p.0 == b).map(|p| p.1);
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            let Some(bij) = order(i, j) else { continue };
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let Some(bik) = order(i, k) else { continue };
                for l in 0..n {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    let Some(bjl) = order(j, l) else { continue };
                    if bij * bik * bjl > threshold {
                        out.insert([i as u32, j as u32, k as u32, l as u32]);
                    }
                }
            }
        }
    }
    out
}

// Dual-space shadow model

#[derive(Clone, Copy, Debug)]
pub enum DualOp {
    Set(Space, usize, u64),
    ViewWrite(Space, usize, u64),
    Modify(Space),
    Sync(Space),
    Read(Space, usize),
    ReadAll(Space),
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = flat % shape[d];
        flat /= shape[d];
    }
    idx
}

/// Plain array with a single authoritative copy plus the flag/transfer
/// bookkeeping the dual array is expected to reproduce.
struct Shadow {
    values: Vec<u64>,
    modified: [bool; 2],
    transfers: u64,
}

fn slot(s: Space) -> usize {
    match s {
        Space::Host => 0,
        Space::Device => 1,
    }
}

/// Replays `ops` on a fresh array and on the shadow model; any mismatch is
/// reported with the failing step.
pub fn replay_dual(shape: &[usize], host: LayoutPolicy, device: LayoutPolicy, ops: &[DualOp]) -> Result<(), String> {
    let mut a = DualArray::<f64>::new(shape, host, device).map_err(|e| e.to_string())?;
    let len: usize = shape.iter().product();
    let mut m = Shadow { values: vec![0.0f64.to_bits(); len], modified: [false, false], transfers: 0 };
    for (step, &op) in ops.iter().enumerate() {
        let fail = |msg: String| Err(format!("step {step} {op:?}: {msg}"));
        match op {
            DualOp::Set(s, k, v) | DualOp::ViewWrite(s, k, v) => {
                let k = k % len;
                let idx = unravel(k, shape);
                let r = match op {
                    DualOp::Set(..) => a.set(s, &idx, f64::from_bits(v)),
                    _ => a.view_mut(s).map(|mut w| w.set(&idx, f64::from_bits(v))),
                };
                let conflict = m.modified[slot(s.other())];
                match (r, conflict) {
                    (Err(Error::ConcurrentModification(sp)), true) if sp == s => {}
                    (Ok(()), false) => {
                        m.values[k] = v;
                        m.modified[slot(s)] = true;
                    }
                    (r, c) => return fail(format!("got {r:?}, model conflict {c}")),
                }
            }
            DualOp::Modify(s) => {
                let conflict = m.modified[slot(s.other())];
                match (a.modify(s), conflict) {
                    (Err(Error::ConcurrentModification(_)), true) => {}
                    (Ok(()), false) => m.modified[slot(s)] = true,
                    (r, c) => return fail(format!("got {r:?}, model conflict {c}")),
                }
            }
            DualOp::Sync(s) => {
                a.sync(s);
                if m.modified[slot(s.other())] {
                    m.modified[slot(s.other())] = false;
                    m.transfers += 1;
                }
            }
            DualOp::Read(s, k) => {
                let k = k % len;
                let stale = m.modified[slot(s.other())];
                match (a.get(s, &unravel(k, shape)), stale) {
                    (Err(Error::StaleSpace(_)), true) => {}
                    (Ok(x), false) if x.to_bits() == m.values[k] => {}
                    (r, st) => return fail(format!("got {r:?}, model stale {st}, model value {:e}", f64::from_bits(m.values[k]))),
                }
            }
            DualOp::ReadAll(s) => {
                let stale = m.modified[slot(s.other())];
                match (a.view(s), stale) {
                    (Err(Error::StaleSpace(_)), true) => {}
                    (Ok(v), false) => {
                        for (k, want) in m.values.iter().enumerate() {
                            if v.get(&unravel(k, shape)).to_bits() != *want {
                                return fail(format!("element {k} differs"));
                            }
                        }
                    }
                    (r, st) => return fail(format!("view ok {}, model stale {st}", r.is_ok())),
                }
            }
        }
        if a.transfer_count() != m.transfers {
            return fail(format!("transfer_count {} vs model {}", a.transfer_count(), m.transfers));
        }
        if a.is_modified(Space::Host) != m.modified[0] || a.is_modified(Space::Device) != m.modified[1] {
            return fail("modified flags differ".into());
        }
        if a.is_modified(Space::Host) && a.is_modified(Space::Device) {
            return fail("both spaces flagged modified".into());
        }
    }
    Ok(())
}
