#![allow(dead_code)]

pub mod criteria;
pub mod oracle;

use mdkk::domain::{AtomRecord, Decomposition, SimBox, Vec3};
use mdkk::md::{ForceField, MdConfig, System};
use mdkk::memspace::Strategy;
use mdkk::neighbor::{ListSettings, ListStyle, NeighborList};
use mdkk::snap::{CouplingTables, Snap, SnapKnobs, SnapParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SNAP_SKIN: f64 = 0.1;

pub fn max_abs(a: &[Vec3]) -> f64 {
    a.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).flat_map(|(x, y)| (0..3).map(move |k| (x[k] - y[k]).abs())).fold(0.0, f64::max)
}

pub fn net(forces: &[Vec3]) -> Vec3 {
    forces.iter().fold([0.0; 3], |a, f| [a[0] + f[0], a[1] + f[1], a[2] + f[2]])
}

/// `|a - b| <= max(abs, rel * |b|)`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * b.abs())
}

/// Isolated cluster inside a periodic cube of side 24, centred at 12.
pub fn cluster(n: usize, radius: f64, min_dist: f64, seed: u64) -> (SimBox, Vec<AtomRecord>) {
    let side = 24.0;
    let c = side / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec3> = Vec::new();
    while pts.len() < n {
        let p = [rng.gen_range(-radius..radius), rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)];
        if p.iter().map(|x| x * x).sum::<f64>() > radius * radius {
            continue;
        }
        if pts.iter().all(|q| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>() >= min_dist * min_dist) {
            pts.push(p);
        }
    }
    let atoms = pts
        .into_iter()
        .enumerate()
        .map(|(i, p)| AtomRecord { id: i as u64, species: 0, position: [p[0] + c, p[1] + c, p[2] + c], velocity: [0.0; 3] })
        .collect();
    (SimBox::periodic_cube(side).unwrap(), atoms)
}

pub fn rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n);
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn apply(r: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [0, 1, 2].map(|a| r[a][0] * v[0] + r[a][1] * v[1] + r[a][2] * v[2])
}

/// Rotates atoms about `centre`.
pub fn rotate_about(atoms: &[AtomRecord], r: &[[f64; 3]; 3], centre: Vec3) -> Vec<AtomRecord> {
    atoms
        .iter()
        .map(|a| {
            let p = apply(r, [a.position[0] - centre[0], a.position[1] - centre[1], a.position[2] - centre[2]]);
            AtomRecord { position: [p[0] + centre[0], p[1] + centre[1], p[2] + centre[2]], ..*a }
        })
        .collect()
}

/// Energy and id-ordered forces of a freshly built system.
pub fn system_eval(sim_box: SimBox, atoms: &[AtomRecord], field: Box<dyn ForceField>, config: MdConfig) -> (f64, Vec<Vec3>) {
    let mut sys = System::new(sim_box, atoms, vec![1.0], field, config).unwrap();
    (sys.potential_energy(), sys.forces().into_iter().map(|p| p.1).collect())
}

// SNAP helpers

pub struct SnapEval {
    pub energy: f64,
    pub forces: Vec<Vec3>,
    pub descriptors: Vec<Vec<f64>>,
    pub virial: [f64; 6],
}

pub fn snap_eval(snap: &Snap, sim_box: SimBox, atoms: &[AtomRecord], n_ranks: usize) -> SnapEval {
    let rc = snap.params.rcut;
    let mut d = Decomposition::new(sim_box, n_ranks, atoms, rc + SNAP_SKIN).unwrap();
    let mut energy = 0.0;
    let mut virial = [0.0; 6];
    let mut desc: Vec<(u64, Vec<f64>)> = Vec::new();
    for s in d.stores_mut() {
        let list = NeighborList::build(s, &sim_box, ListSettings::new(rc, SNAP_SKIN, ListStyle::Full, true)).unwrap();
        let r = snap.compute(s, &list, Strategy::Serial).unwrap();
        s.set_forces(&r.forces).unwrap();
        energy += r.energy;
        for k in 0..6 {
            virial[k] += r.virial[k];
        }
        desc.extend(r.descriptors.into_iter().enumerate().map(|(i, b)| (s.global_ids[i], b)));
    }
    d.reverse_comm();
    desc.sort_by_key(|p| p.0);
    SnapEval {
        energy,
        forces: d.gather_forces().into_iter().map(|p| p.1).collect(),
        descriptors: desc.into_iter().map(|p| p.1).collect(),
        virial,
    }
}

pub fn snap_energy(snap: &Snap, sim_box: SimBox, atoms: &[AtomRecord]) -> f64 {
    let rc = snap.params.rcut;
    let mut d = Decomposition::new(sim_box, 1, atoms, rc + SNAP_SKIN).unwrap();
    let s = &mut d.stores_mut()[0];
    let list = NeighborList::build(s, &sim_box, ListSettings::new(rc, SNAP_SKIN, ListStyle::Full, true)).unwrap();
    snap.energy(s, &list).unwrap()
}

pub fn random_beta(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn snap_for(jmax: f64, rcut: f64, seed: u64, knobs: SnapKnobs) -> Snap {
    let twojmax = (2.0 * jmax) as usize;
    let n = CouplingTables::new(twojmax).n_descriptors();
    Snap::new(SnapParams { twojmax, rcut, beta: random_beta(n, seed) }, knobs).unwrap()
}

/// Central differences (h = 1e-6) of the SNAP energy for every coordinate of
/// the listed atoms; returns the worst `|fd - F| / max|F|`.
pub fn snap_fd_error(snap: &Snap, sim_box: SimBox, atoms: &[AtomRecord], which: &[usize]) -> f64 {
    let h = 1e-6;
    let e = snap_eval(snap, sim_box, atoms, 1);
    let scale = max_abs(&e.forces);
    assert!(scale > 1e-3, "forces too small to test: {scale}");
    let mut worst = 0.0f64;
    for &i in which {
        for k in 0..3 {
            let mut p = atoms.to_vec();
            p[i].position[k] += h;
            let ep = snap_energy(snap, sim_box, &p);
            p[i].position[k] -= 2.0 * h;
            let em = snap_energy(snap, sim_box, &p);
            let fd = -(ep - em) / (2.0 * h);
            worst = worst.max((fd - e.forces[i][k]).abs() / scale);
        }
    }
    worst
}
