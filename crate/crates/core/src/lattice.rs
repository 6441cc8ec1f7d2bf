//! System builders: fcc lattices, random gases and seeded velocities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::geometry::{minimum_image, norm2, sub};
use crate::domain::{AtomRecord, SimBox, Vec3};
use crate::error::{Error, Result};

const FCC_BASIS: [Vec3; 4] = [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]];

/// Cubic fcc lattice constant for a reduced number density.
pub fn fcc_constant(density: f64) -> f64 {
    (4.0 / density).cbrt()
}

/// Periodic box of `cells` fcc unit cells.
pub fn fcc_box(density: f64, cells: [usize; 3]) -> Result<SimBox> {
    let a = fcc_constant(density);
    SimBox::new([a * cells[0] as f64, a * cells[1] as f64, a * cells[2] as f64], [true; 3])
}

/// Atoms of an fcc lattice filling `cells`, ids from `first_id`, at rest.
pub fn fcc_atoms(density: f64, cells: [usize; 3], species: u32, first_id: u64) -> Vec<AtomRecord> {
    let a = fcc_constant(density);
    let mut out = Vec::with_capacity(4 * cells[0] * cells[1] * cells[2]);
    let mut id = first_id;
    for iz in 0..cells[2] {
        for iy in 0..cells[1] {
            for ix in 0..cells[0] {
                for b in FCC_BASIS {
                    let position = [a * (ix as f64 + b[0]), a * (iy as f64 + b[1]), a * (iz as f64 + b[2])];
                    out.push(AtomRecord { id, species, position, velocity: [0.0; 3] });
                    id += 1;
                }
            }
        }
    }
    out
}

/// Cell counts whose fcc atom count `4·nx·ny·nz` is closest to `n_atoms`,
/// preferring near-cubic shapes.
pub fn fcc_cells_for(n_atoms: usize) -> [usize; 3] {
    let target = (n_atoms as f64 / 4.0).max(1.0);
    let base = target.cbrt().floor().max(1.0) as usize;
    let mut best = [base; 3];
    let mut best_err = f64::INFINITY;
    for dx in 0..2 {
        for dy in 0..2 {
            for dz in 0..2 {
                let c = [base + dx, base + dy, base + dz];
                if c[0] < c[1] || c[1] < c[2] {
                    continue;
                }
                let err = ((c[0] * c[1] * c[2]) as f64 - target).abs();
                if err < best_err {
                    best_err = err;
                    best = c;
                }
            }
        }
    }
    best
}

/// `n` atoms placed uniformly in a periodic cube of the given density with
/// no pair closer than `min_distance`.
pub fn random_gas(n: usize, density: f64, min_distance: f64, seed: u64) -> Result<(SimBox, Vec<AtomRecord>)> {
    let side = (n as f64 / density).cbrt();
    let sim_box = SimBox::periodic_cube(side)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = sim_box.lengths();
    let md2 = min_distance * min_distance;
    let mut placed: Vec<Vec3> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while placed.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(Error::InvalidParameter(format!(
                "could not place {n} atoms at density {density} with minimum distance {min_distance}"
            )));
        }
        let x = [rng.gen::<f64>() * l[0], rng.gen::<f64>() * l[1], rng.gen::<f64>() * l[2]];
        if placed.iter().all(|y| norm2(minimum_image(sub(x, *y), &sim_box)) >= md2) {
            placed.push(x);
        }
    }
    let atoms = placed
        .into_iter()
        .enumerate()
        .map(|(i, position)| AtomRecord { id: i as u64, species: 0, position, velocity: [0.0; 3] })
        .collect();
    Ok((sim_box, atoms))
}

/// Kinetic energy given per-species masses.
pub fn kinetic_energy(atoms: &[AtomRecord], masses: &[f64]) -> f64 {
    atoms.iter().map(|a| 0.5 * masses[a.species as usize] * norm2(a.velocity)).sum()
}

/// Temperature with the centre-of-mass degrees of freedom removed.
pub fn temperature(kinetic: f64, n_atoms: usize) -> f64 {
    let dof = (3 * n_atoms).saturating_sub(3).max(1);
    2.0 * kinetic / dof as f64
}

/// Assigns Gaussian velocities drawn in id order, removes net momentum and
/// rescales to `temperature` exactly.
pub fn assign_velocities(atoms: &mut [AtomRecord], masses: &[f64], temperature_target: f64, seed: u64) {
    if atoms.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by_key(|&i| atoms[i].id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &i in &order {
        let m = masses[atoms[i].species as usize];
        let s = 1.0 / m.sqrt();
        atoms[i].velocity = [0.0; 3].map(|_: f64| s * rng.sample::<f64, _>(StandardNormal));
    }
    let mut p = [0.0; 3];
    let mut mass = 0.0;
    for a in atoms.iter() {
        let m = masses[a.species as usize];
        mass += m;
        for d in 0..3 {
            p[d] += m * a.velocity[d];
        }
    }
    for a in atoms.iter_mut() {
        for d in 0..3 {
            a.velocity[d] -= p[d] / mass;
        }
    }
    let t = temperature(kinetic_energy(atoms, masses), atoms.len());
    if t > 0.0 {
        let f = (temperature_target / t).sqrt();
        for a in atoms.iter_mut() {
            a.velocity = a.velocity.map(|v| v * f);
        }
    }
}
