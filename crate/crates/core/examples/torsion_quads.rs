//! Bond detection, compressed quad tables and quad-parallel torsion forces.

use std::time::Instant;

use mdkk::lattice::random_gas;
use mdkk::memspace::Strategy;
use mdkk::torsion::{compute_torsion, compute_torsion_direct, divergence_metric, enumerate_quads, BondParams, BondTable};

fn main() -> mdkk::Result<()> {
    let (sim_box, atoms) = random_gas(3000, 0.6, 0.9, 5)?;
    let params = BondParams { r_bond: 1.6, r0: 1.2, p: 2.0, bo_min: 0.01 };
    let bonds = BondTable::from_atoms(&sim_box, &atoms, &params)?;
    let quads = enumerate_quads(&bonds, 0.01);
    println!("{} bonds, {} quads, surviving fraction {:.3}", bonds.total_bonds() / 2, quads.total, divergence_metric(&bonds, &quads));

    let x: Vec<[f64; 3]> = atoms.iter().map(|a| a.position).collect();
    let t = Instant::now();
    let direct = compute_torsion_direct(&bonds, &sim_box, &x, 1.0, 0.01);
    println!("{:<26} E = {:.12}  {:.2} ms", "nested loops:", direct.energy, t.elapsed().as_secs_f64() * 1e3);
    for s in [Strategy::Serial, Strategy::Atomic, Strategy::duplicate(4)] {
        let t = Instant::now();
        let r = compute_torsion(&quads, &sim_box, &x, 1.0, s);
        let diff = r.forces.iter().zip(&direct.forces).flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs())).fold(0.0, f64::max);
        println!("{:<26} E = {:.12}  {:.2} ms, max force diff {diff:.1e}", format!("{s:?}:"), r.energy, t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(())
}
