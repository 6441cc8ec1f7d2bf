//! SNAP bispectrum descriptors, energy and forces; knobs leave results unchanged.

use std::time::Instant;

use mdkk::domain::Decomposition;
use mdkk::lattice::random_gas;
use mdkk::memspace::Strategy;
use mdkk::neighbor::{ListSettings, ListStyle, NeighborList};
use mdkk::snap::{CouplingTables, Snap, SnapKnobs, SnapParams};

fn main() -> mdkk::Result<()> {
    let (sim_box, atoms) = random_gas(500, 0.8442, 0.8, 9)?;
    let twojmax = 4;
    let n = CouplingTables::new(twojmax).n_descriptors();
    let beta: Vec<f64> = (0..n).map(|k| 0.1 / (k + 1) as f64).collect();
    let params = SnapParams { twojmax, rcut: 1.8, beta };
    let mut d = Decomposition::new(sim_box, 1, &atoms, 1.9)?;
    let store = &mut d.stores_mut()[0];
    let list = NeighborList::build(store, &sim_box, ListSettings::new(1.8, 0.1, ListStyle::Full, true))?;
    println!("jmax 2: {n} descriptors per atom");
    let mut reference: Option<f64> = None;
    for fused in [true, false] {
        for batch_u in [1, 4] {
            let knobs = SnapKnobs { fused, batch_u, ..SnapKnobs::default() };
            let snap = Snap::new(params.clone(), knobs)?;
            let t = Instant::now();
            let r = snap.compute(store, &list, Strategy::Serial)?;
            let e0 = *reference.get_or_insert(r.energy);
            println!(
                "fused {fused:<5} batch_u {batch_u}: E = {:.12} (diff {:.1e}), B[0] of atom 0 = {:.6}, {:.1} ms",
                r.energy,
                (r.energy - e0).abs(),
                r.descriptors[0][0],
                t.elapsed().as_secs_f64() * 1e3
            );
        }
    }
    Ok(())
}
