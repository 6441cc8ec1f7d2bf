//! Charge equilibration on a binary mixture: sparse matrix, fused CG, charges.

use mdkk::driver::solve_qeq;
use mdkk::lattice::random_gas;
use mdkk::qeq::{QeqParams, QeqSpecies};

fn main() -> mdkk::Result<()> {
    let (sim_box, mut atoms) = random_gas(500, 0.5, 0.8, 11)?;
    for a in atoms.iter_mut().filter(|a| a.id % 2 == 1) {
        a.species = 1;
    }
    let mut params = QeqParams::new(
        vec![QeqSpecies { chi: 1.0, eta: 40.0, gamma: 0.8 }, QeqSpecies { chi: 2.5, eta: 45.0, gamma: 0.6 }],
        3.0,
    );
    params.tol = 1e-10;
    let sol = solve_qeq(&sim_box, &atoms, &params)?;
    let mean = |sp: u32| {
        let q: Vec<f64> = atoms.iter().zip(&sol.charges).filter(|(a, _)| a.species == sp).map(|(_, q)| *q).collect();
        q.iter().sum::<f64>() / q.len() as f64
    };
    println!("CG iterations: s {} / t {}", sol.s.iterations, sol.t.iterations);
    println!("final relative residuals: {:.2e} / {:.2e}", sol.s.residuals.last().unwrap(), sol.t.residuals.last().unwrap());
    println!("mean charge: species 1 {:+.6}, species 2 {:+.6}", mean(0), mean(1));
    println!("total charge {:.2e}", sol.charges.iter().sum::<f64>());
    Ok(())
}
