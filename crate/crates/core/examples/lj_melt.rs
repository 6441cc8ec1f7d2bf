//! LJ melt: 500 atoms on an fcc lattice at reduced density 0.8442, started
//! at T = 1.44 and integrated at constant energy.

use mdkk::lattice::{assign_velocities, fcc_atoms, fcc_box};
use mdkk::md::{MdConfig, System};
use mdkk::pair::{LjKernel, PairParams};

fn main() -> mdkk::Result<()> {
    let cells = [5, 5, 5];
    let sim_box = fcc_box(0.8442, cells)?;
    let mut atoms = fcc_atoms(0.8442, cells, 0, 0);
    assign_velocities(&mut atoms, &[1.0], 1.44, 87287);
    let kernel = LjKernel::uniform(PairParams::new(1.0, 1.0, 2.5)?).shifted();
    let mut sys = System::new(sim_box, &atoms, vec![1.0], Box::new(kernel), MdConfig::default())?;
    let log = sys.run(1000, 0.005, 100)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>8}", "step", "pe", "ke", "etotal", "T");
    for t in &log {
        println!("{:>6} {:>12.6} {:>12.6} {:>12.6} {:>8.4}", t.step, t.pe, t.ke, t.etotal, t.temperature);
    }
    let e0 = log[0].etotal;
    let last = log.last().unwrap();
    println!("|dE/E0| after 1000 steps = {:.3e}, neighbor rebuilds = {}", ((last.etotal - e0) / e0).abs(), sys.rebuilds());
    Ok(())
}
