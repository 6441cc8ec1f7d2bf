//! Splitting a box over logical ranks: bricks, ghosts and rank-independent forces.

use mdkk::domain::Decomposition;
use mdkk::lattice::random_gas;
use mdkk::md::{MdConfig, System};
use mdkk::pair::{LjKernel, PairParams};

fn main() -> mdkk::Result<()> {
    let (sim_box, atoms) = random_gas(2000, 0.8442, 0.8, 7)?;
    let field = LjKernel::uniform(PairParams::new(1.0, 1.0, 2.5)?);
    let mut reference = None;
    for n_ranks in [1, 2, 4, 8] {
        let d = Decomposition::new(sim_box, n_ranks, &atoms, 2.8)?;
        let ghosts: usize = d.stores().iter().map(|s| s.n_ghost()).sum();
        let mut sys = System::new(sim_box, &atoms, vec![1.0], Box::new(field.clone()), MdConfig { n_ranks, ..MdConfig::default() })?;
        let e = sys.potential_energy();
        let f = sys.forces();
        let e0 = *reference.get_or_insert(e);
        let net = f.iter().fold([0.0; 3], |a, (_, v)| [a[0] + v[0], a[1] + v[1], a[2] + v[2]]);
        println!(
            "ranks {n_ranks}: grid {:?}, {ghosts:>5} ghosts, energy {e:.10} (diff {:.1e}), net force {:.1e}",
            d.ranks().grid(),
            (e - e0).abs(),
            net.iter().map(|x| x.abs()).fold(0.0, f64::max)
        );
    }
    Ok(())
}
