//! Binned neighbor lists: full and half styles, capacity growth, staleness.

use mdkk::domain::Decomposition;
use mdkk::lattice::random_gas;
use mdkk::memspace::Space;
use mdkk::neighbor::{ListSettings, ListStyle, NeighborList};

fn main() -> mdkk::Result<()> {
    let (sim_box, atoms) = random_gas(4000, 0.8442, 0.8, 3)?;
    let mut d = Decomposition::new(sim_box, 1, &atoms, 2.8)?;
    let store = &mut d.stores_mut()[0];
    for (style, newton) in [(ListStyle::Full, true), (ListStyle::Half, true), (ListStyle::Half, false)] {
        let list = NeighborList::build(store, &sim_box, ListSettings::new(2.5, 0.3, style, newton))?;
        println!("{style:?} newton {newton}: {} entries, row capacity {}", list.total_entries(), list.max_neighbors());
    }
    let tight = NeighborList::build_with_capacity(store, &sim_box, ListSettings::new(2.5, 0.3, ListStyle::Full, true), Some(4))?;
    println!("starting from capacity 4: {} growth event(s), final capacity {}", tight.grow_events(), tight.max_neighbors());

    let list = NeighborList::build(store, &sim_box, ListSettings::new(2.5, 0.3, ListStyle::Half, true))?;
    {
        let mut x = store.positions.view_mut(Space::Host)?;
        let p = x.vec3(0);
        x.set_vec3(0, [p[0] + 0.2, p[1], p[2]]);
    }
    println!("after moving atom 0 by 0.2: needs rebuild = {}", list.needs_rebuild(store));
    if let Err(e) = list.check_current(store) {
        println!("{e}");
    }
    Ok(())
}
