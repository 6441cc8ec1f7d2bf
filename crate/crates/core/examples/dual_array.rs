//! A 2-D array mirrored in two memory spaces with different layouts.

use mdkk::memspace::{DualArray, LayoutPolicy, Space};

fn main() -> mdkk::Result<()> {
    // row-major on the host, column-major on the device
    let mut a = DualArray::<f64>::new(&[4, 3], LayoutPolicy::right(2), LayoutPolicy::left(2))?;
    {
        let mut h = a.view_mut(Space::Host)?;
        for i in 0..4 {
            for j in 0..3 {
                h.set2(i, j, (10 * i + j) as f64);
            }
        }
    }
    println!("host strides {:?}, device strides {:?}", a.strides(Space::Host), a.strides(Space::Device));

    match a.view(Space::Device) {
        Err(e) => println!("before sync: {e}"),
        Ok(_) => unreachable!(),
    }
    a.sync(Space::Device);
    a.sync(Space::Device);
    println!("after two syncs: {} transfer(s)", a.transfer_count());

    let d = a.view(Space::Device)?;
    println!("device raw storage: {:?}", d.raw());
    println!("element (2, 1) on the device: {}", d.at2(2, 1));

    a.set(Space::Device, &[0, 0], -1.0)?;
    if let Err(e) = a.modify(Space::Host) {
        println!("modifying both spaces: {e}");
    }
    a.sync(Space::Host);
    println!("host (0, 0) = {}, transfers = {}", a.get(Space::Host, &[0, 0])?, a.transfer_count());
    Ok(())
}
