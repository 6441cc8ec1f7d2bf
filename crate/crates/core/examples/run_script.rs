//! Drives a simulation from an input script held in memory.

use mdkk::driver::{parse_script, serialize_script, Session};

const SCRIPT: &str = "\
units        lj
lattice      fcc 0.8442
create_box   4 4 4
create_atoms 1
mass         1 1.0
velocity     all create 1.44 87287
suffix       opt
pair_style   lj/cut 2.5     # resolves to lj/cut/opt
pair_coeff   * * 1.0 1.0
package      neigh half newton on ranks 2
thermo       20
run          100
";

fn main() -> mdkk::Result<()> {
    let script = parse_script(SCRIPT)?;
    println!("canonical form:\n{}", serialize_script(&script));
    let mut session = Session::new(std::io::stdout(), ".");
    session.execute(&script)?;
    println!("pair style in use: {}", session.pair_style().unwrap_or("none"));

    let mut bad = Session::new(Vec::new(), ".");
    if let Err(e) = bad.execute_str("units lj\npair_style lj/cutt 2.5") {
        println!("error example: {e}");
    }
    Ok(())
}
