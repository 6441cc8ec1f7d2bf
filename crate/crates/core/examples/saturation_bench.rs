//! Throughput against system size for LJ and SNAP, written as CSV.

use mdkk::driver::{bench_saturation, saturation_size, write_csv, BenchOptions, StyleRegistry};

fn main() -> mdkk::Result<()> {
    let registry = StyleRegistry::with_builtin();
    let opts = BenchOptions { steps: 5, ..BenchOptions::default() };
    for (potential, sizes) in [("lj/cut", vec![500, 4000, 32000]), ("snap", vec![500, 4000])] {
        let rows = bench_saturation(&registry, potential, &sizes, 2, &opts)?;
        println!("# {potential}");
        write_csv(&rows, std::io::stdout().lock())?;
        println!("# reaches 90% of peak at {:?} atoms", saturation_size(&rows, 0.9));
    }
    Ok(())
}
