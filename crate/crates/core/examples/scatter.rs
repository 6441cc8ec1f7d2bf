//! Many threads adding into shared slots: serial, duplicated buffers and atomics.

use std::time::Instant;

use mdkk::memspace::{ScatterAccumulator, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mdkk::Result<()> {
    let len = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let contributions: Vec<(usize, f64)> = (0..2_000_000).map(|_| (rng.gen_range(0..len), rng.gen_range(-1.0..1.0))).collect();
    let reference = ScatterAccumulator::new(len, Strategy::Serial).accumulate(&contributions)?;
    println!("{:<24} {:>10} {:>12}", "strategy", "ms", "max |diff|");
    for s in [Strategy::Serial, Strategy::duplicate(2), Strategy::duplicate(8), Strategy::Atomic] {
        let t = Instant::now();
        let out = ScatterAccumulator::new(len, s).accumulate(&contributions)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let diff = out.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{:<24} {:>10.2} {:>12.2e}", format!("{s:?}"), ms, diff);
    }
    Ok(())
}
