//! Throughput versus system size.

use std::io::Write;
use std::time::Instant;

use super::registry::{StyleInput, StyleRegistry};
use crate::error::{Error, Result};
use crate::lattice::{assign_velocities, fcc_atoms, fcc_box, fcc_cells_for};
use crate::md::{ForceField, MdConfig, System};
use crate::snap::{CouplingTables, Snap, SnapKnobs, SnapParams};

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub density: f64,
    pub temperature: f64,
    pub dt: f64,
    pub seed: u64,
    /// Untimed steps before the measured repetitions.
    pub warmup_steps: u64,
    /// Timed steps per repetition, the same at every size.
    pub steps: u64,
    pub md: MdConfig,
    pub knobs: SnapKnobs,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            density: 0.8442,
            temperature: 1.44,
            dt: 0.005,
            seed: 87287,
            warmup_steps: 2,
            steps: 20,
            md: MdConfig::default(),
            knobs: SnapKnobs::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub n_atoms: usize,
    pub atom_steps_per_second: f64,
    pub steps: u64,
}

/// Cutoff of the benchmark SNAP model: the first fcc shell at density 0.8442.
pub const BENCH_SNAP_RCUT: f64 = 1.6;

/// Fixed jmax = 1 model with small alternating coefficients.
pub fn bench_snap_params() -> SnapParams {
    let twojmax = 2;
    let n = CouplingTables::new(twojmax).n_descriptors();
    let beta = (0..n).map(|k| if k % 2 == 0 { 0.05 } else { -0.03 } / (k + 1) as f64).collect();
    SnapParams { twojmax, rcut: BENCH_SNAP_RCUT, beta }
}

/// Force field used when benchmarking style `name`.
pub fn bench_field(registry: &StyleRegistry, name: &str, knobs: SnapKnobs) -> Result<Box<dyn ForceField>> {
    let (resolved, factory) = registry.resolve(name)?;
    if resolved == "snap" {
        return Ok(Box::new(Snap::new(bench_snap_params(), knobs)?));
    }
    factory(&StyleInput::new(&["2.5"], &[&["*", "*", "1.0", "1.0"]], 1))
}

/// Best-of-`reps` throughput for every size, on replicated fcc lattices.
pub fn bench_saturation(registry: &StyleRegistry, potential: &str, sizes: &[usize], reps: usize, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || reps == 0 {
        return Err(Error::InvalidParameter("bench needs at least one size and one repetition".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("bench sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let cells = fcc_cells_for(n);
        let sim_box = fcc_box(opts.density, cells)?;
        let mut atoms = fcc_atoms(opts.density, cells, 0, 0);
        assign_velocities(&mut atoms, &[1.0], opts.temperature, opts.seed);
        let field = bench_field(registry, potential, opts.knobs)?;
        let mut sys = System::new(sim_box, &atoms, vec![1.0], field, opts.md)?;
        for _ in 0..opts.warmup_steps {
            sys.step(opts.dt)?;
        }
        let steps = opts.steps.max(1);
        let mut best = 0.0f64;
        for _ in 0..reps {
            let t = Instant::now();
            for _ in 0..steps {
                sys.step(opts.dt)?;
            }
            let rate = (sys.n_atoms() as f64 * steps as f64) / t.elapsed().as_secs_f64();
            best = best.max(rate);
        }
        rows.push(BenchRow { n_atoms: sys.n_atoms(), atom_steps_per_second: best, steps });
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "n_atoms,atom_steps_per_second";

pub fn write_csv(rows: &[BenchRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{:.6e}", r.n_atoms, r.atom_steps_per_second)?;
    }
    Ok(())
}

/// Smallest size reaching `fraction` of the best throughput.
pub fn saturation_size(rows: &[BenchRow], fraction: f64) -> Option<usize> {
    let peak = rows.iter().map(|r| r.atom_steps_per_second).fold(0.0, f64::max);
    rows.iter().find(|r| r.atom_steps_per_second >= fraction * peak).map(|r| r.n_atoms)
}

/// True when no point falls more than `band` below the best throughput
/// seen at smaller sizes.
pub fn rises_to_plateau(rows: &[BenchRow], band: f64) -> bool {
    let mut best = 0.0f64;
    for r in rows {
        if r.atom_steps_per_second < (1.0 - band) * best {
            return false;
        }
        best = best.max(r.atom_steps_per_second);
    }
    true
}
