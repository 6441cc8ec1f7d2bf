//! Input scripts, style dispatch, NVE runs and throughput benchmarks.

mod bench;
mod registry;
mod script;
mod session;

pub use bench::{bench_field, bench_saturation, bench_snap_params, rises_to_plateau, saturation_size, write_csv, BenchOptions, BenchRow, BENCH_SNAP_RCUT, CSV_HEADER};
pub use registry::{StyleFactory, StyleInput, StyleRegistry};
pub use script::{command_spec, near_matches, parse_script, serialize_script, Command, CommandKind, CommandSpec, Script, COMMANDS};
pub use session::{format_thermo, parse_sizes, solve_qeq, Session};
