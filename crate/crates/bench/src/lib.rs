//! Benchmark harness for the `nrap-core` solvers: timed runs over generated
//! instance grids, CSV output, performance profiles and scaling fits.

pub mod bench;
pub mod profile;

pub use bench::{
    check_solution, load_records, read_records, run_bench, save_records, sort_records,
    threads_from_env, write_records, BenchConfig, BenchError, BenchMatrix, BenchRecord,
};
pub use profile::{
    performance_profile, points, ratios, scaling_fit, write_profile, ProfileError, ProfilePoint,
    Ratios,
};
