//! The exact finite-`n` second moment and the config-driven sweep runner.

mod second_moment;
mod sweep;

pub use second_moment::{
    default_window, exact_second_moment, omega_probability, pair_weight, CountMatrix, SecondMomentRecord,
    DEFAULT_BUDGET, EXACT_MULTINOMIAL_MAX_N,
};
pub use sweep::{
    config_hash, csv_cell, records_to_csv, run_sweep, Dataset, Experiment, PointSpec, Reference, Row, RowStatus, SweepConfig,
};
