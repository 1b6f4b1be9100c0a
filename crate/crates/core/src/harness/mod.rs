//! Test matrices, Monte Carlo experiments, and their file formats.

mod experiments;
mod io;
mod matrices;

pub use experiments::{
    estimator_table, estimator_table_with, exact_norm, failure_curve, log_grid, reference_value, trial_seed,
    ExperimentRow, ExperimentTable, NormKind, Provenance, ReferenceValue, REFERENCE_SAMPLES,
};
pub use io::{format_sig6, read_csv, read_matrix_market, write_csv, write_csv_to, CSV_HEADER};
pub use matrices::{
    generate_matrix, haar_orthogonal, trace_operator, MatrixKind, MatrixTarget, TestMatrixSpec, HAAR_LIMIT,
};
