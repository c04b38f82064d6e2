//! Binomial confidence intervals and superstar experiment grids.

mod ci;
mod experiments;

pub use ci::{
    agresti_coull, interval, normal_quantile, round_half_even, two_sided_z, wald, CiMethod, ConfidenceInterval,
};
pub use experiments::{
    emit_csv, emit_json_lines, emit_plot_data, emit_table, grid_to_csv, paper_grid, parse_grid, run_grid,
    run_grid_with_progress, write_csv, ExperimentGrid, GridCell, ResultRow, CSV_HEADER, PAPER_K, PAPER_R,
};
