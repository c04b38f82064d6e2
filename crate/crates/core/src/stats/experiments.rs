use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ci::{round_half_even, CiMethod};
use crate::engine::{estimate_fixation_with, EngineKind, EstimateConfig, Execution, FixationEstimate, LumpedMode, Target};
use crate::error::{Error, Result};
use crate::graph::SuperstarSpec;
use crate::rng::derive_seed;

pub const PAPER_K: [usize; 6] = [3, 4, 5, 6, 7, 12];
pub const PAPER_R: [f64; 6] = [1.1, 2.0, 3.0, 5.0, 10.0, 50.0];

pub const CSV_HEADER: [&str; 14] = [
    "k",
    "r",
    "leaves",
    "reservoir",
    "runs",
    "fixations",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "extinction_hat",
    "ref_r_pow_minus_k",
    "engine",
    "seed",
    "wall_s",
];

const GRID_HEADER: [&str; 5] = ["k", "leaves", "reservoir", "r", "runs"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub leaves: usize,
    pub reservoir: usize,
    pub r: f64,
    pub runs: u64,
}

impl GridCell {
    pub fn spec(&self) -> Result<SuperstarSpec> {
        SuperstarSpec::new(self.k, self.leaves, self.reservoir)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub cells: Vec<GridCell>,
    pub engine: EngineKind,
    pub master_seed: u64,
    pub confidence: f64,
    pub method: CiMethod,
    /// Scheduling of runs within a cell.
    pub execution: Execution,
    pub lumped_mode: LumpedMode,
    /// Record wall-clock seconds per cell. Off by default so that output is
    /// byte-identical across reruns.
    pub timing: bool,
}

impl ExperimentGrid {
    pub fn new(cells: Vec<GridCell>, engine: EngineKind, master_seed: u64) -> Self {
        ExperimentGrid {
            cells,
            engine,
            master_seed,
            confidence: 0.995,
            method: CiMethod::AgrestiCoull,
            execution: Execution::Sequential,
            lumped_mode: LumpedMode::Auto,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, cell) in self.cells.iter().enumerate() {
            cell.spec()
                .map_err(|e| Error::InvalidSpec(format!("cell {i}: {e}")))?;
            if cell.runs == 0 {
                return Err(Error::InvalidParameter(format!("cell {i}: runs must be at least 1")));
            }
            if !(cell.r.is_finite() && cell.r > 0.0) {
                return Err(Error::InvalidParameter(format!("cell {i}: r must be positive")));
            }
        }
        Ok(())
    }

    /// Seed for cell `index`.
    pub fn cell_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }
}

/// The superstar grid of the published experiment: 2,500 runs for `r <= 5`,
/// 10,000 for `r >= 10`.
pub fn paper_grid(leaves: usize, reservoir: usize) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &k in &PAPER_K {
        for &r in &PAPER_R {
            cells.push(GridCell {
                k,
                leaves,
                reservoir,
                r,
                runs: if r <= 5.0 { 2_500 } else { 10_000 },
            });
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: usize,
    pub r: f64,
    pub leaves: usize,
    pub reservoir: usize,
    pub runs: u64,
    pub fixations: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub extinction_hat: f64,
    pub ref_r_pow_minus_k: f64,
    pub engine: String,
    pub seed: u64,
    pub wall_s: Option<f64>,
    /// Set when the cell failed; count fields are then zero.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Row for one estimate. A cell with `k = 0` stands for a graph that is
    /// not a superstar; it has no reference value.
    pub fn from_estimate(cell: &GridCell, est: &FixationEstimate) -> Self {
        let mut row = ResultRow::blank(cell, est.engine, est.master_seed);
        row.fill(est);
        row
    }

    fn fill(&mut self, est: &FixationEstimate) {
        self.fixations = est.fixations;
        self.p_hat = est.p_hat;
        self.ci_lo = est.ci.lower;
        self.ci_hi = est.ci.upper;
        self.extinction_hat = 1.0 - est.p_hat;
    }

    fn blank(cell: &GridCell, engine: EngineKind, seed: u64) -> Self {
        ResultRow {
            k: cell.k,
            r: cell.r,
            leaves: cell.leaves,
            reservoir: cell.reservoir,
            runs: cell.runs,
            fixations: 0,
            p_hat: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            extinction_hat: f64::NAN,
            ref_r_pow_minus_k: if cell.k == 0 { f64::NAN } else { cell.r.powi(-(cell.k as i32)) },
            engine: engine.tag().to_string(),
            seed,
            wall_s: None,
            error: None,
        }
    }
}

fn run_cell(grid: &ExperimentGrid, index: usize) -> ResultRow {
    let cell = &grid.cells[index];
    let seed = grid.cell_seed(index);
    let mut row = ResultRow::blank(cell, grid.engine, seed);
    let started = Instant::now();
    let result = cell.spec().and_then(|spec| {
        let mut config = EstimateConfig::new(cell.runs, seed, grid.engine);
        config.confidence = grid.confidence;
        config.method = grid.method;
        config.execution = grid.execution;
        config.lumped_mode = grid.lumped_mode;
        estimate_fixation_with(&Target::Superstar(spec), cell.r, &config)
    });
    match result {
        Ok(est) => row.fill(&est),
        Err(e) => row.error = Some(e.to_string()),
    }
    if grid.timing {
        row.wall_s = Some(started.elapsed().as_secs_f64());
    }
    row
}

/// Runs every cell. A failing cell yields a row with `error` set and does
/// not stop the others. Rows come back in grid order.
pub fn run_grid(grid: &ExperimentGrid) -> Vec<ResultRow> {
    run_grid_with_progress(grid, |_, _| {})
}

/// As [`run_grid`], calling `progress(index, row)` as each cell finishes.
pub fn run_grid_with_progress(grid: &ExperimentGrid, mut progress: impl FnMut(usize, &ResultRow)) -> Vec<ResultRow> {
    (0..grid.cells.len())
        .map(|i| {
            let row = run_cell(grid, i);
            progress(i, &row);
            row
        })
        .collect()
}

fn float_field(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes rows as CSV with the fixed results header.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record([
            row.k.to_string(),
            row.r.to_string(),
            row.leaves.to_string(),
            row.reservoir.to_string(),
            row.runs.to_string(),
            row.fixations.to_string(),
            float_field(row.p_hat),
            float_field(row.ci_lo),
            float_field(row.ci_hi),
            float_field(row.extinction_hat),
            float_field(row.ref_r_pow_minus_k),
            row.engine.clone(),
            row.seed.to_string(),
            row.wall_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn emit_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

/// One JSON object per line, with the CSV field names.
pub fn emit_json_lines(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("rows serialise"));
        out.push('\n');
    }
    out
}

fn fmt3(x: f64) -> String {
    format!("{:.3}", round_half_even(x, 3))
}

/// Renders rows as a grid: one block per `(k, leaves, reservoir)`, one
/// column per `r`, with the interval on the line beneath each estimate.
pub fn emit_table(rows: &[ResultRow]) -> String {
    let mut rs: Vec<f64> = rows.iter().map(|r| r.r).collect();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    let mut blocks: BTreeMap<(usize, usize, usize), BTreeMap<usize, &ResultRow>> = BTreeMap::new();
    for row in rows {
        let col = rs.iter().position(|&r| r == row.r).expect("r collected above");
        blocks
            .entry((row.k, row.leaves, row.reservoir))
            .or_default()
            .entry(col)
            .or_insert(row);
    }
    let width = 16;
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "k (l, m)");
    for r in &rs {
        let _ = write!(out, "{:>width$}", format!("r = {r}"));
    }
    out.push('\n');
    for ((k, l, m), cols) in &blocks {
        let mut est = format!("{:<16}", format!("{k} ({l}, {m})"));
        let mut ci = format!("{:<16}", "");
        for col in 0..rs.len() {
            let (a, b) = match cols.get(&col) {
                Some(row) if row.failed() => ("failed".to_string(), String::new()),
                Some(row) => (fmt3(row.p_hat), format!("[{}, {}]", fmt3(row.ci_lo), fmt3(row.ci_hi))),
                None => ("-".to_string(), String::new()),
            };
            let _ = write!(est, "{a:>width$}");
            let _ = write!(ci, "{b:>width$}");
        }
        out.push_str(est.trim_end());
        out.push('\n');
        out.push_str(ci.trim_end());
        out.push('\n');
    }
    out
}

/// One extinction series per `k`, sorted by `r`: the estimate, the interval
/// reflected from the fixation interval, and the reference `r^-k`.
/// Failed rows are skipped.
pub fn emit_plot_data(rows: &[ResultRow]) -> BTreeMap<usize, String> {
    let mut by_k: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| !r.failed()) {
        by_k.entry(row.k).or_default().push(row);
    }
    by_k.into_iter()
        .map(|(k, mut series)| {
            series.sort_by(|a, b| a.r.total_cmp(&b.r));
            let mut s = String::from("r,extinction_hat,ci_lo_ext,ci_hi_ext,ref_r_pow_minus_k\n");
            for row in series {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    row.r,
                    row.extinction_hat,
                    1.0 - row.ci_hi,
                    1.0 - row.ci_lo,
                    row.ref_r_pow_minus_k
                );
            }
            (k, s)
        })
        .collect()
}

/// Parses a grid file: CSV rows `k,leaves,reservoir,r,runs`. A header line
/// is optional but may appear only once, as the first record. Lines
/// starting with `#` are ignored.
pub fn parse_grid<R: Read>(input: R) -> Result<Vec<GridCell>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.iter().eq(GRID_HEADER.iter().copied()) {
            if i == 0 {
                continue;
            }
            return Err(Error::Parse(format!("line {line}: repeated header")));
        }
        if record.len() != 5 {
            return Err(Error::Parse(format!("line {line}: expected 5 fields, found {}", record.len())));
        }
        let field = |j: usize| &record[j];
        let int = |j: usize| -> Result<u64> {
            field(j)
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("line {line}: bad {} {:?}", GRID_HEADER[j], field(j))))
        };
        let r: f64 = field(3)
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad r {:?}", field(3))))?;
        let cell = GridCell {
            k: int(0)? as usize,
            leaves: int(1)? as usize,
            reservoir: int(2)? as usize,
            r,
            runs: int(4)?,
        };
        cell.spec().map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if cell.runs == 0 || !(r.is_finite() && r > 0.0) {
            return Err(Error::Parse(format!("line {line}: runs and r must be positive")));
        }
        cells.push(cell);
    }
    Ok(cells)
}

pub fn grid_to_csv(cells: &[GridCell]) -> String {
    let mut s = GRID_HEADER.join(",");
    s.push('\n');
    for c in cells {
        let _ = writeln!(s, "{},{},{},{},{}", c.k, c.leaves, c.reservoir, c.r, c.runs);
    }
    s
}
