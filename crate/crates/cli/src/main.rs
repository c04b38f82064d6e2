//! `moran`: fixation probabilities of the Moran process from the command
//! line.
//!
//! Exit codes: 0 on success, 2 on argument, parse or cap errors, 1 on
//! runtime failures (including failed grid cells).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moran_core::engine::{
    estimate_fixation_with, EngineKind, EstimateConfig, Execution, LumpedMode, Placement, Target, VertexClass,
};
use moran_core::exact::rational::{format_decimal, parse_rational, to_f64};
use moran_core::exact::{
    exact_fixation_full_with_cap, float_fixation_full_with_cap, j_of_r, limit_h, p_fail, restricted_q, Initial,
    Rational, DEFAULT_EXACT_CAP, DEFAULT_FLOAT_CAP,
};
use moran_core::graph::{
    build_complete, build_star, build_superstar, validate_graph, DirectedGraph, SuperstarSpec, VertexId,
};
use moran_core::stats::{
    emit_csv, emit_json_lines, emit_plot_data, emit_table, grid_to_csv, paper_grid, parse_grid,
    run_grid_with_progress, ExperimentGrid, GridCell, ResultRow,
};
use moran_core::Error;

#[derive(Parser, Debug)]
#[command(name = "moran", version, about = "Fixation probabilities of the Moran process on directed graphs and superstars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the fixation probability by Monte Carlo simulation.
    Simulate(SimulateArgs),
    /// Solve the full Markov chain for the fixation probability.
    Exact(ExactArgs),
    /// Solve the restricted chain of a k = 5 superstar and report the
    /// theorem quantities.
    Restricted(RestrictedArgs),
    /// Run a grid of superstar experiments.
    Grid(GridArgs),
    /// Print a graph as an arc list (`n` on the first line, then `u v`).
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct GraphArgs {
    /// Superstar S^k_{l,m}: K L M.
    #[arg(long, num_args = 3, value_names = ["K", "L", "M"])]
    superstar: Option<Vec<usize>>,
    /// Complete graph on N vertices.
    #[arg(long, value_name = "N")]
    complete: Option<usize>,
    /// Star with one centre and N - 1 leaves.
    #[arg(long, value_name = "N")]
    star: Option<usize>,
    /// Arc-list file: vertex count on the first line, then one `u v` arc per line.
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
}

enum Chosen {
    Superstar(SuperstarSpec),
    Graph(DirectedGraph),
}

impl GraphArgs {
    fn resolve(&self) -> Result<Chosen, Failure> {
        if let Some(v) = &self.superstar {
            return Ok(Chosen::Superstar(SuperstarSpec::new(v[0], v[1], v[2])?));
        }
        if let Some(n) = self.complete {
            return Ok(Chosen::Graph(build_complete(n)?));
        }
        if let Some(n) = self.star {
            return Ok(Chosen::Graph(build_star(n)?));
        }
        let path = self.graph.as_ref().expect("clap requires one graph option");
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let graph = DirectedGraph::from_arc_list(&text)?;
        let report = validate_graph(&graph);
        if !report.is_valid_for_process() {
            return Err(Failure::Usage(format!("{}: {report:?}", path.display())));
        }
        Ok(Chosen::Graph(graph))
    }

    fn build(&self) -> Result<DirectedGraph, Failure> {
        match self.resolve()? {
            Chosen::Superstar(spec) => Ok(build_superstar(spec)?),
            Chosen::Graph(g) => Ok(g),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Table,
    JsonLines,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Mutant fitness, decimal or p/q.
    #[arg(long, value_parser = parse_positive)]
    r: Rational,
    /// Number of independent runs.
    #[arg(long, default_value_t = 2_500)]
    runs: u64,
    /// Master seed; falls back to MORAN_SEED, then 0.
    #[arg(long, env = "MORAN_SEED", default_value_t = 0)]
    seed: u64,
    /// naive, event or lumped. Defaults to lumped on superstars, event otherwise.
    #[arg(long)]
    engine: Option<EngineKind>,
    /// How the lumped engine advances: auto, stepwise or accelerated.
    #[arg(long, default_value = "auto")]
    lumped_mode: LumpedMode,
    /// Where the first mutant goes: uniform, centre, reservoir, chain, or a vertex index.
    #[arg(long, default_value = "uniform", value_parser = parse_placement)]
    start: Placement,
    /// Two-sided confidence level of the interval.
    #[arg(long, default_value_t = 0.995)]
    confidence: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Abort a run after this many steps.
    #[arg(long)]
    step_budget: Option<u64>,
    /// Record wall-clock seconds (makes output differ between reruns).
    #[arg(long)]
    timing: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Mutant fitness, decimal or p/q; decimals are read exactly.
    #[arg(long, value_parser = parse_positive)]
    r: Rational,
    /// Solve in floating point (larger cap) instead of exactly.
    #[arg(long)]
    float: bool,
    /// Start from this vertex instead of averaging over all vertices.
    #[arg(long)]
    vertex: Option<usize>,
    /// Largest vertex count to attempt (default 12 exact, 16 float).
    #[arg(long)]
    cap: Option<usize>,
    /// Decimal places printed.
    #[arg(long, default_value_t = 12)]
    digits: usize,
}

#[derive(Args, Debug)]
struct RestrictedArgs {
    /// Number of leaves L.
    #[arg(long = "L", value_name = "L", required_unless_present = "limit_only")]
    l: Option<u64>,
    /// Reservoir size M.
    #[arg(long = "M", value_name = "M", required_unless_present = "limit_only")]
    m: Option<u64>,
    /// Mutant fitness, decimal or p/q.
    #[arg(long, value_parser = parse_positive)]
    r: Rational,
    /// Print only the limit h(r) and j(r).
    #[arg(long)]
    limit_only: bool,
    /// Decimal places printed.
    #[arg(long, default_value_t = 9)]
    digits: usize,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid file: CSV rows `k,leaves,reservoir,r,runs` with an optional header.
    #[arg(long, conflicts_with = "paper", required_unless_present = "paper")]
    grid: Option<PathBuf>,
    /// Use the published grid: k in {3,4,5,6,7,12}, r in {1.1,2,3,5,10,50}.
    #[arg(long)]
    paper: bool,
    /// Leaves for --paper.
    #[arg(long, default_value_t = 200)]
    leaves: usize,
    /// Reservoir size for --paper.
    #[arg(long, default_value_t = 200)]
    reservoir: usize,
    /// Print the grid file instead of running it.
    #[arg(long)]
    emit_grid: bool,
    /// Master seed; each cell derives its own. Falls back to MORAN_SEED, then 0.
    #[arg(long, env = "MORAN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "lumped")]
    engine: EngineKind,
    #[arg(long, default_value = "auto")]
    lumped_mode: LumpedMode,
    #[arg(long, default_value_t = 0.995)]
    confidence: f64,
    /// Worker threads within a cell; 1 runs sequentially.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Record wall-clock seconds per cell.
    #[arg(long)]
    timing: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Results file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the rendered table here.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Also write one extinction series per k into this directory.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    /// Suppress per-cell progress on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Error with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::InvalidParameter(_)
            | Error::InvalidGraph(_)
            | Error::CapExceeded { .. }
            | Error::EngineMismatch(_)
            | Error::Parse(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn parse_positive(s: &str) -> Result<Rational, String> {
    let r = parse_rational(s).map_err(|e| e.to_string())?;
    if !moran_core::exact::rational::is_positive(&r) {
        return Err(format!("must be positive, got {s}"));
    }
    Ok(r)
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    match s {
        "uniform" => Ok(Placement::Uniform),
        "centre" | "center" => Ok(Placement::Class(VertexClass::Centre)),
        "reservoir" => Ok(Placement::Class(VertexClass::Reservoir)),
        "chain" => Ok(Placement::Class(VertexClass::Chain)),
        _ => s
            .parse::<usize>()
            .map(|v| Placement::Vertex(VertexId(v)))
            .map_err(|_| format!("expected uniform, centre, reservoir, chain or a vertex index, got {s:?}")),
    }
}

fn execution(threads: usize) -> Execution {
    match threads {
        0 => Execution::Parallel,
        1 => Execution::Sequential,
        n => Execution::ParallelWith { threads: n },
    }
}

fn render(rows: &[ResultRow], format: Format) -> String {
    match format {
        Format::Csv => emit_csv(rows),
        Format::Table => emit_table(rows),
        Format::JsonLines => emit_json_lines(rows),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_failure(p)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(Failure::Usage(format!("confidence must lie in (0, 1), got {}", args.confidence)));
    }
    let r = to_f64(&args.r);
    let chosen = args.graph.resolve()?;
    let built;
    let (target, cell) = match &chosen {
        Chosen::Superstar(spec) => (
            Target::Superstar(*spec),
            GridCell { k: spec.k, leaves: spec.leaves, reservoir: spec.reservoir, r, runs: args.runs },
        ),
        Chosen::Graph(g) => {
            built = g;
            (Target::Graph(built), GridCell { k: 0, leaves: 0, reservoir: 0, r, runs: args.runs })
        }
    };
    let engine = args.engine.unwrap_or(match chosen {
        Chosen::Superstar(_) => EngineKind::Lumped,
        Chosen::Graph(_) => EngineKind::EventDriven,
    });
    let mut config = EstimateConfig::new(args.runs, args.seed, engine);
    config.confidence = args.confidence;
    config.placement = args.start;
    config.execution = execution(args.threads);
    config.lumped_mode = args.lumped_mode;
    config.options.step_budget = args.step_budget;
    let started = Instant::now();
    let est = estimate_fixation_with(&target, r, &config)?;
    let mut row = ResultRow::from_estimate(&cell, &est);
    if args.timing {
        row.wall_s = Some(started.elapsed().as_secs_f64());
    }
    write_out(args.output.as_deref(), &render(&[row], args.format))
}

fn cmd_exact(args: &ExactArgs) -> Result<(), Failure> {
    let graph = args.graph.build()?;
    let initial = match args.vertex {
        Some(v) => Initial::Vertex(VertexId(v)),
        None => Initial::Uniform,
    };
    let line = if args.float {
        let cap = args.cap.unwrap_or(DEFAULT_FLOAT_CAP);
        let p = float_fixation_full_with_cap(&graph, to_f64(&args.r), initial, cap)?;
        format!("{p:.prec$}", prec = args.digits)
    } else {
        let cap = args.cap.unwrap_or(DEFAULT_EXACT_CAP);
        let p = exact_fixation_full_with_cap(&graph, &args.r, initial, cap)?;
        format!("{p} ≈ {}", format_decimal(&p, args.digits))
    };
    write_out(None, &format!("{line}\n"))
}

fn cmd_restricted(args: &RestrictedArgs) -> Result<(), Failure> {
    let d = args.digits;
    let h = limit_h(&args.r)?;
    let j = j_of_r(&args.r)?;
    let mut out = format!(
        "r = {}\nh(r) = {h} ≈ {}\nj(r) = {j} ≈ {}\n",
        args.r,
        format_decimal(&h, d),
        format_decimal(&j, d)
    );
    if !args.limit_only {
        let (l, m) = (args.l.expect("required by clap"), args.m.expect("required by clap"));
        if l == 0 || m == 0 {
            return Err(Failure::Usage("L and M must be at least 1".into()));
        }
        let q = restricted_q(l, m, &args.r)?;
        let p = p_fail(l, m)?;
        let bound = &p + &q;
        let gap = &h - &q;
        out += &format!(
            "L = {l}, M = {m}\nq = {q}\nq ≈ {}\np_fail = {p} ≈ {}\nbound = p_fail + q ≈ {}\nh - q ≈ {}\n",
            format_decimal(&q, d),
            format_decimal(&p, d),
            format_decimal(&bound, d),
            format_decimal(&gap, d)
        );
    }
    write_out(None, &out)
}

fn cmd_grid(args: &GridArgs) -> Result<(), Failure> {
    let cells = match &args.grid {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            parse_grid(file)?
        }
        None => paper_grid(args.leaves, args.reservoir),
    };
    if args.emit_grid {
        return write_out(args.output.as_deref(), &grid_to_csv(&cells));
    }
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(Failure::Usage(format!("confidence must lie in (0, 1), got {}", args.confidence)));
    }
    let mut grid = ExperimentGrid::new(cells, args.engine, args.seed);
    grid.confidence = args.confidence;
    grid.execution = execution(args.threads);
    grid.lumped_mode = args.lumped_mode;
    grid.timing = args.timing;
    grid.validate()?;
    let total = grid.cells.len();
    let rows = run_grid_with_progress(&grid, |i, row| {
        if !args.quiet {
            let status = match &row.error {
                Some(e) => format!("failed: {e}"),
                None => format!("p_hat {:.4}", row.p_hat),
            };
            eprintln!("[{}/{total}] k={} r={} {status}", i + 1, row.k, row.r);
        }
    });
    write_out(args.output.as_deref(), &render(&rows, args.format))?;
    if let Some(path) = &args.table {
        fs::write(path, emit_table(&rows)).map_err(io_failure(path))?;
    }
    if let Some(dir) = &args.plot_dir {
        fs::create_dir_all(dir).map_err(io_failure(dir))?;
        for (k, series) in emit_plot_data(&rows) {
            let path = dir.join(format!("extinction_k{k}.csv"));
            fs::write(&path, series).map_err(io_failure(&path))?;
        }
    }
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {total} cells failed")));
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let graph = args.graph.build()?;
    write_out(args.output.as_deref(), &graph.to_arc_list())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Restricted(a) => cmd_restricted(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
