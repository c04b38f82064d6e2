use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    accelerated_supported, AcceleratedLumped, EventDrivenEngine, LeafKernels, Fitness, LumpedEngine, LumpedSuperstarState, NaiveEngine, OccupancyState,
    RunOptions,
};
use crate::error::{Error, Result};
use crate::graph::{build_superstar, DirectedGraph, Role, SuperstarSpec, VertexId};
use crate::rng::{run_rng, SimRng};
use crate::stats::{interval, CiMethod, ConfidenceInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    Naive,
    EventDriven,
    Lumped,
}

impl EngineKind {
    pub fn tag(self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::EventDriven => "event",
            EngineKind::Lumped => "lumped",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EngineKind::Naive),
            "event" | "event-driven" => Ok(EngineKind::EventDriven),
            "lumped" => Ok(EngineKind::Lumped),
            _ => Err(Error::Parse(format!("unknown engine {s:?} (naive | event | lumped)"))),
        }
    }
}

/// What to simulate on.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Graph(&'a DirectedGraph),
    Superstar(SuperstarSpec),
}

/// How a batch of independent runs is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel over runs. `threads: 0` uses the global pool. Without
    /// the `parallel` feature this runs sequentially.
    #[default]
    Parallel,
    ParallelWith {
        threads: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Centre,
    Reservoir,
    Chain,
}

/// Where the initial mutant goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    /// Uniform over all vertices.
    #[default]
    Uniform,
    /// Uniform over vertices of one role class.
    Class(VertexClass),
    Vertex(VertexId),
}

/// Reservoir size from which automatic mode prefers the continuous-time
/// sampler. Below it the stepwise engine is faster.
pub const AUTO_MIN_RESERVOIR: usize = 16;

/// How the lumped engine advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LumpedMode {
    /// Continuous-time sampling when kernels can be built and the
    /// reservoirs hold at least [`AUTO_MIN_RESERVOIR`] vertices, stepwise
    /// otherwise.
    #[default]
    Auto,
    /// One effective event at a time.
    Stepwise,
    /// Continuous-time sampling; an error when unsupported.
    Accelerated,
}

impl std::str::FromStr for LumpedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(LumpedMode::Auto),
            "stepwise" => Ok(LumpedMode::Stepwise),
            "accelerated" => Ok(LumpedMode::Accelerated),
            _ => Err(Error::Parse(format!("unknown lumped mode {s:?} (auto | stepwise | accelerated)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub runs: u64,
    pub master_seed: u64,
    pub engine: EngineKind,
    pub confidence: f64,
    pub method: CiMethod,
    pub placement: Placement,
    pub execution: Execution,
    pub lumped_mode: LumpedMode,
    pub options: RunOptions,
}

impl EstimateConfig {
    pub fn new(runs: u64, master_seed: u64, engine: EngineKind) -> Self {
        EstimateConfig {
            runs,
            master_seed,
            engine,
            confidence: 0.995,
            method: CiMethod::AgrestiCoull,
            placement: Placement::Uniform,
            execution: Execution::default(),
            lumped_mode: LumpedMode::default(),
            options: RunOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEstimate {
    pub fixations: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci: ConfidenceInterval,
    pub engine: EngineKind,
    pub master_seed: u64,
    /// Mean steps per run; effective events for the event-driven and
    /// stepwise lumped engines, reservoir conversions plus stepwise events
    /// for the accelerated lumped engine.
    pub mean_steps: f64,
}

impl FixationEstimate {
    pub fn from_counts(
        fixations: u64,
        trials: u64,
        total_steps: u64,
        engine: EngineKind,
        master_seed: u64,
        confidence: f64,
        method: CiMethod,
    ) -> Result<Self> {
        let ci = interval(method, fixations, trials, confidence)?;
        Ok(FixationEstimate {
            fixations,
            trials,
            p_hat: fixations as f64 / trials as f64,
            ci,
            engine,
            master_seed,
            mean_steps: total_steps as f64 / trials as f64,
        })
    }
}

fn role_class(role: Role) -> Option<VertexClass> {
    match role {
        Role::Centre => Some(VertexClass::Centre),
        Role::Reservoir { .. } => Some(VertexClass::Reservoir),
        Role::Chain { .. } => Some(VertexClass::Chain),
        Role::Plain => None,
    }
}

/// Resolves a placement into a vertex sampler over `n` vertices.
struct Placer {
    n: usize,
    candidates: Option<Vec<usize>>,
    fixed: Option<usize>,
}

impl Placer {
    fn new(n: usize, placement: Placement, role: impl Fn(usize) -> Role) -> Result<Self> {
        match placement {
            Placement::Uniform => Ok(Placer {
                n,
                candidates: None,
                fixed: None,
            }),
            Placement::Vertex(v) if v.0 < n => Ok(Placer {
                n,
                candidates: None,
                fixed: Some(v.0),
            }),
            Placement::Vertex(v) => Err(Error::InvalidParameter(format!("vertex {v} out of range"))),
            Placement::Class(class) => {
                let candidates: Vec<usize> = (0..n).filter(|&v| role_class(role(v)) == Some(class)).collect();
                if candidates.is_empty() {
                    return Err(Error::InvalidParameter(format!("no vertices of class {class:?}")));
                }
                Ok(Placer {
                    n,
                    candidates: Some(candidates),
                    fixed: None,
                })
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let Some(v) = self.fixed {
            return v;
        }
        match &self.candidates {
            Some(c) => c[rng.random_range(0..c.len())],
            None => rng.random_range(0..self.n),
        }
    }
}

/// Draws the initial mutant's vertex for one run.
pub fn initial_state<R: Rng + ?Sized>(target: &Target<'_>, placement: Placement, rng: &mut R) -> Result<VertexId> {
    let placer = match target {
        Target::Graph(g) => Placer::new(g.vertex_count(), placement, |v| g.role(VertexId(v)))?,
        Target::Superstar(spec) => Placer::new(spec.vertex_count(), placement, |v| spec.role_of(VertexId(v)))?,
    };
    Ok(VertexId(placer.draw(rng)))
}

/// Runs `runs` independent simulations and sums `(successes, steps)`.
/// `init` builds per-worker scratch state; `run` executes run `i` with its
/// own RNG stream. The sum is order independent, so sequential and
/// parallel execution give identical results.
pub(crate) fn run_batch<S, I, F>(runs: u64, master_seed: u64, execution: Execution, init: I, run: F) -> Result<(u64, u64)>
where
    I: Fn() -> Result<S> + Sync + Send,
    F: Fn(&mut S, &mut SimRng) -> Result<(bool, u64)> + Sync + Send,
{
    let sequential = || -> Result<(u64, u64)> {
        let mut scratch = init()?;
        let mut acc = (0u64, 0u64);
        for i in 0..runs {
            let mut rng = run_rng(master_seed, i);
            let (ok, steps) = run(&mut scratch, &mut rng)?;
            acc.0 += ok as u64;
            acc.1 += steps;
        }
        Ok(acc)
    };
    match execution {
        Execution::Sequential => sequential(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => parallel_batch(runs, master_seed, &init, &run),
        #[cfg(feature = "parallel")]
        Execution::ParallelWith { threads } => {
            if threads == 0 {
                return parallel_batch(runs, master_seed, &init, &run);
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| parallel_batch(runs, master_seed, &init, &run))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelWith { .. } => sequential(),
    }
}

#[cfg(feature = "parallel")]
fn parallel_batch<S, I, F>(runs: u64, master_seed: u64, init: &I, run: &F) -> Result<(u64, u64)>
where
    I: Fn() -> Result<S> + Sync + Send,
    F: Fn(&mut S, &mut SimRng) -> Result<(bool, u64)> + Sync + Send,
{
    use rayon::prelude::*;
    (0..runs)
        .into_par_iter()
        .map_init(init, |scratch, i| {
            let scratch = scratch.as_mut().map_err(|e| e.clone())?;
            let mut rng = run_rng(master_seed, i);
            let (ok, steps) = run(scratch, &mut rng)?;
            Ok((ok as u64, steps))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
}

/// Estimates the fixation probability from a single initial mutant placed
/// uniformly at random, with an Agresti-Coull interval.
pub fn estimate_fixation(
    target: &Target<'_>,
    r: f64,
    runs: u64,
    master_seed: u64,
    engine: EngineKind,
    confidence: f64,
) -> Result<FixationEstimate> {
    let mut config = EstimateConfig::new(runs, master_seed, engine);
    config.confidence = confidence;
    estimate_fixation_with(target, r, &config)
}

pub fn estimate_fixation_with(target: &Target<'_>, r: f64, config: &EstimateConfig) -> Result<FixationEstimate> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let fitness = Fitness::new(r)?;
    let built;
    let graph: Option<&DirectedGraph> = match (target, config.engine) {
        (Target::Graph(g), EngineKind::Naive | EngineKind::EventDriven) => Some(g),
        (Target::Superstar(spec), EngineKind::Naive | EngineKind::EventDriven) => {
            built = build_superstar(*spec)?;
            Some(&built)
        }
        (Target::Graph(_), EngineKind::Lumped) => {
            return Err(Error::EngineMismatch("the lumped engine needs a superstar specification".into()))
        }
        (Target::Superstar(_), EngineKind::Lumped) => None,
    };
    let options = config.options;
    let (fixations, steps) = match (graph, config.engine) {
        (Some(g), EngineKind::Naive) => {
            let placer = Placer::new(g.vertex_count(), config.placement, |v| g.role(VertexId(v)))?;
            let n = g.vertex_count();
            run_batch(
                config.runs,
                config.master_seed,
                config.execution,
                || Ok(()),
                |_, rng| {
                    let v = placer.draw(rng);
                    let out = NaiveEngine::new(g, &OccupancyState::single(n, v), fitness)?.run(rng, options)?;
                    Ok((out.fixated(), out.steps))
                },
            )?
        }
        (Some(g), _) => {
            let placer = Placer::new(g.vertex_count(), config.placement, |v| g.role(VertexId(v)))?;
            let n = g.vertex_count();
            run_batch(
                config.runs,
                config.master_seed,
                config.execution,
                || EventDrivenEngine::new(g, &OccupancyState::empty(n), fitness),
                |engine, rng| {
                    let v = placer.draw(rng);
                    engine.reset(&OccupancyState::single(n, v))?;
                    let out = engine.run(rng, options)?;
                    Ok((out.fixated(), out.steps))
                },
            )?
        }
        (None, _) => {
            let Target::Superstar(spec) = *target else {
                unreachable!()
            };
            let placer = Placer::new(spec.vertex_count(), config.placement, |v| spec.role_of(VertexId(v)))?;
            let accelerated = match config.lumped_mode {
                LumpedMode::Stepwise => false,
                LumpedMode::Accelerated => true,
                LumpedMode::Auto => spec.reservoir >= AUTO_MIN_RESERVOIR && accelerated_supported(&spec),
            };
            if accelerated {
                let kernels = Arc::new(LeafKernels::new(&spec, fitness)?);
                run_batch(
                    config.runs,
                    config.master_seed,
                    config.execution,
                    || AcceleratedLumped::with_kernels(spec, fitness, Arc::clone(&kernels)),
                    |sim, rng| {
                        let v = placer.draw(rng);
                        let out = sim.run(&LumpedSuperstarState::single(&spec, VertexId(v)), rng, options)?;
                        Ok((out.fixated(), out.steps))
                    },
                )?
            } else {
                run_batch(
                    config.runs,
                    config.master_seed,
                    config.execution,
                    || LumpedEngine::new(spec, fitness),
                    |engine, rng| {
                        let v = placer.draw(rng);
                        engine.reset(&LumpedSuperstarState::single(&spec, VertexId(v)))?;
                        let out = engine.run(rng, options)?;
                        Ok((out.fixated(), out.steps))
                    },
                )?
            }
        }
    };
    FixationEstimate::from_counts(
        fixations,
        config.runs,
        steps,
        config.engine,
        config.master_seed,
        config.confidence,
        config.method,
    )
}
