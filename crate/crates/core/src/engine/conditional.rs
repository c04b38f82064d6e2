use rand::Rng;

use super::estimate::{run_batch, EstimateConfig, FixationEstimate};
use super::{EngineKind, Fitness, LumpedEngine, LumpedSuperstarState, RunOptions};
use crate::error::{Error, Result};
use crate::graph::SuperstarSpec;

/// How a run conditioned on a reservoir start ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentreFiring {
    /// A mutant centre was chosen to reproduce.
    Fired { steps: u64 },
    /// All mutants vanished first.
    DiedOut { steps: u64 },
}

impl CentreFiring {
    pub fn fired(self) -> bool {
        matches!(self, CentreFiring::Fired { .. })
    }

    pub fn steps(self) -> u64 {
        match self {
            CentreFiring::Fired { steps } | CentreFiring::DiedOut { steps } => steps,
        }
    }
}

/// Runs one trajectory from a single mutant on reservoir vertex 0 of leaf 0
/// until the centre, while a mutant, is selected to reproduce, or until the
/// mutants die out.
///
/// The selection of a mutant centre is the only centre event that is not an
/// effective event of the plain process, so the lumped engine handles it by
/// swapping the centre's effective out-weight for its full weight `r`.
pub fn run_until_centre_fires<R: Rng + ?Sized>(
    spec: SuperstarSpec,
    r: f64,
    rng: &mut R,
    options: RunOptions,
) -> Result<CentreFiring> {
    let mut engine = LumpedEngine::new(spec, Fitness::new(r)?)?;
    engine.reset(&LumpedSuperstarState::single(&spec, spec.reservoir_vertex(0, 0)))?;
    let (fired, steps) = engine.run_until_centre_fires(rng, options)?;
    Ok(if fired {
        CentreFiring::Fired { steps }
    } else {
        CentreFiring::DiedOut { steps }
    })
}

/// Monte Carlo estimate of `q`, the probability that a mutant centre is
/// selected to reproduce given that the initial mutant sits on a reservoir
/// vertex. Reservoir vertices are interchangeable under the graph's
/// symmetries, so every run starts from the same one.
pub fn estimate_conditional_f(spec: SuperstarSpec, r: f64, runs: u64, master_seed: u64) -> Result<FixationEstimate> {
    let mut config = EstimateConfig::new(runs, master_seed, EngineKind::Lumped);
    config.confidence = 0.995;
    estimate_conditional_f_with(spec, r, &config)
}

pub fn estimate_conditional_f_with(spec: SuperstarSpec, r: f64, config: &EstimateConfig) -> Result<FixationEstimate> {
    if spec.k != 5 {
        return Err(Error::InvalidSpec(format!("conditional estimate needs k = 5, got k = {}", spec.k)));
    }
    if config.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let fitness = Fitness::new(r)?;
    let start = LumpedSuperstarState::single(&spec, spec.reservoir_vertex(0, 0));
    let options = config.options;
    let (fired, steps) = run_batch(
        config.runs,
        config.master_seed,
        config.execution,
        || LumpedEngine::new(spec, fitness),
        |engine, rng| {
            engine.reset(&start)?;
            engine.run_until_centre_fires(rng, options)
        },
    )?;
    FixationEstimate::from_counts(
        fired,
        config.runs,
        steps,
        EngineKind::Lumped,
        config.master_seed,
        config.confidence,
        config.method,
    )
}
