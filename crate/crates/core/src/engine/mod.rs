//! Simulation of the generalized Moran process to absorption.
//!
//! Three engines share one process definition. The naive engine performs
//! every reproduction step, including ones that change nothing. The
//! event-driven engine samples only steps that flip a vertex. The lumped
//! engine runs the event-driven process on the superstar symmetry quotient,
//! where reservoir vertices of one leaf are exchangeable and only their
//! mutant count matters.

mod accelerated;
mod conditional;
mod estimate;
mod event;
mod lumped;
mod naive;

pub use accelerated::{accelerated_supported, AcceleratedLumped, LeafKernels, MAX_ACCELERATED_CHAIN};
pub use conditional::{estimate_conditional_f, estimate_conditional_f_with, run_until_centre_fires, CentreFiring};
pub use estimate::{
    estimate_fixation, estimate_fixation_with, initial_state, EngineKind, EstimateConfig, Execution,
    FixationEstimate, LumpedMode, Placement, Target, VertexClass, AUTO_MIN_RESERVOIR,
};
pub use event::{run_event_driven, EventDrivenEngine};
pub use lumped::{run_lumped_superstar, LumpedEngine, LumpedEvent, LumpedSuperstarState};
pub use naive::{run_naive, step_naive, NaiveEngine};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative mutant fitness `r`; residents have fitness 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Fitness(f64);

impl Fitness {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 {
            Ok(Fitness(r))
        } else {
            Err(Error::InvalidParameter(format!("fitness must be positive and finite, got {r}")))
        }
    }

    #[inline]
    pub fn r(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn of(self, mutant: bool) -> f64 {
        if mutant {
            self.0
        } else {
            1.0
        }
    }

    /// Total fitness `W` of a population of `n` with `mutants` mutants.
    pub fn total(self, n: usize, mutants: usize) -> f64 {
        self.0 * mutants as f64 + (n - mutants) as f64
    }
}

/// Which vertices hold mutants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupancyState {
    flags: Vec<bool>,
    mutants: usize,
}

impl OccupancyState {
    pub fn empty(n: usize) -> Self {
        OccupancyState {
            flags: vec![false; n],
            mutants: 0,
        }
    }

    pub fn full(n: usize) -> Self {
        OccupancyState {
            flags: vec![true; n],
            mutants: n,
        }
    }

    pub fn single(n: usize, v: usize) -> Self {
        let mut s = OccupancyState::empty(n);
        s.set(v, true);
        s
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        let mutants = flags.iter().filter(|&&f| f).count();
        OccupancyState { flags, mutants }
    }

    /// Bit `v` of `mask` marks vertex `v` as a mutant.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        OccupancyState::from_flags((0..n).map(|v| mask >> v & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.flags.len() <= 64, "mask form needs n <= 64");
        self.flags
            .iter()
            .enumerate()
            .fold(0u64, |m, (v, &f)| m | (f as u64) << v)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    #[inline]
    pub fn is_mutant(&self, v: usize) -> bool {
        self.flags[v]
    }

    #[inline]
    pub fn mutant_count(&self) -> usize {
        self.mutants
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn set(&mut self, v: usize, mutant: bool) {
        if self.flags[v] != mutant {
            self.flags[v] = mutant;
            if mutant {
                self.mutants += 1;
            } else {
                self.mutants -= 1;
            }
        }
    }

    pub fn is_absorbed(&self) -> bool {
        self.mutants == 0 || self.mutants == self.flags.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Absorption {
    Fixation,
    Extinction,
}

/// Result of one run. For the event-driven and lumped engines `steps`
/// counts state-changing events only; the naive engine counts every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorptionOutcome {
    pub result: Absorption,
    pub steps: u64,
}

impl AbsorptionOutcome {
    pub fn fixated(&self) -> bool {
        self.result == Absorption::Fixation
    }
}

/// Per-run limits. With no budget a run continues until absorption, which
/// happens with probability one on strongly connected graphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub step_budget: Option<u64>,
}

impl RunOptions {
    #[inline]
    pub(crate) fn check(&self, steps: u64) -> Result<()> {
        match self.step_budget {
            Some(budget) if steps >= budget => Err(Error::StepBudgetExceeded { budget }),
            _ => Ok(()),
        }
    }
}

pub(crate) fn absorbed_outcome(mutants: usize, n: usize, steps: u64) -> Option<AbsorptionOutcome> {
    if mutants == n {
        Some(AbsorptionOutcome {
            result: Absorption::Fixation,
            steps,
        })
    } else if mutants == 0 {
        Some(AbsorptionOutcome {
            result: Absorption::Extinction,
            steps,
        })
    } else {
        None
    }
}
