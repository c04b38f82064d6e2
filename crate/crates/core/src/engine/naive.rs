use rand::Rng;

use super::{absorbed_outcome, AbsorptionOutcome, Fitness, OccupancyState, RunOptions};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::sampling::IndexSet;

/// Step-by-step simulator. The reproducer is drawn in two stages: first the
/// class (mutant with weight `r * mutants`, resident with weight
/// `n - mutants`), then a uniform member of that class.
#[derive(Debug, Clone)]
pub struct NaiveEngine<'g> {
    graph: &'g DirectedGraph,
    fitness: Fitness,
    state: OccupancyState,
    mutants: IndexSet,
    residents: IndexSet,
}

impl<'g> NaiveEngine<'g> {
    pub fn new(graph: &'g DirectedGraph, initial: &OccupancyState, fitness: Fitness) -> Result<Self> {
        let n = graph.vertex_count();
        if initial.len() != n {
            return Err(Error::InconsistentState(format!(
                "state has {} vertices, graph has {n}",
                initial.len()
            )));
        }
        if let Some(v) = (0..n).find(|&v| graph.out_degree(v) == 0) {
            return Err(Error::InvalidGraph(format!("vertex {v} has no out-neighbours")));
        }
        let mut mutants = IndexSet::new(n);
        let mut residents = IndexSet::new(n);
        for v in 0..n {
            if initial.is_mutant(v) {
                mutants.insert(v);
            } else {
                residents.insert(v);
            }
        }
        Ok(NaiveEngine {
            graph,
            fitness,
            state: initial.clone(),
            mutants,
            residents,
        })
    }

    pub fn state(&self) -> &OccupancyState {
        &self.state
    }

    pub fn into_state(self) -> OccupancyState {
        self.state
    }

    /// One reproduction step. Returns whether the target changed type.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let n = self.state.len();
        let m = self.state.mutant_count();
        if m == 0 || m == n {
            return Err(Error::AbsorbedState { mutants: m, n });
        }
        let mutant_weight = self.fitness.r() * m as f64;
        let total = mutant_weight + (n - m) as f64;
        let reproducer = if rng.random::<f64>() * total < mutant_weight {
            self.mutants.sample(rng)
        } else {
            self.residents.sample(rng)
        };
        let out = self.graph.out_neighbors(reproducer);
        let target = out[rng.random_range(0..out.len())] as usize;
        let kind = self.state.is_mutant(reproducer);
        if self.state.is_mutant(target) == kind {
            return Ok(false);
        }
        self.state.set(target, kind);
        if kind {
            self.residents.remove(target);
            self.mutants.insert(target);
        } else {
            self.mutants.remove(target);
            self.residents.insert(target);
        }
        Ok(true)
    }

    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, options: RunOptions) -> Result<AbsorptionOutcome> {
        let n = self.state.len();
        let mut steps = 0u64;
        loop {
            if let Some(outcome) = absorbed_outcome(self.state.mutant_count(), n, steps) {
                return Ok(outcome);
            }
            options.check(steps)?;
            self.step(rng)?;
            steps += 1;
        }
    }
}

/// Performs one step from `state`, returning the new state and whether it
/// changed.
pub fn step_naive<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    state: &OccupancyState,
    fitness: Fitness,
    rng: &mut R,
) -> Result<(OccupancyState, bool)> {
    let mut engine = NaiveEngine::new(graph, state, fitness)?;
    let changed = engine.step(rng)?;
    Ok((engine.into_state(), changed))
}

pub fn run_naive<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    initial: &OccupancyState,
    fitness: Fitness,
    rng: &mut R,
    options: RunOptions,
) -> Result<AbsorptionOutcome> {
    NaiveEngine::new(graph, initial, fitness)?.run(rng, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Absorption;
    use crate::graph::{build_complete, build_star};
    use crate::rng::run_rng;

    #[test]
    fn absorbed_input_is_rejected() {
        let g = build_complete(3).unwrap();
        let mut rng = run_rng(1, 0);
        let f = Fitness::new(2.0).unwrap();
        assert!(matches!(
            step_naive(&g, &OccupancyState::full(3), f, &mut rng),
            Err(Error::AbsorbedState { .. })
        ));
        assert!(step_naive(&g, &OccupancyState::empty(3), f, &mut rng).is_err());
    }

    #[test]
    fn absorbed_runs_take_zero_steps() {
        let g = build_complete(4).unwrap();
        let mut rng = run_rng(1, 0);
        let f = Fitness::new(2.0).unwrap();
        let out = run_naive(&g, &OccupancyState::full(4), f, &mut rng, RunOptions::default()).unwrap();
        assert_eq!(out, AbsorptionOutcome { result: Absorption::Fixation, steps: 0 });
        let out = run_naive(&g, &OccupancyState::empty(4), f, &mut rng, RunOptions::default()).unwrap();
        assert_eq!(out, AbsorptionOutcome { result: Absorption::Extinction, steps: 0 });
    }

    #[test]
    fn k2_single_step_fixation_rate() {
        // Weights r = 2 and 1: the mutant reproduces (and fixes) w.p. 2/3.
        let g = build_complete(2).unwrap();
        let f = Fitness::new(2.0).unwrap();
        let trials = 60_000;
        let mut fixed = 0;
        for i in 0..trials {
            let mut rng = run_rng(11, i);
            let (s, changed) = step_naive(&g, &OccupancyState::single(2, 0), f, &mut rng).unwrap();
            assert!(changed);
            fixed += (s.mutant_count() == 2) as usize;
        }
        let p = fixed as f64 / trials as f64;
        let sd = (2.0 / 9.0 / trials as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 5.0 * sd, "{p}");
    }

    #[test]
    fn neutral_star_reproducer_is_uniform() {
        // r = 1 on a 3-vertex star: each vertex reproduces w.p. 1/3. With the
        // centre mutant, the centre converts a leaf (1/3), a leaf kills the
        // centre (2/3, both leaves are residents).
        let g = build_star(3).unwrap();
        let f = Fitness::new(1.0).unwrap();
        let trials = 60_000u64;
        let mut grew = 0;
        for i in 0..trials {
            let mut rng = run_rng(5, i);
            let (s, changed) = step_naive(&g, &OccupancyState::single(3, 0), f, &mut rng).unwrap();
            assert!(changed);
            grew += (s.mutant_count() == 2) as usize;
        }
        let p = grew as f64 / trials as f64;
        let sd = (2.0 / 9.0 / trials as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 5.0 * sd, "{p}");
    }

    #[test]
    fn budget_errors_loudly() {
        let g = build_complete(30).unwrap();
        let mut rng = run_rng(3, 0);
        let f = Fitness::new(1.0).unwrap();
        let err = run_naive(
            &g,
            &OccupancyState::single(30, 0),
            f,
            &mut rng,
            RunOptions { step_budget: Some(1) },
        );
        // Either absorbed in one step or the budget fired; a single mutant on
        // K_30 cannot absorb in one step unless it dies.
        match err {
            Ok(out) => assert_eq!(out.result, Absorption::Extinction),
            Err(e) => assert_eq!(e, Error::StepBudgetExceeded { budget: 1 }),
        }
    }
}
