use rand::Rng;

use super::{absorbed_outcome, AbsorptionOutcome, Fitness, OccupancyState, RunOptions};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::sampling::SumTree;

/// Event-driven simulator that only samples reproductions which change the
/// state.
///
/// Vertex `u` fires an effective event with weight
/// `fitness(u) * opp(u) / outdeg(u)`, where `opp(u)` counts out-arcs to
/// vertices of the other type. Each vertex's out-arc slots are kept
/// partitioned into `[mutant targets | resident targets]`, so a uniform
/// opposite-type target is one index lookup. A flip of `t` only moves `t`
/// across the partition of each in-neighbour of `t`, which bounds the
/// update cost by the in-degree of `t`.
#[derive(Debug, Clone)]
pub struct EventDrivenEngine<'g> {
    graph: &'g DirectedGraph,
    fitness: Fitness,
    state: OccupancyState,
    arc_source: Vec<u32>,
    arc_target: Vec<u32>,
    in_offsets: Vec<usize>,
    in_arcs: Vec<u32>,
    slot_of: Vec<u32>,
    arc_at: Vec<u32>,
    mutant_out: Vec<u32>,
    weights: SumTree<f64>,
}

impl<'g> EventDrivenEngine<'g> {
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
        let arcs = graph.arc_count();
        let mut arc_source = Vec::with_capacity(arcs);
        let mut arc_target = Vec::with_capacity(arcs);
        for (u, v) in graph.arcs() {
            arc_source.push(u as u32);
            arc_target.push(v as u32);
        }
        let mut in_offsets = vec![0usize; n + 1];
        for &t in &arc_target {
            in_offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut fill = in_offsets.clone();
        let mut in_arcs = vec![0u32; arcs];
        for (a, &t) in arc_target.iter().enumerate() {
            in_arcs[fill[t as usize]] = a as u32;
            fill[t as usize] += 1;
        }
        let mut engine = EventDrivenEngine {
            graph,
            fitness,
            state: OccupancyState::empty(n),
            arc_source,
            arc_target,
            in_offsets,
            in_arcs,
            slot_of: (0..arcs as u32).collect(),
            arc_at: (0..arcs as u32).collect(),
            mutant_out: vec![0; n],
            weights: SumTree::new(n),
        };
        engine.reset(initial)?;
        Ok(engine)
    }

    /// Restarts from `initial`, reusing all allocations.
    pub fn reset(&mut self, initial: &OccupancyState) -> Result<()> {
        let n = self.graph.vertex_count();
        if initial.len() != n {
            return Err(Error::InconsistentState("state size mismatch".into()));
        }
        self.state = initial.clone();
        // Slot order decides which target a uniform draw lands on, so it is
        // rebuilt from scratch to keep runs independent of history.
        for (a, slot) in self.slot_of.iter_mut().enumerate() {
            *slot = a as u32;
        }
        for (s, arc) in self.arc_at.iter_mut().enumerate() {
            *arc = s as u32;
        }
        for u in 0..n {
            let start = self.out_start(u);
            let end = start + self.graph.out_degree(u);
            // Stable partition of u's arcs by target type.
            let mut lo = start;
            for s in start..end {
                let a = self.arc_at[s] as usize;
                if self.state.is_mutant(self.arc_target[a] as usize) {
                    self.swap_slots(lo, s);
                    lo += 1;
                }
            }
            self.mutant_out[u] = (lo - start) as u32;
        }
        let weights: Vec<f64> = (0..n).map(|u| self.weight(u)).collect();
        self.weights.reset(weights.into_iter());
        Ok(())
    }

    #[inline]
    fn out_start(&self, u: usize) -> usize {
        self.graph.out_arc_range(u).start
    }

    #[inline]
    fn swap_slots(&mut self, s1: usize, s2: usize) {
        if s1 == s2 {
            return;
        }
        let a1 = self.arc_at[s1];
        let a2 = self.arc_at[s2];
        self.arc_at[s1] = a2;
        self.arc_at[s2] = a1;
        self.slot_of[a1 as usize] = s2 as u32;
        self.slot_of[a2 as usize] = s1 as u32;
    }

    #[inline]
    fn opposite(&self, u: usize) -> u32 {
        if self.state.is_mutant(u) {
            self.graph.out_degree(u) as u32 - self.mutant_out[u]
        } else {
            self.mutant_out[u]
        }
    }

    #[inline]
    fn weight(&self, u: usize) -> f64 {
        let opp = self.opposite(u);
        if opp == 0 {
            0.0
        } else {
            self.fitness.of(self.state.is_mutant(u)) * opp as f64 / self.graph.out_degree(u) as f64
        }
    }

    pub fn state(&self) -> &OccupancyState {
        &self.state
    }

    /// Total effective-event weight of the current state.
    pub fn total_weight(&self) -> f64 {
        self.weights.total()
    }

    fn flip(&mut self, t: usize) {
        let now_mutant = !self.state.is_mutant(t);
        self.state.set(t, now_mutant);
        for i in self.in_offsets[t]..self.in_offsets[t + 1] {
            let a = self.in_arcs[i] as usize;
            let u = self.arc_source[a] as usize;
            let s = self.slot_of[a] as usize;
            let start = self.out_start(u);
            if now_mutant {
                let boundary = start + self.mutant_out[u] as usize;
                self.swap_slots(s, boundary);
                self.mutant_out[u] += 1;
            } else {
                let boundary = start + self.mutant_out[u] as usize - 1;
                self.swap_slots(s, boundary);
                self.mutant_out[u] -= 1;
            }
            let w = self.weight(u);
            self.weights.set(u, w);
        }
        let w = self.weight(t);
        self.weights.set(t, w);
    }

    /// Samples and applies one effective event, returning the flipped vertex.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        let n = self.state.len();
        let m = self.state.mutant_count();
        if m == 0 || m == n {
            return Err(Error::AbsorbedState { mutants: m, n });
        }
        if !(self.weights.total() > 0.0) {
            return Err(Error::InvalidGraph(
                "no state-changing event available in a non-absorbed state; graph is not strongly connected".into(),
            ));
        }
        let u = self.weights.sample(rng);
        let opp = self.opposite(u) as usize;
        let pick = rng.random_range(0..opp);
        let start = self.out_start(u);
        let slot = if self.state.is_mutant(u) {
            start + self.mutant_out[u] as usize + pick
        } else {
            start + pick
        };
        let t = self.arc_target[self.arc_at[slot] as usize] as usize;
        self.flip(t);
        Ok(t)
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

pub fn run_event_driven<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    initial: &OccupancyState,
    fitness: Fitness,
    rng: &mut R,
    options: RunOptions,
) -> Result<AbsorptionOutcome> {
    EventDrivenEngine::new(graph, initial, fitness)?.run(rng, options)
}
