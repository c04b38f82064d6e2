use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{absorbed_outcome, AbsorptionOutcome, Fitness, OccupancyState, RunOptions};
use crate::error::{Error, Result};
use crate::graph::{Role, SuperstarSpec, VertexId};
use crate::sampling::{IndexSet, SumTree};

/// Longest chain the bitmask representation supports.
pub const MAX_CHAIN: usize = 64;

/// Superstar state modulo the symmetry among reservoir vertices of a leaf.
///
/// Bit `j` of `chain[i]` is chain position `j` of leaf `i` (position 0
/// receives arcs from the reservoir; position `k - 3` feeds the centre).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LumpedSuperstarState {
    pub centre: bool,
    pub reservoir_mutants: Vec<u32>,
    pub chain: Vec<u64>,
}

impl LumpedSuperstarState {
    pub fn empty(spec: &SuperstarSpec) -> Self {
        LumpedSuperstarState {
            centre: false,
            reservoir_mutants: vec![0; spec.leaves],
            chain: vec![0; spec.leaves],
        }
    }

    pub fn full(spec: &SuperstarSpec) -> Self {
        LumpedSuperstarState {
            centre: true,
            reservoir_mutants: vec![spec.reservoir as u32; spec.leaves],
            chain: vec![chain_mask(spec.chain_len()); spec.leaves],
        }
    }

    /// State with a single mutant on vertex `v` of the full graph.
    pub fn single(spec: &SuperstarSpec, v: VertexId) -> Self {
        let mut s = LumpedSuperstarState::empty(spec);
        match spec.role_of(v) {
            Role::Centre => s.centre = true,
            Role::Reservoir { leaf } => s.reservoir_mutants[leaf] = 1,
            Role::Chain { leaf, position } => s.chain[leaf] |= 1 << position,
            Role::Plain => unreachable!("superstar layout has no plain vertices"),
        }
        s
    }

    /// Lumped image of a full occupancy state on `build_superstar(spec)`.
    pub fn project(spec: &SuperstarSpec, full: &OccupancyState) -> Result<Self> {
        if full.len() != spec.vertex_count() {
            return Err(Error::InconsistentState(format!(
                "state has {} vertices, {spec} has {}",
                full.len(),
                spec.vertex_count()
            )));
        }
        let mut s = LumpedSuperstarState::empty(spec);
        for v in (0..full.len()).filter(|&v| full.is_mutant(v)) {
            match spec.role_of(VertexId(v)) {
                Role::Centre => s.centre = true,
                Role::Reservoir { leaf } => s.reservoir_mutants[leaf] += 1,
                Role::Chain { leaf, position } => s.chain[leaf] |= 1 << position,
                Role::Plain => unreachable!(),
            }
        }
        Ok(s)
    }

    pub fn validate(&self, spec: &SuperstarSpec) -> Result<()> {
        if spec.k < 3 {
            return Err(Error::EngineMismatch("lumped engine needs k >= 3; use the star graph for k = 2".into()));
        }
        if spec.chain_len() > MAX_CHAIN {
            return Err(Error::EngineMismatch(format!("chains longer than {MAX_CHAIN} are not supported")));
        }
        if self.reservoir_mutants.len() != spec.leaves || self.chain.len() != spec.leaves {
            return Err(Error::InconsistentState(format!(
                "expected {} leaves, got {} reservoir counts and {} chains",
                spec.leaves,
                self.reservoir_mutants.len(),
                self.chain.len()
            )));
        }
        if let Some(a) = self.reservoir_mutants.iter().find(|&&a| a as usize > spec.reservoir) {
            return Err(Error::InconsistentState(format!(
                "reservoir count {a} exceeds reservoir size {}",
                spec.reservoir
            )));
        }
        let mask = chain_mask(spec.chain_len());
        if self.chain.iter().any(|&c| c & !mask != 0) {
            return Err(Error::InconsistentState("chain flags beyond chain length".into()));
        }
        Ok(())
    }

    pub fn mutant_count(&self) -> usize {
        self.centre as usize
            + self.reservoir_mutants.iter().map(|&a| a as usize).sum::<usize>()
            + self.chain.iter().map(|c| c.count_ones() as usize).sum::<usize>()
    }
}

fn chain_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// One effective event of the lumped process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LumpedEvent {
    /// The centre overwrites an opposite-type reservoir vertex of `leaf`.
    CentreToReservoir { leaf: usize },
    /// A reservoir vertex of `leaf` overwrites chain position 0.
    ReservoirToChain { leaf: usize },
    /// Chain position `position` overwrites `position + 1`.
    ChainAdvance { leaf: usize, position: usize },
    /// The chain end of `leaf` overwrites the centre.
    ChainToCentre { leaf: usize },
}

/// Event-driven simulator on the lumped superstar state.
///
/// Effective weights, with `f(.)` the fitness of a vertex type:
/// * centre into leaf `i`: `f(centre) * opp_i / (l m)`, where `opp_i` is
///   the number of reservoir vertices of leaf `i` with the other type;
/// * reservoir of leaf `i` into chain head: `r a_i` if the head is a
///   resident, `m - a_i` if it is a mutant;
/// * chain position `j` into `j + 1` on a type mismatch: `f(c_j)`;
/// * chain end into centre on a mismatch: `f(chain end)`.
///
/// Leaf-local weights (the middle two) live in a sum tree over leaves. The
/// centre-facing weights depend on the centre's type for every leaf at
/// once, so they are aggregated separately: reservoir counts in two count
/// trees, chain ends in two index sets.
#[derive(Debug, Clone)]
pub struct LumpedEngine {
    spec: SuperstarSpec,
    fitness: Fitness,
    n: usize,
    centre: bool,
    reservoir_mutants: Vec<u32>,
    chain: Vec<u64>,
    mutants: usize,
    leaf_weights: SumTree<f64>,
    mutant_reservoir: SumTree<u64>,
    resident_reservoir: SumTree<u64>,
    mutant_ends: IndexSet,
    resident_ends: IndexSet,
}

impl LumpedEngine {
    pub fn new(spec: SuperstarSpec, fitness: Fitness) -> Result<Self> {
        spec.validate()?;
        let empty = LumpedSuperstarState::empty(&spec);
        empty.validate(&spec)?;
        let leaves = spec.leaves;
        let mut engine = LumpedEngine {
            spec,
            fitness,
            n: spec.vertex_count(),
            centre: false,
            reservoir_mutants: vec![0; leaves],
            chain: vec![0; leaves],
            mutants: 0,
            leaf_weights: SumTree::new(leaves),
            mutant_reservoir: SumTree::new(leaves),
            resident_reservoir: SumTree::new(leaves),
            mutant_ends: IndexSet::new(leaves),
            resident_ends: IndexSet::new(leaves),
        };
        engine.reset(&empty)?;
        Ok(engine)
    }

    pub fn reset(&mut self, state: &LumpedSuperstarState) -> Result<()> {
        state.validate(&self.spec)?;
        let m = self.spec.reservoir as u64;
        self.centre = state.centre;
        self.reservoir_mutants.copy_from_slice(&state.reservoir_mutants);
        self.chain.copy_from_slice(&state.chain);
        self.mutants = state.mutant_count();
        self.mutant_reservoir
            .reset(self.reservoir_mutants.iter().map(|&a| a as u64));
        self.resident_reservoir
            .reset(self.reservoir_mutants.iter().map(|&a| m - a as u64));
        let weights: Vec<f64> = (0..self.spec.leaves).map(|i| self.leaf_weight(i)).collect();
        self.leaf_weights.reset(weights.into_iter());
        self.mutant_ends.clear();
        self.resident_ends.clear();
        for i in 0..self.spec.leaves {
            if self.chain_end(i) {
                self.mutant_ends.insert(i);
            } else {
                self.resident_ends.insert(i);
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &SuperstarSpec {
        &self.spec
    }

    pub fn state(&self) -> LumpedSuperstarState {
        LumpedSuperstarState {
            centre: self.centre,
            reservoir_mutants: self.reservoir_mutants.clone(),
            chain: self.chain.clone(),
        }
    }

    #[inline]
    pub fn mutant_count(&self) -> usize {
        self.mutants
    }

    /// Mutant reservoir vertices over all leaves.
    #[inline]
    pub fn reservoir_mutant_total(&self) -> u64 {
        self.mutant_reservoir.total()
    }

    #[inline]
    fn chain_end(&self, leaf: usize) -> bool {
        self.chain[leaf] >> (self.spec.chain_len() - 1) & 1 == 1
    }

    #[inline]
    fn reservoir_weight(&self, leaf: usize) -> f64 {
        let a = self.reservoir_mutants[leaf];
        if self.chain[leaf] & 1 == 1 {
            (self.spec.reservoir as u32 - a) as f64
        } else {
            self.fitness.r() * a as f64
        }
    }

    /// Mismatched internal chain arcs of a leaf, as a mask of source positions.
    #[inline]
    fn advance_mask(&self, leaf: usize) -> u64 {
        let c = self.chain[leaf];
        (c ^ (c >> 1)) & chain_mask(self.spec.chain_len() - 1)
    }

    #[inline]
    fn leaf_weight(&self, leaf: usize) -> f64 {
        let mism = self.advance_mask(leaf);
        let c = self.chain[leaf];
        self.reservoir_weight(leaf)
            + self.fitness.r() * (mism & c).count_ones() as f64
            + (mism & !c).count_ones() as f64
    }

    #[inline]
    fn reservoir_total(&self) -> u64 {
        (self.spec.leaves * self.spec.reservoir) as u64
    }

    #[inline]
    fn centre_out_weight(&self) -> f64 {
        let lm = self.reservoir_total() as f64;
        if self.centre {
            self.fitness.r() * self.resident_reservoir.total() as f64 / lm
        } else {
            self.mutant_reservoir.total() as f64 / lm
        }
    }

    #[inline]
    fn centre_in_weight(&self) -> f64 {
        if self.centre {
            self.resident_ends.len() as f64
        } else {
            self.fitness.r() * self.mutant_ends.len() as f64
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.centre_out_weight() + self.centre_in_weight() + self.leaf_weights.total()
    }

    /// Every effective event available in the current state with its weight.
    pub fn events(&self) -> Vec<(LumpedEvent, f64)> {
        let mut out = Vec::new();
        let r = self.fitness.r();
        let lm = self.reservoir_total() as f64;
        let m = self.spec.reservoir as u32;
        for leaf in 0..self.spec.leaves {
            let a = self.reservoir_mutants[leaf];
            let opp = if self.centre { m - a } else { a };
            if opp > 0 {
                let w = self.fitness.of(self.centre) * opp as f64 / lm;
                out.push((LumpedEvent::CentreToReservoir { leaf }, w));
            }
            let w = self.reservoir_weight(leaf);
            if w > 0.0 {
                out.push((LumpedEvent::ReservoirToChain { leaf }, w));
            }
            let mism = self.advance_mask(leaf);
            for position in 0..self.spec.chain_len() - 1 {
                if mism >> position & 1 == 1 {
                    let mutant = self.chain[leaf] >> position & 1 == 1;
                    out.push((LumpedEvent::ChainAdvance { leaf, position }, if mutant { r } else { 1.0 }));
                }
            }
            if self.chain_end(leaf) != self.centre {
                out.push((
                    LumpedEvent::ChainToCentre { leaf },
                    self.fitness.of(self.chain_end(leaf)),
                ));
            }
        }
        out
    }

    fn set_reservoir(&mut self, leaf: usize, a: u32) {
        let old = self.reservoir_mutants[leaf];
        self.reservoir_mutants[leaf] = a;
        self.mutants = self.mutants + a as usize - old as usize;
        self.mutant_reservoir.set(leaf, a as u64);
        self.resident_reservoir
            .set(leaf, (self.spec.reservoir as u32 - a) as u64);
        let w = self.leaf_weight(leaf);
        self.leaf_weights.set(leaf, w);
    }

    fn set_chain_bit(&mut self, leaf: usize, position: usize, mutant: bool) {
        let end_before = self.chain_end(leaf);
        if mutant {
            self.chain[leaf] |= 1 << position;
            self.mutants += 1;
        } else {
            self.chain[leaf] &= !(1 << position);
            self.mutants -= 1;
        }
        let w = self.leaf_weight(leaf);
        self.leaf_weights.set(leaf, w);
        let end_after = self.chain_end(leaf);
        if end_after != end_before {
            if end_after {
                self.resident_ends.remove(leaf);
                self.mutant_ends.insert(leaf);
            } else {
                self.mutant_ends.remove(leaf);
                self.resident_ends.insert(leaf);
            }
        }
    }

    fn set_centre(&mut self, mutant: bool) {
        if self.centre != mutant {
            self.centre = mutant;
            if mutant {
                self.mutants += 1;
            } else {
                self.mutants -= 1;
            }
        }
    }

    /// Applies an event. Events that are not effective in the current
    /// state are rejected.
    pub fn apply(&mut self, event: LumpedEvent) -> Result<()> {
        let m = self.spec.reservoir as u32;
        let bad = || Error::InconsistentState(format!("{event:?} is not effective here"));
        match event {
            LumpedEvent::CentreToReservoir { leaf } => {
                let a = self.reservoir_mutants[leaf];
                if self.centre && a < m {
                    self.set_reservoir(leaf, a + 1);
                } else if !self.centre && a > 0 {
                    self.set_reservoir(leaf, a - 1);
                } else {
                    return Err(bad());
                }
            }
            LumpedEvent::ReservoirToChain { leaf } => {
                let head = self.chain[leaf] & 1 == 1;
                let a = self.reservoir_mutants[leaf];
                if (head && a == m) || (!head && a == 0) {
                    return Err(bad());
                }
                self.set_chain_bit(leaf, 0, !head);
            }
            LumpedEvent::ChainAdvance { leaf, position } => {
                if position + 1 >= self.spec.chain_len() || self.advance_mask(leaf) >> position & 1 == 0 {
                    return Err(bad());
                }
                let src = self.chain[leaf] >> position & 1 == 1;
                self.set_chain_bit(leaf, position + 1, src);
            }
            LumpedEvent::ChainToCentre { leaf } => {
                let end = self.chain_end(leaf);
                if end == self.centre {
                    return Err(bad());
                }
                self.set_centre(end);
            }
        }
        Ok(())
    }

    /// Draws an effective event. `centre_fires` replaces the centre's
    /// effective weight by its full reproduction weight `r` while the centre
    /// is a mutant; `None` is returned when that reproduction is drawn.
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, centre_fires: bool) -> Option<LumpedEvent> {
        let w_out = if centre_fires && self.centre {
            self.fitness.r()
        } else {
            self.centre_out_weight()
        };
        let w_in = self.centre_in_weight();
        let w_leaves = self.leaf_weights.total();
        let u = rng.random::<f64>() * (w_out + w_in + w_leaves);
        // Boundary draws fall through to the next class with positive weight.
        let pick_out = w_out > 0.0 && (u < w_out || (w_in <= 0.0 && w_leaves <= 0.0));
        if pick_out {
            if centre_fires && self.centre {
                return None;
            }
            let leaf = if self.centre {
                self.resident_reservoir.sample(rng)
            } else {
                self.mutant_reservoir.sample(rng)
            };
            return Some(LumpedEvent::CentreToReservoir { leaf });
        }
        let u = u - w_out;
        if w_in > 0.0 && (u < w_in || w_leaves <= 0.0) {
            let leaf = if self.centre {
                self.resident_ends.sample(rng)
            } else {
                self.mutant_ends.sample(rng)
            };
            return Some(LumpedEvent::ChainToCentre { leaf });
        }
        let u = (u - w_in).max(0.0);
        let leaf = self.leaf_weights.find(u.min(w_leaves));
        // Redraw within the leaf rather than reuse the residual of `u`,
        // which has lost precision after the tree descent.
        let mut v = rng.random::<f64>() * self.leaf_weights.get(leaf);
        let w_res = self.reservoir_weight(leaf);
        if v < w_res {
            return Some(LumpedEvent::ReservoirToChain { leaf });
        }
        v -= w_res;
        let c = self.chain[leaf];
        let mut mism = self.advance_mask(leaf);
        let r = self.fitness.r();
        let mut last = None;
        while mism != 0 {
            let position = mism.trailing_zeros() as usize;
            mism &= mism - 1;
            let w = if c >> position & 1 == 1 { r } else { 1.0 };
            last = Some(position);
            if v < w {
                break;
            }
            v -= w;
        }
        match last {
            Some(position) => Some(LumpedEvent::ChainAdvance { leaf, position }),
            None => Some(LumpedEvent::ReservoirToChain { leaf }),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LumpedEvent> {
        if self.mutants == 0 || self.mutants == self.n {
            return Err(Error::AbsorbedState {
                mutants: self.mutants,
                n: self.n,
            });
        }
        let event = self.draw(rng, false).expect("plain draw always yields an event");
        self.apply(event)?;
        Ok(event)
    }

    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, options: RunOptions) -> Result<AbsorptionOutcome> {
        let mut steps = 0u64;
        loop {
            if let Some(outcome) = absorbed_outcome(self.mutants, self.n, steps) {
                return Ok(outcome);
            }
            options.check(steps)?;
            let event = self.draw(rng, false).expect("plain draw always yields an event");
            self.apply(event)?;
            steps += 1;
        }
    }

    /// Runs until the centre, while a mutant, is chosen to reproduce
    /// (`(true, steps)`) or until the mutants die out (`(false, steps)`).
    pub(crate) fn run_until_centre_fires<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        options: RunOptions,
    ) -> Result<(bool, u64)> {
        let mut steps = 0u64;
        loop {
            if self.mutants == 0 {
                return Ok((false, steps));
            }
            options.check(steps)?;
            match self.draw(rng, true) {
                None => return Ok((true, steps)),
                Some(event) => self.apply(event)?,
            }
            steps += 1;
        }
    }
}

pub fn run_lumped_superstar<R: Rng + ?Sized>(
    spec: SuperstarSpec,
    initial: &LumpedSuperstarState,
    fitness: Fitness,
    rng: &mut R,
    options: RunOptions,
) -> Result<AbsorptionOutcome> {
    let mut engine = LumpedEngine::new(spec, fitness)?;
    engine.reset(initial)?;
    engine.run(rng, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Absorption;
    use crate::rng::run_rng;

    fn spec(k: usize, l: usize, m: usize) -> SuperstarSpec {
        SuperstarSpec::new(k, l, m).unwrap()
    }

    #[test]
    fn full_state_fixes_immediately() {
        let s = spec(5, 3, 4);
        let mut rng = run_rng(0, 0);
        let out = run_lumped_superstar(
            s,
            &LumpedSuperstarState::full(&s),
            Fitness::new(2.0).unwrap(),
            &mut rng,
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(out, AbsorptionOutcome { result: Absorption::Fixation, steps: 0 });
    }

    #[test]
    fn rejects_inconsistent_states() {
        let s = spec(5, 2, 2);
        let mut bad = LumpedSuperstarState::empty(&s);
        bad.reservoir_mutants[0] = 3;
        assert!(bad.validate(&s).is_err());
        let mut bad = LumpedSuperstarState::empty(&s);
        bad.chain[1] = 0b1000;
        assert!(bad.validate(&s).is_err());
        let bad = LumpedSuperstarState {
            centre: false,
            reservoir_mutants: vec![0],
            chain: vec![0, 0],
        };
        assert!(bad.validate(&s).is_err());
        assert!(LumpedEngine::new(spec(2, 2, 2), Fitness::new(2.0).unwrap()).is_err());
    }

    #[test]
    fn single_and_project_agree() {
        let s = spec(5, 2, 3);
        for v in 0..s.vertex_count() {
            let full = OccupancyState::single(s.vertex_count(), v);
            assert_eq!(
                LumpedSuperstarState::project(&s, &full).unwrap(),
                LumpedSuperstarState::single(&s, VertexId(v))
            );
        }
    }

    #[test]
    fn event_weights_sum_to_total() {
        let s = spec(6, 3, 4);
        let mut engine = LumpedEngine::new(s, Fitness::new(1.7).unwrap()).unwrap();
        let state = LumpedSuperstarState {
            centre: true,
            reservoir_mutants: vec![0, 2, 4],
            chain: vec![0b1010, 0b0001, 0b1111],
        };
        engine.reset(&state).unwrap();
        let sum: f64 = engine.events().iter().map(|e| e.1).sum();
        assert!((sum - engine.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn steps_change_count_by_one() {
        let s = spec(5, 4, 5);
        let mut engine = LumpedEngine::new(s, Fitness::new(3.0).unwrap()).unwrap();
        let mut rng = run_rng(8, 1);
        engine
            .reset(&LumpedSuperstarState::single(&s, s.reservoir_vertex(1, 0)))
            .unwrap();
        for _ in 0..2_000 {
            let before = engine.mutant_count();
            if before == 0 || before == s.vertex_count() {
                break;
            }
            engine.step(&mut rng).unwrap();
            let after = engine.mutant_count();
            assert_eq!(before.abs_diff(after), 1);
            assert_eq!(after, engine.state().mutant_count());
        }
    }
}
