//! Continuous-time sampler for the lumped superstar process that never
//! simulates individual chain moves.
//!
//! Run the process in continuous time, every vertex reproducing at rate
//! equal to its fitness. Absorption probabilities are those of the
//! discrete process because the jump chains coincide. Between two
//! conversions of reservoir vertices by the centre, the chain of leaf `i`
//! is an autonomous Markov chain on `2^(k-2)` states whose generator
//! depends only on the reservoir count `a_i`; the centre never feeds back
//! into it. So a chain is only sampled when its state is needed, through
//! precomputed transition kernels.
//!
//! The centre's type at time `t` is the type of the chain end that last
//! reproduced into it. Uniformise those reproductions at rate
//! `max(r, 1)` per chain end and walk backwards from `t`: each candidate
//! picks a uniform leaf, queries that chain end at the candidate time and
//! is accepted with probability `fitness / max(r, 1)`. The first accepted
//! candidate gives the centre's type. Queries at decreasing times inside
//! one walk are drawn from the exact bridge between the chain's last
//! committed state and its earliest queried state.
//!
//! Centre reproductions are thinned from a Poisson stream whose rate
//! bounds the effective conversion rate for either centre type. While all
//! reservoir vertices share one type the run hands over to the stepwise
//! engine, which also detects absorption.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use super::{absorbed_outcome, AbsorptionOutcome, Fitness, LumpedEngine, LumpedSuperstarState, RunOptions};
use crate::error::{Error, Result};
use crate::graph::SuperstarSpec;
use crate::sampling::SumTree;

/// Longest chain handled with precomputed kernels.
pub const MAX_ACCELERATED_CHAIN: usize = 5;

/// Kernel tables larger than this many entries are not built.
const MAX_TABLE_ENTRIES: usize = 1 << 24;

/// Doublings above the base step; kernels cover `2^20` time units before
/// the largest one is applied repeatedly.
const HORIZON_DOUBLINGS: u32 = 21;

/// Transition kernels of one leaf chain for every reservoir count.
///
/// For count `a` and level `j`, the table holds cumulative rows of
/// `exp(G_a * dt * 2^j)`. Remainders below `dt` are sampled by
/// uniformisation with one-step matrix `I + G_a / rate_a`.
#[derive(Debug, Clone)]
pub struct LeafKernels {
    states: usize,
    levels: usize,
    dt: f64,
    /// Cumulative (unnormalised) rows, indexed by `((a * levels + j) * S + x) * S + y`.
    power_cum: Vec<f64>,
    /// Cumulative rows of the uniformised one-step matrix, per count.
    unif_cum: Vec<f64>,
    unif_rate: Vec<f64>,
}

/// Whether precomputed kernels are available for this superstar.
pub fn accelerated_supported(spec: &SuperstarSpec) -> bool {
    let len = spec.chain_len();
    if spec.k < 3 || len > MAX_ACCELERATED_CHAIN {
        return false;
    }
    let s = 1usize << len;
    (spec.reservoir + 1)
        .saturating_mul(s * s)
        .saturating_mul(64)
        <= MAX_TABLE_ENTRIES
}

fn generator(len: usize, a: usize, m: usize, r: f64) -> Vec<f64> {
    let s = 1usize << len;
    let mut g = vec![0.0; s * s];
    let fit = |b: usize| if b == 1 { r } else { 1.0 };
    for x in 0..s {
        if x & 1 == 0 {
            g[x * s + (x | 1)] += r * a as f64;
        } else {
            g[x * s + (x & !1)] += (m - a) as f64;
        }
        for j in 0..len - 1 {
            let (b, c) = (x >> j & 1, x >> (j + 1) & 1);
            if b != c {
                g[x * s + (x ^ (1 << (j + 1)))] += fit(b);
            }
        }
        let out: f64 = (0..s).filter(|&y| y != x).map(|y| g[x * s + y]).sum();
        g[x * s + x] = -out;
    }
    g
}

fn mat_mul(a: &[f64], b: &[f64], s: usize) -> Vec<f64> {
    let mut c = vec![0.0; s * s];
    for i in 0..s {
        for k in 0..s {
            let aik = a[i * s + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..s {
                c[i * s + j] += aik * b[k * s + j];
            }
        }
    }
    c
}

/// `exp(g)` by its Taylor series; `g` must have a small norm.
fn exp_small(g: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; s * s];
    let mut term = vec![0.0; s * s];
    for i in 0..s {
        out[i * s + i] = 1.0;
        term[i * s + i] = 1.0;
    }
    for n in 1..40 {
        term = mat_mul(&term, g, s);
        term.iter_mut().for_each(|v| *v /= n as f64);
        out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
        if term.iter().all(|v| v.abs() < 1e-20) {
            break;
        }
    }
    out
}

fn cumulate(row: &[f64], out: &mut Vec<f64>) {
    let mut acc = 0.0;
    for &p in row {
        acc += p.max(0.0);
        out.push(acc);
    }
}

/// Index drawn from a cumulative row.
#[inline]
fn draw_cum<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let v = rng.random::<f64>() * cum[cum.len() - 1];
    cum.iter().position(|&c| c > v).unwrap_or(cum.len() - 1)
}

impl LeafKernels {
    pub fn new(spec: &SuperstarSpec, fitness: Fitness) -> Result<Self> {
        spec.validate()?;
        if !accelerated_supported(spec) {
            return Err(Error::EngineMismatch(format!(
                "no precomputed chain kernels for {spec} (k between 3 and {}, moderate reservoirs)",
                MAX_ACCELERATED_CHAIN + 2
            )));
        }
        let len = spec.chain_len();
        let s = 1usize << len;
        let m = spec.reservoir;
        let r = fitness.r();
        let gens: Vec<Vec<f64>> = (0..=m).map(|a| generator(len, a, m, r)).collect();
        let exit = |g: &Vec<f64>| (0..s).map(|x| -g[x * s + x]).fold(0.0, f64::max);
        let max_rate = gens.iter().map(exit).fold(0.0, f64::max).max(1.0);
        // Base step with rate * dt <= 1/4 keeps both the Taylor series and
        // the uniformised remainder short.
        let exponent = (4.0 * max_rate).log2().ceil() as i32;
        let dt = 2f64.powi(-exponent);
        let levels = (exponent.max(0) as u32 + HORIZON_DOUBLINGS) as usize;
        let mut power_cum = Vec::with_capacity((m + 1) * levels * s * s);
        let mut unif_cum = Vec::with_capacity((m + 1) * s * s);
        let mut unif_rate = Vec::with_capacity(m + 1);
        for g in &gens {
            let scaled: Vec<f64> = g.iter().map(|v| v * dt).collect();
            let mut p = exp_small(&scaled, s);
            for _ in 0..levels {
                for x in 0..s {
                    let row = &mut p[x * s..(x + 1) * s];
                    row.iter_mut().for_each(|v| *v = v.max(0.0));
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= total);
                    cumulate(row, &mut power_cum);
                }
                p = mat_mul(&p, &p, s);
            }
            let rate = exit(g);
            unif_rate.push(rate);
            for x in 0..s {
                let row: Vec<f64> = (0..s)
                    .map(|y| {
                        let id = if x == y { 1.0 } else { 0.0 };
                        if rate > 0.0 {
                            id + g[x * s + y] / rate
                        } else {
                            id
                        }
                    })
                    .collect();
                cumulate(&row, &mut unif_cum);
            }
        }
        Ok(LeafKernels {
            states: s,
            levels,
            dt,
            power_cum,
            unif_cum,
            unif_rate,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    fn power_row(&self, a: usize, level: usize, x: usize) -> &[f64] {
        let s = self.states;
        let at = ((a * self.levels + level) * s + x) * s;
        &self.power_cum[at..at + s]
    }

    #[inline]
    fn unif_row(&self, a: usize, x: usize) -> &[f64] {
        let s = self.states;
        let at = (a * s + x) * s;
        &self.unif_cum[at..at + s]
    }

    /// Splits `t` into base-step multiples and a remainder below `dt`.
    #[inline]
    fn split(&self, t: f64) -> (u64, f64) {
        let n = (t / self.dt).floor().max(0.0);
        let n = n.min(u64::MAX as f64 / 2.0) as u64;
        (n, (t - n as f64 * self.dt).max(0.0))
    }

    /// Set bits of `n` applied level by level, folding multiples beyond the
    /// top level into repeated applications of it.
    #[inline]
    fn for_each_level(&self, mut n: u64, mut f: impl FnMut(usize)) {
        let top = self.levels - 1;
        while n >> self.levels != 0 {
            f(top);
            n -= 1 << top;
        }
        while n != 0 {
            let j = n.trailing_zeros() as usize;
            f(j);
            n &= n - 1;
        }
    }

    /// Samples the chain state after time `t` from state `x` with reservoir
    /// count `a`.
    pub fn sample<R: Rng + ?Sized>(&self, a: usize, x: usize, t: f64, rng: &mut R) -> usize {
        let (n, rem) = self.split(t);
        let mut x = x;
        self.for_each_level(n, |j| x = draw_cum(self.power_row(a, j, x), rng));
        let mean = self.unif_rate[a] * rem;
        if mean > 0.0 {
            let jumps = Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0);
            for _ in 0..jumps {
                x = draw_cum(self.unif_row(a, x), rng);
            }
        }
        x
    }

    fn prob(cum: &[f64], y: usize) -> f64 {
        let total = cum[cum.len() - 1];
        let lo = if y == 0 { 0.0 } else { cum[y - 1] };
        (cum[y] - lo) / total
    }

    /// `v P` (when `left`) or `P v` for the matrix whose cumulative rows
    /// start at `table[start(x)]`.
    fn apply(&self, table: &[f64], start: impl Fn(usize) -> usize, v: &[f64], left: bool) -> Vec<f64> {
        let s = self.states;
        let mut out = vec![0.0; s];
        for x in 0..s {
            let at = start(x);
            let cum = &table[at..at + s];
            for y in 0..s {
                let p = Self::prob(cum, y);
                if left {
                    out[y] += v[x] * p;
                } else {
                    out[x] += p * v[y];
                }
            }
        }
        out
    }

    /// Applies `exp(G_a t)` to a vector, from the left (`v P`) when
    /// `left` is set and from the right (`P v`) otherwise.
    fn propagate(&self, a: usize, v: &mut Vec<f64>, t: f64, left: bool) {
        let s = self.states;
        let (n, rem) = self.split(t);
        self.for_each_level(n, |j| {
            *v = self.apply(&self.power_cum, |x| ((a * self.levels + j) * s + x) * s, v, left);
        });
        let mean = self.unif_rate[a] * rem;
        if mean > 0.0 {
            // exp(mean (U - I)) as a Poisson mixture of powers of U.
            let mut weight = (-mean).exp();
            let mut term = v.clone();
            let mut acc: Vec<f64> = term.iter().map(|t| t * weight).collect();
            let mut mass = weight;
            let mut i = 0u32;
            while 1.0 - mass > 1e-17 && i < 200 {
                i += 1;
                term = self.apply(&self.unif_cum, |x| (a * s + x) * s, &term, left);
                weight *= mean / i as f64;
                mass += weight;
                acc.iter_mut().zip(&term).for_each(|(o, t)| *o += weight * t);
            }
            *v = acc;
        }
    }

    /// Samples the state at time `s` on a path that is in `x0` at time 0
    /// and in `x1` at time `s + t1`.
    pub fn bridge<R: Rng + ?Sized>(&self, a: usize, x0: usize, s: f64, x1: usize, t1: f64, rng: &mut R) -> usize {
        let n = self.states;
        let mut fwd = vec![0.0; n];
        fwd[x0] = 1.0;
        self.propagate(a, &mut fwd, s, true);
        let mut back = vec![0.0; n];
        back[x1] = 1.0;
        self.propagate(a, &mut back, t1, false);
        let mut cum = Vec::with_capacity(n);
        let joint: Vec<f64> = fwd.iter().zip(&back).map(|(f, b)| f * b).collect();
        cumulate(&joint, &mut cum);
        if cum[n - 1] > 0.0 {
            draw_cum(&cum, rng)
        } else {
            // Only reachable through rounding on paths of negligible weight.
            self.sample(a, x0, s, rng)
        }
    }
}

/// Accelerated runner for the lumped superstar process.
#[derive(Debug, Clone)]
pub struct AcceleratedLumped {
    spec: SuperstarSpec,
    fitness: Fitness,
    kernels: Arc<LeafKernels>,
    stepwise: LumpedEngine,
    end_shift: usize,
    time: f64,
    centre: bool,
    reservoir: Vec<u32>,
    reservoir_total: u64,
    mutant_reservoir: SumTree<u64>,
    resident_reservoir: SumTree<u64>,
    base_time: Vec<f64>,
    base_state: Vec<u32>,
    touched: Vec<usize>,
    in_walk: Vec<bool>,
    earliest_time: Vec<f64>,
    earliest_state: Vec<u32>,
    latest_time: Vec<f64>,
    latest_state: Vec<u32>,
}

impl AcceleratedLumped {
    pub fn new(spec: SuperstarSpec, fitness: Fitness) -> Result<Self> {
        let kernels = Arc::new(LeafKernels::new(&spec, fitness)?);
        Self::with_kernels(spec, fitness, kernels)
    }

    /// Shares kernels built once for many runners, e.g. one per thread.
    pub fn with_kernels(spec: SuperstarSpec, fitness: Fitness, kernels: Arc<LeafKernels>) -> Result<Self> {
        if kernels.states() != 1 << spec.chain_len() {
            return Err(Error::EngineMismatch("kernels were built for another chain length".into()));
        }
        let l = spec.leaves;
        Ok(AcceleratedLumped {
            spec,
            fitness,
            kernels,
            stepwise: LumpedEngine::new(spec, fitness)?,
            end_shift: spec.chain_len() - 1,
            time: 0.0,
            centre: false,
            reservoir: vec![0; l],
            reservoir_total: 0,
            mutant_reservoir: SumTree::new(l),
            resident_reservoir: SumTree::new(l),
            base_time: vec![0.0; l],
            base_state: vec![0; l],
            touched: Vec::with_capacity(l),
            in_walk: vec![false; l],
            earliest_time: vec![0.0; l],
            earliest_state: vec![0; l],
            latest_time: vec![0.0; l],
            latest_state: vec![0; l],
        })
    }

    pub fn kernels(&self) -> &Arc<LeafKernels> {
        &self.kernels
    }

    fn load(&mut self, state: &LumpedSuperstarState) {
        let m = self.spec.reservoir as u64;
        self.time = 0.0;
        self.centre = state.centre;
        self.reservoir.copy_from_slice(&state.reservoir_mutants);
        self.reservoir_total = self.reservoir.iter().map(|&a| a as u64).sum();
        self.mutant_reservoir.reset(self.reservoir.iter().map(|&a| a as u64));
        self.resident_reservoir.reset(self.reservoir.iter().map(|&a| m - a as u64));
        self.base_time.iter_mut().for_each(|t| *t = 0.0);
        for (b, &c) in self.base_state.iter_mut().zip(&state.chain) {
            *b = c as u32;
        }
    }

    /// Chain state of `leaf` at the current time.
    fn materialise<R: Rng + ?Sized>(&mut self, leaf: usize, rng: &mut R) -> u32 {
        let a = self.reservoir[leaf] as usize;
        let dt = self.time - self.base_time[leaf];
        let x = self.kernels.sample(a, self.base_state[leaf] as usize, dt, rng) as u32;
        self.base_time[leaf] = self.time;
        self.base_state[leaf] = x;
        x
    }

    fn snapshot<R: Rng + ?Sized>(&mut self, rng: &mut R) -> LumpedSuperstarState {
        let chain = (0..self.spec.leaves).map(|i| self.materialise(i, rng) as u64).collect();
        LumpedSuperstarState {
            centre: self.centre,
            reservoir_mutants: self.reservoir.clone(),
            chain,
        }
    }

    /// Chain end of `leaf` at time `s` inside the current backward walk.
    fn query_end<R: Rng + ?Sized>(&mut self, leaf: usize, s: f64, rng: &mut R) -> bool {
        let a = self.reservoir[leaf] as usize;
        let x = if !self.in_walk[leaf] {
            let x = self.kernels.sample(a, self.base_state[leaf] as usize, s - self.base_time[leaf], rng) as u32;
            self.in_walk[leaf] = true;
            self.touched.push(leaf);
            self.latest_time[leaf] = s;
            self.latest_state[leaf] = x;
            x
        } else {
            self.kernels.bridge(
                a,
                self.base_state[leaf] as usize,
                s - self.base_time[leaf],
                self.earliest_state[leaf] as usize,
                self.earliest_time[leaf] - s,
                rng,
            ) as u32
        };
        self.earliest_time[leaf] = s;
        self.earliest_state[leaf] = x;
        x >> self.end_shift & 1 == 1
    }

    /// Centre type at time `t`, later than the current time.
    fn centre_at<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> bool {
        let bound = self.fitness.r().max(1.0);
        let rate = bound * self.spec.leaves as f64;
        let mut s = t;
        let centre = loop {
            let gap: f64 = Exp1.sample(rng);
            s -= gap / rate;
            if s <= self.time {
                break self.centre;
            }
            let leaf = rng.random_range(0..self.spec.leaves);
            let end = self.query_end(leaf, s, rng);
            if rng.random::<f64>() * bound < self.fitness.of(end) {
                break end;
            }
        };
        for &leaf in &self.touched {
            self.in_walk[leaf] = false;
            self.base_time[leaf] = self.latest_time[leaf];
            self.base_state[leaf] = self.latest_state[leaf];
        }
        self.touched.clear();
        centre
    }

    /// Moves to the next centre reproduction candidate. Returns whether it
    /// converted a reservoir vertex.
    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let lm = (self.spec.leaves * self.spec.reservoir) as f64;
        let mutants = self.reservoir_total as f64;
        let to_mutant = self.fitness.r() * (lm - mutants) / lm;
        let to_resident = mutants / lm;
        let bound = to_mutant.max(to_resident);
        let gap: f64 = Exp1.sample(rng);
        let t = self.time + gap / bound;
        let centre = self.centre_at(t, rng);
        self.time = t;
        self.centre = centre;
        let rate = if centre { to_mutant } else { to_resident };
        if rng.random::<f64>() * bound >= rate {
            return false;
        }
        let m = self.spec.reservoir as u64;
        let leaf = if centre {
            self.resident_reservoir.sample(rng)
        } else {
            self.mutant_reservoir.sample(rng)
        };
        self.materialise(leaf, rng);
        let a = &mut self.reservoir[leaf];
        if centre {
            *a += 1;
            self.reservoir_total += 1;
        } else {
            *a -= 1;
            self.reservoir_total -= 1;
        }
        let a = *a as u64;
        self.mutant_reservoir.set(leaf, a);
        self.resident_reservoir.set(leaf, m - a);
        true
    }

    /// Runs to absorption. `steps` counts reservoir conversions plus the
    /// effective events simulated one by one while every reservoir vertex
    /// has the same type; chain moves are integrated out and not counted.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        initial: &LumpedSuperstarState,
        rng: &mut R,
        options: RunOptions,
    ) -> Result<AbsorptionOutcome> {
        initial.validate(&self.spec)?;
        let n = self.spec.vertex_count();
        let full = (self.spec.leaves * self.spec.reservoir) as u64;
        let mut state = initial.clone();
        let mut steps = 0u64;
        loop {
            self.stepwise.reset(&state)?;
            loop {
                if let Some(outcome) = absorbed_outcome(self.stepwise.mutant_count(), n, steps) {
                    return Ok(outcome);
                }
                let total = self.stepwise.reservoir_mutant_total();
                if total != 0 && total != full {
                    break;
                }
                options.check(steps)?;
                self.stepwise.step(rng)?;
                steps += 1;
            }
            self.load(&self.stepwise.state());
            while self.reservoir_total != 0 && self.reservoir_total != full {
                options.check(steps)?;
                if self.advance(rng) {
                    steps += 1;
                }
            }
            state = self.snapshot(rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_rng;

    fn kernels(k: usize, l: usize, m: usize, r: f64) -> LeafKernels {
        LeafKernels::new(&SuperstarSpec::new(k, l, m).unwrap(), Fitness::new(r).unwrap()).unwrap()
    }

    /// Row of `exp(G t)` by a long uniformised series, independent of the
    /// kernel tables.
    fn reference_row(len: usize, a: usize, m: usize, r: f64, x: usize, t: f64) -> Vec<f64> {
        let s = 1 << len;
        let g = generator(len, a, m, r);
        let rate = (0..s).map(|i| -g[i * s + i]).fold(0.0, f64::max);
        let mut v = vec![0.0; s];
        v[x] = 1.0;
        let mean = rate * t;
        let mut out = vec![0.0; s];
        let mut log_w = -mean;
        for i in 0..20_000u32 {
            if i > 0 {
                let mut next = vec![0.0; s];
                for p in 0..s {
                    for q in 0..s {
                        let u = if p == q { 1.0 } else { 0.0 } + g[p * s + q] / rate;
                        next[q] += v[p] * u;
                    }
                }
                v = next;
                log_w += (mean / i as f64).ln();
            }
            let w = log_w.exp();
            out.iter_mut().zip(&v).for_each(|(o, vi)| *o += w * vi);
            if i as f64 > mean + 50.0 * mean.sqrt() + 50.0 {
                break;
            }
        }
        out
    }

    #[test]
    fn kernel_rows_match_series() {
        let k = kernels(5, 3, 6, 2.0);
        for (a, x, t) in [(0, 5, 0.3), (3, 2, 1.7), (6, 1, 0.01), (2, 7, 12.5), (4, 0, 0.0)] {
            let mut v = vec![0.0; 8];
            v[x] = 1.0;
            k.propagate(a, &mut v, t, true);
            let want = reference_row(3, a, 6, 2.0, x, t);
            for (got, want) in v.iter().zip(&want) {
                assert!((got - want).abs() < 1e-12, "a={a} x={x} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn sampled_states_follow_kernel() {
        let k = kernels(4, 2, 5, 3.0);
        let mut rng = run_rng(3, 0);
        let (a, x, t) = (2, 1, 0.8);
        let want = reference_row(2, a, 5, 3.0, x, t);
        let draws = 200_000;
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            counts[k.sample(a, x, t, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(&want) {
            let freq = *c as f64 / draws as f64;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * sd + 1e-9, "{counts:?} vs {want:?}");
        }
    }

    #[test]
    fn bridge_follows_conditional_law() {
        let k = kernels(4, 2, 4, 2.0);
        let mut rng = run_rng(4, 0);
        let (a, x0, s, x1, t1) = (1, 0, 0.6, 3, 0.4);
        let f = reference_row(2, a, 4, 2.0, x0, s);
        let joint: Vec<f64> = (0..4).map(|y| f[y] * reference_row(2, a, 4, 2.0, y, t1)[x1]).collect();
        let total: f64 = joint.iter().sum();
        let draws = 100_000;
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            counts[k.bridge(a, x0, s, x1, t1, &mut rng)] += 1;
        }
        for (c, j) in counts.iter().zip(&joint) {
            let p = j / total;
            let freq = *c as f64 / draws as f64;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * sd + 1e-9, "{counts:?}");
        }
    }

    #[test]
    fn support_limits() {
        assert!(accelerated_supported(&SuperstarSpec::new(5, 200, 200).unwrap()));
        assert!(accelerated_supported(&SuperstarSpec::new(3, 2, 2).unwrap()));
        assert!(!accelerated_supported(&SuperstarSpec::new(12, 2, 2).unwrap()));
        assert!(!accelerated_supported(&SuperstarSpec::new(2, 2, 2).unwrap()));
        assert!(AcceleratedLumped::new(SuperstarSpec::new(9, 2, 2).unwrap(), Fitness::new(2.0).unwrap()).is_err());
    }

    #[test]
    fn absorbing_inputs() {
        let spec = SuperstarSpec::new(5, 3, 3).unwrap();
        let mut sim = AcceleratedLumped::new(spec, Fitness::new(2.0).unwrap()).unwrap();
        let mut rng = run_rng(1, 1);
        let out = sim.run(&LumpedSuperstarState::full(&spec), &mut rng, RunOptions::default()).unwrap();
        assert!(out.fixated());
        assert_eq!(out.steps, 0);
        let out = sim.run(&LumpedSuperstarState::empty(&spec), &mut rng, RunOptions::default()).unwrap();
        assert!(!out.fixated());
    }
}
