//! Iterative float solver for the full chain on graphs too large for
//! dense block elimination.

use super::full::FullSolution;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Target max-norm of the iterative residual, well inside the acceptance
/// tolerance applied afterwards.
const ITERATION_TOLERANCE: f64 = 1e-13;

/// Iterations before a restart from the current iterate.
const RESTART: usize = 2_000;

/// Restarts before giving up.
const MAX_RESTARTS: usize = 20;

/// Jump-chain equations `x_S - sum p_ST x_T = p_S,full`, one row per
/// state; absorbing states keep an identity row with zero right-hand side.
struct JumpChain {
    starts: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    rhs: Vec<f64>,
}

impl JumpChain {
    fn new(graph: &DirectedGraph, r: f64) -> Self {
        let n = graph.vertex_count();
        let states = 1usize << n;
        let full = states - 1;
        let inv_deg: Vec<f64> = (0..n).map(|u| 1.0 / graph.out_degree(u) as f64).collect();
        let mut starts = Vec::with_capacity(states + 1);
        let mut targets = Vec::with_capacity(states * n / 2);
        let mut probs = Vec::with_capacity(states * n / 2);
        let mut rhs = vec![0.0; states];
        let mut weights: Vec<(usize, f64)> = Vec::with_capacity(n);
        starts.push(0);
        for mask in 0..states {
            if mask != 0 && mask != full {
                weights.clear();
                for v in 0..n {
                    let v_mutant = mask >> v & 1 == 1;
                    let w: f64 = graph
                        .in_neighbors(v)
                        .iter()
                        .map(|&u| u as usize)
                        .filter(|&u| (mask >> u & 1 == 1) != v_mutant)
                        .map(|u| if v_mutant { inv_deg[u] } else { r * inv_deg[u] })
                        .sum();
                    if w > 0.0 {
                        weights.push((mask ^ 1 << v, w));
                    }
                }
                let total: f64 = weights.iter().map(|(_, w)| w).sum();
                for &(target, w) in &weights {
                    if target == full {
                        rhs[mask] += w / total;
                    } else if target != 0 {
                        targets.push(target as u32);
                        probs.push(w / total);
                    }
                }
            }
            starts.push(targets.len());
        }
        JumpChain { starts, targets, probs, rhs }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let row = |s: usize| {
            let range = self.starts[s]..self.starts[s + 1];
            let off: f64 = self.targets[range.clone()]
                .iter()
                .zip(&self.probs[range])
                .map(|(&t, p)| p * x[t as usize])
                .sum();
            x[s] - off
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(s, o)| *o = row(s));
        }
        #[cfg(not(feature = "parallel"))]
        for (s, o) in out.iter_mut().enumerate() {
            *o = row(s);
        }
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.apply(x, out);
        let mut worst = 0.0f64;
        for (o, b) in out.iter_mut().zip(&self.rhs) {
            *o = b - *o;
            worst = worst.max(o.abs());
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves the full chain in floating point with restarted BiCGSTAB on the
/// jump-chain equations. The returned residual is the worst row of
/// `x_S - sum p_ST x_T - p_S,full`.
pub(super) fn solve_full_chain_sparse(graph: &DirectedGraph, r: f64) -> Result<(FullSolution<f64>, f64)> {
    let n = graph.vertex_count();
    let states = 1usize << n;
    let chain = JumpChain::new(graph, r);
    // Start from the neutral answer: the fraction of mutants.
    let mut x: Vec<f64> = (0..states).map(|s| s.count_ones() as f64 / n as f64).collect();
    x[states - 1] = 0.0;
    let mut res = vec![0.0; states];
    let mut p = vec![0.0; states];
    let mut v = vec![0.0; states];
    let mut s = vec![0.0; states];
    let mut t = vec![0.0; states];
    let mut worst = chain.residual(&x, &mut res);
    'restarts: for _ in 0..MAX_RESTARTS {
        if worst < ITERATION_TOLERANCE {
            break;
        }
        let shadow = res.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.fill(0.0);
        v.fill(0.0);
        for _ in 0..RESTART {
            let rho_next = dot(&shadow, &res);
            if rho_next == 0.0 || omega == 0.0 {
                break;
            }
            let beta = rho_next / rho * (alpha / omega);
            rho = rho_next;
            for i in 0..states {
                p[i] = res[i] + beta * (p[i] - omega * v[i]);
            }
            chain.apply(&p, &mut v);
            let denom = dot(&shadow, &v);
            if denom == 0.0 {
                break;
            }
            alpha = rho / denom;
            for i in 0..states {
                s[i] = res[i] - alpha * v[i];
            }
            if max_abs(&s) < ITERATION_TOLERANCE {
                for i in 0..states {
                    x[i] += alpha * p[i];
                }
                worst = chain.residual(&x, &mut res);
                continue 'restarts;
            }
            chain.apply(&s, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..states {
                x[i] += alpha * p[i] + omega * s[i];
                res[i] = s[i] - omega * t[i];
            }
            if max_abs(&res) < ITERATION_TOLERANCE {
                break;
            }
        }
        // Recompute the true residual to shed accumulated drift.
        worst = chain.residual(&x, &mut res);
    }
    if !worst.is_finite() {
        return Err(Error::ResidualTooLarge { residual: worst, tolerance: ITERATION_TOLERANCE });
    }
    x[states - 1] = 1.0;
    x[0] = 0.0;
    Ok((FullSolution::new(n, x), worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::full::solve_full_chain;
    use crate::exact::theorem::classic_moran_f64;
    use crate::graph::{build_complete, build_star, build_superstar, SuperstarSpec};

    #[test]
    fn agrees_with_dense_elimination() {
        let graphs = [
            build_star(9).unwrap(),
            build_superstar(SuperstarSpec::new(4, 2, 2).unwrap()).unwrap(),
            build_superstar(SuperstarSpec::new(3, 3, 2).unwrap()).unwrap(),
        ];
        for g in &graphs {
            for r in [0.4, 1.0, 2.5] {
                let dense = solve_full_chain(g, &r, 12).unwrap();
                let (sparse, residual) = solve_full_chain_sparse(g, r).unwrap();
                assert!(residual < 1e-12);
                for mask in 0..1u64 << g.vertex_count() {
                    assert!((dense.from_mask(mask) - sparse.from_mask(mask)).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn complete_graph_at_cap() {
        let g = build_complete(16).unwrap();
        for r in [0.5, 1.0, 3.0] {
            let (sol, _) = solve_full_chain_sparse(&g, r).unwrap();
            let want = classic_moran_f64(16, r);
            assert!((sol.uniform() - want).abs() < 1e-11, "r={r}");
        }
    }
}
