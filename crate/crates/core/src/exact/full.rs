use super::elimination::{solve_dense, Matrix, Scalar};
use super::rational::Rational;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, VertexId};

pub const DEFAULT_EXACT_CAP: usize = 12;
pub const DEFAULT_FLOAT_CAP: usize = 16;
/// Largest graph solved by dense block elimination in float mode; larger
/// ones use the iterative solver.
pub const DENSE_FLOAT_LIMIT: usize = 12;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Which single-mutant start to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initial {
    /// Average over all `n` starting vertices.
    #[default]
    Uniform,
    Vertex(VertexId),
}

/// Fixation probability from every occupancy state, indexed by bitmask
/// (bit `v` set when vertex `v` is a mutant).
#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> FullSolution<T> {
    pub(super) fn new(n: usize, values: Vec<T>) -> Self {
        FullSolution { n, values }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn from_mask(&self, mask: u64) -> &T {
        &self.values[mask as usize]
    }

    pub fn from_vertex(&self, v: usize) -> &T {
        &self.values[1usize << v]
    }

    pub fn per_vertex(&self) -> Vec<T> {
        (0..self.n).map(|v| self.from_vertex(v).clone()).collect()
    }

    pub fn uniform(&self) -> T {
        let sum = (0..self.n).fold(T::zero(), |acc, v| acc.add(self.from_vertex(v)));
        sum.div(&T::from_u64(self.n as u64))
    }

    pub fn initial(&self, initial: Initial) -> Result<T> {
        match initial {
            Initial::Uniform => Ok(self.uniform()),
            Initial::Vertex(v) if v.0 < self.n => Ok(self.from_vertex(v.0).clone()),
            Initial::Vertex(v) => Err(Error::InvalidParameter(format!("vertex {v} out of range"))),
        }
    }
}

/// Effective transitions out of a transient state: for every vertex `v`
/// that some opposite-type in-neighbour can overwrite, the weight
/// `sum fitness(u) / outdeg(u)` over such in-neighbours `u`.
struct Transitions<T> {
    down: Vec<(usize, T)>,
    up: Vec<(usize, T)>,
    total: T,
}

fn transitions<T: Scalar>(graph: &DirectedGraph, r: &T, inv_deg: &[T], mask: u64) -> Transitions<T> {
    let n = graph.vertex_count();
    let mut down = Vec::new();
    let mut up = Vec::new();
    let mut total = T::zero();
    for v in 0..n {
        let v_mutant = mask >> v & 1 == 1;
        let mut w = T::zero();
        for &u in graph.in_neighbors(v) {
            let u = u as usize;
            let u_mutant = mask >> u & 1 == 1;
            if u_mutant != v_mutant {
                let term = if u_mutant { r.mul(&inv_deg[u]) } else { inv_deg[u].clone() };
                w = w.add(&term);
            }
        }
        if !w.is_zero() {
            total = total.add(&w);
            if v_mutant {
                down.push((v, w));
            } else {
                up.push((v, w));
            }
        }
    }
    Transitions { down, up, total }
}

pub(super) fn check_graph(graph: &DirectedGraph, cap: usize, mode: &'static str) -> Result<usize> {
    let n = graph.vertex_count();
    if n > cap {
        return Err(Error::CapExceeded { n, cap, mode });
    }
    if n > 62 {
        return Err(Error::CapExceeded { n, cap: 62, mode });
    }
    if n == 0 {
        return Err(Error::InvalidGraph("empty graph".into()));
    }
    if let Some(v) = (0..n).find(|&v| graph.out_degree(v) == 0) {
        return Err(Error::InvalidGraph(format!("vertex {v} has no out-neighbours")));
    }
    Ok(n)
}

/// States grouped by mutant count, and each state's position in its group.
pub(super) fn popcount_levels(n: usize) -> (Vec<Vec<u64>>, Vec<u32>) {
    let states = 1usize << n;
    let mut levels: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
    let mut index = vec![0u32; states];
    for mask in 0..states as u64 {
        let level = &mut levels[mask.count_ones() as usize];
        index[mask as usize] = level.len() as u32;
        level.push(mask);
    }
    (levels, index)
}

/// Solves the absorbing chain over all `2^n` occupancy states.
///
/// States are grouped by mutant count. Effective transitions change the
/// count by one, so the system is block tridiagonal over these levels and
/// is eliminated from the top level down: level `i` is expressed as
/// `x_i = H_i x_{i-1} + h_i` using the already reduced level above, until
/// the all-resident state pins level 1. Each block solve is dense.
pub fn solve_full_chain<T: Scalar>(graph: &DirectedGraph, r: &T, cap: usize) -> Result<FullSolution<T>> {
    let mode = if T::INEXACT { "float" } else { "exact" };
    let n = check_graph(graph, cap, mode)?;
    if !(r.to_f64() > 0.0) {
        return Err(Error::InvalidParameter("fitness must be positive".into()));
    }
    let states = 1usize << n;
    let full = (states - 1) as u64;
    let (levels, index) = popcount_levels(n);
    let inv_deg: Vec<T> = (0..n)
        .map(|u| T::one().div(&T::from_u64(graph.out_degree(u) as u64)))
        .collect();

    // Reduced forms per level, filled from level n-1 down to 1.
    let mut reduced: Vec<Option<(Matrix<T>, Vec<T>)>> = vec![None; n + 1];
    let mut rows_of: Vec<Vec<Transitions<T>>> = (0..=n).map(|_| Vec::new()).collect();
    for level in (1..n).rev() {
        let size = levels[level].len();
        let below = levels[level - 1].len();
        let mut m = Matrix::zeros(size, size);
        let mut rhs = Matrix::zeros(size, below + 1);
        let trans: Vec<Transitions<T>> = levels[level]
            .iter()
            .map(|&mask| transitions(graph, r, &inv_deg, mask))
            .collect();
        for (i, (&mask, t)) in levels[level].iter().zip(&trans).enumerate() {
            m.set(i, i, t.total.clone());
            for (v, w) in &t.down {
                let j = index[(mask & !(1u64 << v)) as usize] as usize;
                rhs.set(i, j, w.clone());
            }
            let mut constant = T::zero();
            for (v, w) in &t.up {
                let target = mask | 1u64 << v;
                if target == full {
                    constant = constant.add(w);
                    continue;
                }
                let j = index[target as usize] as usize;
                let (h_mat, h_vec) = reduced[level + 1].as_ref().expect("upper level reduced first");
                constant = constant.add(&w.mul(&h_vec[j]));
                let row = m.row_mut(i);
                for (c, hv) in h_mat.row(j).iter().enumerate() {
                    if !hv.is_zero() {
                        row[c] = row[c].sub(&w.mul(hv));
                    }
                }
            }
            rhs.set(i, below, constant);
        }
        let solved = solve_dense(m, rhs)?;
        let mut h_mat = Matrix::zeros(size, below);
        let mut h_vec = Vec::with_capacity(size);
        for i in 0..size {
            for j in 0..below {
                h_mat.set(i, j, solved.get(i, j).clone());
            }
            h_vec.push(solved.get(i, below).clone());
        }
        reduced[level] = Some((h_mat, h_vec));
        rows_of[level] = trans;
    }

    let mut values = vec![T::zero(); states];
    values[full as usize] = T::one();
    for level in 1..n {
        let (h_mat, h_vec) = reduced[level].as_ref().expect("all levels reduced");
        for (i, &mask) in levels[level].iter().enumerate() {
            let mut x = h_vec[i].clone();
            for (j, &lower) in levels[level - 1].iter().enumerate() {
                let hv = h_mat.get(i, j);
                if !hv.is_zero() {
                    x = x.add(&hv.mul(&values[lower as usize]));
                }
            }
            values[mask as usize] = x;
        }
    }

    // Residual of the original equations: total·x_S = sum w·x_S'.
    let mut worst = 0.0f64;
    for level in 1..n {
        for (&mask, t) in levels[level].iter().zip(&rows_of[level]) {
            let mut acc = t.total.mul(&values[mask as usize]);
            for (v, w) in t.down.iter().chain(&t.up) {
                acc = acc.sub(&w.mul(&values[(mask ^ 1u64 << v) as usize]));
            }
            let scaled = acc.to_f64().abs() / t.total.to_f64();
            if T::INEXACT {
                worst = worst.max(scaled);
            } else if !acc.is_zero() {
                return Err(Error::ResidualTooLarge {
                    residual: scaled,
                    tolerance: 0.0,
                });
            }
        }
    }
    if T::INEXACT && !(worst < RESIDUAL_TOLERANCE) {
        return Err(Error::ResidualTooLarge {
            residual: worst,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(FullSolution { n, values })
}

/// Exact fixation probability over the full chain, solved modulo many
/// primes and reconstructed as a verified rational.
pub fn exact_fixation_full(graph: &DirectedGraph, r: &Rational, initial: Initial) -> Result<Rational> {
    exact_fixation_full_with_cap(graph, r, initial, DEFAULT_EXACT_CAP)
}

pub fn exact_fixation_full_with_cap(graph: &DirectedGraph, r: &Rational, initial: Initial, cap: usize) -> Result<Rational> {
    super::modular::solve_full_chain_exact(graph, r, cap)?.initial(initial)
}

/// Floating-point fixation probability over the full chain, with a residual
/// check on the solved system.
pub fn float_fixation_full(graph: &DirectedGraph, r: f64, initial: Initial) -> Result<f64> {
    float_fixation_full_with_cap(graph, r, initial, DEFAULT_FLOAT_CAP)
}

pub fn float_fixation_full_with_cap(graph: &DirectedGraph, r: f64, initial: Initial, cap: usize) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("fitness must be positive and finite, got {r}")));
    }
    let n = check_graph(graph, cap, "float")?;
    if n <= DENSE_FLOAT_LIMIT {
        return solve_full_chain(graph, &r, cap)?.initial(initial);
    }
    let (solution, residual) = super::sparse::solve_full_chain_sparse(graph, r)?;
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    solution.initial(initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::rational;
    use crate::graph::{build_complete, build_star, DirectedGraph};

    #[test]
    fn complete_three() {
        let g = build_complete(3).unwrap();
        assert_eq!(exact_fixation_full(&g, &rational(2, 1), Initial::Uniform).unwrap(), rational(4, 7));
        assert_eq!(exact_fixation_full(&g, &rational(1, 1), Initial::Uniform).unwrap(), rational(1, 3));
        assert!((float_fixation_full(&g, 2.0, Initial::Uniform).unwrap() - 4.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn two_vertices() {
        let g = build_complete(2).unwrap();
        let sol = solve_full_chain(&g, &rational(2, 1), 12).unwrap();
        assert_eq!(*sol.from_vertex(0), rational(2, 3));
        assert_eq!(*sol.from_mask(0), rational(0, 1));
        assert_eq!(*sol.from_mask(3), rational(1, 1));
    }

    #[test]
    fn caps_and_bad_graphs() {
        let g = build_complete(13).unwrap();
        assert!(matches!(
            exact_fixation_full(&g, &rational(2, 1), Initial::Uniform),
            Err(Error::CapExceeded { n: 13, cap: 12, .. })
        ));
        assert!(matches!(
            float_fixation_full(&build_complete(17).unwrap(), 2.0, Initial::Uniform),
            Err(Error::CapExceeded { n: 17, cap: 16, .. })
        ));
        let sink = DirectedGraph::from_arcs(2, &[(0, 1)]).unwrap();
        assert!(matches!(float_fixation_full(&sink, 2.0, Initial::Uniform), Err(Error::InvalidGraph(_))));
        assert!(float_fixation_full(&build_complete(3).unwrap(), 0.0, Initial::Uniform).is_err());
        assert!(exact_fixation_full(&build_complete(3).unwrap(), &rational(2, 1), Initial::Vertex(VertexId(3))).is_err());
    }

    #[test]
    fn star_between_bounds() {
        let g = build_star(7).unwrap();
        let p = float_fixation_full(&g, 2.0, Initial::Uniform).unwrap();
        assert!(p > 0.5 && p < 0.75, "{p}");
        let q = exact_fixation_full(&g, &rational(2, 1), Initial::Uniform).unwrap();
        assert!((crate::exact::rational::to_f64(&q) - p).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_mutant_set() {
        let g = build_star(5).unwrap();
        let sol = solve_full_chain(&g, &2.0, 14).unwrap();
        for mask in 0u64..32 {
            for v in 0..5 {
                let bigger = mask | 1 << v;
                assert!(*sol.from_mask(bigger) >= *sol.from_mask(mask) - 1e-12);
            }
        }
    }
}
