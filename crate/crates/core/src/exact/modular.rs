//! Exact full-chain solve by multi-modular elimination.
//!
//! The block elimination of the full chain is run once in the field of
//! integers modulo a word-sized prime and the solution is lifted
//! `p`-adically. Every state's value is recovered by rational
//! reconstruction once one probe value stops changing. The reconstructed
//! rationals are accepted only after they satisfy every original equation
//! exactly, so a wrong reconstruction can delay but never corrupt the
//! result.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::full::{check_graph, popcount_levels, FullSolution};
use super::rational::Rational;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Primes tried for a nonsingular factorisation before giving up.
const MAX_PRIMES: usize = 1_000;

/// Lifting steps before giving up.
const MAX_LIFTS: usize = 1_000_000;

/// Deterministic Miller-Rabin for 32-bit inputs.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        let mut x = pow_mod(a % n, d, n);
        if x == 0 || x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = x * x % n;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// Primes are kept below `2^28` so that 255 products of reduced residues
/// can be summed in a `u64` before reducing.
const PRIME_BITS: u32 = 28;
const LAZY_TERMS: usize = 255;

/// Primes below `2^PRIME_BITS`, in decreasing order.
fn primes() -> impl Iterator<Item = u64> {
    (1u64 << 20..1u64 << PRIME_BITS).rev().filter(|&n| is_prime(n))
}

#[inline]
fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn big_mod(x: &BigInt, p: u64) -> u64 {
    x.mod_floor(&BigInt::from(p)).to_u64().expect("residue fits")
}

/// Equation of one transient state, scaled to integer coefficients:
/// `diag x_S - sum coef x_T = rhs`, where `T` ranges over transient
/// neighbours and `rhs` collects the weight into the all-mutant state.
#[derive(Debug, Clone, Default)]
struct IntRow {
    diag: BigInt,
    off: Vec<(usize, BigInt)>,
    rhs: BigInt,
}

fn integer_rows(graph: &DirectedGraph, r: &Rational) -> Vec<IntRow> {
    let n = graph.vertex_count();
    let full = (1usize << n) - 1;
    let inv_deg: Vec<Rational> = (0..n)
        .map(|u| Rational::new(BigInt::one(), BigInt::from(graph.out_degree(u))))
        .collect();
    (0..=full)
        .map(|mask| {
            if mask == 0 || mask == full {
                return IntRow::default();
            }
            let mut flips: Vec<(usize, Rational)> = Vec::new();
            for v in 0..n {
                let v_mutant = mask >> v & 1 == 1;
                let mut w = Rational::zero();
                for &u in graph.in_neighbors(v) {
                    let u = u as usize;
                    let u_mutant = mask >> u & 1 == 1;
                    if u_mutant != v_mutant {
                        w += if u_mutant { r * &inv_deg[u] } else { inv_deg[u].clone() };
                    }
                }
                if !w.is_zero() {
                    flips.push((mask ^ 1 << v, w));
                }
            }
            let scale = flips.iter().fold(BigInt::one(), |acc, (_, w)| acc.lcm(w.denom()));
            let mut row = IntRow::default();
            for (target, w) in flips {
                let c = w.numer() * (&scale / w.denom());
                row.diag += &c;
                if target == full {
                    row.rhs += c;
                } else if target != 0 {
                    row.off.push((target, c));
                }
            }
            row
        })
        .collect()
}

/// Solves `a x = b` modulo `p` for all columns of `b`, leaving the
/// solution in `b`; `None` when `a` is singular modulo `p`. Updates are
/// accumulated unreduced for up to [`LAZY_TERMS`] pivots.
fn solve_mod(a: Vec<Vec<u64>>, b: &mut [Vec<u64>], p: u64) -> Option<()> {
    let n = a.len();
    let mut aug: Vec<Vec<u64>> = a
        .into_iter()
        .zip(b.iter())
        .map(|(mut row, rhs)| {
            row.extend_from_slice(rhs);
            row
        })
        .collect();
    let mut pending = 0;
    for k in 0..n {
        for row in &mut aug[k..] {
            row[k] %= p;
        }
        let pivot = (k..n).find(|&i| aug[i][k] != 0)?;
        aug.swap(k, pivot);
        let inv = inv_mod(aug[k][k], p);
        for v in &mut aug[k][k..] {
            *v = *v % p * inv % p;
        }
        let (done, rest) = aug.split_at_mut(k + 1);
        let pivot_row = &done[k];
        for row in rest.iter_mut() {
            let f = row[k];
            if f == 0 {
                continue;
            }
            let g = p - f;
            row[k] = 0;
            for (x, y) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *x += g * y;
            }
        }
        pending += 1;
        if pending == LAZY_TERMS {
            for row in rest.iter_mut() {
                row[k + 1..].iter_mut().for_each(|v| *v %= p);
            }
            pending = 0;
        }
    }
    let c = b.first().map_or(0, Vec::len);
    for k in (0..n).rev() {
        let mut acc: Vec<u64> = aug[k][n..].to_vec();
        let mut terms = 0;
        for j in k + 1..n {
            let coef = aug[k][j];
            if coef == 0 {
                continue;
            }
            let g = p - coef;
            for (x, y) in acc.iter_mut().zip(&b[j]) {
                *x += g * y;
            }
            terms += 1;
            if terms == LAZY_TERMS {
                acc.iter_mut().for_each(|v| *v %= p);
                terms = 0;
            }
        }
        for (t, v) in acc.into_iter().enumerate().take(c) {
            b[k][t] = v % p;
        }
    }
    Some(())
}

/// Block factorisation of the transient equations modulo `p`, level by
/// level from the top: `x_l = H_l x_(l-1) + g_l` with
/// `g_l = M_l^-1 (rhs_l + Up_l g_(l+1))`.
struct ModFactor {
    p: u64,
    levels: Vec<Vec<u64>>,
    /// Per level: `M_l^-1`, `H_l`, and the sparse coupling to level `l + 1`.
    blocks: Vec<Option<(Vec<Vec<u64>>, Vec<Vec<u64>>, Vec<Vec<(usize, u64)>>)>>,
}

impl ModFactor {
    fn new(n: usize, rows: &[IntRow], p: u64) -> Option<Self> {
        let (levels, index) = popcount_levels(n);
        let mut blocks: Vec<Option<(Vec<Vec<u64>>, Vec<Vec<u64>>, Vec<Vec<(usize, u64)>>)>> = vec![None; n + 1];
        for level in (1..n).rev() {
            let size = levels[level].len();
            let below = levels[level - 1].len();
            let mut a = vec![vec![0u64; size]; size];
            let mut b = vec![vec![0u64; below + size]; size];
            let mut up = vec![Vec::new(); size];
            for (i, &mask) in levels[level].iter().enumerate() {
                let row = &rows[mask as usize];
                a[i][i] = (a[i][i] + big_mod(&row.diag, p)) % p;
                for (target, c) in &row.off {
                    let c = big_mod(c, p);
                    let j = index[*target] as usize;
                    if target.count_ones() as usize + 1 == level {
                        b[i][j] = (b[i][j] + c) % p;
                    } else {
                        up[i].push((j, c));
                        let (_, h, _) = blocks[level + 1].as_ref().expect("upper level factored first");
                        for (x, y) in a[i].iter_mut().zip(&h[j]) {
                            *x = (*x + (p - c) * y) % p;
                        }
                    }
                }
                b[i][below + i] = 1;
            }
            solve_mod(a, &mut b, p)?;
            let minv = b.iter().map(|row| row[below..].to_vec()).collect();
            let h = b.into_iter().map(|mut row| {
                row.truncate(below);
                row
            });
            blocks[level] = Some((minv, h.collect(), up));
        }
        Some(ModFactor { p, levels, blocks })
    }

    /// Solves the transient equations for right-hand side `rhs` (indexed
    /// by state) modulo `p`.
    fn solve(&self, rhs: &[u64]) -> Vec<u64> {
        let p = self.p;
        let n = self.levels.len() - 1;
        let mut g: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
        for level in (1..n).rev() {
            let (minv, _, up) = self.blocks[level].as_ref().expect("factored");
            let v: Vec<u64> = self.levels[level]
                .iter()
                .zip(up)
                .map(|(&mask, coupling)| {
                    coupling
                        .iter()
                        .fold(rhs[mask as usize], |acc, &(j, c)| (acc + c * g[level + 1][j]) % p)
                })
                .collect();
            g[level] = minv
                .iter()
                .map(|row| lazy_dot(row, &v, p))
                .collect();
        }
        let mut x = vec![0u64; rhs.len()];
        let mut prev: Vec<u64> = vec![0];
        for level in 1..n {
            let (_, h, _) = self.blocks[level].as_ref().expect("factored");
            let cur: Vec<u64> = h
                .iter()
                .zip(&g[level])
                .map(|(row, &gi)| (lazy_dot(row, &prev, p) + gi) % p)
                .collect();
            for (&mask, &v) in self.levels[level].iter().zip(&cur) {
                x[mask as usize] = v;
            }
            prev = cur;
        }
        x
    }
}

/// `sum a_i b_i mod p` for reduced residues, reducing every
/// [`LAZY_TERMS`] products.
fn lazy_dot(a: &[u64], b: &[u64], p: u64) -> u64 {
    a.chunks(LAZY_TERMS)
        .zip(b.chunks(LAZY_TERMS))
        .fold(0u64, |acc, (x, y)| {
            let s: u64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
            (acc + s % p) % p
        })
}

/// Smallest rational congruent to `a` modulo `m` with numerator and
/// denominator below `sqrt(m / 2)`.
fn reconstruct(a: &BigInt, m: &BigInt) -> Option<Rational> {
    let bound = (m / 2u32).sqrt();
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound || !r1.gcd(&t1).is_one() {
        return None;
    }
    Some(Rational::new(r1, t1))
}

/// Whether `values` satisfy every integer equation exactly.
fn satisfies(rows: &[IntRow], values: &[Rational]) -> bool {
    let first = values[0].denom().clone();
    let common = if values.iter().all(|v| *v.denom() == first) {
        first
    } else {
        values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
    };
    let scaled: Vec<BigInt> = values.iter().map(|v| v.numer() * (&common / v.denom())).collect();
    let full = values.len() - 1;
    (1..full).all(|mask| {
        let row = &rows[mask];
        let lhs = row
            .off
            .iter()
            .fold(&row.diag * &scaled[mask], |acc, (t, c)| acc - c * &scaled[*t]);
        lhs == &row.rhs * &common
    })
}

/// Exact fixation probabilities of every state of the full chain.
///
/// The transient equations are factored once modulo a prime `p` and the
/// solution is lifted `p`-adically (Dixon's method): with residual
/// `e_0 = b`, each step solves `A y_i = e_i mod p` and sets
/// `e_(i+1) = (e_i - A y_i) / p`, so `sum y_i p^i` solves the system
/// modulo `p^k`. Every state's value is then recovered by rational
/// reconstruction and accepted only if it satisfies every equation
/// exactly.
pub fn solve_full_chain_exact(graph: &DirectedGraph, r: &Rational, cap: usize) -> Result<FullSolution<Rational>> {
    let n = check_graph(graph, cap, "exact")?;
    if !r.is_positive() {
        return Err(Error::InvalidParameter("fitness must be positive".into()));
    }
    let states = 1usize << n;
    let full = states - 1;
    let rows = integer_rows(graph, r);
    let factor = primes()
        .take(MAX_PRIMES)
        .find_map(|p| ModFactor::new(n, &rows, p))
        .ok_or(Error::SingularSystem { column: 0 })?;
    let p = factor.p;
    let probe = 1usize;
    let mut residual: Vec<BigInt> = rows.iter().map(|row| row.rhs.clone()).collect();
    let mut digits: Vec<BigInt> = vec![BigInt::zero(); states];
    let mut power = BigInt::one();
    let mut last_probe: Option<Rational> = None;
    let mut next_check = 1usize;
    for step in 1..=MAX_LIFTS {
        let e: Vec<u64> = residual.iter().map(|x| big_mod(x, p)).collect();
        let y = factor.solve(&e);
        for mask in 1..full {
            let row = &rows[mask];
            let ay = row
                .off
                .iter()
                .fold(&row.diag * y[mask], |acc, (t, c)| acc - c * y[*t]);
            let diff = &residual[mask] - ay;
            debug_assert!(diff.is_multiple_of(&BigInt::from(p)));
            residual[mask] = diff / p;
            if y[mask] != 0 {
                digits[mask] += &power * y[mask];
            }
        }
        power *= p;
        if step < next_check {
            continue;
        }
        next_check = step + (step / 8).max(1);
        let guess = reconstruct(&digits[probe], &power);
        if guess.is_some() && guess == last_probe {
            let mut values: Vec<Rational> = Vec::with_capacity(states);
            values.push(Rational::zero());
            for x in &digits[1..full] {
                match reconstruct(x, &power) {
                    Some(v) => values.push(v),
                    None => break,
                }
            }
            if values.len() == full {
                values.push(Rational::one());
                if satisfies(&rows, &values) {
                    return Ok(FullSolution::new(n, values));
                }
            }
        }
        last_probe = guess;
    }
    Err(Error::SingularSystem { column: 0 })
}
