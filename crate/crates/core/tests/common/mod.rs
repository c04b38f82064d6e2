//! Oracles shared by the acceptance and property suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use moran_core::engine::{
    EventDrivenEngine, Fitness, LumpedEngine, LumpedSuperstarState, NaiveEngine, OccupancyState, RunOptions,
};
use moran_core::exact::rational::{from_f64, rational};
use moran_core::exact::{restricted_equations, RestrictedParams, RestrictedState, Rational};
use moran_core::graph::{build_complete, build_star, build_superstar, DirectedGraph, SuperstarSpec};
use moran_core::rng::run_rng;
use num_traits::{One, Zero};
use rand::Rng;

/// The restricted-chain equations as printed: state, numerator, denominator.
/// `F_state == numerator / denominator`.
pub const APPENDIX: [(&str, &str, &str); 31] = [
    ("X", "XonO * FXO", "VoffX + XonO"),
    ("O", "OonP * FOP", "OonP + XoffO"),
    ("P", "PonQ * FPQ", "PonQ + OoffP"),
    ("Q", "QonV * FQV", "QonV + PoffQ"),
    ("V", "Vgo", "Vgo + QoffV"),
    ("XO", "OonP * FXOP + VoffX * FO + otherXoffO* FX", "OonP + VoffX + otherXoffO"),
    ("OP", "PonQ * FOPQ + XoffO * FP", "PonQ + XoffO"),
    ("PQ", "QonV * FPQV + OoffP * FQ", "QonV + OoffP"),
    ("QV", "PoffQ * FV + otherQoffV * FQ + Vgo", "PoffQ + otherQoffV + Vgo"),
    ("VX", "QoffV * FX + XonO * FVXO + Vgo", "QoffV + XonO + Vgo"),
    ("XP", "VoffX * FP + XonO * FXOP + OoffP * FX + PonQ * FPQX", "VoffX + XonO + OoffP + PonQ"),
    ("OQ", "XoffO * FQ + OonP * FOPQ + PoffQ * FO + QonV * FQVO", "XoffO + OonP + PoffQ + QonV"),
    ("PV", "OoffP * FV + PonQ * FPQV + QoffV * FP + Vgo", "OoffP + PonQ + QoffV + Vgo"),
    ("QX", "PoffQ * FX + QonV * FQVX + VoffX * FQ + XonO * FXOQ", "PoffQ + QonV + VoffX + XonO"),
    ("VO", "QoffV * FO + Vgo + XoffO * FV + OonP * FOPV", "QoffV + Vgo + XoffO + OonP"),
    ("XOP", "VoffX *FOP + otherXoffO * FXP + PonQ * FNV", "VoffX + otherXoffO + PonQ"),
    ("OPQ", "XoffO * FPQ + QonV * FNX", "XoffO + QonV"),
    ("PQV", "OoffP *FQV + otherQoffV * FPQ + Vgo", "OoffP + otherQoffV + Vgo"),
    ("QVX", "PoffQ *FVX + otherQoffV * FQX + Vgo + XonO * FNP", "PoffQ + otherQoffV + Vgo + XonO"),
    ("VXO", "QoffV * FXO + Vgo + otherXoffO * FVX + OonP * FNQ", "QoffV + Vgo + otherXoffO + OonP"),
    (
        "XOQ",
        "VoffX * FOQ + otherXoffO * FQX + OonP * FNV + PoffQ * FXO + QonV * FNP",
        "VoffX + otherXoffO + OonP + PoffQ + QonV",
    ),
    ("OPV", "XoffO * FPV + PonQ * FNX + QoffV * FOP + Vgo", "XoffO + PonQ + QoffV + Vgo"),
    ("PQX", "OoffP * FQX + QonV * FNO + VoffX * FPQ + XonO * FNV", "OoffP + QonV + VoffX + XonO"),
    (
        "QVO",
        "PoffQ * FVO + otherQoffV * FOQ + Vgo + XoffO * FQV + OonP * FNX",
        "PoffQ + otherQoffV + Vgo + XoffO + OonP",
    ),
    (
        "VXP",
        "QoffV * FXP + Vgo + XonO * FNQ + OoffP * FVX + PonQ * FNO",
        "QoffV + Vgo + XonO + OoffP + PonQ",
    ),
    ("NX", "Vgo + XoffO * FPQV + otherQoffV * FOPQ", "Vgo + XoffO + otherQoffV"),
    ("NO", "Vgo + XonO * Fall + OoffP *FQVX + otherQoffV * FPQX", "Vgo + XonO + OoffP + otherQoffV"),
    (
        "NP",
        "otherQoffV * FXOQ + otherXoffO * FQVX + OonP * Fall + PoffQ *FVXO + Vgo",
        "otherQoffV + otherXoffO + OonP + PoffQ + Vgo",
    ),
    ("NQ", "QoffV * FXOP + otherXoffO * FVXP + PonQ * Fall + Vgo", "QoffV + otherXoffO + PonQ + Vgo"),
    ("NV", "QonV * Fall + VoffX *FOPQ + otherXoffO * FPQX", "QonV + VoffX + otherXoffO"),
    ("all", "otherQoffV * FNV + otherXoffO * FNO + Vgo", "otherQoffV + otherXoffO + Vgo"),
];

/// Weight definitions as printed.
pub fn appendix_weight(name: &str, l: &Rational, m: &Rational, r: &Rational) -> Rational {
    let one = Rational::one();
    match name {
        "XonO" | "OonP" | "PonQ" | "QonV" | "Vgo" => r.clone(),
        "XoffO" => m.clone(),
        "OoffP" | "PoffQ" => one,
        "QoffV" => l.clone(),
        "VoffX" => one / (l * m),
        "otherXoffO" => m - one,
        "otherQoffV" => l - one,
        _ => panic!("unknown weight {name}"),
    }
}

/// `(weight, Some(variable))` or `(weight, None)` for a constant summand.
fn numerator_terms(text: &str) -> Vec<(String, Option<String>)> {
    text.split('+')
        .map(|term| {
            let mut parts = term.split('*').map(str::trim);
            let weight = parts.next().expect("weight").to_string();
            let var = parts.next().map(|v| v.strip_prefix('F').expect("variable").to_string());
            (weight, var)
        })
        .collect()
}

fn denominator_terms(text: &str) -> Vec<String> {
    text.split('+').map(|t| t.trim().to_string()).collect()
}

/// Differences between the generated equations and the printed ones; empty
/// when they agree term for term.
pub fn appendix_mismatches() -> Vec<String> {
    let generated = restricted_equations();
    let mut problems = Vec::new();
    if generated.len() != APPENDIX.len() {
        problems.push(format!("{} generated equations, 31 printed", generated.len()));
    }
    for ((name, num, den), eq) in APPENDIX.iter().zip(&generated) {
        let state = RestrictedState::parse(name).expect("printed state name");
        if eq.state != state {
            problems.push(format!("order: printed F{name}, generated F{}", eq.state));
            continue;
        }
        let mut want_num: Vec<(String, Option<RestrictedState>)> = numerator_terms(num)
            .into_iter()
            .map(|(w, v)| (w, v.map(|v| RestrictedState::parse(&v).expect("printed variable"))))
            .collect();
        let mut got_num: Vec<(String, Option<RestrictedState>)> = eq
            .terms
            .iter()
            .filter(|t| t.target.is_none_or(|s| !s.is_empty()))
            .map(|t| (t.kind.name().to_string(), t.target))
            .collect();
        want_num.sort();
        got_num.sort();
        if want_num != got_num {
            problems.push(format!("F{name} numerator: printed {want_num:?}, generated {got_num:?}"));
        }
        let mut want_den = denominator_terms(den);
        let mut got_den: Vec<String> = eq.terms.iter().map(|t| t.kind.name().to_string()).collect();
        want_den.sort();
        got_den.sort();
        if want_den != got_den {
            problems.push(format!("D{name}: printed {want_den:?}, generated {got_den:?}"));
        }
    }
    problems
}

/// Gauss-Jordan elimination over the rationals.
pub fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Vec<Rational> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !a[i][col].is_zero()).expect("nonsingular");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in col..n {
                    let t = &f * &a[col][j];
                    a[i][j] -= t;
                }
                let t = &f * &b[col];
                b[i] -= t;
            }
        }
    }
    b
}

/// Solves the printed system directly, returning `F` by state name.
pub fn solve_appendix(l: &Rational, m: &Rational, r: &Rational) -> BTreeMap<String, Rational> {
    let names: Vec<&str> = APPENDIX.iter().map(|e| e.0).collect();
    let col = |v: &str| names.iter().position(|&x| x == v).expect("printed variable");
    let n = names.len();
    let mut a = vec![vec![Rational::zero(); n]; n];
    let mut b = vec![Rational::zero(); n];
    for (i, (_, num, den)) in APPENDIX.iter().enumerate() {
        a[i][i] = denominator_terms(den)
            .iter()
            .fold(Rational::zero(), |acc, w| acc + appendix_weight(w, l, m, r));
        for (w, var) in numerator_terms(num) {
            let w = appendix_weight(&w, l, m, r);
            match var {
                Some(v) => a[i][col(&v)] -= w,
                None => b[i] += w,
            }
        }
    }
    let values = solve_rational(a, b);
    names.into_iter().map(String::from).zip(values).collect()
}

pub fn restricted_params(l: &Rational, m: &Rational, r: &Rational) -> RestrictedParams {
    RestrictedParams::new(l.clone(), m.clone(), r.clone()).expect("valid parameters")
}

/// Exact weight of each effective transition of the full chain out of
/// `mask`, keyed by the lumped image of the target.
fn full_chain_weights(
    spec: &SuperstarSpec,
    graph: &DirectedGraph,
    r: &Rational,
    mask: u64,
) -> BTreeMap<LumpedSuperstarState, Rational> {
    let n = graph.vertex_count();
    let mut out = BTreeMap::new();
    for v in 0..n {
        let v_mutant = mask >> v & 1 == 1;
        let mut w = Rational::zero();
        for &u in graph.in_neighbors(v) {
            let u = u as usize;
            if (mask >> u & 1 == 1) != v_mutant {
                let f = if v_mutant { Rational::one() } else { r.clone() };
                w += f / rational(graph.out_degree(u) as i64, 1);
            }
        }
        if !w.is_zero() {
            let target = OccupancyState::from_mask(n, mask ^ 1 << v);
            let key = LumpedSuperstarState::project(spec, &target).expect("superstar state");
            *out.entry(key).or_insert_with(Rational::zero) += w;
        }
    }
    out
}

/// Compares every lumped transition weight and probability with the
/// full-chain enumeration, over all non-absorbing states of the full graph.
/// Returns the number of states checked and a description of each
/// disagreement. `r` and `1 / (l m)` must be exact as floats.
pub fn lumped_transition_mismatches(spec: SuperstarSpec, r: &Rational) -> (usize, Vec<String>) {
    let graph = build_superstar(spec).expect("superstar");
    let n = graph.vertex_count();
    let rf = moran_core::exact::rational::to_f64(r);
    assert_eq!(from_f64(rf).unwrap(), *r, "r must be a float");
    let mut engine = LumpedEngine::new(spec, Fitness::new(rf).unwrap()).unwrap();
    let mut problems = Vec::new();
    let mut checked = 0;
    for mask in 1..(1u64 << n) - 1 {
        let occ = OccupancyState::from_mask(n, mask);
        let lumped = LumpedSuperstarState::project(&spec, &occ).unwrap();
        engine.reset(&lumped).unwrap();
        let mut got: BTreeMap<LumpedSuperstarState, Rational> = BTreeMap::new();
        for (event, w) in engine.events() {
            let mut next = engine.clone();
            next.apply(event).unwrap();
            *got.entry(next.state()).or_insert_with(Rational::zero) += from_f64(w).unwrap();
        }
        let want = full_chain_weights(&spec, &graph, r, mask);
        let total_got = got.values().fold(Rational::zero(), |a, b| a + b);
        let total_want = want.values().fold(Rational::zero(), |a, b| a + b);
        let probs = |m: &BTreeMap<LumpedSuperstarState, Rational>, t: &Rational| -> Vec<(LumpedSuperstarState, Rational)> {
            m.iter().map(|(k, v)| (k.clone(), v / t)).collect()
        };
        if got != want || probs(&got, &total_got) != probs(&want, &total_want) {
            problems.push(format!("mask {mask:#b}: lumped {got:?}, full chain {want:?}"));
        }
        if from_f64(engine.total_weight()).unwrap() != total_want {
            problems.push(format!("mask {mask:#b}: total weight {}", engine.total_weight()));
        }
        checked += 1;
    }
    (checked, problems)
}

/// A small strongly connected graph: complete, star or superstar.
pub fn small_graph(choice: u8, size: usize) -> (DirectedGraph, Option<SuperstarSpec>) {
    match choice % 3 {
        0 => (build_complete(2 + size % 7).unwrap(), None),
        1 => (build_star(3 + size % 7).unwrap(), None),
        _ => {
            let spec = SuperstarSpec::new(3 + size % 4, 1 + size % 3, 1 + size / 3 % 3).unwrap();
            (build_superstar(spec).unwrap(), Some(spec))
        }
    }
}

/// One event-driven step from `mask` must flip exactly the reported vertex.
pub fn check_event_step(graph: &DirectedGraph, r: f64, mask: u64, seed: u64) -> Result<(), String> {
    let n = graph.vertex_count();
    let start = OccupancyState::from_mask(n, mask);
    let mut engine = EventDrivenEngine::new(graph, &start, Fitness::new(r).unwrap()).map_err(|e| e.to_string())?;
    let v = engine.step(&mut run_rng(seed, 0)).map_err(|e| e.to_string())?;
    let after = engine.state().to_mask();
    if after != mask ^ 1 << v {
        return Err(format!("mask {mask:#b}: flipped {v} but reached {after:#b}"));
    }
    if !graph.in_neighbors(v).iter().any(|&u| (mask >> u & 1) != (mask >> v & 1)) {
        return Err(format!("mask {mask:#b}: {v} has no opposite-type in-neighbour"));
    }
    Ok(())
}

/// One naive step changes the mutant count by at most one, and only
/// through a vertex with an opposite-type in-neighbour.
pub fn check_naive_step(graph: &DirectedGraph, r: f64, mask: u64, seed: u64) -> Result<(), String> {
    let n = graph.vertex_count();
    let start = OccupancyState::from_mask(n, mask);
    let mut engine = NaiveEngine::new(graph, &start, Fitness::new(r).unwrap()).map_err(|e| e.to_string())?;
    let changed = engine.step(&mut run_rng(seed, 0)).map_err(|e| e.to_string())?;
    let diff = engine.state().to_mask() ^ mask;
    match (changed, diff.count_ones()) {
        (false, 0) => Ok(()),
        (true, 1) => {
            let v = diff.trailing_zeros() as usize;
            if graph.in_neighbors(v).iter().any(|&u| (mask >> u & 1) != (mask >> v & 1)) {
                Ok(())
            } else {
                Err(format!("mask {mask:#b}: {v} flipped without an opposite-type in-neighbour"))
            }
        }
        (c, d) => Err(format!("mask {mask:#b}: changed={c} but {d} vertices differ")),
    }
}

/// One lumped step changes the mutant count by exactly one.
pub fn check_lumped_step(spec: SuperstarSpec, r: f64, mask: u64, seed: u64) -> Result<(), String> {
    let n = spec.vertex_count();
    let occ = OccupancyState::from_mask(n, mask);
    let state = LumpedSuperstarState::project(&spec, &occ).map_err(|e| e.to_string())?;
    let mut engine = LumpedEngine::new(spec, Fitness::new(r).unwrap()).unwrap();
    engine.reset(&state).map_err(|e| e.to_string())?;
    let before = engine.mutant_count();
    engine.step(&mut run_rng(seed, 0)).map_err(|e| e.to_string())?;
    let after = engine.mutant_count();
    if before.abs_diff(after) != 1 || after != engine.state().mutant_count() {
        return Err(format!("mask {mask:#b}: mutant count {before} -> {after}"));
    }
    Ok(())
}

/// Runs every applicable engine from `mask` to absorption and checks that
/// the final state is absorbing and agrees with the reported outcome, and
/// that a rerun with the same seed repeats the outcome and step count.
pub fn check_absorption(graph: &DirectedGraph, spec: Option<SuperstarSpec>, r: f64, mask: u64, seed: u64) -> Result<(), String> {
    let n = graph.vertex_count();
    let fitness = Fitness::new(r).unwrap();
    let start = OccupancyState::from_mask(n, mask);
    let options = RunOptions { step_budget: Some(50_000_000) };
    let e = |e: moran_core::Error| e.to_string();
    let naive = |s: u64| -> Result<_, String> {
        let mut engine = NaiveEngine::new(graph, &start, fitness).map_err(e)?;
        let out = engine.run(&mut run_rng(s, 1), options).map_err(e)?;
        Ok((out, engine.into_state().mutant_count()))
    };
    let event = |s: u64| -> Result<_, String> {
        let mut engine = EventDrivenEngine::new(graph, &start, fitness).map_err(e)?;
        let out = engine.run(&mut run_rng(s, 2), options).map_err(e)?;
        Ok((out, engine.state().mutant_count()))
    };
    let mut outcomes = vec![("naive", naive(seed)?, naive(seed)?), ("event", event(seed)?, event(seed)?)];
    if let Some(spec) = spec {
        let lumped = |s: u64| -> Result<_, String> {
            let mut engine = LumpedEngine::new(spec, fitness).map_err(e)?;
            engine.reset(&LumpedSuperstarState::project(&spec, &start).map_err(e)?).map_err(e)?;
            let out = engine.run(&mut run_rng(s, 3), options).map_err(e)?;
            Ok((out, engine.mutant_count()))
        };
        outcomes.push(("lumped", lumped(seed)?, lumped(seed)?));
    }
    for (name, (out, final_count), again) in outcomes {
        let expected = if out.fixated() { n } else { 0 };
        if final_count != expected {
            return Err(format!("{name} from {mask:#b}: {out:?} with {final_count} mutants left"));
        }
        if (out, final_count) != again {
            return Err(format!("{name} from {mask:#b}: rerun gave {again:?}, first {out:?}"));
        }
    }
    Ok(())
}

/// Random non-absorbing mask on `n` vertices.
pub fn random_mask<R: Rng>(rng: &mut R, n: usize) -> u64 {
    let full = (1u64 << n) - 1;
    rng.random_range(1..full)
}
