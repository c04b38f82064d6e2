//! Exact and closed-form fixation quantities.

pub mod elimination;
mod full;
mod modular;
pub mod rational;
mod restricted;
mod sparse;
mod theorem;

pub use full::{
    exact_fixation_full, exact_fixation_full_with_cap, float_fixation_full, float_fixation_full_with_cap,
    solve_full_chain, FullSolution, Initial, DEFAULT_EXACT_CAP, DEFAULT_FLOAT_CAP, DENSE_FLOAT_LIMIT,
    RESIDUAL_TOLERANCE,
};
pub use modular::solve_full_chain_exact;
pub use rational::{parse_rational, Rational};
pub use restricted::{
    build_restricted_system, restricted_equations, restricted_q, solve_restricted, LinearSystem,
    RestrictedEquation, RestrictedParams, RestrictedSolution, RestrictedState, Site, Term, WeightKind,
};
pub use theorem::{
    classic_moran, classic_moran_f64, crossover_poly, crossover_root, j_of_r, j_of_r_f64, limit_h, limit_h_f64,
    p_fail, theorem_bound, CROSSOVER_TOLERANCE,
};
