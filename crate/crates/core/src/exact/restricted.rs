//! The restricted chain for `k = 5` superstars.
//!
//! Start from one mutant on reservoir vertex `X` of some leaf. Until a
//! mutant centre is chosen to reproduce, mutants can only occupy `X`, the
//! leaf's chain `O → P → Q` and the centre `V`, so the process is a chain on
//! subsets of `{V, X, O, P, Q}`. `F_S` is the probability that the mutant
//! centre fires starting from mutant set `S`; the empty set has `F = 0`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::elimination::solve_bareiss;
use super::rational::Rational;
use crate::error::{Error, Result};

/// Vertices of the restricted chain, in the cyclic order `X → O → P → Q → V → X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    X,
    O,
    P,
    Q,
    V,
}

impl Site {
    pub const ALL: [Site; 5] = [Site::X, Site::O, Site::P, Site::Q, Site::V];

    fn bit(self) -> u8 {
        1 << self as u8
    }

    fn letter(self) -> char {
        match self {
            Site::X => 'X',
            Site::O => 'O',
            Site::P => 'P',
            Site::Q => 'Q',
            Site::V => 'V',
        }
    }

    fn from_letter(c: char) -> Option<Site> {
        Site::ALL.into_iter().find(|s| s.letter() == c)
    }

    fn next(self, steps: usize) -> Site {
        Site::ALL[(self as usize + steps) % 5]
    }
}

/// A set of mutant sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RestrictedState(u8);

impl RestrictedState {
    pub const EMPTY: RestrictedState = RestrictedState(0);
    pub const FULL: RestrictedState = RestrictedState(0b11111);

    pub fn from_sites(sites: &[Site]) -> Self {
        RestrictedState(sites.iter().fold(0, |m, s| m | s.bit()))
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > 0b11111 {
            return Err(Error::InvalidParameter(format!("bits {bits:#b} outside the five sites")));
        }
        Ok(RestrictedState(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, s: Site) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    fn with(self, s: Site) -> Self {
        RestrictedState(self.0 | s.bit())
    }

    fn without(self, s: Site) -> Self {
        RestrictedState(self.0 & !s.bit())
    }

    /// The 31 non-empty states: singletons, cyclically adjacent pairs, pairs
    /// two apart, runs of three, runs of three with a gap, complements of
    /// singletons, and the full set.
    pub fn ordered() -> Vec<RestrictedState> {
        let patterns: [&[usize]; 6] = [&[0], &[0, 1], &[0, 2], &[0, 1, 2], &[0, 1, 3], &[1, 2, 3, 4]];
        let mut out = Vec::with_capacity(31);
        for pattern in patterns {
            for start in Site::ALL {
                let sites: Vec<Site> = pattern.iter().map(|&d| start.next(d)).collect();
                out.push(RestrictedState::from_sites(&sites));
            }
        }
        out.push(RestrictedState::FULL);
        out
    }

    /// Parses names such as `X`, `QVO`, `NX` (all but `X`) or `all`.
    pub fn parse(name: &str) -> Result<Self> {
        if name == "all" {
            return Ok(RestrictedState::FULL);
        }
        let bad = || Error::Parse(format!("bad restricted state name {name:?}"));
        if let Some(rest) = name.strip_prefix('N') {
            let mut chars = rest.chars();
            let site = chars.next().and_then(Site::from_letter).ok_or_else(bad)?;
            if chars.next().is_some() {
                return Err(bad());
            }
            return Ok(RestrictedState::FULL.without(site));
        }
        let mut state = RestrictedState::EMPTY;
        for c in name.chars() {
            let site = Site::from_letter(c).ok_or_else(bad)?;
            if state.contains(site) {
                return Err(bad());
            }
            state = state.with(site);
        }
        if state.is_empty() {
            return Err(bad());
        }
        Ok(state)
    }
}

impl fmt::Display for RestrictedState {
    /// Letters in cyclic order, so that runs read in chain order (`VX`,
    /// `QVO`); four sites print as `N` plus the missing one.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.len() {
            0 => write!(f, "empty"),
            5 => write!(f, "all"),
            4 => {
                let missing = Site::ALL.into_iter().find(|&s| !self.contains(s)).expect("one site missing");
                write!(f, "N{}", missing.letter())
            }
            _ => {
                // Start where the cyclic offsets of the members are
                // lexicographically smallest.
                let best = Site::ALL
                    .into_iter()
                    .filter(|&s| self.contains(s))
                    .min_by_key(|&start| (0..5).filter(|&d| self.contains(start.next(d))).collect::<Vec<_>>())
                    .expect("non-empty");
                for d in 0..5 {
                    let s = best.next(d);
                    if self.contains(s) {
                        write!(f, "{}", s.letter())?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Named transition weights, before normalisation by the total fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightKind {
    XonO,
    XoffO,
    OonP,
    OoffP,
    PonQ,
    PoffQ,
    QonV,
    QoffV,
    Vgo,
    VoffX,
    OtherXoffO,
    OtherQoffV,
}

impl WeightKind {
    pub fn name(self) -> &'static str {
        match self {
            WeightKind::XonO => "XonO",
            WeightKind::XoffO => "XoffO",
            WeightKind::OonP => "OonP",
            WeightKind::OoffP => "OoffP",
            WeightKind::PonQ => "PonQ",
            WeightKind::PoffQ => "PoffQ",
            WeightKind::QonV => "QonV",
            WeightKind::QoffV => "QoffV",
            WeightKind::Vgo => "Vgo",
            WeightKind::VoffX => "VoffX",
            WeightKind::OtherXoffO => "otherXoffO",
            WeightKind::OtherQoffV => "otherQoffV",
        }
    }
}

/// One summand `weight · F_target`. `target = None` is the constant term
/// of the centre firing; an empty target contributes only to the
/// denominator, since `F` of the empty state is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub kind: WeightKind,
    pub target: Option<RestrictedState>,
}

/// `F_S = (sum of terms) / (sum of their weights)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictedEquation {
    pub state: RestrictedState,
    pub terms: Vec<Term>,
}

/// Transition rules of the restricted chain from state `s`.
fn transition_terms(s: RestrictedState) -> Vec<Term> {
    use Site::*;
    use WeightKind::*;
    let mut terms = Vec::new();
    let mut push = |kind, target: RestrictedState| terms.push(Term { kind, target: Some(target) });
    // X's reservoir group feeds O. A mutant X converts O at rate r. A
    // resident O is overwritten by all m reservoir vertices if X is
    // resident, by the m - 1 others otherwise.
    match (s.contains(X), s.contains(O)) {
        (true, false) => push(XonO, s.with(O)),
        (false, true) => push(XoffO, s.without(O)),
        (true, true) => push(OtherXoffO, s.without(O)),
        (false, false) => {}
    }
    for (src, dst, on, off) in [(O, P, OonP, OoffP), (P, Q, PonQ, PoffQ)] {
        match (s.contains(src), s.contains(dst)) {
            (true, false) => push(on, s.with(dst)),
            (false, true) => push(off, s.without(dst)),
            _ => {}
        }
    }
    // Chain ends feed the centre: Q converts V at rate r; a mutant V is
    // overwritten by the l resident chain ends, or the l - 1 others when Q
    // is a mutant.
    match (s.contains(Q), s.contains(V)) {
        (true, false) => push(QonV, s.with(V)),
        (false, true) => push(QoffV, s.without(V)),
        (true, true) => push(OtherQoffV, s.without(V)),
        (false, false) => {}
    }
    // A resident centre picks X among its l·m out-neighbours.
    if !s.contains(V) && s.contains(X) {
        push(VoffX, s.without(X));
    }
    if s.contains(V) {
        terms.push(Term { kind: Vgo, target: None });
    }
    terms
}

/// The 31 equations, in the order of [`RestrictedState::ordered`].
pub fn restricted_equations() -> Vec<RestrictedEquation> {
    RestrictedState::ordered()
        .into_iter()
        .map(|state| RestrictedEquation {
            state,
            terms: transition_terms(state),
        })
        .collect()
}

/// Parameters `L` (leaves), `M` (reservoir size) and `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedParams {
    pub l: Rational,
    pub m: Rational,
    pub r: Rational,
}

impl RestrictedParams {
    pub fn new(l: Rational, m: Rational, r: Rational) -> Result<Self> {
        for (name, v) in [("L", &l), ("M", &m)] {
            if *v < Rational::one() {
                return Err(Error::InvalidParameter(format!("{name} must be at least 1, got {v}")));
            }
        }
        if !r.is_positive() {
            return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
        }
        Ok(RestrictedParams { l, m, r })
    }

    pub fn from_integers(l: u64, m: u64, r: Rational) -> Result<Self> {
        RestrictedParams::new(Rational::from_integer(l.into()), Rational::from_integer(m.into()), r)
    }

    pub fn weight(&self, kind: WeightKind) -> Rational {
        let one = Rational::one();
        match kind {
            WeightKind::XonO | WeightKind::OonP | WeightKind::PonQ | WeightKind::QonV | WeightKind::Vgo => self.r.clone(),
            WeightKind::XoffO => self.m.clone(),
            WeightKind::OoffP | WeightKind::PoffQ => one,
            WeightKind::QoffV => self.l.clone(),
            WeightKind::VoffX => one / (&self.l * &self.m),
            WeightKind::OtherXoffO => &self.m - one,
            WeightKind::OtherQoffV => &self.l - one,
        }
    }
}

/// `A · F = b` over the 31 non-empty states, one row per equation in the
/// form `D_S F_S - sum w F_S' = w_Vgo`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub vars: Vec<RestrictedState>,
    pub matrix: Vec<Vec<Rational>>,
    pub rhs: Vec<Rational>,
}

impl LinearSystem {
    pub fn dimension(&self) -> usize {
        self.vars.len()
    }

    /// Clears denominators row by row and solves by fraction-free
    /// elimination.
    pub fn solve(&self) -> Result<Vec<Rational>> {
        let mut a = Vec::with_capacity(self.dimension());
        let mut b = Vec::with_capacity(self.dimension());
        for (row, rhs) in self.matrix.iter().zip(&self.rhs) {
            let lcm = row
                .iter()
                .chain(std::iter::once(rhs))
                .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            let scale = Rational::from_integer(lcm);
            a.push(row.iter().map(|x| (x * &scale).to_integer()).collect::<Vec<_>>());
            b.push((rhs * &scale).to_integer());
        }
        solve_bareiss(&a, &b)
    }
}

pub fn build_restricted_system(params: &RestrictedParams) -> LinearSystem {
    let equations = restricted_equations();
    let vars: Vec<RestrictedState> = equations.iter().map(|e| e.state).collect();
    let col = |s: RestrictedState| vars.iter().position(|&v| v == s).expect("every non-empty state is a variable");
    let n = vars.len();
    let mut matrix = vec![vec![Rational::zero(); n]; n];
    let mut rhs = vec![Rational::zero(); n];
    for (i, eq) in equations.iter().enumerate() {
        for term in &eq.terms {
            let w = params.weight(term.kind);
            matrix[i][i] += &w;
            match term.target {
                Some(t) if t.is_empty() => {}
                Some(t) => matrix[i][col(t)] -= w,
                None => rhs[i] += w,
            }
        }
    }
    LinearSystem { vars, matrix, rhs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSolution {
    pub vars: Vec<RestrictedState>,
    pub values: Vec<Rational>,
}

impl RestrictedSolution {
    pub fn get(&self, s: RestrictedState) -> Option<&Rational> {
        self.vars.iter().position(|&v| v == s).map(|i| &self.values[i])
    }

    /// `q`: the value from a lone mutant on `X`.
    pub fn fx(&self) -> &Rational {
        self.get(RestrictedState::from_sites(&[Site::X])).expect("X is a variable")
    }
}

/// Solves the restricted chain exactly. Every value is checked to lie in
/// `[0, 1]`.
pub fn solve_restricted(params: &RestrictedParams) -> Result<RestrictedSolution> {
    let system = build_restricted_system(params);
    let values = system.solve()?;
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| v.is_negative() || **v > Rational::one())
    {
        return Err(Error::InconsistentState(format!(
            "solved F{} = {v} lies outside [0, 1]",
            system.vars[i]
        )));
    }
    Ok(RestrictedSolution {
        vars: system.vars,
        values,
    })
}

/// `q(L, M, r)` for integer `L` and `M`.
pub fn restricted_q(l: u64, m: u64, r: &Rational) -> Result<Rational> {
    let params = RestrictedParams::from_integers(l, m, r.clone())?;
    Ok(solve_restricted(&params)?.fx().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::rational;

    #[test]
    fn thirty_one_states_in_order() {
        let states = RestrictedState::ordered();
        assert_eq!(states.len(), 31);
        let names: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            names.join(" "),
            "X O P Q V XO OP PQ QV VX XP OQ PV QX VO XOP OPQ PQV QVX VXO XOQ OPV PQX QVO VXP NX NO NP NQ NV all"
        );
        for (s, name) in states.iter().zip(&names) {
            assert_eq!(RestrictedState::parse(name).unwrap(), *s);
        }
        let mut sorted = states.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 31);
    }

    #[test]
    fn parse_rejects_junk() {
        for bad in ["", "Y", "XX", "NXO", "N", "All"] {
            assert!(RestrictedState::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn centre_only_value() {
        let params = RestrictedParams::from_integers(7, 3, rational(5, 2)).unwrap();
        let sol = solve_restricted(&params).unwrap();
        let v = sol.get(RestrictedState::parse("V").unwrap()).unwrap();
        assert_eq!(*v, rational(5, 2) / (rational(5, 2) + rational(7, 1)));
    }

    #[test]
    fn xo_equation_weights() {
        let eq = restricted_equations()
            .into_iter()
            .find(|e| e.state == RestrictedState::parse("XO").unwrap())
            .unwrap();
        let params = RestrictedParams::from_integers(10, 10, rational(2, 1)).unwrap();
        let mut weights: Vec<Rational> = eq.terms.iter().map(|t| params.weight(t.kind)).collect();
        weights.sort();
        assert_eq!(weights, vec![rational(1, 100), rational(2, 1), rational(9, 1)]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(RestrictedParams::from_integers(0, 1, rational(2, 1)).is_err());
        assert!(RestrictedParams::from_integers(1, 0, rational(2, 1)).is_err());
        assert!(RestrictedParams::from_integers(1, 1, rational(0, 1)).is_err());
        assert!(RestrictedParams::new(rational(1, 2), rational(1, 1), rational(1, 1)).is_err());
    }

    #[test]
    fn values_are_probabilities() {
        for (l, m, r) in [(1, 1, rational(2, 1)), (10, 10, rational(2, 1)), (3, 50, rational(1, 3))] {
            let params = RestrictedParams::from_integers(l, m, r).unwrap();
            let sol = solve_restricted(&params).unwrap();
            assert!(sol.values.iter().all(|v| !v.is_negative() && *v <= Rational::one()));
            assert!(*sol.fx() > Rational::zero());
        }
    }
}
