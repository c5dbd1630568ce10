//! Propositional CNF formulas, DIMACS I/O and a DPLL satisfiability solver.
//!
//! Variables are 0-based internally; DIMACS ids are 1-based and signed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default variable cap for [`enumerate_sat_bruteforce`].
pub const BRUTEFORCE_VAR_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Self { var, negated: true }
    }

    pub fn complement(self) -> Self {
        Self { var: self.var, negated: !self.negated }
    }

    /// Truth value under `values`; the caller guarantees `var` is in range.
    pub fn holds(self, values: &[bool]) -> bool {
        values[self.var] != self.negated
    }

    pub fn to_dimacs(self) -> i64 {
        let id = self.var as i64 + 1;
        if self.negated {
            -id
        } else {
            id
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬x{}", self.var)
        } else {
            write!(f, "x{}", self.var)
        }
    }
}

/// A non-empty disjunction of distinct literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::Formula("empty clause".into()));
        }
        for (i, a) in literals.iter().enumerate() {
            if literals[..i].contains(a) {
                return Err(Error::Formula(format!("duplicate literal {a}")));
            }
        }
        Ok(Self(literals))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn is_tautology(&self) -> bool {
        self.0.iter().any(|l| self.0.contains(&l.complement()))
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.0.iter().any(|l| l.var == var)
    }

    /// Literals sorted, for order-insensitive comparison of clauses.
    pub fn sorted_key(&self) -> Vec<Literal> {
        let mut key = self.0.clone();
        key.sort_unstable();
        key
    }

    pub(crate) fn push(&mut self, lit: Literal) {
        debug_assert!(!self.0.contains(&lit));
        self.0.push(lit);
    }

    pub(crate) fn remove(&mut self, lit: Literal) -> bool {
        match self.0.iter().position(|&l| l == lit) {
            Some(i) => {
                self.0.remove(i);
                true
            }
            None => false,
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for c in &clauses {
            if let Some(l) = c.literals().iter().find(|l| l.var >= num_vars) {
                return Err(Error::Formula(format!(
                    "literal {l} out of range for {num_vars} variables"
                )));
            }
        }
        Ok(Self { num_vars, clauses })
    }

    /// Builds a formula from literal lists, validating every clause.
    pub fn from_literals(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        let clauses = clauses.into_iter().map(Clause::new).collect::<Result<Vec<_>>>()?;
        Self::new(num_vars, clauses)
    }

    pub fn empty() -> Self {
        Self { num_vars: 0, clauses: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub(crate) fn clauses_mut(&mut self) -> &mut [Clause] {
        &mut self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn has_tautology(&self) -> bool {
        self.clauses.iter().any(Clause::is_tautology)
    }

    /// Conjunction with a variable-disjoint formula: `other`'s variables are
    /// renumbered to follow this formula's.
    pub fn conjoin_disjoint(&self, other: &CnfFormula) -> CnfFormula {
        let shift = self.num_vars;
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().map(|c| {
            Clause(
                c.literals()
                    .iter()
                    .map(|l| Literal { var: l.var + shift, negated: l.negated })
                    .collect(),
            )
        }));
        CnfFormula { num_vars: self.num_vars + other.num_vars, clauses }
    }

    /// Clause multiset in canonical order, ignoring literal and clause order.
    pub fn clause_multiset(&self) -> Vec<Vec<Literal>> {
        let mut keys: Vec<_> = self.clauses.iter().map(Clause::sorted_key).collect();
        keys.sort();
        keys
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return write!(f, "⊤");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                write!(f, " ∧ ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    pub fn all_false(num_vars: usize) -> Self {
        Self { values: vec![false; num_vars] }
    }

    /// Assignment whose bit `i` is bit `i` of `mask`.
    pub fn from_mask(num_vars: usize, mask: u64) -> Self {
        Self { values: (0..num_vars).map(|i| mask >> i & 1 == 1).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Satisfiable(Assignment),
    Unsatisfiable,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Satisfiable(_))
    }

    pub fn witness(&self) -> Option<&Assignment> {
        match self {
            SatResult::Satisfiable(a) => Some(a),
            SatResult::Unsatisfiable => None,
        }
    }
}

pub fn eval_assignment(formula: &CnfFormula, a: &Assignment) -> Result<bool> {
    let have = a.values.len();
    for c in formula.clauses() {
        if let Some(l) = c.literals().iter().find(|l| l.var >= have) {
            return Err(Error::IncompleteAssignment { have, var: l.var });
        }
    }
    Ok(formula
        .clauses()
        .iter()
        .all(|c| c.literals().iter().any(|l| l.holds(&a.values))))
}

/// Complete DPLL search with unit propagation and pure-literal elimination.
///
/// Branches on the smallest unassigned variable, `false` before `true`.
/// Tautological clauses are dropped up front. Unconstrained variables in
/// the witness are `false`.
pub fn solve_sat(formula: &CnfFormula) -> SatResult {
    let clauses: Vec<&[Literal]> = formula
        .clauses()
        .iter()
        .filter(|c| !c.is_tautology())
        .map(Clause::literals)
        .collect();
    let solver = Dpll { clauses, num_vars: formula.num_vars() };
    let mut assign = vec![None; formula.num_vars()];
    if solver.search(&mut assign) {
        let values = assign.into_iter().map(|v| v.unwrap_or(false)).collect();
        SatResult::Satisfiable(Assignment { values })
    } else {
        SatResult::Unsatisfiable
    }
}

pub fn is_satisfiable(formula: &CnfFormula) -> bool {
    solve_sat(formula).is_sat()
}

struct Dpll<'a> {
    clauses: Vec<&'a [Literal]>,
    num_vars: usize,
}

enum ClauseState {
    Satisfied,
    Conflict,
    Unit(Literal),
    Open,
}

impl Dpll<'_> {
    fn state(clause: &[Literal], assign: &[Option<bool>]) -> ClauseState {
        let mut free = None;
        let mut n_free = 0;
        for &l in clause {
            match assign[l.var] {
                Some(v) if v != l.negated => return ClauseState::Satisfied,
                Some(_) => {}
                None => {
                    n_free += 1;
                    free = Some(l);
                }
            }
        }
        match (n_free, free) {
            (0, _) => ClauseState::Conflict,
            (1, Some(l)) => ClauseState::Unit(l),
            _ => ClauseState::Open,
        }
    }

    /// Returns `false` on conflict. Leaves all open clauses with >= 2 free
    /// literals and no pure literals.
    fn propagate(&self, assign: &mut [Option<bool>]) -> bool {
        loop {
            let mut changed = false;
            for c in &self.clauses {
                match Self::state(c, assign) {
                    ClauseState::Conflict => return false,
                    ClauseState::Unit(l) => {
                        assign[l.var] = Some(!l.negated);
                        changed = true;
                    }
                    ClauseState::Satisfied | ClauseState::Open => {}
                }
            }
            if changed {
                continue;
            }
            // bit 0: seen positive, bit 1: seen negative
            let mut polarity = vec![0u8; self.num_vars];
            for c in &self.clauses {
                if matches!(Self::state(c, assign), ClauseState::Satisfied) {
                    continue;
                }
                for l in c.iter().filter(|l| assign[l.var].is_none()) {
                    polarity[l.var] |= if l.negated { 2 } else { 1 };
                }
            }
            for (var, p) in polarity.into_iter().enumerate() {
                match p {
                    1 => assign[var] = Some(true),
                    2 => assign[var] = Some(false),
                    _ => continue,
                }
                changed = true;
            }
            if !changed {
                return true;
            }
        }
    }

    fn search(&self, assign: &mut Vec<Option<bool>>) -> bool {
        let saved = assign.clone();
        if !self.propagate(assign) {
            *assign = saved;
            return false;
        }
        let all_sat = self
            .clauses
            .iter()
            .all(|c| matches!(Self::state(c, assign), ClauseState::Satisfied));
        if all_sat {
            return true;
        }
        let Some(var) = assign.iter().position(Option::is_none) else {
            *assign = saved;
            return false;
        };
        for value in [false, true] {
            let before = assign.clone();
            assign[var] = Some(value);
            if self.search(assign) {
                return true;
            }
            *assign = before;
        }
        *assign = saved;
        false
    }
}

/// Truth-table scan over all `2^num_vars` assignments, capped at
/// [`BRUTEFORCE_VAR_CAP`] variables.
pub fn enumerate_sat_bruteforce(formula: &CnfFormula) -> Result<SatResult> {
    enumerate_sat_bruteforce_capped(formula, BRUTEFORCE_VAR_CAP)
}

pub fn enumerate_sat_bruteforce_capped(formula: &CnfFormula, cap: usize) -> Result<SatResult> {
    let n = formula.num_vars();
    if n > cap || n >= 64 {
        return Err(Error::EnumerationCap { num_vars: n, cap });
    }
    let mut values = vec![false; n];
    for mask in 0..(1u64 << n) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = mask >> i & 1 == 1;
        }
        let sat = formula
            .clauses()
            .iter()
            .all(|c| c.literals().iter().any(|l| l.holds(&values)));
        if sat {
            return Ok(SatResult::Satisfiable(Assignment { values }));
        }
    }
    Ok(SatResult::Unsatisfiable)
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// `%` line ends the clause section. Repeated literals inside a clause are
/// merged; tautologies are kept.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        last_line = line_no;
        if line.starts_with('p') {
            if header.is_some() {
                return Err(Error::Parse { line: line_no, msg: "duplicate header".into() });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", v, c] => v.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            let (v, c) = parsed.ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("malformed header {line:?}, expected \"p cnf V C\""),
            })?;
            header = Some((v, c, line_no));
            continue;
        }
        let Some((num_vars, _, _)) = header else {
            return Err(Error::Parse { line: line_no, msg: "clause before header".into() });
        };
        for tok in line.split_whitespace() {
            let id: i64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid literal {tok:?}"),
            })?;
            if id == 0 {
                if current.is_empty() {
                    return Err(Error::Parse { line: line_no, msg: "empty clause".into() });
                }
                clauses.push(Clause(std::mem::take(&mut current)));
                continue;
            }
            let var = id.unsigned_abs() as usize;
            if var > num_vars {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("literal {id} out of range (header declares {num_vars} variables)"),
                });
            }
            let lit = Literal { var: var - 1, negated: id < 0 };
            if !current.contains(&lit) {
                current.push(lit);
            }
        }
    }

    let Some((num_vars, num_clauses, header_line)) = header else {
        return Err(Error::Parse { line: last_line.max(1), msg: "missing \"p cnf\" header".into() });
    };
    if !current.is_empty() {
        return Err(Error::Parse { line: last_line, msg: "clause not terminated by 0".into() });
    }
    if clauses.len() != num_clauses {
        return Err(Error::Parse {
            line: header_line,
            msg: format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        });
    }
    Ok(CnfFormula { num_vars, clauses })
}

pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.num_vars(), formula.num_clauses());
    for c in formula.clauses() {
        for l in c.literals() {
            out.push_str(&l.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(num_vars: usize, clauses: &[&[i64]]) -> CnfFormula {
        let clauses = clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&id| Literal { var: id.unsigned_abs() as usize - 1, negated: id < 0 })
                    .collect()
            })
            .collect();
        CnfFormula::from_literals(num_vars, clauses).unwrap()
    }

    #[test]
    fn eval_examples() {
        let phi = f(2, &[&[1, -2]]);
        assert!(eval_assignment(&phi, &Assignment::new(vec![false, false])).unwrap());

        let contradiction = f(1, &[&[1], &[-1]]);
        for v in [false, true] {
            assert!(!eval_assignment(&contradiction, &Assignment::new(vec![v])).unwrap());
        }

        let bridge = f(2, &[&[1, 2], &[-1, -2]]);
        assert!(eval_assignment(&bridge, &Assignment::new(vec![true, false])).unwrap());
    }

    #[test]
    fn eval_rejects_partial_assignment() {
        let phi = f(3, &[&[1, 3]]);
        let err = eval_assignment(&phi, &Assignment::new(vec![true])).unwrap_err();
        assert!(matches!(err, Error::IncompleteAssignment { have: 1, var: 2 }));
    }

    #[test]
    fn clause_invariants() {
        assert!(Clause::new(vec![]).is_err());
        assert!(Clause::new(vec![Literal::pos(0), Literal::pos(0)]).is_err());
        let taut = Clause::new(vec![Literal::pos(0), Literal::neg(0)]).unwrap();
        assert!(taut.is_tautology());
        assert!(CnfFormula::from_literals(1, vec![vec![Literal::pos(1)]]).is_err());
    }

    #[test]
    fn solver_basics() {
        assert_eq!(solve_sat(&CnfFormula::empty()), SatResult::Satisfiable(Assignment::new(vec![])));
        assert_eq!(solve_sat(&f(1, &[&[1], &[-1]])), SatResult::Unsatisfiable);
        let bridge = f(2, &[&[1, 2], &[-1, -2]]);
        let res = solve_sat(&bridge);
        assert!(eval_assignment(&bridge, res.witness().unwrap()).unwrap());
    }

    #[test]
    fn solver_drops_tautologies() {
        let phi = f(2, &[&[1, -1], &[2]]);
        assert_eq!(solve_sat(&phi), SatResult::Satisfiable(Assignment::new(vec![false, true])));
        let unsat = f(2, &[&[1, -1, 2], &[1], &[-1]]);
        assert_eq!(solve_sat(&unsat), SatResult::Unsatisfiable);
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(enumerate_sat_bruteforce(&f(1, &[&[1], &[-1]])).unwrap(), SatResult::Unsatisfiable);
        assert!(enumerate_sat_bruteforce(&f(2, &[&[1, 2], &[-1, -2]])).unwrap().is_sat());
        let wide = CnfFormula::new(21, vec![]).unwrap();
        assert!(matches!(
            enumerate_sat_bruteforce(&wide),
            Err(Error::EnumerationCap { num_vars: 21, cap: 20 })
        ));
    }

    #[test]
    fn parse_examples() {
        let phi = parse_dimacs("p cnf 2 2\n1 -2 0\n2 -1 0\n").unwrap();
        assert_eq!(phi, f(2, &[&[1, -2], &[2, -1]]));

        let phi = parse_dimacs("c comment\np cnf 1 1\n1 0\n").unwrap();
        assert_eq!(phi, f(1, &[&[1]]));

        let err = parse_dimacs("p cnf 1 1\n2 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases: &[(&str, usize)] = &[
            ("p cnf x 1\n1 0\n", 1),
            ("p dnf 1 1\n1 0\n", 1),
            ("1 0\np cnf 1 1\n", 1),
            ("c a\np cnf 2 3\n1 0\n2 0\n", 2),
            ("p cnf 2 1\n1 2\n", 2),
            ("p cnf 2 1\n1 foo 0\n", 2),
            ("c only comments\n", 1),
        ];
        for (text, line) in cases {
            match parse_dimacs(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, *line, "{text:?}"),
                other => panic!("{text:?} parsed to {other:?}"),
            }
        }
    }

    #[test]
    fn parse_accepts_multiline_clauses_and_tautologies() {
        let phi = parse_dimacs("p cnf 3 2\n1 -1\n 2 0 3\n0\n%\n0\n").unwrap();
        assert_eq!(phi.num_clauses(), 2);
        assert!(phi.clauses()[0].is_tautology());
    }

    #[test]
    fn emit_examples() {
        assert_eq!(emit_dimacs(&f(2, &[&[1, 2], &[-1, -2]])), "p cnf 2 2\n1 2 0\n-1 -2 0\n");
        assert_eq!(emit_dimacs(&CnfFormula::empty()), "p cnf 0 0\n");
    }
}
