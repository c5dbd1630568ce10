//! Chain and bridge clause gadgets and the core formula pair built from them.

use crate::error::{Error, Result};
use crate::logic::{CnfFormula, Literal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Inc,
    Dec,
}

fn chain_clauses(direction: Direction, i: usize, j: usize) -> Result<Vec<Vec<Literal>>> {
    if j < i + 2 {
        return Err(Error::Formula(format!("chain over x{i}..x{j} needs at least two variables")));
    }
    let len = j - i;
    Ok((i..j)
        .map(|k| {
            let next = i + (k - i + 1) % len;
            match direction {
                Direction::Inc => vec![Literal::neg(k), Literal::pos(next)],
                Direction::Dec => vec![Literal::pos(k), Literal::neg(next)],
            }
        })
        .collect())
}

fn bridge_clauses(two_n: usize) -> Result<Vec<Vec<Literal>>> {
    if two_n == 0 || two_n % 2 == 1 {
        return Err(Error::Formula(format!("bridge needs a positive even variable count, got {two_n}")));
    }
    let n = two_n / 2;
    Ok((0..n)
        .flat_map(|i| {
            let mirror = two_n - 1 - i;
            [vec![Literal::pos(i), Literal::pos(mirror)], vec![Literal::neg(i), Literal::neg(mirror)]]
        })
        .collect())
}

/// Cyclic implication chain over `x_i..x_{j-1}` forcing all of them equal.
///
/// Clause `k` links `x_k` to `x_{i + (k - i + 1) mod (j - i)}`, so the last
/// clause closes the cycle back to `x_i`. `Dec` flips every polarity. The
/// result ranges over `j` variables.
pub fn chain(direction: Direction, i: usize, j: usize) -> Result<CnfFormula> {
    CnfFormula::from_literals(j, chain_clauses(direction, i, j)?)
}

/// Forces `x_i` and `x_{2n-1-i}` to opposite values for every `i < n`.
pub fn bridge(two_n: usize) -> Result<CnfFormula> {
    CnfFormula::from_literals(two_n, bridge_clauses(two_n)?)
}

/// The core pair over `2n` variables: `(unsat, sat)` where the unsatisfiable
/// side closes one chain over all variables and the satisfiable side cuts it
/// into an increasing and a decreasing half.
pub fn make_core_pair(n: usize) -> Result<(CnfFormula, CnfFormula)> {
    if n < 2 {
        return Err(Error::Formula(format!("core pair needs n >= 2, got {n}")));
    }
    let two_n = 2 * n;
    let mut unsat = chain_clauses(Direction::Inc, 0, two_n)?;
    unsat.extend(bridge_clauses(two_n)?);
    let mut sat = chain_clauses(Direction::Inc, 0, n)?;
    sat.extend(chain_clauses(Direction::Dec, n, two_n)?);
    sat.extend(bridge_clauses(two_n)?);
    Ok((CnfFormula::from_literals(two_n, unsat)?, CnfFormula::from_literals(two_n, sat)?))
}
