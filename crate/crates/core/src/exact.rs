//! Exact Shapley values by full enumeration.
//!
//! Two independent routes are provided: the weighted sum over all coalitions
//! not containing a player, and the average marginal contribution over all
//! orderings of the players. Both read payoffs from a memoised table, so each
//! coalition is evaluated once.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{CoalitionalGame, PayoffTable, TABLE_LIMIT};
use crate::par;

/// Default player limit for subset enumeration (`2^n` payoffs).
pub const SUBSET_LIMIT: usize = 20;
/// Default player limit for permutation enumeration (`n!` orderings).
pub const PERMUTATION_LIMIT: usize = 10;
/// Largest `n` for which `n!` fits in a `u64`.
pub const EXACT_FACTORIAL_LIMIT: usize = 20;

/// Per-player Shapley values, in player-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapleyVector(pub Vec<f64>);

impl ShapleyVector {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Values divided by `by` (e.g. normalising by the grand-coalition payoff).
    pub fn scaled(&self, by: f64) -> ShapleyVector {
        ShapleyVector(self.0.iter().map(|v| v / by).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ShapleyVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `s! (n - s - 1)!`, the number of orderings in which exactly the members
/// of a fixed size-`s` coalition precede a given player. Exact for
/// `n <= 20`; use [`ln_subset_weight`] beyond that.
pub fn subset_weight(s: usize, n: usize) -> Result<u64> {
    if s >= n {
        return Err(Error::domain(format!(
            "coalition size {s} must be below player count {n}"
        )));
    }
    if n > EXACT_FACTORIAL_LIMIT {
        return Err(Error::domain(format!(
            "exact subset weight limited to {EXACT_FACTORIAL_LIMIT} players; use ln_subset_weight"
        )));
    }
    Ok(factorial(s) * factorial(n - s - 1))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Natural log of `s! (n - s - 1)!`, valid for any `n`.
pub fn ln_subset_weight(s: usize, n: usize) -> Result<f64> {
    if s >= n {
        return Err(Error::domain(format!(
            "coalition size {s} must be below player count {n}"
        )));
    }
    Ok(ln_factorial(s) + ln_factorial(n - s - 1))
}

/// `s!(n-s-1)!/n!` for every `s in 0..n`, as doubles.
pub(crate) fn normalized_weights(n: usize) -> Vec<f64> {
    if n <= EXACT_FACTORIAL_LIMIT {
        let total = factorial(n) as f64;
        (0..n)
            .map(|s| subset_weight(s, n).expect("s < n") as f64 / total)
            .collect()
    } else {
        let ln_total = ln_factorial(n);
        (0..n)
            .map(|s| (ln_subset_weight(s, n).expect("s < n") - ln_total).exp())
            .collect()
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::EnumerationLimit { players: n, limit });
    }
    Ok(())
}

/// Exact Shapley values by the subset formula, refusing games with more than
/// [`SUBSET_LIMIT`] players.
pub fn shapley_exact_subsets<G: CoalitionalGame + ?Sized>(game: &G) -> Result<ShapleyVector> {
    shapley_exact_subsets_with_limit(game, SUBSET_LIMIT)
}

pub fn shapley_exact_subsets_with_limit<G: CoalitionalGame + ?Sized>(
    game: &G,
    limit: usize,
) -> Result<ShapleyVector> {
    let n = game.players();
    check_limit(n, limit.min(TABLE_LIMIT))?;
    let table = PayoffTable::from_game(game)?;
    Ok(subsets_from_table(&table))
}

pub(crate) fn subsets_from_table(table: &PayoffTable) -> ShapleyVector {
    let n = table.players();
    let v = table.entries();
    let weights = normalized_weights(n);
    let values = par::map_range(n, |i| {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for s in 0..v.len() {
            if s & bit == 0 {
                acc += weights[s.count_ones() as usize] * (v[s | bit] - v[s]);
            }
        }
        acc
    });
    ShapleyVector(values)
}

/// Exact Shapley values by averaging marginal contributions over all `n!`
/// orderings, refusing games with more than [`PERMUTATION_LIMIT`] players.
pub fn shapley_exact_permutations<G: CoalitionalGame + ?Sized>(
    game: &G,
) -> Result<ShapleyVector> {
    shapley_exact_permutations_with_limit(game, PERMUTATION_LIMIT)
}

pub fn shapley_exact_permutations_with_limit<G: CoalitionalGame + ?Sized>(
    game: &G,
    limit: usize,
) -> Result<ShapleyVector> {
    let n = game.players();
    check_limit(n, limit.min(EXACT_FACTORIAL_LIMIT).min(TABLE_LIMIT))?;
    let table = PayoffTable::from_game(game)?;
    let v = table.entries();

    // One job per leading player; each job walks the (n-1)! orderings of the
    // rest in lexicographic order. Partial sums are combined in job order.
    let partials = par::map_range(n, |first| {
        let mut sums = vec![0.0; n];
        let mut rest: Vec<usize> = (0..n).filter(|&p| p != first).collect();
        loop {
            let mut prefix = 1usize << first;
            sums[first] += v[prefix] - v[0];
            for &p in &rest {
                let next = prefix | (1 << p);
                sums[p] += v[next] - v[prefix];
                prefix = next;
            }
            if !next_permutation(&mut rest) {
                break;
            }
        }
        sums
    });
    let count = factorial(n) as f64;
    let values = (0..n)
        .map(|p| partials.iter().map(|s| s[p]).sum::<f64>() / count)
        .collect();
    Ok(ShapleyVector(values))
}

/// Lexicographic successor in place; returns false (and leaves the slice
/// sorted ascending) after the last permutation.
pub(crate) fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        xs.reverse();
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// `v(U) - v(∅)`, the total that exact Shapley values distribute.
pub fn grand_surplus<G: CoalitionalGame + ?Sized>(game: &G) -> f64 {
    let n = game.players();
    game.payoff(Coalition::full(n).expect("valid n")) - game.payoff(Coalition::empty(n).expect("valid n"))
}
