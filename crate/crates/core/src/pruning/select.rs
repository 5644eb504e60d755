//! Player-selection rules. Every rule returns a non-empty, proper subset of
//! the current players as ascending indices. Ties are broken by the lower
//! index.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// Player indices sorted by ascending value, then ascending index.
pub fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::domain(format!(
            "cannot prune {k} of {n} players: need 1 <= k < n"
        )));
    }
    Ok(())
}

fn check_p(n: usize, p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be positive, got {p}")));
    }
    if n < 2 {
        return Err(Error::domain("need at least two players to prune"));
    }
    Ok(())
}

fn sorted(mut xs: Vec<usize>) -> Vec<usize> {
    xs.sort_unstable();
    xs
}

fn bottom_k(values: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(values.len(), k)?;
    let mut order = ascending_order(values);
    order.truncate(k);
    Ok(sorted(order))
}

pub fn select_sv_bottom_k(sv: &[f64], k: usize) -> Result<Vec<usize>> {
    bottom_k(sv, k)
}

/// Players with value below `p / n`; the single minimum when none qualify.
/// At most `n - 1` players are returned (the largest values survive).
pub fn select_sv_bottom_p(sv: &[f64], p: f64) -> Result<Vec<usize>> {
    let n = sv.len();
    check_p(n, p)?;
    let threshold = p / n as f64;
    let order = ascending_order(sv);
    let mut chosen: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&i| sv[i] < threshold)
        .take(n - 1)
        .collect();
    if chosen.is_empty() {
        chosen.push(order[0]);
    }
    Ok(sorted(chosen))
}

/// Longest prefix of the ascending order whose value sum stays below `p`;
/// the single minimum when even that exceeds `p`. At most `n - 1` players.
pub fn select_sv_bucket(sv: &[f64], p: f64) -> Result<Vec<usize>> {
    let n = sv.len();
    check_p(n, p)?;
    let order = ascending_order(sv);
    let mut sum = 0.0;
    let mut len = 0;
    for &i in order.iter().take(n - 1) {
        if sum + sv[i] < p {
            sum += sv[i];
            len += 1;
        } else {
            break;
        }
    }
    Ok(sorted(order[..len.max(1)].to_vec()))
}

/// Uniform `k`-subset of `0..n` without replacement.
pub fn select_random_k(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(n, k)?;
    let mut r = rng::rng_from_seed(seed);
    Ok(sorted(index::sample(&mut r, n, k).into_vec()))
}

pub fn select_w_bottom_k(norms: &[f64], k: usize) -> Result<Vec<usize>> {
    bottom_k(norms, k)
}
