//! Monte Carlo Shapley estimates by random subsets and by random
//! permutations.
//!
//! An estimation run proceeds in three phases:
//!
//! 1. every sample is drawn from its own RNG substream, derived from
//!    `(seed, sample index)`, and expanded into the coalitions it needs;
//! 2. the distinct coalitions are evaluated once each (in parallel with the
//!    `parallel` feature), which is the payoff cache;
//! 3. marginals are accumulated in sample-index order.
//!
//! The result is therefore independent of scheduling, and the report counts
//! how many coalition lookups were served by the cache.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::exact::{self, next_permutation, ShapleyVector};
use crate::game::CoalitionalGame;
use crate::par;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Subset,
    Permutation,
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subset" | "subsets" => Ok(SamplingMethod::Subset),
            "permutation" | "permutations" => Ok(SamplingMethod::Permutation),
            other => Err(Error::domain(format!("unknown sampling method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub method: SamplingMethod,
    /// Permutations drawn, or subsets drawn per player.
    pub samples: usize,
    pub seed: u64,
    /// Replace random draws by the full enumeration of subsets or
    /// permutations. Meant for tests; bounded by the exact-enumeration
    /// limits.
    #[serde(default)]
    pub enumerate_all: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            method: SamplingMethod::Permutation,
            samples: 500,
            seed: 0,
            enumerate_all: false,
        }
    }
}

impl SamplingPlan {
    pub fn permutations(samples: usize, seed: u64) -> Self {
        SamplingPlan {
            method: SamplingMethod::Permutation,
            samples,
            seed,
            enumerate_all: false,
        }
    }

    pub fn subsets(samples: usize, seed: u64) -> Self {
        SamplingPlan {
            method: SamplingMethod::Subset,
            samples,
            seed,
            enumerate_all: false,
        }
    }

    pub fn exhaustive(method: SamplingMethod) -> Self {
        SamplingPlan {
            method,
            samples: 1,
            seed: 0,
            enumerate_all: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::domain("sampling plan needs at least one sample"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: SamplingMethod,
    pub seed: u64,
    pub samples_used: usize,
    pub estimates: ShapleyVector,
    /// Empirical standard error per player (permutation method only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    /// Total coalition lookups issued by the estimator.
    pub lookups: usize,
    /// Distinct coalitions evaluated by the payoff oracle.
    pub payoff_evaluations: usize,
    pub cache_hits: usize,
}

impl EstimateReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Dispatches on `plan.method`.
pub fn estimate<G: CoalitionalGame + ?Sized>(game: &G, plan: &SamplingPlan) -> Result<EstimateReport> {
    match plan.method {
        SamplingMethod::Subset => estimate_subsets(game, plan),
        SamplingMethod::Permutation => estimate_permutations(game, plan),
    }
}

/// Interned coalition lookups.
struct Lookups {
    index: HashMap<u128, usize>,
    unique: Vec<Coalition>,
    issued: usize,
}

impl Lookups {
    fn new() -> Self {
        Lookups {
            index: HashMap::new(),
            unique: Vec::new(),
            issued: 0,
        }
    }

    fn intern(&mut self, c: Coalition) -> usize {
        self.issued += 1;
        let next = self.unique.len();
        *self.index.entry(c.bits()).or_insert_with(|| {
            self.unique.push(c);
            next
        })
    }

    fn evaluate<G: CoalitionalGame + ?Sized>(&self, game: &G) -> Vec<f64> {
        par::map_slice(&self.unique, |&c| game.payoff(c))
    }
}

fn enumerate_permutations(n: usize) -> Result<Vec<Vec<usize>>> {
    if n > exact::PERMUTATION_LIMIT {
        return Err(Error::EnumerationLimit {
            players: n,
            limit: exact::PERMUTATION_LIMIT,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut all = vec![order.clone()];
    while next_permutation(&mut order) {
        all.push(order.clone());
    }
    Ok(all)
}

/// Average marginal contribution over `plan.samples` uniformly random
/// orderings. Each ordering issues `n + 1` prefix lookups.
pub fn estimate_permutations<G: CoalitionalGame + ?Sized>(
    game: &G,
    plan: &SamplingPlan,
) -> Result<EstimateReport> {
    if plan.method != SamplingMethod::Permutation {
        return Err(Error::domain("plan method is not permutation"));
    }
    plan.validate()?;
    let n = game.players();
    let empty = game.empty();

    let orders: Vec<Vec<usize>> = if plan.enumerate_all {
        enumerate_permutations(n)?
    } else {
        par::map_range(plan.samples, |j| {
            let mut r = rng::substream(plan.seed, &[j as u64]);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut r);
            order
        })
    };

    let mut lookups = Lookups::new();
    let slots: Vec<Vec<usize>> = orders
        .iter()
        .map(|order| {
            let mut prefix = empty;
            let mut ids = Vec::with_capacity(n + 1);
            ids.push(lookups.intern(prefix));
            for &p in order {
                prefix = prefix.with(p);
                ids.push(lookups.intern(prefix));
            }
            ids
        })
        .collect();
    let payoffs = lookups.evaluate(game);

    // Welford running mean / M2, accumulated in sample order
    let mut means = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for (count, (order, ids)) in orders.iter().zip(&slots).enumerate() {
        let k = (count + 1) as f64;
        for (pos, &p) in order.iter().enumerate() {
            let m = payoffs[ids[pos + 1]] - payoffs[ids[pos]];
            let delta = m - means[p];
            means[p] += delta / k;
            m2[p] += delta * (m - means[p]);
        }
    }
    let r = orders.len() as f64;
    let std_errors = m2
        .iter()
        .map(|&q| {
            if orders.len() < 2 {
                0.0
            } else {
                (q / (r - 1.0) / r).sqrt()
            }
        })
        .collect();
    let estimates = means;

    Ok(EstimateReport {
        method: SamplingMethod::Permutation,
        seed: plan.seed,
        samples_used: orders.len(),
        estimates: ShapleyVector(estimates),
        std_errors: Some(std_errors),
        lookups: lookups.issued,
        payoff_evaluations: lookups.unique.len(),
        cache_hits: lookups.issued - lookups.unique.len(),
    })
}

/// Weighted average of marginals `v(S ∪ {i}) - v(S)` over random coalitions
/// `S ⊆ U \ {i}`, each drawn uniformly from the powerset (every other player
/// included with probability one half), weighted by `|S|! (n - |S| - 1)!`.
pub fn estimate_subsets<G: CoalitionalGame + ?Sized>(
    game: &G,
    plan: &SamplingPlan,
) -> Result<EstimateReport> {
    if plan.method != SamplingMethod::Subset {
        return Err(Error::domain("plan method is not subset"));
    }
    plan.validate()?;
    let n = game.players();
    let universe = game.grand().bits();

    // per player: the coalitions S (without the player)
    let draws: Vec<Vec<Coalition>> = if plan.enumerate_all {
        if n > exact::SUBSET_LIMIT {
            return Err(Error::EnumerationLimit {
                players: n,
                limit: exact::SUBSET_LIMIT,
            });
        }
        (0..n)
            .map(|i| {
                (0..1u128 << n)
                    .filter(|bits| bits >> i & 1 == 0)
                    .map(|bits| Coalition::from_bits(n, bits).expect("bits < 2^n"))
                    .collect()
            })
            .collect()
    } else {
        par::map_range(n, |i| {
            (0..plan.samples)
                .map(|j| {
                    let mut r = rng::substream(plan.seed, &[i as u64, j as u64]);
                    let bits = r.random::<u128>() & universe & !(1u128 << i);
                    Coalition::from_bits(n, bits).expect("masked to universe")
                })
                .collect()
        })
    };

    let mut lookups = Lookups::new();
    let slots: Vec<Vec<(usize, usize)>> = draws
        .iter()
        .enumerate()
        .map(|(i, sets)| {
            sets.iter()
                .map(|&s| (lookups.intern(s), lookups.intern(s.with(i))))
                .collect()
        })
        .collect();
    let payoffs = lookups.evaluate(game);

    let weights = exact::normalized_weights(n);
    let estimates = draws
        .iter()
        .zip(&slots)
        .map(|(sets, ids)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (s, &(without, with)) in sets.iter().zip(ids) {
                let w = weights[s.len()];
                num += w * (payoffs[with] - payoffs[without]);
                den += w;
            }
            num / den
        })
        .collect();

    Ok(EstimateReport {
        method: SamplingMethod::Subset,
        seed: plan.seed,
        samples_used: draws.first().map_or(0, Vec::len),
        estimates: ShapleyVector(estimates),
        std_errors: None,
        lookups: lookups.issued,
        payoff_evaluations: lookups.unique.len(),
        cache_hits: lookups.issued - lookups.unique.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::shapley_exact_subsets;
    use crate::game::{make_perturbed_uniform, make_un_security_council, three_player_example, FnGame};

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn exhaustive_modes_reproduce_worked_example() {
        let g = three_player_example();
        let p = estimate_permutations(&g, &SamplingPlan::exhaustive(SamplingMethod::Permutation))
            .unwrap();
        assert_eq!(p.samples_used, 6);
        assert_close(&p.estimates, &[1.5, 2.0, 1.5], 1e-12);
        let s = estimate_subsets(&g, &SamplingPlan::exhaustive(SamplingMethod::Subset)).unwrap();
        assert_eq!(s.samples_used, 4);
        assert_close(&s.estimates, &[1.5, 2.0, 1.5], 1e-12);
    }

    #[test]
    fn subset_sampling_on_worked_example() {
        let g = three_player_example();
        let r = estimate_subsets(&g, &SamplingPlan::subsets(500, 1)).unwrap();
        // within 5% of v(U) = 5
        assert_close(&r.estimates, &[1.5, 2.0, 1.5], 0.25);
        assert_eq!(r.samples_used, 500);
        // only 8 coalitions exist
        assert_eq!(r.payoff_evaluations, 8);
        assert_eq!(r.lookups, 3 * 500 * 2);
    }

    #[test]
    fn subset_sampling_on_perturbed_uniform() {
        let g = make_perturbed_uniform(8, 0.01, 7).unwrap();
        let exact = shapley_exact_subsets(&g).unwrap();
        let r = estimate_subsets(&g, &SamplingPlan::subsets(500, 3)).unwrap();
        let mae: f64 = r
            .estimates
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 8.0;
        assert!(mae <= 0.05, "mae {mae}");
    }

    #[test]
    fn single_player_is_exact() {
        let g = FnGame::new(1, |c| if c.is_empty() { 0.0 } else { 0.7 }).unwrap();
        for r in [1, 5, 100] {
            let rep = estimate_permutations(&g, &SamplingPlan::permutations(r, 9)).unwrap();
            assert_eq!(rep.estimates.0, vec![0.7]);
        }
    }

    #[test]
    fn accounting_invariants() {
        let g = make_un_security_council();
        let rep = estimate_permutations(&g, &SamplingPlan::permutations(50, 4)).unwrap();
        assert_eq!(rep.lookups, 50 * 16);
        assert_eq!(rep.payoff_evaluations + rep.cache_hits, rep.lookups);
        assert!(rep.payoff_evaluations <= 50 * 16);
        // empty and grand coalition are shared by every ordering
        assert!(rep.cache_hits >= 2 * 49);
        // efficiency holds per ordering, so also for the average
        assert!((rep.estimates.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let g = make_perturbed_uniform(7, 0.02, 1).unwrap();
        for plan in [SamplingPlan::permutations(40, 11), SamplingPlan::subsets(40, 11)] {
            let a = estimate(&g, &plan).unwrap();
            let b = estimate(&g, &plan).unwrap();
            assert_eq!(a, b);
            let c = estimate(&g, &plan.with_seed(12)).unwrap();
            assert_ne!(a.estimates, c.estimates);
        }
    }

    #[test]
    fn rejects_bad_plans() {
        let g = three_player_example();
        assert!(estimate_permutations(&g, &SamplingPlan::permutations(0, 0)).is_err());
        assert!(estimate_permutations(&g, &SamplingPlan::subsets(10, 0)).is_err());
        assert!(estimate_subsets(&g, &SamplingPlan::permutations(10, 0)).is_err());
        let big = FnGame::new(11, |c| c.len() as f64).unwrap();
        assert!(matches!(
            estimate_permutations(&big, &SamplingPlan::exhaustive(SamplingMethod::Permutation)),
            Err(Error::EnumerationLimit { .. })
        ));
    }

    #[test]
    fn report_serializes() {
        let g = three_player_example();
        let rep = estimate(&g, &SamplingPlan::permutations(10, 2)).unwrap();
        let json = rep.to_json_string().unwrap();
        assert!(json.contains("\"payoff_evaluations\""));
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }
}
