//! Coalitional games: the payoff-oracle trait, explicit payoff tables and
//! the benchmark games used to validate the estimators.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::rng;

/// Largest player count for which a full payoff table is materialised.
pub const TABLE_LIMIT: usize = 20;

/// A player count plus a payoff oracle.
///
/// `payoff` must be a pure function of the coalition: repeated calls with the
/// same coalition return identical values. Implementations are shared across
/// worker threads, hence `Sync`.
pub trait CoalitionalGame: Sync {
    fn players(&self) -> usize;

    fn payoff(&self, coalition: Coalition) -> f64;

    fn empty(&self) -> Coalition {
        Coalition::empty(self.players()).expect("game has a valid player count")
    }

    fn grand(&self) -> Coalition {
        Coalition::full(self.players()).expect("game has a valid player count")
    }
}

impl<G: CoalitionalGame + ?Sized> CoalitionalGame for &G {
    fn players(&self) -> usize {
        (**self).players()
    }

    fn payoff(&self, coalition: Coalition) -> f64 {
        (**self).payoff(coalition)
    }
}

/// Game defined by a closure.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F> FnGame<F>
where
    F: Fn(Coalition) -> f64 + Sync,
{
    pub fn new(n: usize, f: F) -> Result<Self> {
        Coalition::empty(n)?;
        Ok(FnGame { n, f })
    }
}

impl<F> CoalitionalGame for FnGame<F>
where
    F: Fn(Coalition) -> f64 + Sync,
{
    fn players(&self) -> usize {
        self.n
    }

    fn payoff(&self, coalition: Coalition) -> f64 {
        (self.f)(coalition)
    }
}

/// Complete payoff table over all `2^n` coalitions, indexed by bitset.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    n: usize,
    payoffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    n: usize,
    payoffs: BTreeMap<String, f64>,
}

impl PayoffTable {
    pub fn new(n: usize, payoffs: Vec<f64>) -> Result<Self> {
        Coalition::empty(n)?;
        if n > TABLE_LIMIT {
            return Err(Error::TooManyPlayers {
                players: n,
                max: TABLE_LIMIT,
            });
        }
        if payoffs.len() != 1 << n {
            return Err(Error::InvalidTable(format!(
                "{} entries for {n} players, expected {}",
                payoffs.len(),
                1usize << n
            )));
        }
        if let Some(i) = payoffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTable(format!("payoff of coalition {i} is not finite")));
        }
        Ok(PayoffTable { n, payoffs })
    }

    /// Materialises any game with at most [`TABLE_LIMIT`] players.
    pub fn from_game<G: CoalitionalGame + ?Sized>(game: &G) -> Result<Self> {
        let n = game.players();
        if n > TABLE_LIMIT {
            return Err(Error::TooManyPlayers {
                players: n,
                max: TABLE_LIMIT,
            });
        }
        let payoffs = crate::par::map_range(1usize << n, |bits| {
            game.payoff(Coalition::from_bits(n, bits as u128).expect("bits < 2^n"))
        });
        PayoffTable::new(n, payoffs)
    }

    pub fn entries(&self) -> &[f64] {
        &self.payoffs
    }

    /// Pointwise sum of two games over the same players.
    pub fn add(&self, other: &PayoffTable) -> Result<PayoffTable> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                what: "player count",
                expected: self.n,
                found: other.n,
            });
        }
        let payoffs = self
            .payoffs
            .iter()
            .zip(&other.payoffs)
            .map(|(a, b)| a + b)
            .collect();
        PayoffTable::new(self.n, payoffs)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(s)?;
        let n = file.n;
        Coalition::empty(n)?;
        if n > TABLE_LIMIT {
            return Err(Error::TooManyPlayers {
                players: n,
                max: TABLE_LIMIT,
            });
        }
        let mut payoffs = vec![None; 1 << n];
        for (key, value) in &file.payoffs {
            let bits: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::InvalidTable(format!("key {key:?} is not a decimal bitset")))?;
            if bits >= payoffs.len() {
                return Err(Error::InvalidTable(format!(
                    "key {bits} has members outside 0..{n}"
                )));
            }
            if payoffs[bits].replace(*value).is_some() {
                return Err(Error::InvalidTable(format!("duplicate key {bits}")));
            }
        }
        let missing: Vec<usize> = payoffs
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .take(8)
            .collect();
        if !missing.is_empty() {
            return Err(Error::InvalidTable(format!(
                "table is not total, missing coalitions {missing:?}"
            )));
        }
        PayoffTable::new(n, payoffs.into_iter().map(Option::unwrap).collect())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = TableFile {
            n: self.n,
            payoffs: self
                .payoffs
                .iter()
                .enumerate()
                .map(|(i, v)| (i.to_string(), *v))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl CoalitionalGame for PayoffTable {
    fn players(&self) -> usize {
        self.n
    }

    #[inline]
    fn payoff(&self, coalition: Coalition) -> f64 {
        self.payoffs[coalition.bits() as usize]
    }
}

/// The three-player example `{}=0, {A}=1, {B}=2, {C}=2, {A,B}=4, {A,C}=3,
/// {B,C}=3, {A,B,C}=5` with A, B, C mapped to players 0, 1, 2.
pub fn three_player_example() -> PayoffTable {
    // index = bitset: 0b001 = A, 0b010 = B, 0b100 = C
    PayoffTable::new(3, vec![0.0, 1.0, 2.0, 4.0, 2.0, 3.0, 3.0, 5.0]).expect("valid table")
}

/// UN Security Council voting game: 15 players, players `0..5` hold a veto.
/// A coalition wins (payoff 1) iff it contains all permanent members and at
/// least 9 members in total.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecurityCouncil;

impl SecurityCouncil {
    pub const PLAYERS: usize = 15;
    pub const PERMANENT: usize = 5;
    pub const QUOTA: usize = 9;
}

const PERMANENT_MASK: u128 = (1 << SecurityCouncil::PERMANENT) - 1;

impl CoalitionalGame for SecurityCouncil {
    fn players(&self) -> usize {
        Self::PLAYERS
    }

    fn payoff(&self, coalition: Coalition) -> f64 {
        let vetoes_present = coalition.bits() & PERMANENT_MASK == PERMANENT_MASK;
        if vetoes_present && coalition.len() >= Self::QUOTA {
            1.0
        } else {
            0.0
        }
    }
}

pub fn make_un_security_council() -> SecurityCouncil {
    SecurityCouncil
}

/// Almost-uniform game: `v(S) = |S|/n + u_S` with `u_S` drawn uniformly from
/// `[-epsilon, epsilon]` for every coalition except the empty and the grand
/// coalition, where the noise is zero.
pub fn make_perturbed_uniform(n: usize, epsilon: f64, seed: u64) -> Result<PayoffTable> {
    if n == 0 {
        return Err(Error::domain("perturbed uniform game needs at least one player"));
    }
    if n > TABLE_LIMIT {
        return Err(Error::TooManyPlayers {
            players: n,
            max: TABLE_LIMIT,
        });
    }
    if !(0.0..1.0 / n as f64).contains(&epsilon) {
        return Err(Error::domain(format!(
            "epsilon {epsilon} outside [0, 1/{n})"
        )));
    }
    let full = (1usize << n) - 1;
    let mut rng = rng::rng_from_seed(seed);
    let payoffs = (0..=full)
        .map(|bits| {
            let base = bits.count_ones() as f64 / n as f64;
            // one draw per coalition keeps the stream aligned with the bitset index
            let noise = if epsilon > 0.0 {
                rng.random_range(-epsilon..=epsilon)
            } else {
                0.0
            };
            if bits == 0 {
                0.0
            } else if bits == full {
                1.0
            } else {
                base + noise
            }
        })
        .collect();
    PayoffTable::new(n, payoffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(n: usize, m: &[usize]) -> Coalition {
        Coalition::from_members(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn security_council_rules() {
        let g = make_un_security_council();
        let perm: Vec<usize> = (0..5).collect();
        let with = |extra: &[usize]| {
            let mut m = perm.clone();
            m.extend_from_slice(extra);
            g.payoff(members(15, &m))
        };
        assert_eq!(with(&[5, 6, 7, 8]), 1.0);
        assert_eq!(with(&[5, 6, 7]), 0.0);
        let four_perm: Vec<usize> = (1..15).collect();
        assert_eq!(g.payoff(members(15, &four_perm)), 0.0);
        assert_eq!(g.payoff(g.grand()), 1.0);
        assert_eq!(g.payoff(g.empty()), 0.0);
    }

    #[test]
    fn perturbed_uniform_endpoints() {
        for seed in [0, 1, 99] {
            let g = make_perturbed_uniform(4, 0.0, seed).unwrap();
            assert_eq!(g.payoff(g.grand()), 1.0);
            assert_eq!(g.payoff(g.empty()), 0.0);
            assert_eq!(g.payoff(members(4, &[1, 3])), 0.5);
        }
        let g = make_perturbed_uniform(6, 0.05, 3).unwrap();
        assert_eq!(g.payoff(g.grand()), 1.0);
        for (bits, v) in g.entries().iter().enumerate() {
            let base = (bits as u32).count_ones() as f64 / 6.0;
            assert!((v - base).abs() <= 0.05 + 1e-15);
        }
        assert_eq!(g, make_perturbed_uniform(6, 0.05, 3).unwrap());
        assert_ne!(g, make_perturbed_uniform(6, 0.05, 4).unwrap());
    }

    #[test]
    fn perturbed_uniform_rejects_bad_epsilon() {
        assert!(matches!(make_perturbed_uniform(4, 0.25, 0), Err(Error::Domain(_))));
        assert!(matches!(make_perturbed_uniform(4, -0.01, 0), Err(Error::Domain(_))));
        assert!(make_perturbed_uniform(0, 0.0, 0).is_err());
    }

    #[test]
    fn table_json_round_trip() {
        let t = three_player_example();
        let s = t.to_json_string().unwrap();
        assert_eq!(PayoffTable::from_json_str(&s).unwrap(), t);
    }

    #[test]
    fn table_json_requires_total_coverage() {
        let err = PayoffTable::from_json_str(r#"{"n": 2, "payoffs": {"0": 0, "1": 1, "3": 2}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("missing coalitions [2]"), "{err}");
        let err = PayoffTable::from_json_str(r#"{"n": 1, "payoffs": {"0": 0, "1": 1, "2": 2}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidTable(_)));
        let err =
            PayoffTable::from_json_str(r#"{"n": 1, "payoffs": {"0": 0, "x": 1}}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidTable(_)));
    }

    #[test]
    fn from_game_matches_oracle() {
        let t = PayoffTable::from_game(&make_un_security_council()).unwrap();
        assert_eq!(t.entries().len(), 1 << 15);
        assert_eq!(t.entries().iter().filter(|&&v| v == 1.0).count(), {
            // winning coalitions: all 5 vetoes plus >= 4 of the 10 others
            (4..=10).map(|k| binom(10, k)).sum::<usize>()
        });
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }
}
