//! Fixed-width coalition bitsets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest player count a [`Coalition`] can represent.
pub const MAX_PLAYERS: usize = 128;

/// A subset of the players `0..n`, stored as a 128-bit mask.
///
/// Bit `i` is set iff player `i` is a member. Bits at positions `>= n` are
/// always clear.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coalition {
    bits: u128,
    n: u8,
}

fn universe_mask(n: usize) -> u128 {
    if n == MAX_PLAYERS {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

impl Coalition {
    fn check_n(n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::domain("player count must be positive"));
        }
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: n,
                max: MAX_PLAYERS,
            });
        }
        Ok(())
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Coalition { bits: 0, n: n as u8 })
    }

    /// The grand coalition.
    pub fn full(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Coalition {
            bits: universe_mask(n),
            n: n as u8,
        })
    }

    pub fn from_bits(n: usize, bits: u128) -> Result<Self> {
        Self::check_n(n)?;
        if bits & !universe_mask(n) != 0 {
            return Err(Error::domain(format!(
                "bitset {bits:#x} has members outside 0..{n}"
            )));
        }
        Ok(Coalition { bits, n: n as u8 })
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(n: usize, members: I) -> Result<Self> {
        let mut c = Self::empty(n)?;
        for i in members {
            if i >= n {
                return Err(Error::domain(format!("player {i} out of range 0..{n}")));
            }
            c.bits |= 1u128 << i;
        }
        Ok(c)
    }

    #[inline]
    pub fn players(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn bits(&self) -> u128 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.players() && (self.bits >> i) & 1 == 1
    }

    /// Copy with player `i` added. Panics if `i` is out of range.
    #[inline]
    pub fn with(self, i: usize) -> Self {
        assert!(i < self.players(), "player {i} out of range");
        Coalition {
            bits: self.bits | (1u128 << i),
            n: self.n,
        }
    }

    /// Copy with player `i` removed. Panics if `i` is out of range.
    #[inline]
    pub fn without(self, i: usize) -> Self {
        assert!(i < self.players(), "player {i} out of range");
        Coalition {
            bits: self.bits & !(1u128 << i),
            n: self.n,
        }
    }

    pub fn complement(self) -> Self {
        Coalition {
            bits: !self.bits & universe_mask(self.players()),
            n: self.n,
        }
    }

    /// Members in ascending order.
    pub fn members(&self) -> Members {
        Members { bits: self.bits }
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()?;
        write!(f, "/{}", self.players())
    }
}

/// Iterator over the set bits of a coalition, lowest first.
#[derive(Clone)]
pub struct Members {
    bits: u128,
}

impl Iterator for Members {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.bits == 0 {
            return None;
        }
        let i = self.bits.trailing_zeros() as usize;
        self.bits &= self.bits - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let k = self.bits.count_ones() as usize;
        (k, Some(k))
    }
}

impl ExactSizeIterator for Members {}
