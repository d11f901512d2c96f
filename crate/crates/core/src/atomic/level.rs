use std::fmt;

use serde::Serialize;

use super::HalfInt;
use crate::error::{Error, Result};

/// A Rydberg level |n l j m⟩ of a single-valence-electron atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AtomLevel {
    pub species: String,
    pub n: u32,
    pub l: u32,
    pub j: HalfInt,
    pub m: HalfInt,
}


impl AtomLevel {
    pub fn new(species: impl Into<String>, n: u32, l: u32, j: HalfInt, m: HalfInt) -> Result<Self> {
        if n == 0 || l >= n {
            return Err(Error::invalid(format!("need 0 <= l < n, got n={n}, l={l}")));
        }
        if (j.twice() - 2 * l as i32).abs() != 1 {
            return Err(Error::invalid(format!("|j - l| must be 1/2, got l={l}, j={j}")));
        }
        if m.abs() > j || (j.twice() - m.twice()) % 2 != 0 {
            return Err(Error::invalid(format!("m={m} not a projection of j={j}")));
        }
        Ok(AtomLevel {
            species: species.into(),
            n,
            l,
            j,
            m,
        })
    }

    /// nS_1/2 with projection m.
    pub fn s_half(species: &str, n: u32, m: HalfInt) -> Result<Self> {
        AtomLevel::new(species, n, 0, HalfInt::HALF, m)
    }

    /// nP_3/2 with projection m.
    pub fn p_three_halves(species: &str, n: u32, m: HalfInt) -> Result<Self> {
        AtomLevel::new(species, n, 1, HalfInt::THREE_HALVES, m)
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const L: [char; 7] = ['S', 'P', 'D', 'F', 'G', 'H', 'I'];
        let l = L.get(self.l as usize).copied().unwrap_or('?');
        let sign = if self.m.twice() >= 0 { "+" } else { "" };
        write!(f, "{} {}{}{} m={}{}", self.species, self.n, l, self.j, sign, self.m)
    }
}
