use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interaction::{AtomId, Manifold};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomRole {
    Main,
    Aux,
}

/// An atom with its full S1/2 + P3/2 manifold.
#[derive(Clone, Debug)]
pub struct SixLevelAtom {
    pub id: AtomId,
    pub role: AtomRole,
    pub manifold: Manifold,
    /// Manifold index of the designated lower level (|0⟩ or |−⟩).
    pub lower: usize,
    /// Manifold index of the designated upper level (|1⟩ or |+⟩).
    pub upper: usize,
    lowers: Vec<usize>,
    uppers: Vec<usize>,
}

impl SixLevelAtom {
    /// Levels with l = 0 form the lower manifold, l = 1 the upper one.
    pub fn new(id: AtomId, role: AtomRole, manifold: Manifold, lower: usize, upper: usize) -> Result<Self> {
        let lowers: Vec<usize> = (0..manifold.dim()).filter(|&k| manifold.levels[k].l == 0).collect();
        let uppers: Vec<usize> = (0..manifold.dim()).filter(|&k| manifold.levels[k].l == 1).collect();
        if !lowers.contains(&lower) || !uppers.contains(&upper) {
            return Err(Error::invalid(format!(
                "atom {id}: designated levels must be one S and one P level of its manifold"
            )));
        }
        Ok(SixLevelAtom {
            id,
            role,
            manifold,
            lower,
            upper,
            lowers,
            uppers,
        })
    }

    pub fn lower_levels(&self) -> &[usize] {
        &self.lowers
    }

    pub fn upper_levels(&self) -> &[usize] {
        &self.uppers
    }
}

/// One single-excitation configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisState {
    /// Manifold level index of every six-level atom, exactly one of them upper.
    Multilevel(Vec<u8>),
    /// Two-level atom `k` excited, all six-level atoms in their designated lower level.
    TwoLevel(usize),
}

#[derive(Clone, Debug)]
pub struct MultilevelBasis {
    pub atoms: Vec<SixLevelAtom>,
    /// Labels of the two-level atoms.
    pub two_level: Vec<String>,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

/// Enumerates all single-excitation states.
///
/// Order: excited six-level atom (in the given order), then its upper level,
/// then the lower levels of the other atoms lexicographically (first atom
/// slowest); the two-level excitations follow in the given order.
pub fn build_basis(atoms: Vec<SixLevelAtom>, two_level: Vec<String>) -> Result<MultilevelBasis> {
    if atoms.is_empty() && two_level.is_empty() {
        return Err(Error::invalid("basis needs at least one atom"));
    }
    let mut states = Vec::new();
    for (k, atom) in atoms.iter().enumerate() {
        for &u in atom.upper_levels() {
            let others: Vec<&SixLevelAtom> = atoms.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, a)| a).collect();
            let radix: Vec<usize> = others.iter().map(|a| a.lower_levels().len()).collect();
            let total: usize = radix.iter().product();
            for mut code in 0..total {
                let mut digits = vec![0usize; others.len()];
                for d in (0..others.len()).rev() {
                    digits[d] = code % radix[d];
                    code /= radix[d];
                }
                let mut levels = Vec::with_capacity(atoms.len());
                let mut it = digits.iter().zip(&others);
                for j in 0..atoms.len() {
                    if j == k {
                        levels.push(u as u8);
                    } else {
                        let (d, a) = it.next().expect("one digit per other atom");
                        levels.push(a.lower_levels()[*d] as u8);
                    }
                }
                states.push(BasisState::Multilevel(levels));
            }
        }
    }
    for k in 0..two_level.len() {
        states.push(BasisState::TwoLevel(k));
    }
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(MultilevelBasis {
        atoms,
        two_level,
        states,
        index,
    })
}

impl MultilevelBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, state: &BasisState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn atom_position(&self, id: AtomId) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    /// Levels with every six-level atom in its designated lower level.
    pub fn ground_levels(&self) -> Vec<u8> {
        self.atoms.iter().map(|a| a.lower as u8).collect()
    }

    /// Atom `id` in its designated upper level, all others in their designated lower levels.
    pub fn designated_excitation(&self, id: AtomId) -> Result<usize> {
        let k = self
            .atom_position(id)
            .ok_or_else(|| Error::invalid(format!("atom {id} is not in the basis")))?;
        let mut levels = self.ground_levels();
        levels[k] = self.atoms[k].upper as u8;
        Ok(self.index[&BasisState::Multilevel(levels)])
    }

    pub fn two_level_state(&self, label: &str) -> Result<usize> {
        let k = self
            .two_level
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::invalid(format!("no two-level atom `{label}`")))?;
        Ok(self.index[&BasisState::TwoLevel(k)])
    }

    /// Index of the excited atom of each state: six-level atoms first, then two-level atoms.
    pub fn excited_atom(&self, state: usize) -> usize {
        match &self.states[state] {
            BasisState::Multilevel(levels) => levels
                .iter()
                .zip(&self.atoms)
                .position(|(l, a)| a.upper_levels().contains(&(*l as usize)))
                .expect("one atom is excited"),
            BasisState::TwoLevel(k) => self.atoms.len() + k,
        }
    }

    /// Short label such as `3:P+3/2|S+1/2,S+1/2,S+1/2`, or the two-level atom label.
    pub fn label(&self, state: usize) -> String {
        match &self.states[state] {
            BasisState::Multilevel(levels) => {
                let k = self.excited_atom(state);
                let lvl = |a: &SixLevelAtom, i: u8| {
                    let l = &a.manifold.levels[i as usize];
                    let sign = if l.m.twice() >= 0 { "+" } else { "" };
                    format!("{}{}{}", if l.l == 0 { "S" } else { "P" }, sign, l.m)
                };
                let rest: Vec<String> = levels
                    .iter()
                    .zip(&self.atoms)
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, (i, a))| lvl(a, *i))
                    .collect();
                format!("{}:{}|{}", self.atoms[k].id, lvl(&self.atoms[k], levels[k]), rest.join(","))
            }
            BasisState::TwoLevel(k) => self.two_level[*k].clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::SpeciesTable;

    fn atoms(count: usize) -> Vec<SixLevelAtom> {
        let rb = SpeciesTable::benchmark().get("Rb").unwrap().clone();
        let m = Manifold::six_level(rb, 70).unwrap();
        let lower = m.levels.iter().position(|l| l.l == 0).unwrap();
        let upper = m.levels.iter().position(|l| l.l == 1).unwrap();
        (1..=count)
            .map(|id| SixLevelAtom::new(id, AtomRole::Main, m.clone(), lower, upper).unwrap())
            .collect()
    }

    #[test]
    fn state_count_formula() {
        for a in 1..=5usize {
            let b = build_basis(atoms(a), vec![]).unwrap();
            assert_eq!(b.len(), a * 4 * (1 << (a - 1)), "A = {a}");
        }
        assert_eq!(build_basis(atoms(1), vec![]).unwrap().len(), 4);
        let b = build_basis(atoms(4), vec!["s".into(), "rL".into(), "rR".into()]).unwrap();
        assert_eq!(b.len(), 131);
        assert!(build_basis(vec![], vec![]).is_err());
    }

    #[test]
    fn ordering_and_lookup() {
        let b = build_basis(atoms(2), vec!["s".into()]).unwrap();
        // Atom 1 excited first, upper sublevel next, then atom 2's lower level.
        for s in 0..8 {
            assert_eq!(b.excited_atom(s), 0);
        }
        for s in 8..16 {
            assert_eq!(b.excited_atom(s), 1);
        }
        assert_eq!(b.excited_atom(16), 2);
        for (k, st) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(st), Some(k));
        }
        let d = b.designated_excitation(2).unwrap();
        assert_eq!(b.excited_atom(d), 1);
        assert_eq!(b.two_level_state("s").unwrap(), 16);
        assert!(b.two_level_state("x").is_err());
        assert!(b.designated_excitation(9).is_err());
        assert_eq!(b.label(16), "s");
    }

    #[test]
    fn designated_levels_validated() {
        let rb = SpeciesTable::benchmark().get("Rb").unwrap().clone();
        let m = Manifold::six_level(rb, 70).unwrap();
        let s = m.levels.iter().position(|l| l.l == 0).unwrap();
        assert!(SixLevelAtom::new(1, AtomRole::Main, m.clone(), s, s).is_err());
    }
}
