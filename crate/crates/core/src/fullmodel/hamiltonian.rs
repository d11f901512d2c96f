use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::{AtomRole, BasisState, MultilevelBasis};
use crate::atomic::level_energy;
use crate::error::{Error, Result};
use crate::interaction::{pair_coupling_full, Geometry, PairCoupling};

/// Energy of `level` of six-level atom `k` in rad/μs.
fn energy(basis: &MultilevelBasis, k: usize, level: usize, b_gauss: f64, mu_b: f64) -> Result<f64> {
    let m = &basis.atoms[k].manifold;
    level_energy(&m.levels[level], &m.species, b_gauss, mu_b)
}

/// Full single-excitation Hamiltonian in rad/μs.
///
/// Diagonal: Σ_k [E_k(level) − E_k(designated lower)] − ω_ref, where ω_ref is
/// the designated transition frequency of the first main atom. The
/// configuration with every atom in its designated lower level plus one
/// resonant quantum (the sender excitation) therefore sits at zero, as do the
/// two-level excitations. Off-diagonal: the full dipole-dipole operator
/// between every pair of six-level atoms.
pub fn build_full_hamiltonian(
    basis: &MultilevelBasis,
    geometry: &Geometry,
    b_gauss: f64,
    bohr_magneton: f64,
) -> Result<DMatrix<Complex64>> {
    let n = basis.len();
    let atoms = &basis.atoms;
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    if atoms.is_empty() {
        return Ok(h);
    }

    // Level energies relative to each atom's designated lower level.
    let mut rel: Vec<Vec<f64>> = Vec::with_capacity(atoms.len());
    for (k, a) in atoms.iter().enumerate() {
        let e0 = energy(basis, k, a.lower, b_gauss, bohr_magneton)?;
        let row = (0..a.manifold.dim())
            .map(|l| energy(basis, k, l, b_gauss, bohr_magneton).map(|e| e - e0))
            .collect::<Result<Vec<f64>>>()?;
        rel.push(row);
    }
    let r = atoms.iter().position(|a| a.role == AtomRole::Main).unwrap_or(0);
    let omega_ref = rel[r][atoms[r].upper];

    let mut pairs: HashMap<(usize, usize), PairCoupling> = HashMap::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let pc = pair_coupling_full(&atoms[i].manifold, &atoms[j].manifold, geometry, atoms[i].id, atoms[j].id)
                .map_err(|e| Error::invalid(format!("atoms {} and {}: {e}", atoms[i].id, atoms[j].id)))?;
            pairs.insert((i, j), pc);
        }
    }

    for (s, state) in basis.states().iter().enumerate() {
        let BasisState::Multilevel(levels) = state else {
            continue;
        };
        let diag: f64 = levels.iter().enumerate().map(|(k, l)| rel[k][*l as usize]).sum::<f64>() - omega_ref;
        h[(s, s)] = Complex64::new(diag, 0.0);

        let k = basis.excited_atom(s);
        let u = levels[k] as usize;
        for j in 0..atoms.len() {
            if j == k {
                continue;
            }
            let lj = levels[j] as usize;
            for &l_new in atoms[k].lower_levels() {
                for &u_new in atoms[j].upper_levels() {
                    let amp = if k < j {
                        pairs[&(k, j)].element(l_new, u_new, u, lj)
                    } else {
                        pairs[&(j, k)].element(u_new, l_new, lj, u)
                    };
                    if amp == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut target = levels.clone();
                    target[k] = l_new as u8;
                    target[j] = u_new as u8;
                    let t = basis
                        .index_of(&BasisState::Multilevel(target))
                        .expect("target configuration is in the basis");
                    h[(t, s)] += amp;
                }
            }
        }
    }
    Ok(h)
}
