//! Effective three-site Hamiltonian of the Rydberg router triangle.
//!
//! Main atoms 1, 2, 3 exchange their excitation directly through the
//! truncated flip-flop T and virtually through an off-resonant auxiliary
//! atom k. Eliminating the auxiliary intermediate state gives
//!
//! ```text
//! H[j][i] = T_{i→j} + T2_{i→j},   H[i][i] = S2_i,
//! T2_{i→j} = −V_jk·conj(V_ik)/Δ,  S2_i = −|V_ik|²/Δ,
//! ```
//!
//! with V_ik = ⟨1_i −_k|V|0_i +_k⟩ from [`pair_coupling_ab`].

use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;
use serde::Serialize;

use super::{wrap_phase, FluxTriangle};
use crate::atomic::RouterAtoms;
use crate::error::{Error, Result};
use crate::interaction::{pair_coupling_aa, pair_coupling_ab, AtomId, CouplingConstants, Geometry};

/// Which auxiliary site is occupied: 4 at +y or 5 at −y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxAtom {
    Four,
    Five,
}

impl AuxAtom {
    pub fn id(self) -> AtomId {
        match self {
            AuxAtom::Four => 4,
            AuxAtom::Five => 5,
        }
    }
}

/// Router triangle geometry in μm.
///
/// `a` is the 2–3 distance, `c` the distance of atom 1 to atoms 2 and 3, and
/// `b` the distance of either auxiliary site to atoms 2 and 3. Atoms 2 and 3
/// sit on the x axis, atom 1 above their midpoint along the quantization
/// axis and the auxiliary sites on ±y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RouterGeometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RouterGeometry {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("a must be positive, got {a}")));
        }
        if !(b > a / 2.0) || !(c > a / 2.0) {
            return Err(Error::invalid(format!(
                "b and c must exceed a/2 = {}, got b={b}, c={c}",
                a / 2.0
            )));
        }
        Ok(RouterGeometry { a, b, c })
    }

    /// Height of atom 1 above the 2–3 axis.
    pub fn height(&self) -> f64 {
        (self.c * self.c - self.a * self.a / 4.0).sqrt()
    }

    /// Distance of each auxiliary site from the origin.
    pub fn aux_offset(&self) -> f64 {
        (self.b * self.b - self.a * self.a / 4.0).sqrt()
    }

    /// Positions of atoms 1 through 5.
    pub fn geometry(&self) -> Geometry {
        let y = self.aux_offset();
        Geometry::new()
            .with(1, [0.0, 0.0, self.height()])
            .with(2, [-self.a / 2.0, 0.0, 0.0])
            .with(3, [self.a / 2.0, 0.0, 0.0])
            .with(4, [0.0, y, 0.0])
            .with(5, [0.0, -y, 0.0])
    }
}

/// The separate pieces that make up an effective triangle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    /// `direct[i][j]` = T_{i→j}.
    pub direct: [[f64; 3]; 3],
    /// `virtual_hop[i][j]` = T2_{i→j}; the diagonal is zero.
    pub virtual_hop: [[Complex64; 3]; 3],
    /// Second-order shifts S2_i.
    pub shifts: [f64; 3],
    /// V_ik for each main atom.
    pub aux_couplings: [Complex64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveTriangle {
    /// μ₁, μ₂, μ₃ in rad/μs.
    pub mu: [f64; 3],
    /// |J12|, |J23|, |J13|.
    pub magnitudes: [f64; 3],
    /// γ12, γ23, γ13 in (−π, π].
    pub phases: [f64; 3],
    pub detuning: f64,
    pub aux: AtomId,
    /// |Δ| divided by the largest |V_ik|; elimination needs this ≫ 1.
    pub adiabaticity: f64,
    pub provenance: Provenance,
}

impl EffectiveTriangle {
    fn amplitude(&self, from: usize, to: usize) -> Complex64 {
        self.provenance.virtual_hop[from][to] + self.provenance.direct[from][to]
    }

    pub fn gamma_tot(&self) -> f64 {
        wrap_phase(self.phases.iter().sum())
    }

    /// Hermitian 3×3 Hamiltonian with H[j][i] the amplitude i → j.
    pub fn hamiltonian(&self) -> Matrix3<Complex64> {
        Matrix3::from_fn(|j, i| {
            if i == j {
                Complex64::new(self.mu[i], 0.0)
            } else {
                self.amplitude(i, j)
            }
        })
    }

    pub fn to_flux_triangle(&self) -> FluxTriangle {
        FluxTriangle::from_polar(self.magnitudes, self.phases).with_onsite(self.mu)
    }
}

/// Effective triangle at the detuning set by field `b_gauss`.
pub fn effective_triangle(
    geometry: &Geometry,
    atoms: &RouterAtoms,
    b_gauss: f64,
    aux: AtomId,
) -> Result<EffectiveTriangle> {
    let consts = CouplingConstants::from_atoms(atoms)?;
    effective_triangle_at(geometry, &consts, atoms.detuning(b_gauss)?, aux)
}

/// Effective triangle for main atoms 1, 2, 3 and auxiliary atom `aux` at detuning `delta`.
pub fn effective_triangle_at(
    geometry: &Geometry,
    consts: &CouplingConstants,
    delta: f64,
    aux: AtomId,
) -> Result<EffectiveTriangle> {
    if !delta.is_finite() || delta == 0.0 {
        return Err(Error::invalid(format!("detuning must be finite and non-zero, got {delta}")));
    }
    if (1..=3).contains(&aux) {
        return Err(Error::invalid(format!("auxiliary atom id {aux} collides with a main atom")));
    }
    let ids = [1, 2, 3];
    let mut v = [Complex64::new(0.0, 0.0); 3];
    for (k, &i) in ids.iter().enumerate() {
        let p = geometry.pair(i, aux)?;
        v[k] = pair_coupling_ab(p.r, p.theta, p.phi, consts.c_ab)?;
    }
    let mut direct = [[0.0; 3]; 3];
    let mut virtual_hop = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let p = geometry.pair(ids[i], ids[j])?;
                direct[i][j] = pair_coupling_aa(p.r, p.theta, consts.c_aa)?;
                virtual_hop[i][j] = -v[j] * v[i].conj() / delta;
            }
        }
    }
    let shifts = v.map(|x| -x.norm_sqr() / delta);
    let vmax = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let provenance = Provenance {
        direct,
        virtual_hop,
        shifts,
        aux_couplings: v,
    };
    let amp = |i: usize, j: usize| virtual_hop[i][j] + direct[i][j];
    let (a12, a23, a31) = (amp(0, 1), amp(1, 2), amp(2, 0));
    Ok(EffectiveTriangle {
        mu: shifts,
        magnitudes: [a12.norm(), a23.norm(), a31.norm()],
        phases: [a12.arg(), a23.arg(), a31.arg()],
        detuning: delta,
        aux,
        adiabaticity: if vmax > 0.0 { delta.abs() / vmax } else { f64::INFINITY },
        provenance,
    })
}

/// Single-excitation Hamiltonian before elimination.
///
/// Basis: excitation on main atom 1, 2 or 3 with the auxiliary atom in |−⟩,
/// then all main atoms in |0⟩ with the auxiliary atom in |+⟩ (energy Δ).
pub fn four_state_hamiltonian(
    geometry: &Geometry,
    consts: &CouplingConstants,
    delta: f64,
    aux: AtomId,
) -> Result<Matrix4<Complex64>> {
    let eff = effective_triangle_at(geometry, consts, delta, aux)?;
    let v = eff.provenance.aux_couplings;
    let mut h = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                h[(j, i)] = Complex64::new(eff.provenance.direct[i][j], 0.0);
            }
        }
        h[(i, 3)] = v[i];
        h[(3, i)] = v[i].conj();
    }
    h[(3, 3)] = Complex64::new(delta, 0.0);
    Ok(h)
}
