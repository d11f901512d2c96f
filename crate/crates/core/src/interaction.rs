//! Dipole-dipole couplings between atom pairs.
//!
//! # Dipole operator convention
//!
//! Every atom carries a manifold of levels. Its dipole operator is split into
//! three components:
//!
//! * `d⁺` with ⟨b|d⁺|a⟩ = C(a→b)·R nonzero only when m_b = m_a + 1,
//! * `d⁻ = (d⁺)†`, which lowers m by one,
//! * `dᶻ` with ⟨b|dᶻ|a⟩ = C(a→b)·R for m_b = m_a,
//!
//! where C is [`angular_dipole`] and R is [`radial_dipole`]. The two-atom
//! operator is
//!
//! ```text
//! V = K/r³ [ dᶻdᶻ (1 − 3cos²θ) + ½(d⁺d⁻ + d⁻d⁺)(1 − 3cos²θ)
//!          − (3/√2)(d⁺dᶻ + dᶻd⁺) sinθ cosθ e^(−iφ)
//!          − (3/√2)(d⁻dᶻ + dᶻd⁻) sinθ cosθ e^(+iφ)
//!          − (3/2)(d⁺d⁺ e^(−2iφ) + d⁻d⁻ e^(+2iφ)) sin²θ ]
//! ```
//!
//! with K the dipole constant of [`crate::units`] and (r, θ, φ) the spherical
//! coordinates of r⃗_j − r⃗_i about ẑ. Reversing the pair direction leaves V
//! unchanged. Restricted to two-level atoms this reproduces the flip-flop
//! amplitude (C_AA/r³)·½(1 − 3cos²θ) and the main/auxiliary exchange
//! −(C_AB/r³)(3/2) sin²θ e^(−2iφ) of [`pair_coupling_aa`] and
//! [`pair_coupling_ab`].

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::atomic::{angular_dipole, radial_dipole, AtomLevel, HalfInt, RouterAtoms, SpeciesParams};
use crate::error::{Error, Result};
use crate::units;

pub type AtomId = usize;

/// Atom positions in μm; the quantization axis is ẑ.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Geometry {
    positions: BTreeMap<AtomId, [f64; 3]>,
}

/// Spherical coordinates of r⃗_j − r⃗_i.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairGeometry {
    pub r: f64,
    /// Polar angle in [0, π].
    pub theta: f64,
    /// Azimuth in [0, 2π).
    pub phi: f64,
}

impl Geometry {
    pub fn new() -> Self {
        Geometry::default()
    }

    pub fn with(mut self, id: AtomId, position: [f64; 3]) -> Self {
        self.insert(id, position);
        self
    }

    pub fn insert(&mut self, id: AtomId, position: [f64; 3]) {
        self.positions.insert(id, position);
    }

    pub fn ids(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.positions.keys().copied()
    }

    pub fn position(&self, id: AtomId) -> Result<Vector3<f64>> {
        self.positions
            .get(&id)
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .ok_or_else(|| Error::invalid(format!("atom {id} has no position")))
    }

    pub fn pair(&self, i: AtomId, j: AtomId) -> Result<PairGeometry> {
        let d = self.position(j)? - self.position(i)?;
        let r = d.norm();
        if !(r > 0.0) {
            return Err(Error::invalid(format!("atoms {i} and {j} coincide")));
        }
        let theta = (d.z / r).clamp(-1.0, 1.0).acos();
        let mut phi = d.y.atan2(d.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Ok(PairGeometry { r, theta, phi })
    }

    /// Checks that no two atoms coincide.
    pub fn validate(&self) -> Result<()> {
        let ids: Vec<_> = self.ids().collect();
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                self.pair(i, j)?;
            }
        }
        Ok(())
    }

    /// Rotates every position by `chi` about ẑ.
    pub fn rotated_about_z(&self, chi: f64) -> Geometry {
        let (s, c) = chi.sin_cos();
        Geometry {
            positions: self
                .positions
                .iter()
                .map(|(&k, p)| (k, [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Geometry {
        Geometry {
            positions: self
                .positions
                .iter()
                .map(|(&k, p)| (k, [p[0] * factor, p[1] * factor, p[2] * factor]))
                .collect(),
        }
    }
}

/// Levels of one atom with its dipole operator components in units of e·a0.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub species: SpeciesParams,
    pub levels: Vec<AtomLevel>,
    d_plus: DMatrix<f64>,
    d_z: DMatrix<f64>,
}

impl Manifold {
    pub fn new(species: SpeciesParams, levels: Vec<AtomLevel>) -> Result<Self> {
        let n = levels.len();
        let mut d_plus = DMatrix::zeros(n, n);
        let mut d_z = DMatrix::zeros(n, n);
        let mut radial_cache: BTreeMap<(u32, u32, HalfInt, u32, u32, HalfInt), f64> = BTreeMap::new();
        for (a, from) in levels.iter().enumerate() {
            if from.species != species.name {
                return Err(Error::invalid(format!(
                    "level {from} does not belong to species {}",
                    species.name
                )));
            }
            for (b, to) in levels.iter().enumerate() {
                let dm = (to.m - from.m).twice();
                if !(dm == 0 || dm == 2) {
                    continue;
                }
                let c = angular_dipole(from, to)?;
                if c == 0.0 {
                    continue;
                }
                let key = (from.n, from.l, from.j, to.n, to.l, to.j);
                let r = match radial_cache.get(&key) {
                    Some(&r) => r,
                    None => {
                        let r = radial_dipole(&species, from.n, from.l, from.j, to.n, to.l, to.j)?;
                        radial_cache.insert(key, r);
                        r
                    }
                };
                if dm == 2 {
                    d_plus[(b, a)] = c * r;
                } else {
                    d_z[(b, a)] = c * r;
                }
            }
        }
        Ok(Manifold {
            species,
            levels,
            d_plus,
            d_z,
        })
    }

    /// nS_1/2 (m = −1/2, +1/2) followed by nP_3/2 (m = −3/2 … +3/2).
    pub fn six_level(species: SpeciesParams, n: u32) -> Result<Self> {
        let name = species.name.clone();
        let mut levels = Vec::with_capacity(6);
        for m in HalfInt::HALF.projections() {
            levels.push(AtomLevel::s_half(&name, n, m)?);
        }
        for m in HalfInt::THREE_HALVES.projections() {
            levels.push(AtomLevel::p_three_halves(&name, n, m)?);
        }
        Manifold::new(species, levels)
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn index_of(&self, level: &AtomLevel) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn d_plus(&self) -> &DMatrix<f64> {
        &self.d_plus
    }

    pub fn d_minus(&self) -> DMatrix<f64> {
        self.d_plus.transpose()
    }

    pub fn d_z(&self) -> &DMatrix<f64> {
        &self.d_z
    }
}

/// Angular coefficients multiplying d_i^a d_j^b, indexed by component
/// (0 = d⁺, 1 = d⁻, 2 = dᶻ).
fn angular_coefficients(theta: f64, phi: f64) -> [[Complex64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    let aniso = 1.0 - 3.0 * c * c;
    let e1 = Complex64::from_polar(1.0, -phi);
    let e2 = Complex64::from_polar(1.0, -2.0 * phi);
    let cross = -3.0 / SQRT_2 * s * c;
    let flip = -1.5 * s * s;
    let zero = Complex64::new(0.0, 0.0);
    let half = Complex64::new(0.5 * aniso, 0.0);
    [
        [e2 * flip, half, e1 * cross],
        [half, e2.conj() * flip, e1.conj() * cross],
        [e1 * cross, e1.conj() * cross, Complex64::new(aniso, 0.0)],
    ]
    .map(|row| row.map(|v| if v.norm() == 0.0 { zero } else { v }))
}

/// Two-atom dipole-dipole operator over the product of two manifolds.
///
/// Product state (a on atom i, b on atom j) has index `a * dim_j + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCoupling {
    pub operator: DMatrix<Complex64>,
    pub dim_i: usize,
    pub dim_j: usize,
    pub geometry: PairGeometry,
}

impl PairCoupling {
    /// ⟨a', b'| V |a, b⟩.
    pub fn element(&self, a_to: usize, b_to: usize, a_from: usize, b_from: usize) -> Complex64 {
        self.operator[(a_to * self.dim_j + b_to, a_from * self.dim_j + b_from)]
    }
}

/// Full dipole-dipole operator between atoms `i` and `j`, in rad/μs.
pub fn pair_coupling_full(
    mi: &Manifold,
    mj: &Manifold,
    geometry: &Geometry,
    i: AtomId,
    j: AtomId,
) -> Result<PairCoupling> {
    if i == j {
        return Err(Error::invalid("pair coupling needs two distinct atoms"));
    }
    let pg = geometry.pair(i, j)?;
    let coef = angular_coefficients(pg.theta, pg.phi);
    let ops_i = [mi.d_plus().clone(), mi.d_minus(), mi.d_z().clone()];
    let ops_j = [mj.d_plus().clone(), mj.d_minus(), mj.d_z().clone()];
    let dim = mi.dim() * mj.dim();
    let mut v = DMatrix::<Complex64>::zeros(dim, dim);
    let scale = units::dipole_constant() / pg.r.powi(3);
    for (a, oi) in ops_i.iter().enumerate() {
        for (b, oj) in ops_j.iter().enumerate() {
            let c = coef[a][b];
            if c.norm() == 0.0 {
                continue;
            }
            let k = oi.kronecker(oj);
            v.zip_apply(&k, |x, y| *x += c * (scale * y));
        }
    }
    Ok(PairCoupling {
        operator: v,
        dim_i: mi.dim(),
        dim_j: mj.dim(),
        geometry: pg,
    })
}

/// C3 coefficients of the truncated couplings, in rad/μs·μm³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingConstants {
    /// K·(d_A⁺)², with d_A⁺ = ⟨1|d⁺|0⟩.
    pub c_aa: f64,
    /// K·d_A⁺·d_B⁺ with d_B⁺ = ⟨−|d⁺|+⟩; carries the sign of the product.
    pub c_ab: f64,
}

impl CouplingConstants {
    pub fn from_atoms(atoms: &RouterAtoms) -> Result<Self> {
        let main = &atoms.main;
        let aux = &atoms.aux;
        let (l0, l1) = (main.lower(), main.upper());
        let (lm, lp) = (aux.lower(), aux.upper());
        let r_a = radial_dipole(&main.species, l0.n, l0.l, l0.j, l1.n, l1.l, l1.j)?;
        let r_b = radial_dipole(&aux.species, lp.n, lp.l, lp.j, lm.n, lm.l, lm.j)?;
        let d_a = angular_dipole(&l0, &l1)? * r_a;
        let d_b = angular_dipole(&lp, &lm)? * r_b;
        let k = units::dipole_constant();
        Ok(CouplingConstants {
            c_aa: k * d_a * d_a,
            c_ab: k * d_a * d_b,
        })
    }

    /// Multiplies both constants by `s³`, matching a uniform length rescale by `s`.
    pub fn scaled_cubic(&self, s: f64) -> Self {
        let s3 = s.powi(3);
        CouplingConstants {
            c_aa: self.c_aa * s3,
            c_ab: self.c_ab * s3,
        }
    }
}

/// Flip-flop amplitude ⟨0_i 1_j| V |1_i 0_j⟩ = (C_AA/r³)·½(1 − 3cos²θ).
pub fn pair_coupling_aa(r: f64, theta: f64, c_aa: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("pair distance must be positive, got {r}")));
    }
    let c = theta.cos();
    Ok(c_aa / r.powi(3) * 0.5 * (1.0 - 3.0 * c * c))
}

/// Main/auxiliary exchange ⟨1_i −_j| V |0_i +_j⟩ = −(C_AB/r³)(3/2) sin²θ e^(−2iφ).
///
/// The reverse process |1_i −_j⟩ → |0_i +_j⟩ has the conjugate amplitude.
pub fn pair_coupling_ab(r: f64, theta: f64, phi: f64, c_ab: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("pair distance must be positive, got {r}")));
    }
    let s = theta.sin();
    Ok(Complex64::from_polar(-1.5 * c_ab / r.powi(3) * s * s, -2.0 * phi))
}
