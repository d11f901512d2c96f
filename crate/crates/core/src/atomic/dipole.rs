use std::f64::consts::PI;

use serde::Serialize;

use super::wigner::{wigner_3j, wigner_6j};
use super::{AtomLevel, HalfInt, SpeciesParams};
use crate::error::{Error, Result};
use crate::quad;

/// Angular and radial parts of one dipole matrix element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DipoleElement {
    pub angular: f64,
    /// Radial integral in atomic units (e·a0).
    pub radial: f64,
    /// m(to) − m(from).
    pub delta_m: i32,
}

impl DipoleElement {
    pub fn value(&self) -> f64 {
        self.angular * self.radial
    }
}

/// Angular factor C of the matrix element ⟨to| r |from⟩ for spin-1/2 electrons.
///
/// Uses
/// C = √((2j'+1)(2j+1)(2l'+1)(2l+1)) (−1)^(j−m+j'+s+1)
///     {j 1 j'; l' s l} (l 1 l'; 0 0 0) (j 1 j'; −m −Δm m')
/// with primes on `to`. Forbidden transitions give exactly zero.
pub fn angular_dipole(from: &AtomLevel, to: &AtomLevel) -> Result<f64> {
    if from.species != to.species {
        return Err(Error::invalid(format!(
            "dipole element between different species {} and {}",
            from.species, to.species
        )));
    }
    let dl = to.l as i64 - from.l as i64;
    let dj = to.j.twice() - from.j.twice();
    let dm = to.m - from.m;
    if dl.abs() != 1 || dj.abs() > 2 || dm.twice().abs() > 2 {
        return Ok(0.0);
    }
    let s = HalfInt::HALF;
    let one = HalfInt::ONE;
    let (l, lp) = (HalfInt::from_int(from.l as i32), HalfInt::from_int(to.l as i32));
    let (j, jp, m, mp) = (from.j, to.j, from.m, to.m);
    let dims = (jp.multiplicity() * j.multiplicity() * lp.multiplicity() * l.multiplicity()) as f64;
    let phase_arg = (j - m + jp + s + one).twice() / 2;
    let phase = if phase_arg.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let six = wigner_6j(j, one, jp, lp, s, l)?;
    let parity = wigner_3j(l, one, lp, HalfInt::ZERO, HalfInt::ZERO, HalfInt::ZERO)?;
    let proj = wigner_3j(j, one, jp, -m, -dm, mp)?;
    Ok(dims.sqrt() * phase * six * parity * proj)
}

/// Semiclassical radial integral ∫ R_{ν l} R_{ν' l'} r³ dr in atomic units.
///
/// Both levels are replaced by one Kepler orbit with the mean effective
/// quantum number ν_c = 2νν'/(ν+ν') and eccentricity √(1 − (l_>/ν_c)²); the
/// integral is the Fourier component of the orbit's position at the
/// frequency offset s = ν' − ν, with the phase referenced to the outer
/// turning point. The result is positive and scaled by the species'
/// `radial_scale`.
pub fn radial_dipole(
    species: &SpeciesParams,
    n: u32,
    l: u32,
    j: HalfInt,
    n2: u32,
    l2: u32,
    j2: HalfInt,
) -> Result<f64> {
    if (l as i64 - l2 as i64).abs() != 1 {
        return Err(Error::SelectionRule(format!(
            "radial dipole needs |Δl| = 1, got l={l}, l'={l2}"
        )));
    }
    let nu = species.effective_n(n, l, j)?;
    let nu2 = species.effective_n(n2, l2, j2)?;
    let dl = l2 as f64 - l as f64;
    let l_max = l.max(l2) as f64;
    Ok(species.radial_scale * kepler_radial(nu, nu2, l_max, dl)?)
}

/// Semiclassical integral for effective quantum numbers ν, ν'.
pub fn kepler_radial(nu: f64, nu2: f64, l_max: f64, dl: f64) -> Result<f64> {
    if nu <= 0.0 || nu2 <= 0.0 {
        return Err(Error::invalid("effective quantum numbers must be positive"));
    }
    let s = nu2 - nu;
    let nc = 2.0 * nu * nu2 / (nu + nu2);
    if l_max >= nc {
        return Err(Error::invalid(format!(
            "orbital momentum {l_max} too large for ν = {nc:.3}"
        )));
    }
    let ecc = (1.0 - (l_max / nc).powi(2)).sqrt();
    let a = nc * nc;
    let anomaly = |xi: f64| xi - ecc * xi.sin();
    let fx = |xi: f64| (xi.cos() - ecc) * (1.0 - ecc * xi.cos()) * (s * (PI - anomaly(xi))).cos();
    let fy = |xi: f64| xi.sin() * (1.0 - ecc * xi.cos()) * (s * (PI - anomaly(xi))).sin();
    let tol = 1e-12;
    let x = a / PI * quad::integrate(fx, 0.0, PI, tol, 64);
    let y = a * (1.0 - ecc * ecc).sqrt() / PI * quad::integrate(fy, 0.0, PI, tol, 64);
    Ok((x - dl * y).abs())
}

/// Full dipole element ⟨to| r |from⟩ for two levels of one species.
pub fn dipole_element(species: &SpeciesParams, from: &AtomLevel, to: &AtomLevel) -> Result<DipoleElement> {
    let angular = angular_dipole(from, to)?;
    let radial = radial_dipole(species, from.n, from.l, from.j, to.n, to.l, to.j)?;
    Ok(DipoleElement {
        angular,
        radial,
        delta_m: (to.m - from.m).twice() / 2,
    })
}
