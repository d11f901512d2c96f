//! The flux triangle: three mutually coupled sites with complex hoppings.
//!
//! Couplings are written J_j = |J_j| e^(−iγ_j) and placed as H₁₂ = J₁,
//! H₂₃ = J₂, H₃₁ = J₃. With equal magnitudes and γ_tot = γ₁ + γ₂ + γ₃ = −π/2
//! an excitation on site 1 visits site 2 first, then site 3
//! ([`Chirality::CounterClockwise`]); γ_tot = +π/2 reverses the order.

mod effective;
mod solver;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub use effective::{
    effective_triangle, effective_triangle_at, four_state_hamiltonian, AuxAtom, EffectiveTriangle,
    Provenance, RouterGeometry,
};
pub use solver::{solve_flux_conditions, solve_flux_conditions_with, FluxGuess, FluxSolution, SolverOptions};

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxTriangle {
    /// J₁ (1–2), J₂ (2–3), J₃ (3–1) in rad/μs.
    pub couplings: [Complex64; 3],
    /// On-site energies μ₁, μ₂, μ₃ in rad/μs.
    pub onsite: [f64; 3],
}

/// Circulation sense of the excitation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Chirality {
    /// 1 → 2 → 3, from γ_tot = −π/2.
    CounterClockwise,
    /// 1 → 3 → 2, from γ_tot = +π/2.
    Clockwise,
}

impl FluxTriangle {
    /// Couplings |J_j| e^(−iγ_j) and zero on-site energies.
    pub fn from_polar(magnitudes: [f64; 3], phases: [f64; 3]) -> Self {
        FluxTriangle {
            couplings: [0, 1, 2].map(|k| Complex64::from_polar(magnitudes[k], -phases[k])),
            onsite: [0.0; 3],
        }
    }

    /// Equal magnitudes `j` and the total phase split evenly.
    pub fn uniform(j: f64, gamma_tot: f64) -> Self {
        FluxTriangle::from_polar([j; 3], [gamma_tot / 3.0; 3])
    }

    pub fn with_onsite(mut self, onsite: [f64; 3]) -> Self {
        self.onsite = onsite;
        self
    }

    pub fn magnitudes(&self) -> [f64; 3] {
        self.couplings.map(|c| c.norm())
    }

    /// γ_j = −arg J_j.
    pub fn phases(&self) -> [f64; 3] {
        self.couplings.map(|c| -c.arg())
    }

    /// γ_tot in (−π, π].
    pub fn gamma_tot(&self) -> f64 {
        wrap_phase(self.phases().iter().sum())
    }

    pub fn mean_coupling(&self) -> f64 {
        self.magnitudes().iter().sum::<f64>() / 3.0
    }

    /// 2π/(√3·mean|J|), exact for the ideal triangle.
    pub fn period_estimate(&self) -> f64 {
        2.0 * PI / (3f64.sqrt() * self.mean_coupling())
    }

    /// Complex conjugate of every coupling.
    pub fn conjugated(&self) -> Self {
        FluxTriangle {
            couplings: self.couplings.map(|c| c.conj()),
            onsite: self.onsite,
        }
    }

    /// Triangle after the local phase rotation diag(e^(iα₁), e^(iα₂), e^(iα₃)).
    pub fn gauge_transformed(&self, alpha: [f64; 3]) -> Self {
        let rot = |a: f64, b: f64| Complex64::from_polar(1.0, a - b);
        FluxTriangle {
            couplings: [
                self.couplings[0] * rot(alpha[0], alpha[1]),
                self.couplings[1] * rot(alpha[1], alpha[2]),
                self.couplings[2] * rot(alpha[2], alpha[0]),
            ],
            onsite: self.onsite,
        }
    }
}

/// The 3×3 Hermitian Hamiltonian of a flux triangle.
pub fn build_h3(triangle: &FluxTriangle) -> Matrix3<Complex64> {
    let [j1, j2, j3] = triangle.couplings;
    let [m1, m2, m3] = triangle.onsite.map(|m| Complex64::new(m, 0.0));
    Matrix3::new(m1, j1, j3.conj(), j1.conj(), m2, j2, j3, j2.conj(), m3)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxDiagnostic {
    pub magnitudes: [f64; 3],
    pub gamma_tot: f64,
    pub magnitudes_equal: bool,
    pub phase_condition: bool,
    pub chirality: Option<Chirality>,
    pub satisfied: bool,
}

/// Checks |J₁| = |J₂| = |J₃| (relative tolerance) and γ_tot = ±π/2 (absolute, rad).
pub fn check_flux_conditions(triangle: &FluxTriangle, tol: f64) -> Result<FluxDiagnostic> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mags = triangle.magnitudes();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let magnitudes_equal = max - min <= tol * max;
    let g = triangle.gamma_tot();
    let chirality = if (g + FRAC_PI_2).abs() <= tol {
        Some(Chirality::CounterClockwise)
    } else if (g - FRAC_PI_2).abs() <= tol {
        Some(Chirality::Clockwise)
    } else {
        None
    };
    Ok(FluxDiagnostic {
        magnitudes: mags,
        gamma_tot: g,
        magnitudes_equal,
        phase_condition: chirality.is_some(),
        chirality,
        satisfied: magnitudes_equal && chirality.is_some(),
    })
}

/// Chirality score in [−1, 1] from three site populations over time.
///
/// `populations[k]` holds the populations of the start site, the next site in
/// the claimed order and the site after it. Within the first half of the
/// estimated circulation period the time t* maximising the larger of the two
/// neighbour populations is located; the score is P_next(t*) − P_reverse(t*).
/// Perfect claimed circulation gives +1, the reverse −1, and symmetric
/// (time-reversal invariant) dynamics 0.
pub fn circulation_metric(times: &[f64], populations: &[[f64; 3]], period_estimate: f64) -> Result<f64> {
    if times.len() != populations.len() || times.is_empty() {
        return Err(Error::invalid("times and populations must be non-empty and equally long"));
    }
    if !(period_estimate > 0.0) {
        return Err(Error::invalid("period estimate must be positive"));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    if span < period_estimate * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "trajectory spans {span:.4} μs, shorter than the estimated period {period_estimate:.4} μs"
        )));
    }
    let window = 0.5 * period_estimate;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (t, p) in times.iter().zip(populations) {
        if t - t0 > window {
            break;
        }
        let peak = p[1].max(p[2]);
        if peak > best.0 {
            best = (peak, p[1] - p[2]);
        }
    }
    Ok(best.1)
}
