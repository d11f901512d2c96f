//! Geometry and detuning that satisfy the flux conditions.
//!
//! Unknowns are (b, c, Δ) at fixed a. The residuals are μ₁ − μ₂ and
//! |J12| − |J23| (both scaled by |J23|) and γ_tot + π/2. Mirror symmetry of
//! the geometry makes μ₂ = μ₃ and |J12| = |J13| automatic. Newton runs on
//! (ln(b − a/2), ln(c − a/2), ln|Δ|) so every iterate stays feasible.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::effective::{effective_triangle_at, EffectiveTriangle, RouterGeometry};
use super::wrap_phase;
use crate::atomic::RouterAtoms;
use crate::error::{Error, Result};
use crate::interaction::{AtomId, CouplingConstants};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxGuess {
    pub b: f64,
    pub c: f64,
    /// Detuning in rad/μs; its sign is kept throughout.
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Convergence threshold on the largest residual.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluxSolution {
    pub geometry: RouterGeometry,
    pub delta: f64,
    /// Field giving this detuning, if the pair has a field dependence.
    pub field_gauss: Option<f64>,
    /// Whether that field is non-negative.
    pub field_reachable: bool,
    pub triangle: EffectiveTriangle,
    pub residual: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    a: f64,
    consts: &'a CouplingConstants,
    aux: AtomId,
    sign: f64,
}

impl Problem<'_> {
    fn decode(&self, x: &Vector3<f64>) -> (f64, f64, f64) {
        let h = self.a / 2.0;
        (h + x[0].exp(), h + x[1].exp(), self.sign * x[2].exp())
    }

    fn encode(&self, b: f64, c: f64, delta: f64) -> Vector3<f64> {
        let h = self.a / 2.0;
        Vector3::new((b - h).ln(), (c - h).ln(), delta.abs().ln())
    }

    fn triangle(&self, x: &Vector3<f64>) -> Result<EffectiveTriangle> {
        let (b, c, d) = self.decode(x);
        let g = RouterGeometry::new(self.a, b, c)?.geometry();
        effective_triangle_at(&g, self.consts, d, self.aux)
    }

    fn residual(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        let t = self.triangle(x)?;
        let s = t.magnitudes[1];
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid("vanishing 2–3 coupling"));
        }
        let r = Vector3::new(
            (t.mu[0] - t.mu[1]) / s,
            (t.magnitudes[0] - t.magnitudes[1]) / s,
            wrap_phase(t.gamma_tot() + FRAC_PI_2),
        );
        if r.iter().all(|v| v.is_finite()) {
            Ok(r)
        } else {
            Err(Error::invalid("non-finite residual"))
        }
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let mut j = Matrix3::zeros();
        for k in 0..3 {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let d = (self.residual(&xp)? - self.residual(&xm)?) / (2.0 * h);
            j.set_column(k, &d);
        }
        Ok(j)
    }

    /// Damped Newton from `x`; returns the final point, residual norm and iterations.
    fn newton(&self, mut x: Vector3<f64>, opts: &SolverOptions) -> Result<(Vector3<f64>, f64, usize)> {
        let mut r = self.residual(&x)?;
        let mut norm = r.amax();
        for it in 0..opts.max_iterations {
            if norm < opts.tol {
                return Ok((x, norm, it));
            }
            let j = self.jacobian(&x)?;
            let step = j.lu().solve(&(-r)).ok_or(Error::NoConvergence {
                iterations: it,
                residual: norm,
            })?;
            // Limit moves to a factor e per iteration in every variable.
            let scale = step.amax().max(1.0);
            let step = step / scale;
            let mut lambda = 1.0;
            loop {
                let trial = x + step * lambda;
                if let Ok(rt) = self.residual(&trial) {
                    if rt.amax() < norm * (1.0 - 1e-4 * lambda) || rt.amax() < opts.tol {
                        x = trial;
                        r = rt;
                        norm = r.amax();
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return Err(Error::NoConvergence {
                        iterations: it,
                        residual: norm,
                    });
                }
            }
        }
        if norm < opts.tol {
            Ok((x, norm, opts.max_iterations))
        } else {
            Err(Error::NoConvergence {
                iterations: opts.max_iterations,
                residual: norm,
            })
        }
    }
}

/// Solves the flux conditions for coupling constants `consts`.
///
/// If Newton fails from the guess, it restarts from detunings rescaled by
/// factors 2^±k (k ≤ 4) before giving up.
pub fn solve_flux_conditions_with(
    a: f64,
    consts: &CouplingConstants,
    aux: AtomId,
    guess: FluxGuess,
    opts: &SolverOptions,
) -> Result<FluxSolution> {
    RouterGeometry::new(a, guess.b, guess.c)?;
    if !guess.delta.is_finite() || guess.delta == 0.0 {
        return Err(Error::invalid("initial detuning must be finite and non-zero"));
    }
    let p = Problem {
        a,
        consts,
        aux,
        sign: guess.delta.signum(),
    };
    let x0 = p.encode(guess.b, guess.c, guess.delta);
    let mut last = Error::NoConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    };
    let factors = [0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
    for f in factors {
        let mut x = x0;
        x[2] += f * std::f64::consts::LN_2;
        match p.newton(x, opts) {
            Ok((x, residual, iterations)) => {
                let (b, c, delta) = p.decode(&x);
                return Ok(FluxSolution {
                    geometry: RouterGeometry::new(a, b, c)?,
                    delta,
                    field_gauss: None,
                    field_reachable: false,
                    triangle: p.triangle(&x)?,
                    residual,
                    iterations,
                });
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Solves the flux conditions for a species pair and reports the required field.
pub fn solve_flux_conditions(
    a: f64,
    atoms: &RouterAtoms,
    aux: AtomId,
    guess: FluxGuess,
    opts: &SolverOptions,
) -> Result<FluxSolution> {
    let consts = CouplingConstants::from_atoms(atoms)?;
    let mut sol = solve_flux_conditions_with(a, &consts, aux, guess, opts)?;
    sol.field_gauss = atoms.field_for_detuning(sol.delta)?;
    sol.field_reachable = sol.field_gauss.is_some_and(|b| b >= 0.0);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn recovers_reference_geometry_with_calibrated_constants() {
        let consts = CouplingConstants {
            c_aa: 2.0 * PI * 1366.8,
            c_ab: 2.0 * PI * 715.9,
        };
        let guess = FluxGuess {
            b: 9.0,
            c: 10.5,
            delta: 2.0 * PI * 10.0,
        };
        let s = solve_flux_conditions_with(17.0, &consts, 4, guess, &SolverOptions::default()).unwrap();
        assert!((s.geometry.b - 9.3928).abs() < 2e-3, "{s:?}");
        assert!((s.geometry.c - 10.0406).abs() < 2e-3, "{s:?}");
        assert!((s.delta / (2.0 * PI) - 14.29).abs() < 0.05, "{s:?}");
        assert!((s.triangle.gamma_tot() + FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn rejects_infeasible_guess() {
        let consts = CouplingConstants { c_aa: 1.0, c_ab: 1.0 };
        let g = FluxGuess { b: 5.0, c: 10.0, delta: 1.0 };
        assert!(solve_flux_conditions_with(17.0, &consts, 4, g, &SolverOptions::default()).is_err());
    }
}
