use serde::Serialize;

use super::router::{full_model_circulation, run_router, AuxConfig, RouterPulses, RouterSetup};
use crate::atomic::RouterAtoms;
use crate::error::{Error, Result};
use crate::nelder_mead::{minimize, Evaluation, NelderMeadOptions};
use crate::triangle::{AuxAtom, RouterGeometry};

/// Figure of merit maximised over (b, c, B).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Counter-clockwise circulation of the 128-state dynamics with atom 4.
    Circulation,
    /// Final left-receiver population of a lossless router run with atom 4.
    TransferFidelity { pulses: RouterPulses },
}

/// Closed intervals for b (μm), c (μm) and B (G).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds {
    pub b: (f64, f64),
    pub c: (f64, f64),
    pub field: (f64, f64),
}

impl Bounds {
    fn contains(&self, x: &[f64]) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(x[0], self.b) && inside(x[1], self.c) && inside(x[2], self.field)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizedGeometry {
    pub b: f64,
    pub c: f64,
    pub field_gauss: f64,
    pub score: f64,
    pub initial_score: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Every evaluation as ((b, c, B), score).
    pub log: Vec<Evaluation>,
}

/// Scores one parameter point; infeasible geometries score −∞.
pub fn evaluate_objective(atoms: &RouterAtoms, a: f64, params: [f64; 3], objective: &Objective) -> Result<f64> {
    let [b, c, field] = params;
    let geometry = RouterGeometry::new(a, b, c)?;
    match objective {
        Objective::Circulation => full_model_circulation(atoms, &geometry, field, AuxAtom::Four),
        Objective::TransferFidelity { pulses } => {
            let setup = RouterSetup {
                atoms: atoms.clone(),
                geometry,
                b_gauss: field,
                aux: AuxConfig::Single(AuxAtom::Four),
                pulses: *pulses,
                gamma_tot: 0.0,
                compensate: false,
            };
            Ok(run_router(&setup, &[0.0, pulses.total])?.report.final_left)
        }
    }
}

/// Nelder–Mead maximisation of `objective` over (b, c, B) from `initial`.
///
/// Points outside `bounds` or with an infeasible geometry count as worst.
pub fn optimize_geometry(
    atoms: &RouterAtoms,
    a: f64,
    initial: [f64; 3],
    objective: &Objective,
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> Result<OptimizedGeometry> {
    if !bounds.contains(&initial) {
        return Err(Error::invalid(format!("initial point {initial:?} lies outside the bounds")));
    }
    let initial_score = evaluate_objective(atoms, a, initial, objective)?;
    let f = |x: &[f64]| {
        if !bounds.contains(x) {
            return f64::INFINITY;
        }
        match evaluate_objective(atoms, a, [x[0], x[1], x[2]], objective) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let m = minimize(f, &initial, opts)?;
    let log = m
        .log
        .into_iter()
        .map(|e| Evaluation {
            x: e.x,
            value: -e.value,
        })
        .collect();
    Ok(OptimizedGeometry {
        b: m.x[0],
        c: m.x[1],
        field_gauss: m.x[2],
        score: -m.value,
        initial_score,
        evaluations: m.evaluations,
        converged: m.converged,
        log,
    })
}
