//! Derivative-free minimisation with the Nelder–Mead simplex.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Relative offset of each initial vertex along one coordinate.
    pub initial_step: f64,
    /// Stop when the simplex diameter relative to the best vertex falls below this.
    pub tol: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.05,
            tol: 1e-4,
            max_evaluations: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Every evaluation in order.
    pub log: Vec<Evaluation>,
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    let scale = best.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let mut d: f64 = 0.0;
    for (a, _) in simplex {
        for (b, _) in simplex {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d / scale
}

/// Minimises `f` from `x0`. Non-finite objective values count as +∞.
///
/// The result always carries the best point seen, also when the evaluation
/// budget runs out before convergence.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::invalid("Nelder-Mead needs at least one parameter"));
    }
    let mut log = Vec::new();
    let mut eval = |x: &[f64], log: &mut Vec<Evaluation>| {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        log.push(Evaluation { x: x.to_vec(), value: v });
        v
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut log)));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] = if x[k] != 0.0 { x[k] * (1.0 + opts.initial_step) } else { opts.initial_step };
        let v = eval(&x, &mut log);
        simplex.push((x, v));
    }
    let mut converged = false;
    while log.len() < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(opts.reflection);
        let fr = eval(&xr, &mut log);
        if fr < simplex[0].1 {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe, &mut log);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(opts.reflection * opts.contraction);
                let v = eval(&x, &mut log);
                (x, v)
            } else {
                let x = along(-opts.contraction);
                let v = eval(&x, &mut log);
                (x, v)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + opts.shrink * (v - b))
                        .collect();
                    let v = eval(&x, &mut log);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(Minimum {
        x,
        value,
        evaluations: log.len(),
        converged,
        log,
    })
}
