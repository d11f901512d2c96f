//! Fourth-order Magnus integrator with Lanczos matrix exponentials.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::propagate::{spectral_estimate, Generator, Method, PropagateOptions};
use super::SpinNetwork;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Base steps satisfy h·ρ ≤ this, which keeps the Krylov dimension moderate.
const BASE_PHASE: f64 = 8.0;
const KRYLOV_MAX: usize = 80;
const KRYLOV_TOL: f64 = 1e-13;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// exp(−i h M) v for Hermitian M given as a matrix-vector product.
fn lanczos_expm<F>(mut apply: F, v: &[Complex64], h: f64) -> Result<Vec<Complex64>>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok(v.to_vec());
    }
    let mut q: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let limit = KRYLOV_MAX.min(n);
    loop {
        let j = q.len() - 1;
        apply(&q[j], &mut w);
        let a = dot(&q[j], &w).re;
        alpha.push(a);
        // Full reorthogonalisation; the Krylov spaces stay small.
        for _ in 0..2 {
            for qk in &q {
                let c = dot(qk, &w);
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let u = &eig.eigenvectors;
        let y: Vec<Complex64> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|k| u[(r, k)] * u[(0, k)] * (-I * h * eig.eigenvalues[k]).exp())
                    .sum::<Complex64>()
            })
            .collect();
        let breakdown = b <= 1e-14 * (a.abs() + 1.0);
        if breakdown || b * y[m - 1].norm() <= KRYLOV_TOL || m == limit {
            if !breakdown && m == limit && b * y[m - 1].norm() > KRYLOV_TOL {
                return Err(Error::Integration {
                    achieved: b * y[m - 1].norm(),
                    tolerance: KRYLOV_TOL,
                    halvings: 0,
                });
            }
            let mut out = vec![ZERO; n];
            for (qk, yk) in q.iter().zip(&y) {
                for (o, qi) in out.iter_mut().zip(qk) {
                    *o += yk * qi * beta0;
                }
            }
            return Ok(out);
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
    }
}

fn magnus_run(
    gen: &Generator,
    initial: &DVector<Complex64>,
    nodes: &[(f64, bool)],
    rho: f64,
    halvings: u32,
) -> Result<Vec<DVector<Complex64>>> {
    let n = initial.len();
    let c = 3f64.sqrt() / 6.0;
    let (mut u1, mut u2, mut u3) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut psi: Vec<Complex64> = initial.iter().copied().collect();
    let mut out = vec![initial.clone()];
    for w in nodes.windows(2) {
        let (ta, tb) = (w[0].0, w[1].0);
        let len = tb - ta;
        let steps = (((len * rho / BASE_PHASE).ceil() as usize).max(1)) << halvings;
        let h = len / steps as f64;
        for s in 0..steps {
            let t = ta + h * s as f64;
            let mid = t + 0.5 * h;
            let (t1, t2) = (mid - c * h, mid + c * h);
            let kc = Complex64::new(0.0, -3f64.sqrt() / 12.0 * h);
            // M = (H₁ + H₂)/2 − i(√3/12)h[H₂, H₁]
            let apply = |v: &[Complex64], o: &mut [Complex64]| {
                gen.apply_h(t1, mid, v, &mut u1);
                gen.apply_h(t2, mid, v, &mut u2);
                gen.apply_h(t2, mid, &u1, &mut u3);
                gen.apply_h(t1, mid, &u2, o);
                for i in 0..n {
                    o[i] = (u1[i] + u2[i]) * 0.5 + kc * (u3[i] - o[i]);
                }
            };
            psi = lanczos_expm(apply, &psi, h)?;
        }
        if w[1].1 {
            out.push(DVector::from_column_slice(&psi));
        }
    }
    Ok(out)
}

/// Halves the Magnus step until successive recorded trajectories agree to `state_tol`.
pub(super) fn magnus_adaptive(
    network: &SpinNetwork,
    initial: &DVector<Complex64>,
    t_grid: &[f64],
    opts: &PropagateOptions,
) -> Result<(Vec<DVector<Complex64>>, Method)> {
    let gen = Generator::new(network, &vec![0.0; network.dim()]);
    let (t0, t1) = (t_grid[0], t_grid[t_grid.len() - 1]);
    let mut nodes: Vec<(f64, bool)> = t_grid.iter().map(|t| (*t, true)).collect();
    for b in network.breakpoints() {
        if b > t0 && b < t1 && !t_grid.contains(&b) {
            nodes.push((b, false));
        }
    }
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rho = spectral_estimate(network).max(1e-12);

    let mut previous: Option<Vec<DVector<Complex64>>> = None;
    let mut achieved = f64::INFINITY;
    for halvings in 0..=opts.max_halvings {
        let states = match magnus_run(&gen, initial, &nodes, rho, halvings) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if let Some(prev) = &previous {
            achieved = states
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if achieved <= opts.state_tol {
                return Ok((states, Method::Magnus4 { halvings }));
            }
        }
        previous = Some(states);
    }
    Err(Error::Integration {
        achieved,
        tolerance: opts.state_tol,
        halvings: opts.max_halvings as usize,
    })
}
