use std::io::{self, Write};

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use serde::Serialize;

use super::{Coupling, SpinNetwork};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropagateOptions {
    /// Upper limit of h·‖H‖ before any halving.
    pub step_bound: f64,
    /// Allowed |norm − 1| for Hermitian runs, and the allowed norm change
    /// between successive halvings for decaying runs.
    pub norm_tol: f64,
    pub max_halvings: u32,
    /// Time-step even when the Hamiltonian is static.
    pub force_rk4: bool,
    /// Integrator for time-dependent Hermitian runs. Decaying runs with
    /// non-uniform rates always use RK4.
    pub integrator: Integrator,
    /// Magnus only: allowed change of any recorded state between halvings.
    pub state_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    /// Fourth-order Magnus steps with Lanczos exponentials; suited to stiff
    /// Hamiltonians with slow time dependence.
    Magnus4,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            step_bound: 0.05,
            norm_tol: 1e-9,
            max_halvings: 12,
            force_rk4: false,
            integrator: Integrator::Rk4,
            state_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    Rk4 { halvings: u32 },
    Magnus4 { halvings: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
    /// Σ|ψ_i|² at each time.
    pub norms: Vec<f64>,
    pub method: Method,
}

impl Trajectory {
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::invalid(format!("unknown site `{label}`")))
    }

    pub fn population(&self, k: usize, site: usize) -> f64 {
        self.states[k][site].norm_sqr()
    }

    /// Population of `label` at every time.
    pub fn populations(&self, label: &str) -> Result<Vec<f64>> {
        let i = self.index_of(label)?;
        Ok(self.states.iter().map(|s| s[i].norm_sqr()).collect())
    }

    pub fn final_state(&self) -> &DVector<Complex64> {
        self.states.last().expect("trajectory has at least one state")
    }

    /// CSV with populations, norm, then real and imaginary amplitudes.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let pops: Vec<Vec<f64>> = self.states.iter().map(|s| s.iter().map(|a| a.norm_sqr()).collect()).collect();
        let amps: Vec<Vec<Complex64>> = self.states.iter().map(|s| s.iter().copied().collect()).collect();
        write_population_csv(w, &self.times, &self.labels, &pops, &self.norms, &self.labels, &amps)
    }
}

/// Writes `t_us, site_<label>_pop…, norm, re_amp_<label>…, im_amp_<label>…`.
pub fn write_population_csv<W: Write>(
    mut w: W,
    times: &[f64],
    pop_labels: &[String],
    pops: &[Vec<f64>],
    norms: &[f64],
    amp_labels: &[String],
    amps: &[Vec<Complex64>],
) -> io::Result<()> {
    let mut header = vec!["t_us".to_string()];
    header.extend(pop_labels.iter().map(|l| format!("site_{l}_pop")));
    header.push("norm".into());
    header.extend(amp_labels.iter().map(|l| format!("re_amp_{l}")));
    header.extend(amp_labels.iter().map(|l| format!("im_amp_{l}")));
    writeln!(w, "{}", header.join(","))?;
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![fmt_g12(*t)];
        row.extend(pops[k].iter().map(|p| fmt_g12(*p)));
        row.push(fmt_g12(norms[k]));
        row.extend(amps[k].iter().map(|a| fmt_g12(a.re)));
        row.extend(amps[k].iter().map(|a| fmt_g12(a.im)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// A number with 12 significant digits in scientific notation.
pub fn fmt_g12(x: f64) -> String {
    // Avoid printing negative zero.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

pub fn propagate(
    network: &SpinNetwork,
    initial: &DVector<Complex64>,
    t_grid: &[f64],
    decay: Option<&[f64]>,
) -> Result<Trajectory> {
    propagate_with(network, initial, t_grid, decay, &PropagateOptions::default())
}

/// Solves i dψ/dt = (H(t) − iΓ/2)ψ and records ψ on `t_grid`.
///
/// The uniform part of Γ is applied analytically. A static Hermitian
/// remainder is propagated through its eigendecomposition; otherwise RK4 runs
/// with h·‖H‖ ≤ `step_bound`, nodes at every grid time and profile switch
/// point, and the step is halved until the norm test passes.
pub fn propagate_with(
    network: &SpinNetwork,
    initial: &DVector<Complex64>,
    t_grid: &[f64],
    decay: Option<&[f64]>,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    let n = network.dim();
    if initial.len() != n {
        return Err(Error::invalid(format!("initial state has {} entries, network has {n}", initial.len())));
    }
    if (initial.norm_squared() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("initial state must be normalized"));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid must be non-empty, finite and strictly increasing"));
    }
    let gamma = match decay {
        Some(g) if g.len() != n => {
            return Err(Error::invalid(format!("{} decay rates for {n} sites", g.len())));
        }
        Some(g) if g.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) => {
            return Err(Error::invalid("decay rates must be finite and non-negative"));
        }
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let g0 = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let residual: Vec<f64> = gamma.iter().map(|g| g - g0).collect();
    let hermitian = residual.iter().all(|g| *g == 0.0);

    let (mut states, method) = if hermitian && network.is_static() && !opts.force_rk4 {
        (spectral(network, initial, t_grid), Method::Spectral)
    } else if hermitian && opts.integrator == Integrator::Magnus4 {
        super::magnus::magnus_adaptive(network, initial, t_grid, opts)?
    } else {
        rk4_adaptive(network, initial, t_grid, &residual, hermitian, opts)?
    };
    let t0 = t_grid[0];
    if g0 > 0.0 {
        for (s, t) in states.iter_mut().zip(t_grid) {
            *s *= Complex64::new((-0.5 * g0 * (t - t0)).exp(), 0.0);
        }
    }
    let norms = states.iter().map(|s| s.norm_squared()).collect();
    Ok(Trajectory {
        labels: network.labels(),
        times: t_grid.to_vec(),
        states,
        norms,
        method,
    })
}

fn spectral(network: &SpinNetwork, initial: &DVector<Complex64>, t_grid: &[f64]) -> Vec<DVector<Complex64>> {
    let eig = network.hamiltonian_at(t_grid[0]).symmetric_eigen();
    let v = eig.eigenvectors;
    let c = v.adjoint() * initial;
    t_grid
        .iter()
        .map(|t| {
            let dt = t - t_grid[0];
            let phased = DVector::from_iterator(
                c.len(),
                c.iter().zip(eig.eigenvalues.iter()).map(|(ci, e)| ci * (-I * e * dt).exp()),
            );
            &v * phased
        })
        .collect()
}

/// Static part in CSR form plus the pulsed edges evaluated per call.
pub(super) struct Generator {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    pulsed: Vec<(usize, usize, Coupling)>,
}

impl Generator {
    pub(super) fn new(network: &SpinNetwork, residual_decay: &[f64]) -> Self {
        let n = network.dim();
        let mut coo = CooMatrix::new(n, n);
        for (i, s) in network.sites().iter().enumerate() {
            let d = Complex64::new(s.onsite, -0.5 * residual_decay[i]);
            if d != Complex64::new(0.0, 0.0) {
                coo.push(i, i, d);
            }
        }
        let mut pulsed = Vec::new();
        for e in network.edges() {
            match e.coupling {
                Coupling::Static(a) => {
                    coo.push(e.from, e.to, a);
                    coo.push(e.to, e.from, a.conj());
                }
                c => pulsed.push((e.from, e.to, c)),
            }
        }
        let (row_ptr, cols, vals) = CsrMatrix::from(&coo).disassemble();
        Generator {
            row_ptr,
            cols,
            vals,
            pulsed,
        }
    }

    /// out = −i H(t) ψ.
    fn apply(&self, t: f64, branch: f64, psi: &[Complex64], out: &mut [Complex64]) {
        self.apply_h(t, branch, psi, out);
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }

    /// out = H(t) ψ, pulses evaluated on the branch containing `branch`.
    pub(super) fn apply_h(&self, t: f64, branch: f64, psi: &[Complex64], out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * psi[self.cols[k]];
            }
            *o = acc;
        }
        for (a, b, c) in &self.pulsed {
            let amp = c.at_on_branch(t, branch);
            if amp != Complex64::new(0.0, 0.0) {
                out[*a] += amp * psi[*b];
                out[*b] += amp.conj() * psi[*a];
            }
        }
    }
}

/// Step count for an interval before halving, from h·‖H‖ ≤ `step_bound`.
fn base_steps(len: f64, bound: f64, step_bound: f64) -> usize {
    ((len * bound / step_bound).ceil() as usize).max(1)
}

/// Spectral radius of H with every pulsed coupling at its peak.
pub(super) fn spectral_estimate(network: &SpinNetwork) -> f64 {
    let mut peak = network.clone();
    for e in peak.edges.iter_mut() {
        if let Coupling::Pulsed { profile, phase } = e.coupling {
            e.coupling = Coupling::Static(phase * profile.max_abs());
        }
    }
    peak.hamiltonian_at(0.0)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0, |m: f64, e| m.max(e.abs()))
}

fn rk4_adaptive(
    network: &SpinNetwork,
    initial: &DVector<Complex64>,
    t_grid: &[f64],
    residual_decay: &[f64],
    hermitian: bool,
    opts: &PropagateOptions,
) -> Result<(Vec<DVector<Complex64>>, Method)> {
    let gen = Generator::new(network, residual_decay);
    let bound = network.norm_bound() + 0.5 * residual_decay.iter().copied().fold(0.0, f64::max);
    let (t0, t1) = (t_grid[0], t_grid[t_grid.len() - 1]);
    let mut nodes: Vec<(f64, bool)> = t_grid.iter().map(|t| (*t, true)).collect();
    for b in network.breakpoints() {
        if b > t0 && b < t1 && !t_grid.contains(&b) {
            nodes.push((b, false));
        }
    }
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));

    // RK4 loses |R(ihω)|² − 1 ≈ −(hω)⁶/72 of norm per step. Start the ladder
    // at the first halving level whose predicted drift meets the tolerance.
    let rho = spectral_estimate(network);
    let predicted = |k: u32| -> f64 {
        nodes
            .windows(2)
            .map(|w| {
                let len = w[1].0 - w[0].0;
                let steps = (base_steps(len, bound, opts.step_bound) << k) as f64;
                steps * (len / steps * rho).powi(6) / 72.0
            })
            .sum()
    };
    let start = (0..=opts.max_halvings).find(|&k| predicted(k) <= opts.norm_tol).unwrap_or(0);
    let start = if hermitian { start } else { start.saturating_sub(1) };

    let mut previous: Option<Vec<DVector<Complex64>>> = None;
    let mut achieved = f64::INFINITY;
    for halvings in start..=opts.max_halvings {
        let states = rk4_run(&gen, initial, &nodes, bound, opts.step_bound, halvings);
        achieved = if hermitian {
            states.iter().map(|s| (s.norm_squared() - 1.0).abs()).fold(0.0, f64::max)
        } else if let Some(prev) = &previous {
            states
                .iter()
                .zip(prev)
                .map(|(a, b)| (a.norm_squared() - b.norm_squared()).abs())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        if achieved <= opts.norm_tol {
            return Ok((states, Method::Rk4 { halvings }));
        }
        previous = Some(states);
    }
    Err(Error::Integration {
        achieved,
        tolerance: opts.norm_tol,
        halvings: opts.max_halvings as usize,
    })
}

fn rk4_run(
    gen: &Generator,
    initial: &DVector<Complex64>,
    nodes: &[(f64, bool)],
    bound: f64,
    step_bound: f64,
    halvings: u32,
) -> Vec<DVector<Complex64>> {
    let n = initial.len();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut psi: Vec<Complex64> = initial.iter().copied().collect();
    let mut out = vec![initial.clone()];
    for w in nodes.windows(2) {
        let (ta, tb) = (w[0].0, w[1].0);
        let len = tb - ta;
        let steps = base_steps(len, bound, step_bound) << halvings;
        let h = len / steps as f64;
        for s in 0..steps {
            let t = ta + h * s as f64;
            let mid = t + 0.5 * h;
            gen.apply(t, mid, &psi, &mut k1);
            for i in 0..n {
                tmp[i] = psi[i] + k1[i] * (0.5 * h);
            }
            gen.apply(mid, mid, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = psi[i] + k2[i] * (0.5 * h);
            }
            gen.apply(mid, mid, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = psi[i] + k3[i] * h;
            }
            gen.apply(t + h, mid, &tmp, &mut k4);
            let c = h / 6.0;
            for i in 0..n {
                psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c;
            }
        }
        if w[1].1 {
            out.push(DVector::from_column_slice(&psi));
        }
    }
    out
}
