use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    attach_boundary, chain_hamiltonian, propagate, router_end_labels, router_network, ChainModel, PulseProfile, SpinNetwork,
    Trajectory,
};
use crate::triangle::FluxTriangle;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferResult {
    pub p_t: f64,
    /// arg of the receiver amplitude in (−π, π]; only reported when P_T > 0.5.
    pub zeta: Option<f64>,
    pub amplitude: Complex64,
}

/// Transfer probability and phase at the final time of `trajectory`.
pub fn transfer_result(trajectory: &Trajectory, sender: &str, receiver: &str) -> Result<TransferResult> {
    let s = trajectory.index_of(sender)?;
    let r = trajectory.index_of(receiver)?;
    let p0 = trajectory.population(0, s);
    if (p0 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "trajectory does not start on `{sender}` (initial population {p0})"
        )));
    }
    let amplitude = trajectory.final_state()[r];
    let p_t = amplitude.norm_sqr();
    Ok(TransferResult {
        p_t,
        zeta: (p_t > 0.5).then(|| amplitude.arg()),
        amplitude,
    })
}

/// Chain "1".."N" with sender "s" ramped on at site 1 and receiver "r" ramped off at site N.
pub fn chain_transfer_network(n: usize, j: f64, model: ChainModel, t_m: f64, total: f64) -> Result<SpinNetwork> {
    let chain = chain_hamiltonian(n, j, 0.0, model)?;
    let net = attach_boundary(&chain, "1", "s", PulseProfile::ramp_on(j, t_m, total)?, 0.0)?;
    attach_boundary(&net, &n.to_string(), "r", PulseProfile::ramp_off(j, t_m, total)?, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanOptions {
    /// Range of the total time T in μs; `None` uses [0.8·N/(2J), 3N/(2J) + 40/J].
    pub total_range: Option<(f64, f64)>,
    /// Range of t_m/T.
    pub fraction_range: (f64, f64),
    /// Points per axis of the coarse grid.
    pub grid: usize,
    /// Alternating golden-section passes over T and t_m/T.
    pub refine_rounds: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            total_range: None,
            fraction_range: (0.1, 1.0),
            grid: 40,
            refine_rounds: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub t_m: f64,
    pub total: f64,
    pub p_t: f64,
    pub zeta: Option<f64>,
    pub evaluations: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Maximises f on [lo, hi]; returns (x, f(x)) of the best point seen.
fn golden_max(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, iters: usize) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Sender `s` ramped on at site "1"; receivers `rL`, `rR` ramped off at the
/// ends of the left and right subchains of [`router_network`].
pub fn router_transfer_network(
    n_left: usize,
    n_right: usize,
    triangle: &FluxTriangle,
    j: f64,
    t_m: f64,
    total: f64,
) -> Result<SpinNetwork> {
    let net = router_network(n_left, n_right, triangle, j)?;
    let (l, r) = router_end_labels(n_left, n_right);
    let net = attach_boundary(&net, "1", "s", PulseProfile::ramp_on(j, t_m, total)?, 0.0)?;
    let net = attach_boundary(&net, &l, "rL", PulseProfile::ramp_off(j, t_m, total)?, 0.0)?;
    attach_boundary(&net, &r, "rR", PulseProfile::ramp_off(j, t_m, total)?, 0.0)
}

/// P_T and ζ from `sender` to `receiver` for one protocol.
pub fn evaluate_transfer(net: &SpinNetwork, sender: &str, receiver: &str, total: f64) -> Result<TransferResult> {
    let s = net
        .index_of(sender)
        .ok_or_else(|| Error::invalid(format!("unknown site `{sender}`")))?;
    let mut psi = DVector::from_element(net.dim(), Complex64::new(0.0, 0.0));
    psi[s] = Complex64::new(1.0, 0.0);
    let tr = propagate(net, &psi, &[0.0, total], None)?;
    transfer_result(&tr, sender, receiver)
}

/// Searches ramp times (t_m, T) that maximise P_T for an N-site chain.
///
/// A coarse grid over T and t_m/T is evaluated in parallel, then the best
/// cell is refined by golden-section searches along each axis in turn.
pub fn scan_protocol(n: usize, j: f64, model: ChainModel, opts: &ScanOptions) -> Result<ScanResult> {
    if n == 0 {
        return Err(Error::invalid("chain needs at least one site"));
    }
    let build = |t_m: f64, total: f64| chain_transfer_network(n, j, model, t_m, total);
    scan_transfer(build, "s", "r", n, j, opts)
}

/// [`scan_protocol`] for the router from `s` to `receiver` ("rL" or "rR").
pub fn scan_router_protocol(
    n_left: usize,
    n_right: usize,
    triangle: &FluxTriangle,
    j: f64,
    receiver: &str,
    opts: &ScanOptions,
) -> Result<ScanResult> {
    let build = |t_m: f64, total: f64| router_transfer_network(n_left, n_right, triangle, j, t_m, total);
    scan_transfer(build, "s", receiver, n_left.max(n_right) + 1, j, opts)
}

/// Grid search plus golden-section refinement over networks from `build(t_m, T)`.
///
/// `path_len` sets the default T range as for an N-site chain.
pub fn scan_transfer<F>(
    build: F,
    sender: &str,
    receiver: &str,
    path_len: usize,
    j: f64,
    opts: &ScanOptions,
) -> Result<ScanResult>
where
    F: Fn(f64, f64) -> Result<SpinNetwork> + Sync,
{
    if !(j > 0.0) || opts.grid == 0 {
        return Err(Error::invalid("scan needs J > 0 and a non-empty grid"));
    }
    let (t_lo, t_hi) = opts.total_range.unwrap_or({
        let unit = path_len as f64 / (2.0 * j);
        (0.8 * unit, 3.0 * unit + 40.0 / j)
    });
    let (f_lo, f_hi) = opts.fraction_range;
    if !(t_lo > 0.0 && t_hi >= t_lo && f_lo > 0.0 && f_hi <= 1.0 && f_hi >= f_lo) {
        return Err(Error::invalid("invalid scan ranges"));
    }
    let evaluate = |total: f64, frac: f64| -> Result<TransferResult> {
        evaluate_transfer(&build(frac * total, total)?, sender, receiver, total)
    };
    let totals = linspace(t_lo, t_hi, opts.grid);
    let fracs = linspace(f_lo, f_hi, opts.grid);
    let points: Vec<(f64, f64)> = totals
        .iter()
        .flat_map(|t| fracs.iter().map(move |f| (*t, *f)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(t, f)| evaluate(t, f).map(|r| r.p_t))
        .collect::<Result<Vec<f64>>>()?;
    let mut evaluations = values.len();
    let mut best_k = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best_k] {
            best_k = k;
        }
    }
    let (mut total, mut frac) = points[best_k];
    let mut best = values[best_k];
    let dt = if opts.grid > 1 { (t_hi - t_lo) / (opts.grid - 1) as f64 } else { 0.0 };
    let df = if opts.grid > 1 { (f_hi - f_lo) / (opts.grid - 1) as f64 } else { 0.0 };
    for _ in 0..opts.refine_rounds {
        if dt > 0.0 {
            let (x, v) = golden_max(
                |t| {
                    evaluations += 1;
                    evaluate(t, frac).map(|r| r.p_t)
                },
                (total - dt).max(t_lo),
                (total + dt).min(t_hi),
                30,
            )?;
            if v > best {
                best = v;
                total = x;
            }
        }
        if df > 0.0 {
            let (x, v) = golden_max(
                |f| {
                    evaluations += 1;
                    evaluate(total, f).map(|r| r.p_t)
                },
                (frac - df).max(f_lo),
                (frac + df).min(f_hi),
                30,
            )?;
            if v > best {
                best = v;
                frac = x;
            }
        }
    }
    let r = evaluate(total, frac)?;
    Ok(ScanResult {
        t_m: frac * total,
        total,
        p_t: r.p_t,
        zeta: r.zeta,
        evaluations: evaluations + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Coupling;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn two_site_rabi_flop() {
        let mut net = SpinNetwork::new();
        net.add_site("s", 0.0).unwrap();
        net.add_site("r", 0.0).unwrap();
        net.add_edge("s", "r", Coupling::Static(Complex64::new(1.3, 0.0))).unwrap();
        let mut psi = DVector::from_element(2, Complex64::new(0.0, 0.0));
        psi[0] = Complex64::new(1.0, 0.0);
        let tr = propagate(&net, &psi, &[0.0, PI / (2.0 * 1.3)], None).unwrap();
        let r = transfer_result(&tr, "s", "r").unwrap();
        assert!((r.p_t - 1.0).abs() < 1e-12);
        assert!((r.zeta.unwrap() + FRAC_PI_2).abs() < 1e-9);
        assert!(transfer_result(&tr, "r", "s").is_err());
    }

    #[test]
    fn zeta_hidden_for_small_transfer() {
        let mut net = SpinNetwork::new();
        net.add_site("s", 0.0).unwrap();
        net.add_site("r", 0.0).unwrap();
        net.add_edge("s", "r", Coupling::Static(Complex64::new(1.0, 0.0))).unwrap();
        let mut psi = DVector::from_element(2, Complex64::new(0.0, 0.0));
        psi[0] = Complex64::new(1.0, 0.0);
        let tr = propagate(&net, &psi, &[0.0, 0.3], None).unwrap();
        assert!(transfer_result(&tr, "s", "r").unwrap().zeta.is_none());
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, v) = golden_max(|x| Ok(-(x - 0.3) * (x - 0.3)), 0.0, 1.0, 60).unwrap();
        assert!((x - 0.3).abs() < 1e-6 && v <= 0.0);
    }
}
