//! Single-excitation spin networks: chains, routers and their boundary couplings.
//!
//! A network is a list of labelled sites with on-site energies and a list of
//! edges. An edge (a, b) with amplitude A sets H[a][b] = A and
//! H[b][a] = conj(A). Pulsed edges scale a fixed unit phase by a
//! [`PulseProfile`].

mod magnus;
mod propagate;
mod transfer;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::triangle::FluxTriangle;

pub use propagate::{
    fmt_g12, propagate, propagate_with, write_population_csv, Integrator, Method, PropagateOptions, Trajectory,
};
pub use transfer::{
    chain_transfer_network, evaluate_transfer, router_transfer_network, scan_protocol, scan_router_protocol, scan_transfer,
    transfer_result, ScanOptions, ScanResult, TransferResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    RampOn,
    RampOff,
    Constant,
    Zero,
}

/// Time dependence of a boundary coupling; times in μs, peak in rad/μs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PulseProfile {
    pub kind: PulseKind,
    pub t_m: f64,
    pub total: f64,
    pub peak: f64,
}

impl PulseProfile {
    /// J·t/T on [0, t_m], zero afterwards.
    pub fn ramp_on(peak: f64, t_m: f64, total: f64) -> Result<Self> {
        Self::ramp(PulseKind::RampOn, peak, t_m, total)
    }

    /// Zero before T − t_m, J·(1 − t/T) on [T − t_m, T].
    pub fn ramp_off(peak: f64, t_m: f64, total: f64) -> Result<Self> {
        Self::ramp(PulseKind::RampOff, peak, t_m, total)
    }

    fn ramp(kind: PulseKind, peak: f64, t_m: f64, total: f64) -> Result<Self> {
        if !(total > 0.0) || !(t_m > 0.0) || t_m > total || !peak.is_finite() {
            return Err(Error::invalid(format!(
                "ramp needs 0 < t_m <= T and finite peak, got t_m={t_m}, T={total}, peak={peak}"
            )));
        }
        Ok(PulseProfile { kind, t_m, total, peak })
    }

    pub fn constant(peak: f64) -> Self {
        PulseProfile {
            kind: PulseKind::Constant,
            t_m: 0.0,
            total: 0.0,
            peak,
        }
    }

    pub fn zero() -> Self {
        PulseProfile {
            kind: PulseKind::Zero,
            t_m: 0.0,
            total: 0.0,
            peak: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_on_branch(t, t)
    }

    /// The profile formula active at time `branch` evaluated at `t`.
    ///
    /// Integrators pass the midpoint of a step interval as `branch` so stages
    /// on a switch point use the one-sided limit from inside the interval.
    pub fn value_on_branch(&self, t: f64, branch: f64) -> f64 {
        match self.kind {
            PulseKind::RampOn if (0.0..=self.t_m).contains(&branch) => self.peak * t / self.total,
            PulseKind::RampOff if branch >= self.total - self.t_m && branch <= self.total => {
                self.peak * (1.0 - t / self.total)
            }
            PulseKind::Constant => self.peak,
            _ => 0.0,
        }
    }

    /// Points where the profile switches on or off.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PulseKind::RampOn => vec![self.t_m],
            PulseKind::RampOff => vec![self.total - self.t_m, self.total],
            _ => Vec::new(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.peak.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Static(Complex64),
    /// `phase · profile(t)`.
    Pulsed { profile: PulseProfile, phase: Complex64 },
}

impl Coupling {
    pub fn at(&self, t: f64) -> Complex64 {
        match self {
            Coupling::Static(a) => *a,
            Coupling::Pulsed { profile, phase } => phase * profile.value(t),
        }
    }

    /// See [`PulseProfile::value_on_branch`].
    pub fn at_on_branch(&self, t: f64, branch: f64) -> Complex64 {
        match self {
            Coupling::Static(a) => *a,
            Coupling::Pulsed { profile, phase } => phase * profile.value_on_branch(t, branch),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Coupling::Static(a) => a.norm(),
            Coupling::Pulsed { profile, phase } => phase.norm() * profile.max_abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Site {
    pub label: String,
    /// On-site energy in rad/μs.
    pub onsite: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub coupling: Coupling,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpinNetwork {
    sites: Vec<Site>,
    edges: Vec<Edge>,
}

impl SpinNetwork {
    pub fn new() -> Self {
        SpinNetwork::default()
    }

    pub fn add_site(&mut self, label: impl Into<String>, onsite: f64) -> Result<usize> {
        let label = label.into();
        if self.index_of(&label).is_some() {
            return Err(Error::invalid(format!("duplicate site `{label}`")));
        }
        self.sites.push(Site { label, onsite });
        Ok(self.sites.len() - 1)
    }

    /// Adds H[from][to] = coupling (and its conjugate partner).
    pub fn add_edge(&mut self, from: &str, to: &str, coupling: Coupling) -> Result<()> {
        let a = self.require(from)?;
        let b = self.require(to)?;
        if a == b {
            return Err(Error::invalid(format!("self-loop on `{from}`")));
        }
        self.edges.push(Edge { from: a, to: b, coupling });
        Ok(())
    }

    fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::invalid(format!("unknown site `{label}`")))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.label == label)
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Vec<String> {
        self.sites.iter().map(|s| s.label.clone()).collect()
    }

    pub fn set_onsite(&mut self, label: &str, onsite: f64) -> Result<()> {
        let i = self.require(label)?;
        self.sites[i].onsite = onsite;
        Ok(())
    }

    /// Copies every site and edge of `other` into this network, prefixing its labels.
    pub fn absorb(&mut self, other: &SpinNetwork, prefix: &str) -> Result<()> {
        let offset = self.sites.len();
        for s in &other.sites {
            self.add_site(format!("{prefix}{}", s.label), s.onsite)?;
        }
        for e in &other.edges {
            self.edges.push(Edge {
                from: e.from + offset,
                to: e.to + offset,
                coupling: e.coupling,
            });
        }
        Ok(())
    }

    /// Adds an edge between site indices.
    pub fn add_edge_by_index(&mut self, from: usize, to: usize, coupling: Coupling) -> Result<()> {
        if from >= self.dim() || to >= self.dim() || from == to {
            return Err(Error::invalid(format!("bad edge {from} -> {to}")));
        }
        self.edges.push(Edge { from, to, coupling });
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.edges.iter().all(|e| matches!(e.coupling, Coupling::Static(_)))
    }

    pub fn hamiltonian_at(&self, t: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut h = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.sites[i].onsite, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for e in &self.edges {
            let a = e.coupling.at(t);
            h[(e.from, e.to)] += a;
            h[(e.to, e.from)] += a.conj();
        }
        h
    }

    /// Bound on ‖H(t)‖ over all t: the largest absolute row sum at peak couplings.
    pub fn norm_bound(&self) -> f64 {
        let mut rows: Vec<f64> = self.sites.iter().map(|s| s.onsite.abs()).collect();
        for e in &self.edges {
            let m = e.coupling.max_abs();
            rows[e.from] += m;
            rows[e.to] += m;
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Sorted, de-duplicated switch points of all pulsed edges.
    pub fn breakpoints(&self) -> Vec<f64> {
        let set: BTreeSet<u64> = self
            .edges
            .iter()
            .filter_map(|e| match e.coupling {
                Coupling::Pulsed { profile, .. } => Some(profile.breakpoints()),
                Coupling::Static(_) => None,
            })
            .flatten()
            .map(f64::to_bits)
            .collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Eigenvalues of the Hamiltonian at time `t`, ascending.
    pub fn spectrum_at(&self, t: f64) -> Vec<f64> {
        let mut e: Vec<f64> = self.hamiltonian_at(t).symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainModel {
    NearestNeighbor,
    /// Coupling J/m³ between sites m apart.
    DipolarR3,
}

/// Uniform chain with sites labelled "1".."N".
pub fn chain_hamiltonian(n: usize, j: f64, b: f64, model: ChainModel) -> Result<SpinNetwork> {
    if n == 0 {
        return Err(Error::invalid("chain needs at least one site"));
    }
    let mut net = SpinNetwork::new();
    for k in 1..=n {
        net.add_site(k.to_string(), b)?;
    }
    for a in 1..=n {
        for m in 1..=(n - a) {
            let amp = match model {
                ChainModel::NearestNeighbor if m == 1 => j,
                ChainModel::NearestNeighbor => continue,
                ChainModel::DipolarR3 => j / (m as f64).powi(3),
            };
            net.add_edge(&a.to_string(), &(a + m).to_string(), Coupling::Static(Complex64::new(amp, 0.0)))?;
        }
    }
    Ok(net)
}

/// Cosine-law energies 2Σ_m (J_m) cos(πnm/(N+1)), ascending, with zero on-site energy.
///
/// Exact for nearest-neighbour chains; for r⁻³ couplings it is the
/// translation-invariant approximation and differs from [`SpinNetwork::spectrum_at`].
pub fn chain_spectrum(n: usize, j: f64, model: ChainModel) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("chain needs at least one site"));
    }
    let mmax = match model {
        ChainModel::NearestNeighbor => 1.min(n - 1),
        ChainModel::DipolarR3 => n - 1,
    };
    let mut e: Vec<f64> = (1..=n)
        .map(|k| {
            (1..=mmax)
                .map(|m| {
                    let jm = j / (m as f64).powi(3);
                    2.0 * jm * (PI * (k * m) as f64 / (n + 1) as f64).cos()
                })
                .sum()
        })
        .collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Adds site `external` with on-site energy `b_ext`, coupled to `site` by `profile`.
pub fn attach_boundary(
    network: &SpinNetwork,
    site: &str,
    external: &str,
    profile: PulseProfile,
    b_ext: f64,
) -> Result<SpinNetwork> {
    let mut net = network.clone();
    net.require(site)?;
    net.add_site(external, b_ext)?;
    let coupling = match profile.kind {
        PulseKind::Constant => Coupling::Static(Complex64::new(profile.peak, 0.0)),
        _ => Coupling::Pulsed {
            profile,
            phase: Complex64::new(1.0, 0.0),
        },
    };
    net.add_edge(external, site, coupling)?;
    Ok(net)
}

/// Labels of the last sites of the left and right subchains.
pub fn router_end_labels(n_left: usize, n_right: usize) -> (String, String) {
    let end = |prefix: &str, base: &str, n: usize| {
        if n <= 1 {
            base.to_string()
        } else {
            format!("{prefix}{}", n - 1)
        }
    };
    (end("L", "2", n_left), end("R", "3", n_right))
}

/// Flux triangle on sites "1", "2", "3" with left subchain 2, L1, …, L(n_left−1)
/// and right subchain 3, R1, …, R(n_right−1), all with coupling `j`.
///
/// Subchain lengths count the triangle site they start from. Even lengths are
/// rejected because the sender then couples to no zero mode; see
/// [`router_network_any_parity`].
pub fn router_network(n_left: usize, n_right: usize, triangle: &FluxTriangle, j: f64) -> Result<SpinNetwork> {
    if n_left.is_multiple_of(2) || n_right.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "subchain lengths must be odd, got {n_left} and {n_right}"
        )));
    }
    router_network_any_parity(n_left, n_right, triangle, j)
}

/// [`router_network`] without the parity check.
pub fn router_network_any_parity(
    n_left: usize,
    n_right: usize,
    triangle: &FluxTriangle,
    j: f64,
) -> Result<SpinNetwork> {
    if n_left == 0 || n_right == 0 {
        return Err(Error::invalid("subchains must contain their triangle site"));
    }
    let mut net = SpinNetwork::new();
    for (k, mu) in triangle.onsite.iter().enumerate() {
        net.add_site((k + 1).to_string(), *mu)?;
    }
    let [j1, j2, j3] = triangle.couplings;
    net.add_edge("1", "2", Coupling::Static(j1))?;
    net.add_edge("2", "3", Coupling::Static(j2))?;
    net.add_edge("3", "1", Coupling::Static(j3))?;
    for (prefix, base, n) in [("L", "2", n_left), ("R", "3", n_right)] {
        let mut prev = base.to_string();
        for k in 1..n {
            let label = format!("{prefix}{k}");
            net.add_site(&label, 0.0)?;
            net.add_edge(&prev, &label, Coupling::Static(Complex64::new(j, 0.0)))?;
            prev = label;
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn three_site_chains() {
        let r2 = 2f64.sqrt();
        let nn = chain_hamiltonian(3, 1.0, 0.0, ChainModel::NearestNeighbor).unwrap();
        assert!(close(&nn.spectrum_at(0.0), &[-r2, 0.0, r2], 1e-12));
        assert!(close(&chain_spectrum(3, 1.0, ChainModel::DipolarR3).unwrap(), &[-r2, -0.25, r2], 1e-12));
        let one = chain_hamiltonian(1, 1.0, 0.3, ChainModel::DipolarR3).unwrap();
        assert_eq!(one.dim(), 1);
        assert!(one.edges().is_empty());
    }

    #[test]
    fn pulse_values() {
        let on = PulseProfile::ramp_on(2.0, 3.0, 10.0).unwrap();
        assert_eq!(on.value(1.0), 0.2);
        assert!((on.value(3.0) - 0.6).abs() < 1e-15);
        assert_eq!(on.value(3.5), 0.0);
        let off = PulseProfile::ramp_off(2.0, 3.0, 10.0).unwrap();
        assert_eq!(off.value(6.9), 0.0);
        assert!((off.value(7.0) - 0.6).abs() < 1e-15);
        assert_eq!(off.value(10.0), 0.0);
        assert!(PulseProfile::ramp_on(1.0, 11.0, 10.0).is_err());
        assert_eq!(off.breakpoints(), vec![7.0, 10.0]);
    }

    #[test]
    fn router_structure() {
        let t = FluxTriangle::uniform(1.0, -PI / 2.0);
        let net = router_network(3, 5, &t, 1.0).unwrap();
        assert_eq!(net.dim(), 3 + 2 + 4);
        assert_eq!(router_end_labels(3, 5), ("L2".into(), "R4".into()));
        assert_eq!(router_end_labels(1, 1), ("2".into(), "3".into()));
        assert!(router_network(2, 3, &t, 1.0).is_err());
        assert!(router_network_any_parity(2, 3, &t, 1.0).is_ok());
        let h = net.hamiltonian_at(0.0);
        assert!((&h - h.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn boundary_errors() {
        let net = chain_hamiltonian(2, 1.0, 0.0, ChainModel::NearestNeighbor).unwrap();
        assert!(attach_boundary(&net, "1", "2", PulseProfile::zero(), 0.0).is_err());
        assert!(attach_boundary(&net, "9", "s", PulseProfile::zero(), 0.0).is_err());
        assert_eq!(attach_boundary(&net, "1", "s", PulseProfile::zero(), 0.0).unwrap().dim(), 3);
    }
}
