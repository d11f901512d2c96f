use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::basis::{build_basis, AtomRole, BasisState, MultilevelBasis, SixLevelAtom};
use super::hamiltonian::build_full_hamiltonian;
use crate::atomic::{RouterAtoms, TransitionSpec};
use crate::error::{Error, Result};
use crate::interaction::Manifold;
use crate::network::{propagate_with, Coupling, Integrator, PropagateOptions, PulseProfile, SpinNetwork, Trajectory};
use crate::triangle::{circulation_metric, effective_triangle, AuxAtom, RouterGeometry};

/// Sender and receiver labels of the router.
pub const SENDER: &str = "s";
pub const LEFT_RECEIVER: &str = "rL";
pub const RIGHT_RECEIVER: &str = "rR";

/// A full-model Hamiltonian with its basis.
#[derive(Clone, Debug)]
pub struct FullModel {
    pub basis: MultilevelBasis,
    pub hamiltonian: DMatrix<Complex64>,
}

fn six_level(id: usize, role: AtomRole, spec: &TransitionSpec) -> Result<SixLevelAtom> {
    let manifold = Manifold::six_level(spec.species.clone(), spec.n)?;
    let lower = manifold
        .index_of(&spec.lower())
        .ok_or_else(|| Error::invalid("designated lower level missing from manifold"))?;
    let upper = manifold
        .index_of(&spec.upper())
        .ok_or_else(|| Error::invalid("designated upper level missing from manifold"))?;
    SixLevelAtom::new(id, role, manifold, lower, upper)
}

/// Main atoms 1, 2, 3 and auxiliary atom `aux`, plus the sender and both
/// receivers as two-level atoms when `boundary` is set.
pub fn router_model(
    atoms: &RouterAtoms,
    geometry: &RouterGeometry,
    b_gauss: f64,
    aux: AuxAtom,
    boundary: bool,
) -> Result<FullModel> {
    let mut six = Vec::with_capacity(4);
    for id in 1..=3 {
        six.push(six_level(id, AtomRole::Main, &atoms.main)?);
    }
    six.push(six_level(aux.id(), AtomRole::Aux, &atoms.aux)?);
    let two_level = if boundary {
        vec![SENDER.to_string(), LEFT_RECEIVER.to_string(), RIGHT_RECEIVER.to_string()]
    } else {
        Vec::new()
    };
    let basis = build_basis(six, two_level)?;
    let hamiltonian = build_full_hamiltonian(&basis, &geometry.geometry(), b_gauss, atoms.bohr_magneton)?;
    Ok(FullModel { basis, hamiltonian })
}

/// Sender and receiver ramps: J_s rises over [0, t_m], both J_r fall over [T − t_m, T].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RouterPulses {
    pub t_m: f64,
    pub total: f64,
    /// Peak coupling in rad/μs.
    pub peak: f64,
}

impl RouterPulses {
    pub fn profiles(&self) -> Result<(PulseProfile, PulseProfile)> {
        Ok((
            PulseProfile::ramp_on(self.peak, self.t_m, self.total)?,
            PulseProfile::ramp_off(self.peak, self.t_m, self.total)?,
        ))
    }
}

impl FullModel {
    /// Subtracts μ_i from every state in which main atom i is excited.
    pub fn compensate_level_shifts(&mut self, mu: [f64; 3]) {
        for s in 0..self.basis.len() {
            let k = self.basis.excited_atom(s);
            if k < self.basis.atoms.len() && self.basis.atoms[k].role == AtomRole::Main {
                if let Some(m) = (1..=3).position(|id| id == self.basis.atoms[k].id) {
                    self.hamiltonian[(s, s)] -= Complex64::new(mu[m], 0.0);
                }
            }
        }
    }

    /// Population of every atom (six-level first, then two-level) for a state vector.
    pub fn atom_populations(&self, psi: &DVector<Complex64>) -> Vec<f64> {
        let mut p = vec![0.0; self.basis.atoms.len() + self.basis.two_level.len()];
        for (s, a) in psi.iter().enumerate() {
            p[self.basis.excited_atom(s)] += a.norm_sqr();
        }
        p
    }

    /// Labels matching [`FullModel::atom_populations`].
    pub fn atom_labels(&self) -> Vec<String> {
        self.basis
            .atoms
            .iter()
            .map(|a| a.id.to_string())
            .chain(self.basis.two_level.iter().cloned())
            .collect()
    }

    /// Population of main atom `id` in its designated upper level, summed over the others' lower levels.
    pub fn designated_upper_population(&self, psi: &DVector<Complex64>, id: usize) -> Result<f64> {
        let k = self
            .basis
            .atom_position(id)
            .ok_or_else(|| Error::invalid(format!("atom {id} is not in the basis")))?;
        let upper = self.basis.atoms[k].upper as u8;
        Ok(self
            .basis
            .states()
            .iter()
            .zip(psi.iter())
            .filter(|(st, _)| matches!(st, BasisState::Multilevel(l) if l[k] == upper))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// The model as a spin network with basis labels; pulses couple the sender
    /// to atom 1 and the receivers rL, rR to atoms 2, 3, each in its designated
    /// single-excitation state.
    pub fn to_network(&self, pulses: Option<&RouterPulses>) -> Result<SpinNetwork> {
        let n = self.basis.len();
        let mut net = SpinNetwork::new();
        for s in 0..n {
            net.add_site(self.basis.label(s), self.hamiltonian[(s, s)].re)?;
        }
        for s in 0..n {
            for t in s + 1..n {
                let a = self.hamiltonian[(t, s)];
                if a != Complex64::new(0.0, 0.0) {
                    net.add_edge_by_index(t, s, Coupling::Static(a))?;
                }
            }
        }
        if let Some(p) = pulses {
            let (on, off) = p.profiles()?;
            let one = Complex64::new(1.0, 0.0);
            let links = [(SENDER, 1, on), (LEFT_RECEIVER, 2, off), (RIGHT_RECEIVER, 3, off)];
            for (label, id, profile) in links {
                let ext = self.basis.two_level_state(label)?;
                let target = self.basis.designated_excitation(id)?;
                net.add_edge_by_index(ext, target, Coupling::Pulsed { profile, phase: one })?;
            }
        }
        Ok(net)
    }
}

/// Which auxiliary atom holds the excitation |−⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxConfig {
    Single(AuxAtom),
    /// Amplitudes of the atom-4 and atom-5 branches (normalised on use).
    Superposition { four: Complex64, five: Complex64 },
}

impl AuxConfig {
    fn branches(&self) -> Result<Vec<(AuxAtom, Complex64)>> {
        match *self {
            AuxConfig::Single(a) => Ok(vec![(a, Complex64::new(1.0, 0.0))]),
            AuxConfig::Superposition { four, five } => {
                let norm = (four.norm_sqr() + five.norm_sqr()).sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::invalid("superposition amplitudes must not both vanish"));
                }
                Ok(vec![(AuxAtom::Four, four / norm), (AuxAtom::Five, five / norm)])
            }
        }
    }
}

/// Everything that fixes a router run apart from the time grid.
#[derive(Clone, Debug)]
pub struct RouterSetup {
    pub atoms: RouterAtoms,
    pub geometry: RouterGeometry,
    pub b_gauss: f64,
    pub aux: AuxConfig,
    pub pulses: RouterPulses,
    /// Uniform decay rate Γ_tot in 1/μs.
    pub gamma_tot: f64,
    pub compensate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouterReport {
    pub final_left: f64,
    pub final_right: f64,
    pub max_left: f64,
    pub max_right: f64,
    pub final_norm: f64,
    pub dimension: usize,
    pub branches: Vec<BranchAmplitudes>,
}

/// Final receiver amplitudes of one auxiliary branch, per unit branch weight
/// (zero for a branch of weight zero).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchAmplitudes {
    pub aux: usize,
    pub weight: Complex64,
    pub left: Complex64,
    pub right: Complex64,
}

/// Aggregated router dynamics.
#[derive(Clone, Debug)]
pub struct RouterRun {
    pub times: Vec<f64>,
    /// Per-atom labels, suffixed `@4` / `@5` for a superposition.
    pub atom_labels: Vec<String>,
    pub populations: Vec<Vec<f64>>,
    /// Labels of the designated single-excitation states and receivers.
    pub amplitude_labels: Vec<String>,
    pub amplitudes: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub report: RouterReport,
    pub trajectory: Trajectory,
}

impl RouterRun {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        crate::network::write_population_csv(
            w,
            &self.times,
            &self.atom_labels,
            &self.populations,
            &self.norms,
            &self.amplitude_labels,
            &self.amplitudes,
        )
    }
}

/// Propagates the router from the sender excitation.
///
/// A superposition of auxiliary atoms is the direct sum of the two branch
/// models: in either branch the other auxiliary atom stays in a
/// non-interacting ground state, so the branches never couple. The stiff,
/// Zeeman-split spectrum makes the Magnus integrator the default here.
pub fn run_router(setup: &RouterSetup, t_grid: &[f64]) -> Result<RouterRun> {
    let opts = PropagateOptions {
        integrator: Integrator::Magnus4,
        ..Default::default()
    };
    run_router_with(setup, t_grid, &opts)
}

pub fn run_router_with(setup: &RouterSetup, t_grid: &[f64], opts: &PropagateOptions) -> Result<RouterRun> {
    if !(setup.gamma_tot >= 0.0) || !setup.gamma_tot.is_finite() {
        return Err(Error::invalid(format!("decay rate must be non-negative, got {}", setup.gamma_tot)));
    }
    let branches = setup.aux.branches()?;
    let single = branches.len() == 1;
    let mut net = SpinNetwork::new();
    let mut models = Vec::new();
    let mut initial_amps = Vec::new();
    for (aux, amp) in &branches {
        let mut model = router_model(&setup.atoms, &setup.geometry, setup.b_gauss, *aux, true)?;
        if setup.compensate {
            let eff = effective_triangle(&setup.geometry.geometry(), &setup.atoms, setup.b_gauss, aux.id())?;
            model.compensate_level_shifts(eff.mu);
        }
        let prefix = if single { String::new() } else { format!("@{}/", aux.id()) };
        let offset = net.dim();
        net.absorb(&model.to_network(Some(&setup.pulses))?, &prefix)?;
        initial_amps.push((offset + model.basis.two_level_state(SENDER)?, *amp));
        models.push((offset, *aux, model));
    }
    let dim = net.dim();
    let mut psi0 = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (i, a) in initial_amps {
        psi0[i] = a;
    }
    let decay = vec![setup.gamma_tot; dim];
    let traj = propagate_with(&net, &psi0, t_grid, Some(&decay), opts)?;

    let suffix = |aux: AuxAtom| if single { String::new() } else { format!("@{}", aux.id()) };
    let mut atom_labels = Vec::new();
    let mut amplitude_labels = Vec::new();
    let mut amp_index = Vec::new();
    let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
    let mut branch_amps = Vec::new();
    let last_state = traj.final_state();
    for ((offset, aux, model), (_, weight)) in models.iter().zip(&branches) {
        let l = offset + model.basis.two_level_state(LEFT_RECEIVER)?;
        let r = offset + model.basis.two_level_state(RIGHT_RECEIVER)?;
        // A branch with zero weight never runs; linearity gives it no amplitude to report.
        let per_unit = |a: Complex64| if weight.norm() > 0.0 { a / weight } else { Complex64::new(0.0, 0.0) };
        branch_amps.push(BranchAmplitudes {
            aux: aux.id(),
            weight: *weight,
            left: per_unit(last_state[l]),
            right: per_unit(last_state[r]),
        });
        atom_labels.extend(model.atom_labels().into_iter().map(|l| format!("{l}{}", suffix(*aux))));
        for id in [1, 2, 3, aux.id()] {
            amplitude_labels.push(format!("{id}{}", suffix(*aux)));
            amp_index.push(offset + model.basis.designated_excitation(id)?);
        }
        for label in [SENDER, LEFT_RECEIVER, RIGHT_RECEIVER] {
            amplitude_labels.push(format!("{label}{}", suffix(*aux)));
            amp_index.push(offset + model.basis.two_level_state(label)?);
        }
        left_idx.push(offset + model.basis.two_level_state(LEFT_RECEIVER)?);
        right_idx.push(offset + model.basis.two_level_state(RIGHT_RECEIVER)?);
    }
    let mut populations = Vec::with_capacity(traj.times.len());
    let mut amplitudes = Vec::with_capacity(traj.times.len());
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for psi in &traj.states {
        let mut row = Vec::new();
        for (offset, _, model) in &models {
            let part = psi.rows(*offset, model.basis.len()).into_owned();
            row.extend(model.atom_populations(&part));
        }
        populations.push(row);
        amplitudes.push(amp_index.iter().map(|&i| psi[i]).collect());
        left.push(left_idx.iter().map(|&i| psi[i].norm_sqr()).sum::<f64>());
        right.push(right_idx.iter().map(|&i| psi[i].norm_sqr()).sum::<f64>());
    }
    let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let report = RouterReport {
        final_left: last(&left),
        final_right: last(&right),
        max_left: max(&left),
        max_right: max(&right),
        final_norm: last(&traj.norms),
        dimension: dim,
        branches: branch_amps,
    };
    Ok(RouterRun {
        times: traj.times.clone(),
        atom_labels,
        populations,
        amplitude_labels,
        amplitudes,
        norms: traj.norms.clone(),
        left,
        right,
        report,
        trajectory: traj,
    })
}

/// Designated-upper populations of atoms 1, 2, 3 in the 128-state model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleDynamics {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
    pub norms: Vec<f64>,
    /// Period estimate of the matching effective triangle, μs.
    pub period: f64,
}

/// Dynamics of the excitation started on atom 1 without sender or receivers,
/// over `periods` estimated circulation periods.
pub fn triangle_dynamics(
    atoms: &RouterAtoms,
    geometry: &RouterGeometry,
    b_gauss: f64,
    aux: AuxAtom,
    periods: f64,
    samples: usize,
) -> Result<TriangleDynamics> {
    if samples < 2 || !(periods > 0.0) {
        return Err(Error::invalid("need at least two samples over a positive window"));
    }
    let eff = effective_triangle(&geometry.geometry(), atoms, b_gauss, aux.id())?;
    let period = eff.to_flux_triangle().period_estimate();
    if !period.is_finite() {
        return Err(Error::Infeasible("effective couplings vanish".into()));
    }
    let model = router_model(atoms, geometry, b_gauss, aux, false)?;
    let net = model.to_network(None)?;
    let mut psi0 = DVector::from_element(model.basis.len(), Complex64::new(0.0, 0.0));
    psi0[model.basis.designated_excitation(1)?] = Complex64::new(1.0, 0.0);
    let span = periods * period;
    let times: Vec<f64> = (0..samples).map(|k| span * k as f64 / (samples - 1) as f64).collect();
    let traj = propagate_with(&net, &psi0, &times, None, &PropagateOptions::default())?;
    let populations = traj
        .states
        .iter()
        .map(|psi| {
            Ok([
                model.designated_upper_population(psi, 1)?,
                model.designated_upper_population(psi, 2)?,
                model.designated_upper_population(psi, 3)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TriangleDynamics {
        times,
        populations,
        norms: traj.norms,
        period,
    })
}

/// Counter-clockwise (1 → 2 → 3) circulation score of the 128-state model
/// over 1.5 estimated periods.
pub fn full_model_circulation(
    atoms: &RouterAtoms,
    geometry: &RouterGeometry,
    b_gauss: f64,
    aux: AuxAtom,
) -> Result<f64> {
    let d = triangle_dynamics(atoms, geometry, b_gauss, aux, 1.5, 601)?;
    circulation_metric(&d.times, &d.populations, d.period)
}
