//! Control-qubit preparation, the abstract routing map and the sender/receiver pulse schedule.
//!
//! Resonant drives use H = −(Ω/2)(|b⟩⟨a| + |a⟩⟨b|), so a π-pulse maps
//! |a⟩ → i|b⟩ and |b⟩ → i|a⟩.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{propagate, PulseKind, PulseProfile, SpinNetwork};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);
const NORM_TOL: f64 = 1e-12;

/// α|g⟩ + β|e⟩ of atom 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ControlQubit {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl ControlQubit {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("control qubit is not normalized: |α|² + |β|² = {n}")));
        }
        Ok(ControlQubit { alpha, beta })
    }
}

/// An instantaneous resonant pulse, or a finite one when `rabi` is set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PulseOp {
    pub target: String,
    pub from: String,
    pub to: String,
    /// Pulse area in rad.
    pub area: f64,
    /// Rabi frequency in rad/μs for blockade-conditioned pulses.
    pub rabi: Option<f64>,
}

impl PulseOp {
    fn pi(target: &str, from: &str, to: &str, rabi: Option<f64>) -> Self {
        PulseOp {
            target: target.into(),
            from: from.into(),
            to: to.into(),
            area: std::f64::consts::PI,
            rabi,
        }
    }
}

/// V = C_ν / r^ν for ν = 3 (static dipole-dipole) or 6 (van der Waals).
pub fn blockade_shift(c_nu: f64, r: f64, nu: u32) -> Result<f64> {
    if nu != 3 && nu != 6 {
        return Err(Error::invalid(format!("blockade exponent must be 3 or 6, got {nu}")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("blockade distance must be positive"));
    }
    Ok(c_nu / r.powi(nu as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockadeMode {
    Ideal,
    /// Step (ii) integrated with shift `v` on |−⟩₄|−⟩₅ and Rabi frequency `omega` (rad/μs).
    FiniteBlockade { v: f64, omega: f64 },
}

/// Atom-4 levels |g⟩, |e⟩, |−⟩ and atom-5 levels |e⟩, |−⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Level4 {
    G,
    E,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Level5 {
    E,
    Minus,
}

/// Joint state of the two auxiliary atoms, index 2·l₄ + l₅.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuxPairState {
    pub amplitudes: [Complex64; 6],
}

impl AuxPairState {
    pub fn index(l4: Level4, l5: Level5) -> usize {
        2 * l4 as usize + l5 as usize
    }

    pub fn amp(&self, l4: Level4, l5: Level5) -> Complex64 {
        self.amplitudes[Self::index(l4, l5)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn overlap(&self, other: &AuxPairState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockadeOutcome {
    pub state: AuxPairState,
    pub target: AuxPairState,
    /// ⟨target|state⟩; its phase is the global-phase error.
    pub overlap: Complex64,
    /// |⟨target|state⟩|².
    pub fidelity: f64,
    /// Largest |−⟩₄|−⟩₅ population during step (ii).
    pub leakage: f64,
    /// |−⟩₄|−⟩₅ population after step (ii).
    pub final_double: f64,
    pub sequence: Vec<PulseOp>,
}

/// iα|g⟩₄|−⟩₅ + iβ|−⟩₄|e⟩₅.
pub fn blockade_target(control: &ControlQubit) -> AuxPairState {
    let mut a = [ZERO; 6];
    a[AuxPairState::index(Level4::G, Level5::Minus)] = I * control.alpha;
    a[AuxPairState::index(Level4::Minus, Level5::E)] = I * control.beta;
    AuxPairState { amplitudes: a }
}

/// Drive of atom 5 on |e⟩ ↔ |−⟩ plus the blockade shift.
fn step_two_hamiltonian(v: f64, omega: f64) -> DMatrix<Complex64> {
    let mut h = DMatrix::from_element(6, 6, ZERO);
    for l4 in [Level4::G, Level4::E, Level4::Minus] {
        let a = AuxPairState::index(l4, Level5::E);
        let b = AuxPairState::index(l4, Level5::Minus);
        h[(a, b)] = Complex64::new(-0.5 * omega, 0.0);
        h[(b, a)] = Complex64::new(-0.5 * omega, 0.0);
    }
    let d = AuxPairState::index(Level4::Minus, Level5::Minus);
    h[(d, d)] = Complex64::new(v, 0.0);
    h
}

/// Steps (i) and (ii): π-pulse on atom 4 (|e⟩ → |−⟩), then on atom 5 (|e⟩ → |−⟩) under blockade.
pub fn blockade_gate(control: &ControlQubit, mode: BlockadeMode) -> Result<BlockadeOutcome> {
    ControlQubit::new(control.alpha, control.beta)?;
    // Step (i), always ideal: atom 4 in |g⟩ is a spectator.
    let mut psi = [ZERO; 6];
    psi[AuxPairState::index(Level4::G, Level5::E)] = control.alpha;
    psi[AuxPairState::index(Level4::Minus, Level5::E)] = I * control.beta;

    let double = AuxPairState::index(Level4::Minus, Level5::Minus);
    let (state, leakage, final_double, rabi) = match mode {
        BlockadeMode::Ideal => {
            let mut out = psi;
            // Atom 5 flips only when atom 4 is not in |−⟩.
            for l4 in [Level4::G, Level4::E] {
                let a = AuxPairState::index(l4, Level5::E);
                let b = AuxPairState::index(l4, Level5::Minus);
                out[a] = I * psi[b];
                out[b] = I * psi[a];
            }
            (out, 0.0, 0.0, None)
        }
        BlockadeMode::FiniteBlockade { v, omega } => {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid("finite blockade needs V > 0"));
            }
            if !(omega > 0.0) || !omega.is_finite() {
                return Err(Error::invalid("finite blockade needs Ω > 0"));
            }
            let eig = step_two_hamiltonian(v, omega).symmetric_eigen();
            let u = &eig.eigenvectors;
            let c = u.adjoint() * DVector::from_column_slice(&psi);
            let at = |t: f64| -> DVector<Complex64> {
                let phased = DVector::from_iterator(6, c.iter().zip(eig.eigenvalues.iter()).map(|(ci, e)| ci * (-I * e * t).exp()));
                u * phased
            };
            let duration = std::f64::consts::PI / omega;
            let samples = 2000;
            let leakage = (0..=samples)
                .map(|k| at(duration * k as f64 / samples as f64)[double].norm_sqr())
                .fold(0.0, f64::max);
            let end = at(duration);
            let mut out = [ZERO; 6];
            out.copy_from_slice(end.as_slice());
            (out, leakage, end[double].norm_sqr(), Some(omega))
        }
    };
    let state = AuxPairState { amplitudes: state };
    let target = blockade_target(control);
    let overlap = target.overlap(&state);
    Ok(BlockadeOutcome {
        fidelity: overlap.norm_sqr(),
        overlap,
        leakage,
        final_double,
        sequence: vec![PulseOp::pi("4", "e", "-", None), PulseOp::pi("5", "e", "-", rabi)],
        target,
        state,
    })
}

/// Receiver amplitudes of one routing branch after the transfer time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchTransfer {
    pub left: Complex64,
    pub right: Complex64,
}

impl BranchTransfer {
    pub fn new(left: Complex64, right: Complex64) -> Result<Self> {
        if left.norm_sqr() + right.norm_sqr() > 1.0 + 1e-9 {
            return Err(Error::invalid("receiver populations exceed one"));
        }
        Ok(BranchTransfer { left, right })
    }

    /// Population left in the network or lost.
    pub fn residual(&self) -> f64 {
        (1.0 - self.left.norm_sqr() - self.right.norm_sqr()).max(0.0)
    }
}

/// Final joint state of the control qubit and the receivers.
///
/// Basis of each control component: |1⟩_rL|0⟩_rR, |0⟩_rL|1⟩_rR and a residual
/// state holding whatever did not reach a receiver. Residuals of the two
/// branches are treated as orthogonal, which can only lower the purity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoutingMap {
    /// Rows |g⟩₄, |e⟩₄; columns rL, rR, residual.
    pub amplitudes: [[Complex64; 3]; 2],
    /// ⟨target|state⟩ with target −(α|g⟩|0_L1_R⟩ + β|e⟩|1_L0_R⟩).
    pub overlap: Complex64,
    pub fidelity: f64,
    /// Fidelity after removing the transfer phases of each branch.
    pub fidelity_up_to_transfer_phases: f64,
    /// Reduced density matrix of the control qubit.
    pub control_density: [[Complex64; 2]; 2],
    pub purity: f64,
    /// Entanglement entropy of the control qubit in bits.
    pub entropy_bits: f64,
    pub sequence: Vec<PulseOp>,
}

/// Composes preparation, routing and the reversal pulses (iii)–(iv).
///
/// `via_five` is the branch with atom 5 in |−⟩ (control |g⟩), `via_four` the
/// branch with atom 4 in |−⟩ (control |e⟩). Both pick up the factor i from
/// preparation and another i from the reversal pulse.
pub fn full_routing_map(control: &ControlQubit, via_five: &BranchTransfer, via_four: &BranchTransfer) -> Result<RoutingMap> {
    ControlQubit::new(control.alpha, control.beta)?;
    let phase = I * I;
    let row = |c: Complex64, b: &BranchTransfer| {
        [
            phase * c * b.left,
            phase * c * b.right,
            phase * c * Complex64::new(b.residual().sqrt(), 0.0),
        ]
    };
    let amplitudes = [row(control.alpha, via_five), row(control.beta, via_four)];
    let target = [
        [ZERO, -control.alpha, ZERO],
        [-control.beta, ZERO, ZERO],
    ];
    let overlap: Complex64 = (0..2)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| target[r][c].conj() * amplitudes[r][c])
        .sum();
    let fidelity_up_to_transfer_phases =
        (control.alpha.norm_sqr() * via_five.right.norm() + control.beta.norm_sqr() * via_four.left.norm()).powi(2);

    // ρ_ab = Σ_k ψ_a,k ψ*_b,k with residuals kept orthogonal across branches.
    let g = &amplitudes[0];
    let e = &amplitudes[1];
    let cross = g[0] * e[0].conj() + g[1] * e[1].conj();
    let rho_gg: f64 = g.iter().map(|a| a.norm_sqr()).sum();
    let rho_ee: f64 = e.iter().map(|a| a.norm_sqr()).sum();
    let control_density = [
        [Complex64::new(rho_gg, 0.0), cross],
        [cross.conj(), Complex64::new(rho_ee, 0.0)],
    ];
    let purity = rho_gg * rho_gg + rho_ee * rho_ee + 2.0 * cross.norm_sqr();
    let tr = rho_gg + rho_ee;
    let disc = ((rho_gg - rho_ee).powi(2) + 4.0 * cross.norm_sqr()).sqrt();
    let entropy_bits = [0.5 * (tr + disc), 0.5 * (tr - disc)]
        .iter()
        .filter(|l| **l > 1e-300)
        .map(|l| -l * l.log2())
        .sum::<f64>();
    Ok(RoutingMap {
        amplitudes,
        fidelity: overlap.norm_sqr(),
        overlap,
        fidelity_up_to_transfer_phases,
        control_density,
        purity,
        entropy_bits,
        sequence: vec![
            PulseOp::pi("4", "e", "-", None),
            PulseOp::pi("5", "e", "-", None),
            PulseOp::pi("5", "-", "e", None),
            PulseOp::pi("4", "-", "e", None),
        ],
    })
}

/// Sender and receiver couplings implied by the laser pulses Ω_s(t), Ω_r(t).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundarySchedule {
    pub j_s: PulseProfile,
    pub j_r: PulseProfile,
    /// Amplitude of |g⟩_s, which never enters the network.
    pub spectator: Complex64,
    /// Amplitude of |e⟩_s, launched as the single excitation |1⟩_s.
    pub excitation: Complex64,
    /// π-pulses before and after the transfer; Ω_s and Ω_r themselves are `j_s`, `j_r`.
    pub sequence: Vec<PulseOp>,
}

fn rescale(profile: &PulseProfile, peak: f64) -> Result<PulseProfile> {
    match profile.kind {
        PulseKind::RampOn => PulseProfile::ramp_on(peak, profile.t_m, profile.total),
        PulseKind::RampOff => PulseProfile::ramp_off(peak, profile.t_m, profile.total),
        PulseKind::Constant => Ok(PulseProfile::constant(peak)),
        PulseKind::Zero => Ok(PulseProfile::zero()),
    }
}

/// Maps the qubit c₀|g⟩ + c₁|e⟩ and the laser profiles onto J_s(t), J_r(t)
/// with J ∝ Ω, scaled to the coupling peak `j_peak`.
pub fn sender_receiver_pulses(
    c0: Complex64,
    c1: Complex64,
    omega_s: &PulseProfile,
    omega_r: &PulseProfile,
    j_peak: f64,
) -> Result<BoundarySchedule> {
    let n = c0.norm_sqr() + c1.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!("qubit is not normalized: {n}")));
    }
    Ok(BoundarySchedule {
        j_s: rescale(omega_s, j_peak)?,
        j_r: rescale(omega_r, j_peak)?,
        spectator: c0,
        excitation: c1,
        sequence: vec![
            PulseOp::pi("all", "g", "0", None),
            PulseOp::pi("all", "0", "g", None),
        ],
    })
}

/// Receiver qubit c₀'|g⟩ + c₁'|e⟩ after transfer through `network`, which
/// must already carry the schedule's boundary couplings.
pub fn transfer_qubit(
    schedule: &BoundarySchedule,
    network: &SpinNetwork,
    sender: &str,
    receiver: &str,
    total: f64,
) -> Result<(Complex64, Complex64)> {
    let s = network
        .index_of(sender)
        .ok_or_else(|| Error::invalid(format!("unknown site `{sender}`")))?;
    let r = network
        .index_of(receiver)
        .ok_or_else(|| Error::invalid(format!("unknown site `{receiver}`")))?;
    if schedule.excitation == ZERO {
        return Ok((schedule.spectator, ZERO));
    }
    let mut psi = DVector::from_element(network.dim(), ZERO);
    psi[s] = ONE;
    let tr = propagate(network, &psi, &[0.0, total], None)?;
    Ok((schedule.spectator, schedule.excitation * tr.final_state()[r]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{chain_transfer_network, ChainModel};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ideal_gate_basis_states() {
        let q = ControlQubit::new(ONE, ZERO).unwrap();
        let o = blockade_gate(&q, BlockadeMode::Ideal).unwrap();
        assert!((o.state.amp(Level4::G, Level5::Minus) - I).norm() < 1e-15);
        let q = ControlQubit::new(ZERO, ONE).unwrap();
        let o = blockade_gate(&q, BlockadeMode::Ideal).unwrap();
        assert!((o.state.amp(Level4::Minus, Level5::E) - I).norm() < 1e-15);
        assert!((o.overlap - ONE).norm() < 1e-15);
    }

    #[test]
    fn unnormalized_control_rejected() {
        assert!(ControlQubit::new(ONE, ONE).is_err());
        let bad = ControlQubit { alpha: ONE, beta: ONE };
        assert!(blockade_gate(&bad, BlockadeMode::Ideal).is_err());
        let q = ControlQubit::new(ONE, ZERO).unwrap();
        assert!(blockade_gate(&q, BlockadeMode::FiniteBlockade { v: 0.0, omega: 1.0 }).is_err());
    }

    #[test]
    fn blocked_branch_matches_detuned_rabi_formula() {
        // Oracle: with atom 4 in |−⟩ the drive of atom 5 is a two-level problem
        // detuned by V, P(t) = Ω²/(Ω²+V²)·sin²(√(Ω²+V²) t / 2).
        let q = ControlQubit::new(ZERO, ONE).unwrap();
        for (v, om) in [(10.0, 1.0), (5.0, 1.0), (3.0, 2.0)] {
            let o = blockade_gate(&q, BlockadeMode::FiniteBlockade { v, omega: om }).unwrap();
            let w = (om * om + v * v).sqrt();
            let t = std::f64::consts::PI / om;
            let want = om * om / (w * w) * (0.5 * w * t).sin().powi(2);
            assert!((o.final_double - want).abs() < 1e-12, "{v} {om}");
            assert!(o.leakage <= om * om / (w * w) + 1e-12);
        }
    }

    #[test]
    fn unblocked_branch_flips_fully() {
        let q = ControlQubit::new(ONE, ZERO).unwrap();
        let o = blockade_gate(&q, BlockadeMode::FiniteBlockade { v: 50.0, omega: 1.0 }).unwrap();
        assert!((o.fidelity - 1.0).abs() < 1e-12);
        assert!((o.overlap - ONE).norm() < 1e-12);
    }

    #[test]
    fn routing_map_entangles() {
        let h = c(FRAC_1_SQRT_2, 0.0);
        let q = ControlQubit::new(h, h).unwrap();
        let five = BranchTransfer::new(ZERO, ONE).unwrap();
        let four = BranchTransfer::new(ONE, ZERO).unwrap();
        let m = full_routing_map(&q, &five, &four).unwrap();
        assert!((m.fidelity - 1.0).abs() < 1e-12);
        assert!((m.overlap - ONE).norm() < 1e-12);
        assert!((m.purity - 0.5).abs() < 1e-12);
        assert!((m.entropy_bits - 1.0).abs() < 1e-12);
    }

    #[test]
    fn routing_map_single_branch_and_phases() {
        let q = ControlQubit::new(ONE, ZERO).unwrap();
        let z = c(0.0, 1.0);
        let five = BranchTransfer::new(ZERO, z).unwrap();
        let four = BranchTransfer::new(ONE, ZERO).unwrap();
        let m = full_routing_map(&q, &five, &four).unwrap();
        assert!((m.amplitudes[0][1] - (-z)).norm() < 1e-15);
        assert!((m.fidelity - 1.0).abs() < 1e-12);
        assert!((m.fidelity_up_to_transfer_phases - 1.0).abs() < 1e-12);
        assert!(m.entropy_bits.abs() < 1e-12);
    }

    #[test]
    fn spectator_qubit_never_enters() {
        let on = PulseProfile::ramp_on(2.0, 5.0, 10.0).unwrap();
        let off = PulseProfile::ramp_off(2.0, 5.0, 10.0).unwrap();
        let sch = sender_receiver_pulses(ONE, ZERO, &on, &off, 1.0).unwrap();
        let net = chain_transfer_network(3, 1.0, ChainModel::NearestNeighbor, 5.0, 10.0).unwrap();
        let (g, e) = transfer_qubit(&sch, &net, "s", "r", 10.0).unwrap();
        assert_eq!((g, e), (ONE, ZERO));
        // J_s/peak follows Ω_s/max Ω_s.
        for t in [0.5, 2.0, 4.9, 7.0] {
            assert!((sch.j_s.value(t) / 1.0 - on.value(t) / 2.0).abs() < 1e-15);
            assert!((sch.j_r.value(t) / 1.0 - off.value(t) / 2.0).abs() < 1e-15);
        }
    }
}
