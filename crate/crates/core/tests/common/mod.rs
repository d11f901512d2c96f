//! Property suites shared by the `properties` and `acceptance` targets.

use std::f64::consts::PI;

use chiral_router::atomic::{angular_dipole, wigner_3j, AtomLevel, HalfInt, RouterAtoms, SpeciesTable, SublevelAssignment};
use chiral_router::fullmodel::router_model;
use chiral_router::interaction::CouplingConstants;
use chiral_router::network::{
    chain_transfer_network, propagate, propagate_with, router_network_any_parity, router_transfer_network, ChainModel,
    PropagateOptions, SpinNetwork,
};
use chiral_router::triangle::{four_state_hamiltonian, AuxAtom, FluxTriangle, RouterGeometry};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};

pub struct Suite {
    pub name: &'static str,
    /// Cases relative to the requested budget (expensive suites run fewer).
    pub weight: f64,
    pub run: fn(&mut TestRunner) -> Result<(), String>,
}

pub const SUITES: [Suite; 7] = [
    Suite { name: "hermiticity of abstract networks", weight: 1.0, run: hermitian_networks },
    Suite { name: "hermiticity of the full model", weight: 0.1, run: hermitian_full_model },
    Suite { name: "norm conservation", weight: 0.25, run: norm_conservation },
    Suite { name: "gauge invariance", weight: 1.0, run: gauge_invariance },
    Suite { name: "wigner orthogonality", weight: 1.0, run: wigner_orthogonality },
    Suite { name: "dipole selection rules", weight: 1.0, run: selection_rules },
    Suite { name: "truncation consistency", weight: 0.1, run: truncation },
];

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases: cases.max(1),
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..Config::default()
    })
}

/// Runs one suite with `budget` cases scaled by its weight.
pub fn run_suite(s: &Suite, budget: u32) -> Result<(), String> {
    let mut r = runner((budget as f64 * s.weight).ceil() as u32);
    (s.run)(&mut r)
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn max_asymmetry(h: &DMatrix<Complex64>) -> (f64, f64) {
    let scale = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let diff = (h - h.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    (diff, scale)
}

fn triangle() -> impl Strategy<Value = FluxTriangle> {
    (prop::array::uniform3(0.05..2.0f64), prop::array::uniform3(-PI..PI), prop::array::uniform3(-1.0..1.0f64))
        .prop_map(|(m, p, o)| FluxTriangle::from_polar(m, p).with_onsite(o))
}

fn excite(net: &SpinNetwork, label: &str) -> DVector<Complex64> {
    let mut psi = DVector::from_element(net.dim(), Complex64::new(0.0, 0.0));
    psi[net.index_of(label).expect("site exists")] = Complex64::new(1.0, 0.0);
    psi
}

fn hermitian_networks(r: &mut TestRunner) -> Result<(), String> {
    let odd = || (0usize..3).prop_map(|k| 2 * k + 1);
    let s = (odd(), odd(), triangle(), 0.1..2.0f64, 1.0..30.0f64, 0.1..1.0f64, 0.0..1.0f64);
    r.run(&s, |(nl, nr, tri, j, total, frac, when)| {
        let net = router_transfer_network(nl, nr, &tri, j, frac * total, total).map_err(|e| fail(e.to_string()))?;
        let (diff, scale) = max_asymmetry(&net.hamiltonian_at(when * total));
        prop_assert!(diff <= 1e-12 * scale, "asymmetry {diff} at scale {scale}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn benchmark_atoms() -> RouterAtoms {
    RouterAtoms::rb_cs(&SpeciesTable::benchmark(), SublevelAssignment::Stretched).expect("benchmark atoms")
}

fn router_point() -> impl Strategy<Value = (f64, f64, f64, bool)> {
    (9.0..14.0f64, 9.0..12.0f64, 0.0..60.0f64, any::<bool>())
}

fn hermitian_full_model(r: &mut TestRunner) -> Result<(), String> {
    let atoms = benchmark_atoms();
    r.run(&router_point(), |(b, c, field, five)| {
        let g = RouterGeometry::new(17.0, b, c).map_err(|e| fail(e.to_string()))?;
        let aux = if five { AuxAtom::Five } else { AuxAtom::Four };
        let m = router_model(&atoms, &g, field, aux, true).map_err(|e| fail(e.to_string()))?;
        let (diff, scale) = max_asymmetry(&m.hamiltonian);
        prop_assert!(diff <= 1e-12 * scale, "asymmetry {diff} at scale {scale}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn norm_conservation(r: &mut TestRunner) -> Result<(), String> {
    let s = (2usize..9, 0.2..2.0f64, 2.0..20.0f64, 0.2..0.95f64, any::<bool>());
    r.run(&s, |(n, j, total, frac, dipolar)| {
        let model = if dipolar { ChainModel::DipolarR3 } else { ChainModel::NearestNeighbor };
        let net = chain_transfer_network(n, j, model, frac * total, total).map_err(|e| fail(e.to_string()))?;
        let times: Vec<f64> = (0..=20).map(|k| total * k as f64 / 20.0).collect();
        let opts = PropagateOptions { force_rk4: true, ..Default::default() };
        let traj = propagate_with(&net, &excite(&net, "s"), &times, None, &opts).map_err(|e| fail(e.to_string()))?;
        for (t, norm) in traj.times.iter().zip(&traj.norms) {
            prop_assert!((norm - 1.0).abs() <= 1e-9, "norm {norm} at t = {t}");
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn gauge_invariance(r: &mut TestRunner) -> Result<(), String> {
    let s = (triangle(), prop::array::uniform3(-PI..PI), 0usize..3, 0.1..10.0f64);
    r.run(&s, |(tri, alpha, start, t_end)| {
        let times: Vec<f64> = (0..=10).map(|k| t_end * k as f64 / 10.0).collect();
        let pops = |t: &FluxTriangle| -> Result<Vec<f64>, TestCaseError> {
            let net = router_network_any_parity(1, 1, t, 1.0).map_err(|e| fail(e.to_string()))?;
            let label = (start + 1).to_string();
            let traj = propagate(&net, &excite(&net, &label), &times, None).map_err(|e| fail(e.to_string()))?;
            Ok((0..times.len()).flat_map(|k| (0..3).map(move |s| (k, s))).map(|(k, s)| traj.population(k, s)).collect())
        };
        let a = pops(&tri)?;
        let b = pops(&tri.gauge_transformed(alpha))?;
        let dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(dev <= 1e-12, "populations differ by {dev}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn h(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

/// Σ_{m1,m2} (2j3+1)(j1 j2 j3; m1 m2 m3)(j1 j2 j3'; m1 m2 m3') = δ_{j3 j3'} δ_{m3 m3'}.
fn wigner_orthogonality(r: &mut TestRunner) -> Result<(), String> {
    let s = (0i32..7, 0i32..7, any::<prop::sample::Index>(), any::<prop::sample::Index>(), any::<prop::sample::Index>(), any::<prop::sample::Index>());
    r.run(&s, |(a, b, i3, i3p, im, imp)| {
        // Allowed j3 (twice) run from |a−b| to a+b in steps of 2.
        let j3s: Vec<i32> = ((a - b).abs()..=a + b).step_by(2).collect();
        let (j3, j3p) = (j3s[i3.index(j3s.len())], j3s[i3p.index(j3s.len())]);
        let m3 = h(j3).projections().collect::<Vec<_>>()[im.index(j3 as usize + 1)];
        let m3p = h(j3p).projections().collect::<Vec<_>>()[imp.index(j3p as usize + 1)];
        let mut sum = 0.0;
        for m1 in h(a).projections() {
            for m2 in h(b).projections() {
                let x = wigner_3j(h(a), h(b), h(j3), m1, m2, m3).map_err(|e| fail(e.to_string()))?;
                let y = wigner_3j(h(a), h(b), h(j3p), m1, m2, m3p).map_err(|e| fail(e.to_string()))?;
                sum += x * y;
            }
        }
        sum *= (j3 + 1) as f64;
        let want = if j3 == j3p && m3 == m3p { 1.0 } else { 0.0 };
        prop_assert!((sum - want).abs() <= 1e-12, "j1={a}/2 j2={b}/2 j3={j3}/2 j3'={j3p}/2: {sum}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn level() -> impl Strategy<Value = AtomLevel> {
    (0u32..4, any::<bool>(), any::<prop::sample::Index>()).prop_map(|(l, up, idx)| {
        let j = if up || l == 0 { h(2 * l as i32 + 1) } else { h(2 * l as i32 - 1) };
        let ms: Vec<HalfInt> = j.projections().collect();
        AtomLevel::new("Rb", 70, l, j, ms[idx.index(ms.len())]).expect("valid level")
    })
}

fn selection_rules(r: &mut TestRunner) -> Result<(), String> {
    r.run(&(level(), level()), |(from, to)| {
        let c = angular_dipole(&from, &to).map_err(|e| fail(e.to_string()))?;
        let dl = (to.l as i32 - from.l as i32).abs();
        let dj = (to.j.twice() - from.j.twice()).abs();
        let dm = (to.m.twice() - from.m.twice()).abs();
        if dl != 1 || dj > 2 || dm > 2 {
            prop_assert!(c == 0.0, "{from:?} -> {to:?} gives {c}");
        }
        // Exchanging the two levels keeps every zero a zero.
        let back = angular_dipole(&to, &from).map_err(|e| fail(e.to_string()))?;
        prop_assert!((c == 0.0) == (back == 0.0), "{from:?} <-> {to:?}: {c} vs {back}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn truncation(r: &mut TestRunner) -> Result<(), String> {
    let atoms = benchmark_atoms();
    let consts = CouplingConstants::from_atoms(&atoms).map_err(|e| e.to_string())?;
    r.run(&router_point(), |(b, c, field, five)| {
        let g = RouterGeometry::new(17.0, b, c).map_err(|e| fail(e.to_string()))?;
        let aux = if five { AuxAtom::Five } else { AuxAtom::Four };
        let delta = atoms.detuning(field).map_err(|e| fail(e.to_string()))?;
        prop_assume!(delta.abs() > 1e-6);
        let m = router_model(&atoms, &g, field, aux, false).map_err(|e| fail(e.to_string()))?;
        let idx: Vec<usize> = [1, 2, 3, aux.id()]
            .iter()
            .map(|id| m.basis.designated_excitation(*id))
            .collect::<Result<_, _>>()
            .map_err(|e| fail(e.to_string()))?;
        let h4 = four_state_hamiltonian(&g.geometry(), &consts, delta, aux.id()).map_err(|e| fail(e.to_string()))?;
        let scale = h4.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for i in 0..4 {
            for k in 0..4 {
                let d = (m.hamiltonian[(idx[i], idx[k])] - h4[(i, k)]).norm();
                prop_assert!(d <= 1e-12 * scale, "entry ({i},{k}) differs by {d}");
            }
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}
