//! Execution of resolved plans into CSV tables and manifest entries.

use std::f64::consts::{FRAC_PI_2, PI};

use chiral_router::fullmodel::{
    gamma_total, optimize_geometry, router_model, run_router, AuxConfig, Bounds, DecayModel, Objective, RouterPulses,
    RouterSetup,
};
use chiral_router::interaction::CouplingConstants;
use chiral_router::nelder_mead::NelderMeadOptions;
use chiral_router::network::{
    chain_hamiltonian, chain_spectrum, chain_transfer_network, fmt_g12, propagate, propagate_with, router_network_any_parity,
    router_transfer_network, scan_protocol, scan_router_protocol, transfer_result, write_population_csv, ChainModel,
    PropagateOptions, PulseProfile, ScanOptions, ScanResult, SpinNetwork, Trajectory,
};
use chiral_router::protocols::{
    blockade_gate, full_routing_map, sender_receiver_pulses, transfer_qubit, BlockadeMode, BranchTransfer,
    ControlQubit, Level4, Level5,
};
use chiral_router::triangle::{
    check_flux_conditions, circulation_metric, effective_triangle, effective_triangle_at, solve_flux_conditions,
    wrap_phase, AuxAtom, EffectiveTriangle, FluxGuess, FluxTriangle, RouterGeometry, SolverOptions,
};
use chiral_router::units::{from_2pi_mhz, to_2pi_mhz};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::scenario::*;

pub type Result<T> = chiral_router::Result<T>;

/// What a run produced: tables keyed by a file tag ("" for the primary CSV).
pub struct Outcome {
    pub method: Value,
    pub results: Value,
    pub tables: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn excite(net: &SpinNetwork, label: &str) -> Result<DVector<Complex64>> {
    let k = net
        .index_of(label)
        .ok_or_else(|| chiral_router::Error::InvalidArgument(format!("unknown site `{label}`")))?;
    let mut psi = DVector::from_element(net.dim(), Complex64::new(0.0, 0.0));
    psi[k] = Complex64::new(1.0, 0.0);
    Ok(psi)
}

fn csv_of(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn table(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

fn g(x: f64) -> String {
    fmt_g12(x)
}

fn infeasible(msg: impl Into<String>) -> chiral_router::Error {
    chiral_router::Error::Infeasible(msg.into())
}

fn method_json(traj: &Trajectory) -> Value {
    serde_json::to_value(traj.method).expect("method serializes")
}

/// Time of the largest population of each site within the first period.
fn peak_times(traj: &Trajectory, labels: &[&str], window: f64) -> Result<Vec<f64>> {
    labels
        .iter()
        .map(|l| {
            let k = traj.index_of(l)?;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for (i, t) in traj.times.iter().enumerate() {
                if *t > window {
                    break;
                }
                let p = traj.population(i, k);
                if p > best.0 {
                    best = (p, *t);
                }
            }
            Ok(best.1)
        })
        .collect()
}

fn populations3(traj: &Trajectory, order: [&str; 3]) -> Result<Vec<[f64; 3]>> {
    let idx = [traj.index_of(order[0])?, traj.index_of(order[1])?, traj.index_of(order[2])?];
    Ok((0..traj.times.len())
        .map(|i| idx.map(|k| traj.population(i, k)))
        .collect())
}

fn circulation_order(start: usize) -> [String; 3] {
    [start, start % 3 + 1, (start + 1) % 3 + 1].map(|s| s.to_string())
}

pub fn execute(plan: &Plan, seed: u64) -> Result<Outcome> {
    match plan {
        Plan::Triangle(p) => run_triangle(p),
        Plan::ChainTransfer(p) => run_chain(p),
        Plan::RouterAbstract(p) => run_router_abstract(p),
        Plan::EffectiveSolve(p) => run_effective(p),
        Plan::FullModel(p) => run_full_model(p),
        Plan::FullRouter(p) => run_full_router(p),
        Plan::Blockade(p) => run_blockade(p),
        Plan::Spectrum(p) => run_spectrum(p),
        Plan::Optimize(p) => run_optimize(p, seed),
    }
}

/// Dynamics of a three-site triangle from `start`, with the CCW circulation score.
fn triangle_run(tri: &FluxTriangle, start: usize, t_end: Option<f64>, samples: usize) -> Result<(Trajectory, Value)> {
    let period = tri.period_estimate();
    if !period.is_finite() {
        return Err(infeasible("triangle couplings vanish, so there is no circulation period"));
    }
    let t_end = t_end.unwrap_or(1.5 * period);
    let net = router_network_any_parity(1, 1, tri, 1.0)?;
    let psi = excite(&net, &start.to_string())?;
    let traj = propagate(&net, &psi, &linspace(0.0, t_end, samples), None)?;
    let order = circulation_order(start);
    let metric = if t_end >= period {
        let pops = populations3(&traj, [&order[0], &order[1], &order[2]])?;
        Some(circulation_metric(&traj.times, &pops, period)?)
    } else {
        None
    };
    let diag = check_flux_conditions(tri, 1e-9)?;
    let peaks = peak_times(&traj, &["1", "2", "3"], period)?;
    let results = json!({
        "period_estimate_us": period,
        "t_end_us": t_end,
        "flux_conditions": diag,
        "counter_clockwise_order": order,
        "circulation_metric": metric,
        "peak_times_us": peaks,
        "final_norm": traj.norms.last(),
    });
    Ok((traj, results))
}

fn run_triangle(p: &TrianglePlan) -> Result<Outcome> {
    let tri = FluxTriangle::from_polar(p.magnitudes_2pi_mhz.map(from_2pi_mhz), p.phases_rad);
    let (traj, results) = triangle_run(&tri, p.start_site, p.t_end_us, p.samples)?;
    let summary = vec![format!(
        "circulation metric {} over {:.4} us",
        results["circulation_metric"], results["t_end_us"]
    )];
    Ok(Outcome {
        method: method_json(&traj),
        results,
        tables: vec![(String::new(), csv_of(&traj))],
        summary,
    })
}

fn scan_opts(grid: usize) -> ScanOptions {
    ScanOptions {
        grid,
        ..Default::default()
    }
}

fn predicted_zeta(n: usize) -> f64 {
    wrap_phase(-FRAC_PI_2 * (n as f64 + 1.0))
}

fn run_chain(p: &ChainPlan) -> Result<Outcome> {
    let j = from_2pi_mhz(p.j_2pi_mhz);
    let (t_m, total, scan): (f64, f64, Option<ScanResult>) = match p.pulses_us {
        Some((t_m, total)) => (t_m, total, None),
        None => {
            let r = scan_protocol(p.n, j, p.model, &scan_opts(p.scan_grid))?;
            (r.t_m, r.total, Some(r))
        }
    };
    let net = chain_transfer_network(p.n, j, p.model, t_m, total)?;
    let traj = propagate(&net, &excite(&net, "s")?, &linspace(0.0, total, p.samples), None)?;
    let tr = transfer_result(&traj, "s", "r")?;
    let results = json!({
        "t_m_us": t_m,
        "T_us": total,
        "p_t": tr.p_t,
        "zeta_rad": tr.zeta,
        "zeta_predicted_rad": predicted_zeta(p.n),
        "receiver_amplitude": tr.amplitude,
        "scan": scan,
        "final_norm": traj.norms.last(),
    });
    Ok(Outcome {
        method: method_json(&traj),
        summary: vec![format!("P_T = {:.6} at t_m = {t_m:.4} us, T = {total:.4} us", tr.p_t)],
        results,
        tables: vec![(String::new(), csv_of(&traj))],
    })
}

struct RouterEval {
    traj: Trajectory,
    p_t: f64,
    zeta: Option<f64>,
    p_wrong: f64,
}

fn router_eval(
    nl: usize,
    nr: usize,
    tri: &FluxTriangle,
    j: f64,
    (t_m, total): (f64, f64),
    receivers: (&str, &str),
    samples: usize,
) -> Result<RouterEval> {
    let net = router_transfer_network(nl, nr, tri, j, t_m, total)?;
    let traj = propagate(&net, &excite(&net, "s")?, &linspace(0.0, total, samples), None)?;
    let tr = transfer_result(&traj, "s", receivers.0)?;
    let k = traj.index_of(receivers.1)?;
    let p_wrong = traj.population(traj.times.len() - 1, k);
    Ok(RouterEval {
        p_t: tr.p_t,
        zeta: tr.zeta,
        p_wrong,
        traj,
    })
}

fn run_router_abstract(p: &RouterPlan) -> Result<Outcome> {
    let j = from_2pi_mhz(p.j_2pi_mhz);
    let raw = FluxTriangle::from_polar(p.triangle_magnitudes_2pi_mhz.map(from_2pi_mhz), p.triangle_phases_rad)
        .with_onsite(p.onsite_2pi_mhz.map(from_2pi_mhz));
    let compensated = raw.with_onsite([0.0; 3]);
    let receivers = if raw.gamma_tot() < 0.0 { ("rL", "rR") } else { ("rR", "rL") };
    let primary = match p.compensation {
        CompensationMode::Off => &raw,
        CompensationMode::On | CompensationMode::Compare => &compensated,
    };
    let compare = p.compensation == CompensationMode::Compare;
    let samples = if p.sweep { 2 } else { p.samples };

    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut tables = Vec::new();
    let mut summary = Vec::new();
    let mut method = Value::Null;
    for &(nl, nr) in &p.lengths {
        let (protocol, scan) = match p.pulses_us {
            Some(pp) => (pp, None),
            None => {
                let r = scan_router_protocol(nl, nr, primary, j, receivers.0, &scan_opts(p.scan_grid))?;
                ((r.t_m, r.total), Some(r))
            }
        };
        let main = router_eval(nl, nr, primary, j, protocol, receivers, samples)?;
        let other = if compare {
            Some(router_eval(nl, nr, &raw, j, protocol, receivers, samples)?)
        } else {
            None
        };
        method = method_json(&main.traj);
        let mut row = vec![
            nl.to_string(),
            nr.to_string(),
            g(protocol.0),
            g(protocol.1),
            g(main.p_t),
            main.zeta.map_or("nan".into(), g),
            g(main.p_wrong),
        ];
        if let Some(o) = &other {
            row.push(g(o.p_t));
            row.push(g(o.p_wrong));
        }
        rows.push(row);
        summary.push(format!(
            "N = ({nl}, {nr}): P_T = {:.6}{}",
            main.p_t,
            other.as_ref().map_or(String::new(), |o| format!(", uncompensated {:.6}", o.p_t))
        ));
        let mut entry = json!({
            "n_left": nl,
            "n_right": nr,
            "t_m_us": protocol.0,
            "T_us": protocol.1,
            "receiver": receivers.0,
            "p_t": main.p_t,
            "zeta_rad": main.zeta,
            "p_wrong_receiver": main.p_wrong,
            "scan": scan,
        });
        if let Some(o) = &other {
            entry["uncompensated"] = json!({ "p_t": o.p_t, "zeta_rad": o.zeta, "p_wrong_receiver": o.p_wrong });
        }
        if let Some([c0, c1]) = p.qubit {
            let schedule = sender_receiver_pulses(
                c0,
                c1,
                &PulseProfile::ramp_on(1.0, protocol.0, protocol.1)?,
                &PulseProfile::ramp_off(1.0, protocol.0, protocol.1)?,
                j,
            )?;
            let net = router_transfer_network(nl, nr, primary, j, protocol.0, protocol.1)?;
            let (a0, a1) = transfer_qubit(&schedule, &net, "s", receivers.0, protocol.1)?;
            let raw_fid = (c0.conj() * a0 + c1.conj() * a1).norm_sqr();
            let fixed = a1 * Complex64::from_polar(1.0, -main.zeta.unwrap_or(0.0));
            let fid = (c0.conj() * a0 + c1.conj() * fixed).norm_sqr();
            entry["qubit"] = json!({
                "sent": [c0, c1],
                "received": [a0, a1],
                "fidelity": raw_fid,
                "fidelity_after_phase_correction": fid,
                "sequence": schedule.sequence,
            });
            summary.push(format!("qubit fidelity {raw_fid:.6}, {fid:.6} after removing the transfer phase"));
        }
        if !p.sweep {
            tables.push((String::new(), csv_of(&main.traj)));
            if let Some(o) = &other {
                tables.push(("uncompensated".into(), csv_of(&o.traj)));
            }
        }
        entries.push(entry);
    }
    if p.sweep {
        let mut header = vec!["n_left", "n_right", "t_m_us", "T_us", "p_t", "zeta_rad", "p_wrong"];
        if compare {
            header.extend(["p_t_uncompensated", "p_wrong_uncompensated"]);
        }
        tables.push((String::new(), table(&header, &rows)));
    }
    Ok(Outcome {
        method,
        results: json!({ "compensation": p.compensation, "runs": entries }),
        tables,
        summary,
    })
}

fn effective_json(t: &EffectiveTriangle) -> Value {
    json!({
        "magnitudes_2piMHz": t.magnitudes.map(to_2pi_mhz),
        "phases_rad": t.phases,
        "gamma_tot_rad": t.gamma_tot(),
        "mu_2piMHz": t.mu.map(to_2pi_mhz),
        "detuning_2piMHz": to_2pi_mhz(t.detuning),
        "adiabaticity": t.adiabaticity,
        "aux": t.aux,
    })
}

fn run_effective(p: &EffectivePlan) -> Result<Outcome> {
    let atoms = p.atoms.build()?;
    let (geometry, tri, field, solver) = match &p.mode {
        EffectiveMode::Solve { b_um, c_um, delta_2pi_mhz } => {
            let guess = FluxGuess {
                b: *b_um,
                c: *c_um,
                delta: from_2pi_mhz(*delta_2pi_mhz),
            };
            let sol = solve_flux_conditions(p.a_um, &atoms, p.aux.id(), guess, &SolverOptions::default())?;
            let solver = json!({ "residual": sol.residual, "iterations": sol.iterations, "field_reachable": sol.field_reachable });
            (sol.geometry, sol.triangle, sol.field_gauss, solver)
        }
        EffectiveMode::Evaluate { b_um, c_um, field } => {
            let geometry = RouterGeometry::new(p.a_um, *b_um, *c_um)?;
            let (delta, b) = match field {
                FieldSpec::Gauss(b) => (atoms.detuning(*b)?, Some(*b)),
                FieldSpec::Delta2piMhz(d) => {
                    let d = from_2pi_mhz(*d);
                    (d, atoms.field_for_detuning(d)?)
                }
            };
            if delta == 0.0 {
                return Err(infeasible("detuning Δ = 0: the auxiliary level cannot be eliminated"));
            }
            let consts = CouplingConstants::from_atoms(&atoms)?;
            let tri = effective_triangle_at(&geometry.geometry(), &consts, delta, p.aux.id())?;
            (geometry, tri, b, Value::Null)
        }
    };
    let ft = tri.to_flux_triangle();
    let start_order = match p.aux {
        AuxAtom::Four => "1,2,3",
        AuxAtom::Five => "1,3,2",
    };
    let (traj, dynamics) = triangle_run(&ft, 1, None, p.samples)?;
    let results = json!({
        "geometry_um": geometry,
        "field_gauss": field,
        "triangle": effective_json(&tri),
        "provenance": tri.provenance,
        "solver": solver,
        "expected_order": start_order,
        "dynamics": dynamics,
    });
    Ok(Outcome {
        method: method_json(&traj),
        summary: vec![format!(
            "b = {:.4} um, c = {:.4} um, Δ = 2π×{:.4} MHz, |J| = 2π×{:?} MHz",
            geometry.b,
            geometry.c,
            to_2pi_mhz(tri.detuning),
            tri.magnitudes.map(to_2pi_mhz)
        )],
        results,
        tables: vec![(String::new(), csv_of(&traj))],
    })
}

fn run_full_model(p: &FullModelPlan) -> Result<Outcome> {
    let atoms = p.atoms.build()?;
    let eff = effective_triangle(&p.geometry_um.geometry(), &atoms, p.b_gauss, p.aux.id())?;
    let period = eff.to_flux_triangle().period_estimate();
    if !period.is_finite() {
        return Err(infeasible("effective couplings vanish, so there is no circulation period"));
    }
    let model = router_model(&atoms, &p.geometry_um, p.b_gauss, p.aux, false)?;
    let net = model.to_network(None)?;
    let designated = [
        model.basis.designated_excitation(1)?,
        model.basis.designated_excitation(2)?,
        model.basis.designated_excitation(3)?,
    ];
    let mut psi0 = DVector::from_element(model.basis.len(), Complex64::new(0.0, 0.0));
    psi0[designated[0]] = Complex64::new(1.0, 0.0);
    let times = linspace(0.0, p.periods * period, p.samples);
    let traj = propagate_with(&net, &psi0, &times, None, &PropagateOptions::default())?;
    let mut pops = Vec::with_capacity(times.len());
    let mut amps = Vec::with_capacity(times.len());
    for psi in &traj.states {
        pops.push(vec![
            model.designated_upper_population(psi, 1)?,
            model.designated_upper_population(psi, 2)?,
            model.designated_upper_population(psi, 3)?,
        ]);
        amps.push(designated.iter().map(|&k| psi[k]).collect::<Vec<_>>());
    }
    let labels: Vec<String> = ["1", "2", "3"].iter().map(|s| s.to_string()).collect();
    let mut buf = Vec::new();
    write_population_csv(&mut buf, &times, &labels, &pops, &traj.norms, &labels, &amps).expect("writing to memory");
    let (order, ordered): (&str, Vec<[f64; 3]>) = match p.aux {
        AuxAtom::Four => ("1,2,3", pops.iter().map(|v| [v[0], v[1], v[2]]).collect()),
        AuxAtom::Five => ("1,3,2", pops.iter().map(|v| [v[0], v[2], v[1]]).collect()),
    };
    let metric = if p.periods >= 1.0 {
        Some(circulation_metric(&times, &ordered, period)?)
    } else {
        None
    };
    let results = json!({
        "dimension": model.basis.len(),
        "period_estimate_us": period,
        "effective_triangle": effective_json(&eff),
        "expected_order": order,
        "circulation_metric": metric,
        "final_norm": traj.norms.last(),
    });
    Ok(Outcome {
        method: method_json(&traj),
        summary: vec![format!("{}-state model, circulation metric {}", model.basis.len(), results["circulation_metric"])],
        results,
        tables: vec![(String::new(), buf)],
    })
}

fn gamma_for(decay: &DecayPlan, plan: &AtomsPlan) -> Result<f64> {
    match decay {
        DecayPlan::None => Ok(0.0),
        DecayPlan::Rate { gamma_tot_per_us } => Ok(*gamma_tot_per_us),
        DecayPlan::Temperature { kelvin } => {
            gamma_total(
                &DecayModel::rb_cs_preset(*kelvin)?,
                (&plan.main_species, plan.main_n),
                (&plan.aux_species, plan.aux_n),
            )
        }
    }
}

fn run_full_router(p: &FullRouterPlan) -> Result<Outcome> {
    let atoms = p.atoms.build()?;
    let gamma = gamma_for(&p.decay, &p.atoms)?;
    let aux = match p.aux {
        AuxPlan::Single(a) => AuxConfig::Single(a),
        AuxPlan::Superposition { four, five } => AuxConfig::Superposition { four, five },
    };
    let setup = RouterSetup {
        atoms,
        geometry: p.geometry_um,
        b_gauss: p.b_gauss,
        aux,
        pulses: RouterPulses {
            t_m: p.t_m_us,
            total: p.total_us,
            peak: from_2pi_mhz(p.peak_2pi_mhz),
        },
        gamma_tot: gamma,
        compensate: p.compensate,
    };
    let run = run_router(&setup, &linspace(0.0, p.total_us, p.samples))?;
    let mut buf = Vec::new();
    run.write_csv(&mut buf).expect("writing to memory");
    let r = &run.report;
    let results = json!({
        "gamma_tot_per_us": gamma,
        "lossless_norm_expected": (-gamma * p.total_us).exp(),
        "report": r,
    });
    Ok(Outcome {
        method: method_json(&run.trajectory),
        summary: vec![format!(
            "P_rL = {:.6}, P_rR = {:.6}, max P_rR = {:.6}, norm = {:.6}",
            r.final_left, r.final_right, r.max_right, r.final_norm
        )],
        results,
        tables: vec![(String::new(), buf)],
    })
}

const PAIR_STATES: [(Level4, Level5, &str); 6] = [
    (Level4::G, Level5::E, "g4_e5"),
    (Level4::G, Level5::Minus, "g4_minus5"),
    (Level4::E, Level5::E, "e4_e5"),
    (Level4::E, Level5::Minus, "e4_minus5"),
    (Level4::Minus, Level5::E, "minus4_e5"),
    (Level4::Minus, Level5::Minus, "minus4_minus5"),
];

fn run_blockade(p: &BlockadePlan) -> Result<Outcome> {
    let control = ControlQubit::new(p.alpha, p.beta)?;
    let ideal = blockade_gate(&control, BlockadeMode::Ideal)?;
    let state_rows: Vec<Vec<String>> = PAIR_STATES
        .iter()
        .map(|&(l4, l5, name)| {
            let a = ideal.state.amp(l4, l5);
            let t = ideal.target.amp(l4, l5);
            vec![name.to_string(), g(a.re), g(a.im), g(t.re), g(t.im)]
        })
        .collect();
    let state_table = table(&["state", "re_amp", "im_amp", "re_target", "im_target"], &state_rows);
    let routing = full_routing_map(
        &control,
        &BranchTransfer::new(p.via_five[0], p.via_five[1])?,
        &BranchTransfer::new(p.via_four[0], p.via_four[1])?,
    )?;
    let mut summary = vec![format!("ideal gate fidelity {:.12}, routing fidelity {:.12}", ideal.fidelity, routing.fidelity)];
    let mut tables = Vec::new();
    let mut scan = Vec::new();
    if let Some(v) = p.v_2pi_mhz {
        let v = from_2pi_mhz(v);
        let mut rows = Vec::new();
        for r in &p.omega_over_v {
            let out = blockade_gate(&control, BlockadeMode::FiniteBlockade { v, omega: r * v })?;
            rows.push(vec![g(*r), g(out.leakage), g(out.final_double), g(out.fidelity)]);
            summary.push(format!("Ω/V = {r}: leakage {:.3e}, fidelity {:.9}", out.leakage, out.fidelity));
            scan.push(json!({
                "omega_over_V": r,
                "leakage": out.leakage,
                "final_double": out.final_double,
                "fidelity": out.fidelity,
                "overlap": out.overlap,
            }));
        }
        tables.push((String::new(), table(&["omega_over_V", "leakage", "final_double", "fidelity"], &rows)));
        tables.push(("ideal_state".into(), state_table));
    } else {
        tables.push((String::new(), state_table));
    }
    Ok(Outcome {
        method: json!("closed_form"),
        results: json!({
            "ideal": {
                "fidelity": ideal.fidelity,
                "overlap": ideal.overlap,
                "state": ideal.state.amplitudes,
                "target": ideal.target.amplitudes,
                "sequence": ideal.sequence,
            },
            "finite_scan": scan,
            "routing": routing,
        }),
        tables,
        summary,
    })
}

fn run_spectrum(p: &SpectrumPlan) -> Result<Outcome> {
    let j = from_2pi_mhz(p.j_2pi_mhz);
    let mut cols = Vec::new();
    let mut deviation = Vec::new();
    for model in [ChainModel::NearestNeighbor, ChainModel::DipolarR3] {
        let formula = chain_spectrum(p.n, j, model)?;
        let diag = chain_hamiltonian(p.n, j, 0.0, model)?.spectrum_at(0.0);
        let dev = formula.iter().zip(&diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        deviation.push(to_2pi_mhz(dev));
        cols.push(formula);
        cols.push(diag);
    }
    let rows: Vec<Vec<String>> = (0..p.n)
        .map(|k| {
            let mut r = vec![(k + 1).to_string()];
            r.extend(cols.iter().map(|c| g(to_2pi_mhz(c[k]))));
            r
        })
        .collect();
    let header = [
        "index",
        "formula_nearest_neighbor_2piMHz",
        "diag_nearest_neighbor_2piMHz",
        "formula_dipolar_r3_2piMHz",
        "diag_dipolar_r3_2piMHz",
    ];
    Ok(Outcome {
        method: json!("closed_form_and_diagonalization"),
        summary: vec![format!(
            "max |formula − diagonalisation|: nearest-neighbour {:.3e}, r^-3 {:.3e} (2π×MHz)",
            deviation[0], deviation[1]
        )],
        results: json!({
            "max_deviation_nearest_neighbor_2piMHz": deviation[0],
            "max_deviation_dipolar_r3_2piMHz": deviation[1],
        }),
        tables: vec![(String::new(), table(&header, &rows))],
    })
}

fn run_optimize(p: &OptimizePlan, seed: u64) -> Result<Outcome> {
    let atoms = p.atoms.build()?;
    let mut initial = [0.0; 3];
    let mut solved = Value::Null;
    if p.initial.iter().any(Option::is_none) {
        let guess = FluxGuess {
            b: 9.0,
            c: 10.5,
            delta: 2.0 * PI * 10.0,
        };
        let sol = solve_flux_conditions(p.a_um, &atoms, 4, guess, &SolverOptions::default())?;
        let field = sol
            .field_gauss
            .filter(|_| sol.field_reachable)
            .ok_or_else(|| infeasible("the flux-condition solution needs a negative or undefined field"))?;
        let from_solution = [sol.geometry.b, sol.geometry.c, field];
        solved = json!({ "b_um": from_solution[0], "c_um": from_solution[1], "B_gauss": from_solution[2] });
        for k in 0..3 {
            initial[k] = p.initial[k].unwrap_or(from_solution[k]);
        }
    } else {
        initial = p.initial.map(|x| x.expect("checked"));
    }
    let bounds = Bounds {
        b: p.bounds_b_um,
        c: p.bounds_c_um,
        field: p.bounds_b_gauss,
    };
    let objective = match p.objective {
        ObjectivePlan::Circulation => Objective::Circulation,
        ObjectivePlan::TransferFidelity { t_m_us, total_us, peak_2pi_mhz } => Objective::TransferFidelity {
            pulses: RouterPulses {
                t_m: t_m_us,
                total: total_us,
                peak: from_2pi_mhz(peak_2pi_mhz),
            },
        },
    };
    let opts = NelderMeadOptions {
        max_evaluations: p.max_evaluations,
        tol: p.tol,
        ..Default::default()
    };
    let mut starts = vec![initial];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ranges = [bounds.b, bounds.c, bounds.field];
    for _ in 0..p.restarts {
        let mut x = initial;
        for k in 0..3 {
            let f: f64 = rng.random_range(-0.1..=0.1);
            x[k] = (x[k] * (1.0 + f)).clamp(ranges[k].0, ranges[k].1);
        }
        starts.push(x);
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut best: Option<(usize, chiral_router::fullmodel::OptimizedGeometry)> = None;
    for (s, x0) in starts.iter().enumerate() {
        let r = optimize_geometry(&atoms, p.a_um, *x0, &objective, &bounds, &opts)?;
        for (k, e) in r.log.iter().enumerate() {
            rows.push(vec![
                s.to_string(),
                (k + 1).to_string(),
                g(e.x[0]),
                g(e.x[1]),
                g(e.x[2]),
                if e.value.is_finite() { g(e.value) } else { "nan".into() },
            ]);
        }
        runs.push(json!({
            "start": x0,
            "b_um": r.b,
            "c_um": r.c,
            "B_gauss": r.field_gauss,
            "score": r.score,
            "initial_score": r.initial_score,
            "evaluations": r.evaluations,
            "converged": r.converged,
        }));
        if best.as_ref().is_none_or(|(_, b)| r.score > b.score) {
            best = Some((s, r));
        }
    }
    let (best_start, b) = best.expect("at least one start");
    Ok(Outcome {
        method: json!("nelder_mead"),
        summary: vec![format!(
            "best score {:.6} (from {:.6}) at b = {:.4} um, c = {:.4} um, B = {:.3} G",
            b.score, b.initial_score, b.b, b.c, b.field_gauss
        )],
        results: json!({
            "flux_solution": solved,
            "starts": runs,
            "best": {
                "start": best_start,
                "b_um": b.b,
                "c_um": b.c,
                "B_gauss": b.field_gauss,
                "score": b.score,
                "initial_score": b.initial_score,
            },
        }),
        tables: vec![(
            String::new(),
            table(&["start", "evaluation", "b_um", "c_um", "B_gauss", "score"], &rows),
        )],
    })
}
