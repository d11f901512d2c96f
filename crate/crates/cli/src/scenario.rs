//! Resolution of a checked config into a typed plan.
//!
//! Resolution applies every default and range check, so `validate` catches
//! the same errors as `run` short of the simulation itself.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_6};

use chiral_router::atomic::{RouterAtoms, SpeciesProfile, SublevelAssignment};
use chiral_router::network::ChainModel;
use chiral_router::triangle::{AuxAtom, RouterGeometry};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Config, ConfigError};

type R<T> = Result<T, ConfigError>;

#[derive(Clone, Debug, Serialize)]
pub struct AtomsPlan {
    pub profile: String,
    pub main_species: String,
    pub main_n: u32,
    pub aux_species: String,
    pub aux_n: u32,
    pub assignment: String,
}

impl AtomsPlan {
    fn resolve(cfg: &Config) -> R<Self> {
        let profile = cfg.str("species.profile")?.unwrap_or_else(|| "literature".into());
        if SpeciesProfile::parse(&profile).is_none() {
            return Err(ConfigError::invalid(
                "species.profile",
                format!("expected \"literature\" or \"benchmark\", got \"{profile}\""),
            ));
        }
        let assignment = cfg.str("atoms.assignment")?.unwrap_or_else(|| "standard".into());
        if !matches!(assignment.as_str(), "standard" | "stretched") {
            return Err(ConfigError::invalid(
                "atoms.assignment",
                format!("expected \"standard\" or \"stretched\", got \"{assignment}\""),
            ));
        }
        let n = |key: &str, default: u64| -> R<u32> {
            let v = cfg.uint_or(key, default)?;
            if !(2..=500).contains(&v) {
                return Err(ConfigError::invalid(key, format!("principal quantum number {v} out of range 2..=500")));
            }
            Ok(v as u32)
        };
        let plan = AtomsPlan {
            profile,
            main_species: cfg.str("atoms.main.species")?.unwrap_or_else(|| "Rb".into()),
            main_n: n("atoms.main.n", 70)?,
            aux_species: cfg.str("atoms.aux.species")?.unwrap_or_else(|| "Cs".into()),
            aux_n: n("atoms.aux.n", 71)?,
            assignment,
        };
        plan.build().map_err(|e| ConfigError::invalid("atoms", e.to_string()))?;
        Ok(plan)
    }

    pub fn build(&self) -> chiral_router::Result<RouterAtoms> {
        let table = SpeciesProfile::parse(&self.profile).expect("checked on resolve").table();
        let assignment = match self.assignment.as_str() {
            "stretched" => SublevelAssignment::Stretched,
            _ => SublevelAssignment::Standard,
        };
        RouterAtoms::new(&table, &self.main_species, self.main_n, &self.aux_species, self.aux_n, assignment)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrianglePlan {
    pub magnitudes_2pi_mhz: [f64; 3],
    pub phases_rad: [f64; 3],
    pub start_site: usize,
    pub t_end_us: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainPlan {
    pub n: usize,
    pub j_2pi_mhz: f64,
    pub model: ChainModel,
    pub pulses_us: Option<(f64, f64)>,
    pub scan_grid: usize,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationMode {
    Off,
    On,
    Compare,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouterPlan {
    /// Subchain lengths (left, right); several entries form a sweep.
    pub lengths: Vec<(usize, usize)>,
    pub sweep: bool,
    pub j_2pi_mhz: f64,
    pub triangle_magnitudes_2pi_mhz: [f64; 3],
    pub triangle_phases_rad: [f64; 3],
    pub onsite_2pi_mhz: [f64; 3],
    pub compensation: CompensationMode,
    pub pulses_us: Option<(f64, f64)>,
    pub scan_grid: usize,
    pub samples: usize,
    pub qubit: Option<[Complex64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveMode {
    Solve { b_um: f64, c_um: f64, delta_2pi_mhz: f64 },
    Evaluate { b_um: f64, c_um: f64, field: FieldSpec },
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    Gauss(f64),
    Delta2piMhz(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectivePlan {
    pub atoms: AtomsPlan,
    pub a_um: f64,
    pub mode: EffectiveMode,
    pub aux: AuxAtom,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullModelPlan {
    pub atoms: AtomsPlan,
    pub geometry_um: RouterGeometry,
    pub b_gauss: f64,
    pub aux: AuxAtom,
    pub periods: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxPlan {
    Single(AuxAtom),
    Superposition { four: Complex64, five: Complex64 },
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayPlan {
    None,
    Temperature { kelvin: f64 },
    Rate { gamma_tot_per_us: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct FullRouterPlan {
    pub atoms: AtomsPlan,
    pub geometry_um: RouterGeometry,
    pub b_gauss: f64,
    pub aux: AuxPlan,
    pub t_m_us: f64,
    pub total_us: f64,
    pub peak_2pi_mhz: f64,
    pub decay: DecayPlan,
    pub compensate: bool,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockadePlan {
    pub alpha: Complex64,
    pub beta: Complex64,
    /// `None` for the ideal gate.
    pub v_2pi_mhz: Option<f64>,
    pub omega_over_v: Vec<f64>,
    pub via_four: [Complex64; 2],
    pub via_five: [Complex64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumPlan {
    pub n: usize,
    pub j_2pi_mhz: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectivePlan {
    Circulation,
    TransferFidelity { t_m_us: f64, total_us: f64, peak_2pi_mhz: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizePlan {
    pub atoms: AtomsPlan,
    pub a_um: f64,
    /// `None` entries come from the flux-condition solution at run time.
    pub initial: [Option<f64>; 3],
    pub bounds_b_um: (f64, f64),
    pub bounds_c_um: (f64, f64),
    pub bounds_b_gauss: (f64, f64),
    pub objective: ObjectivePlan,
    pub max_evaluations: usize,
    pub tol: f64,
    pub restarts: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plan {
    Triangle(TrianglePlan),
    ChainTransfer(ChainPlan),
    RouterAbstract(RouterPlan),
    EffectiveSolve(EffectivePlan),
    FullModel(FullModelPlan),
    FullRouter(FullRouterPlan),
    Blockade(BlockadePlan),
    Spectrum(SpectrumPlan),
    Optimize(OptimizePlan),
}

fn positive(key: &str, v: f64) -> R<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("must be positive, got {v}")))
    }
}

fn req_positive(cfg: &Config, key: &str) -> R<f64> {
    positive(key, cfg.req_f64(key)?)
}

fn samples(cfg: &Config, default: u64) -> R<usize> {
    let n = cfg.uint_or("time.samples", default)?;
    if n < 2 {
        return Err(ConfigError::invalid("time.samples", "need at least 2 samples"));
    }
    Ok(n as usize)
}

fn complex(cfg: &Config, key: &str, default: Complex64) -> R<Complex64> {
    Ok(cfg
        .f64_array(key, Some(2))?
        .map(|v| Complex64::new(v[0], v[1]))
        .unwrap_or(default))
}

fn triple(cfg: &Config, key: &str) -> R<Option<[f64; 3]>> {
    Ok(cfg.f64_array(key, Some(3))?.map(|v| [v[0], v[1], v[2]]))
}

fn interval(cfg: &Config, key: &str, default: (f64, f64)) -> R<(f64, f64)> {
    match cfg.f64_array(key, Some(2))? {
        None => Ok(default),
        Some(v) if v[0] < v[1] => Ok((v[0], v[1])),
        Some(v) => Err(ConfigError::invalid(key, format!("lower bound {} must be below upper bound {}", v[0], v[1]))),
    }
}

fn pulses(cfg: &Config) -> R<Option<(f64, f64)>> {
    match (cfg.f64("pulses.t_m_us")?, cfg.f64("pulses.T_us")?) {
        (None, None) => Ok(None),
        (Some(_), None) => Err(ConfigError::Missing("pulses.T_us".into())),
        (None, Some(_)) => Err(ConfigError::Missing("pulses.t_m_us".into())),
        (Some(t_m), Some(total)) => {
            positive("pulses.T_us", total)?;
            if !(t_m > 0.0 && t_m <= total) {
                return Err(ConfigError::invalid("pulses.t_m_us", format!("must lie in (0, T], got {t_m}")));
            }
            Ok(Some((t_m, total)))
        }
    }
}

fn router_geometry(cfg: &Config) -> R<RouterGeometry> {
    let a = req_positive(cfg, "geometry.a_um")?;
    let b = req_positive(cfg, "geometry.b_um")?;
    let c = req_positive(cfg, "geometry.c_um")?;
    RouterGeometry::new(a, b, c).map_err(|e| ConfigError::invalid("geometry", e.to_string()))
}

fn aux_single(cfg: &Config) -> R<AuxAtom> {
    match cfg.raw("aux.active") {
        None => Ok(AuxAtom::Four),
        Some(toml::Value::Integer(4)) => Ok(AuxAtom::Four),
        Some(toml::Value::Integer(5)) => Ok(AuxAtom::Five),
        Some(v) => Err(ConfigError::invalid("aux.active", format!("expected 4 or 5, got {v}"))),
    }
}

fn field(cfg: &Config) -> R<f64> {
    let b = cfg.req_f64("field.B_gauss")?;
    if !b.is_finite() {
        return Err(ConfigError::invalid("field.B_gauss", "must be finite"));
    }
    Ok(b)
}

pub fn resolve(cfg: &Config) -> R<Plan> {
    match cfg.kind.name {
        "triangle" => resolve_triangle(cfg).map(Plan::Triangle),
        "chain_transfer" => resolve_chain(cfg).map(Plan::ChainTransfer),
        "router_abstract" => resolve_router(cfg).map(Plan::RouterAbstract),
        "effective_solve" => resolve_effective(cfg).map(Plan::EffectiveSolve),
        "full_model" => resolve_full_model(cfg).map(Plan::FullModel),
        "full_router" => resolve_full_router(cfg).map(Plan::FullRouter),
        "blockade" => resolve_blockade(cfg).map(Plan::Blockade),
        "spectrum" => resolve_spectrum(cfg).map(Plan::Spectrum),
        "optimize" => resolve_optimize(cfg).map(Plan::Optimize),
        other => unreachable!("kind `{other}` passed schema check without a resolver"),
    }
}

fn resolve_triangle(cfg: &Config) -> R<TrianglePlan> {
    let j = req_positive(cfg, "triangle.J_2piMHz")?;
    let magnitudes = triple(cfg, "triangle.magnitudes_2piMHz")?.unwrap_or([j; 3]);
    if magnitudes.iter().any(|m| !(*m >= 0.0)) || magnitudes.iter().all(|m| *m == 0.0) {
        return Err(ConfigError::invalid("triangle.magnitudes_2piMHz", "must be non-negative and not all zero"));
    }
    let start = cfg.uint_or("triangle.start_site", 1)?;
    if !(1..=3).contains(&start) {
        return Err(ConfigError::invalid("triangle.start_site", format!("expected 1, 2 or 3, got {start}")));
    }
    let t_end = match cfg.f64("time.t_end_us")? {
        Some(t) => Some(positive("time.t_end_us", t)?),
        None => None,
    };
    Ok(TrianglePlan {
        magnitudes_2pi_mhz: magnitudes,
        phases_rad: triple(cfg, "triangle.phases_rad")?.unwrap_or([-FRAC_PI_6; 3]),
        start_site: start as usize,
        t_end_us: t_end,
        samples: samples(cfg, 301)?,
    })
}

fn chain_model(cfg: &Config) -> R<ChainModel> {
    match cfg.str("chain.model")?.as_deref() {
        None | Some("nearest_neighbor") => Ok(ChainModel::NearestNeighbor),
        Some("dipolar_r3") => Ok(ChainModel::DipolarR3),
        Some(m) => Err(ConfigError::invalid(
            "chain.model",
            format!("expected \"nearest_neighbor\" or \"dipolar_r3\", got \"{m}\""),
        )),
    }
}

fn scan_grid(cfg: &Config) -> R<usize> {
    let g = cfg.uint_or("scan.grid", 40)?;
    if g < 2 {
        return Err(ConfigError::invalid("scan.grid", "need at least 2 points per axis"));
    }
    Ok(g as usize)
}

fn resolve_chain(cfg: &Config) -> R<ChainPlan> {
    let n = cfg.req_uint("chain.N")?;
    if n == 0 {
        return Err(ConfigError::invalid("chain.N", "chain needs at least one site"));
    }
    Ok(ChainPlan {
        n: n as usize,
        j_2pi_mhz: req_positive(cfg, "chain.J_2piMHz")?,
        model: chain_model(cfg)?,
        pulses_us: pulses(cfg)?,
        scan_grid: scan_grid(cfg)?,
        samples: samples(cfg, 201)?,
    })
}

fn odd_length(key: &str, n: u64) -> R<usize> {
    if n.is_multiple_of(2) {
        return Err(ConfigError::invalid(key, format!("subchain lengths must be odd, got {n}")));
    }
    Ok(n as usize)
}

fn resolve_router(cfg: &Config) -> R<RouterPlan> {
    let (lengths, sweep) = match cfg.f64_array("sweep.N", None)? {
        Some(list) => {
            if cfg.has("router.N_left") || cfg.has("router.N_right") {
                return Err(ConfigError::invalid("sweep.N", "give either sweep.N or router.N_left/N_right"));
            }
            if list.is_empty() {
                return Err(ConfigError::invalid("sweep.N", "needs at least one length"));
            }
            let mut v = Vec::new();
            for x in list {
                if x.fract() != 0.0 || x < 1.0 {
                    return Err(ConfigError::invalid("sweep.N", format!("lengths must be positive integers, got {x}")));
                }
                let n = odd_length("sweep.N", x as u64)?;
                v.push((n, n));
            }
            (v, true)
        }
        None => {
            let l = odd_length("router.N_left", cfg.uint("router.N_left")?.ok_or(ConfigError::Missing("router.N_left".into()))?)?;
            let r = odd_length("router.N_right", cfg.uint("router.N_right")?.ok_or(ConfigError::Missing("router.N_right".into()))?)?;
            (vec![(l, r)], false)
        }
    };
    let j = req_positive(cfg, "router.J_2piMHz")?;
    let jt = match cfg.f64("triangle.J_2piMHz")? {
        Some(x) => positive("triangle.J_2piMHz", x)?,
        None => j,
    };
    let gamma = cfg.f64_or("triangle.gamma_tot_rad", -FRAC_PI_2)?;
    let compensation = match cfg.str("compensation.mode")?.as_deref() {
        None | Some("off") => CompensationMode::Off,
        Some("on") => CompensationMode::On,
        Some("compare") => CompensationMode::Compare,
        Some(m) => {
            return Err(ConfigError::invalid(
                "compensation.mode",
                format!("expected \"off\", \"on\" or \"compare\", got \"{m}\""),
            ))
        }
    };
    let qubit = match (cfg.f64_array("qubit.c0", Some(2))?, cfg.f64_array("qubit.c1", Some(2))?) {
        (None, None) => None,
        (Some(a), Some(b)) => {
            if sweep {
                return Err(ConfigError::invalid("qubit.c0", "qubit transfer needs a single router length"));
            }
            let (c0, c1) = (Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1]));
            let n = c0.norm_sqr() + c1.norm_sqr();
            if (n - 1.0).abs() > 1e-9 {
                return Err(ConfigError::invalid("qubit.c1", format!("|c0|² + |c1|² must be 1, got {n}")));
            }
            Some([c0, c1])
        }
        (Some(_), None) => return Err(ConfigError::Missing("qubit.c1".into())),
        (None, Some(_)) => return Err(ConfigError::Missing("qubit.c0".into())),
    };
    Ok(RouterPlan {
        lengths,
        sweep,
        j_2pi_mhz: j,
        triangle_magnitudes_2pi_mhz: triple(cfg, "triangle.magnitudes_2piMHz")?.unwrap_or([jt; 3]),
        triangle_phases_rad: triple(cfg, "triangle.phases_rad")?.unwrap_or([gamma / 3.0; 3]),
        onsite_2pi_mhz: triple(cfg, "triangle.onsite_2piMHz")?.unwrap_or([0.0; 3]),
        compensation,
        pulses_us: pulses(cfg)?,
        scan_grid: scan_grid(cfg)?,
        samples: samples(cfg, 201)?,
        qubit,
    })
}

fn resolve_effective(cfg: &Config) -> R<EffectivePlan> {
    let atoms = AtomsPlan::resolve(cfg)?;
    let a = req_positive(cfg, "geometry.a_um")?;
    let mode = match cfg.str("mode")?.as_deref() {
        None | Some("solve") => {
            for k in ["geometry.b_um", "geometry.c_um", "field.B_gauss", "field.delta_2piMHz"] {
                if cfg.has(k) {
                    return Err(ConfigError::invalid(k, "only used with mode = \"evaluate\""));
                }
            }
            EffectiveMode::Solve {
                b_um: cfg.f64_or("guess.b_um", 9.0)?,
                c_um: cfg.f64_or("guess.c_um", 10.5)?,
                delta_2pi_mhz: cfg.f64_or("guess.delta_2piMHz", 10.0)?,
            }
        }
        Some("evaluate") => {
            let b = req_positive(cfg, "geometry.b_um")?;
            let c = req_positive(cfg, "geometry.c_um")?;
            RouterGeometry::new(a, b, c).map_err(|e| ConfigError::invalid("geometry", e.to_string()))?;
            let field = match (cfg.f64("field.B_gauss")?, cfg.f64("field.delta_2piMHz")?) {
                (Some(bg), None) => FieldSpec::Gauss(bg),
                (None, Some(d)) => FieldSpec::Delta2piMhz(d),
                (None, None) => return Err(ConfigError::Missing("field.B_gauss".into())),
                (Some(_), Some(_)) => {
                    return Err(ConfigError::invalid("field.delta_2piMHz", "give either field.B_gauss or field.delta_2piMHz"))
                }
            };
            EffectiveMode::Evaluate { b_um: b, c_um: c, field }
        }
        Some(m) => return Err(ConfigError::invalid("mode", format!("expected \"solve\" or \"evaluate\", got \"{m}\""))),
    };
    if let EffectiveMode::Solve { b_um, c_um, delta_2pi_mhz } = mode {
        RouterGeometry::new(a, b_um, c_um).map_err(|e| ConfigError::invalid("guess", e.to_string()))?;
        if delta_2pi_mhz == 0.0 || !delta_2pi_mhz.is_finite() {
            return Err(ConfigError::invalid("guess.delta_2piMHz", "must be finite and non-zero"));
        }
    }
    Ok(EffectivePlan {
        atoms,
        a_um: a,
        mode,
        aux: aux_single(cfg)?,
        samples: samples(cfg, 301)?,
    })
}

fn resolve_full_model(cfg: &Config) -> R<FullModelPlan> {
    let periods = cfg.f64_or("time.periods", 1.5)?;
    Ok(FullModelPlan {
        atoms: AtomsPlan::resolve(cfg)?,
        geometry_um: router_geometry(cfg)?,
        b_gauss: field(cfg)?,
        aux: aux_single(cfg)?,
        periods: positive("time.periods", periods)?,
        samples: samples(cfg, 601)?,
    })
}

fn resolve_full_router(cfg: &Config) -> R<FullRouterPlan> {
    let aux = match cfg.raw("aux.active") {
        Some(toml::Value::String(s)) if s == "superposition" => AuxPlan::Superposition {
            four: complex(cfg, "aux.four_amplitude", Complex64::new(FRAC_1_SQRT_2, 0.0))?,
            five: complex(cfg, "aux.five_amplitude", Complex64::new(FRAC_1_SQRT_2, 0.0))?,
        },
        Some(toml::Value::String(s)) => {
            return Err(ConfigError::invalid("aux.active", format!("expected 4, 5 or \"superposition\", got \"{s}\"")))
        }
        _ => {
            for k in ["aux.four_amplitude", "aux.five_amplitude"] {
                if cfg.has(k) {
                    return Err(ConfigError::invalid(k, "only used with aux.active = \"superposition\""));
                }
            }
            AuxPlan::Single(aux_single(cfg)?)
        }
    };
    if let AuxPlan::Superposition { four, five } = aux {
        if four.norm_sqr() + five.norm_sqr() == 0.0 {
            return Err(ConfigError::invalid("aux.four_amplitude", "branch amplitudes must not both vanish"));
        }
    }
    let decay = match (cfg.f64("decay.temperature_K")?, cfg.f64("decay.gamma_tot_per_us")?) {
        (None, None) => DecayPlan::None,
        (Some(t), None) => {
            if ![0.0, 77.0, 300.0].contains(&t) {
                return Err(ConfigError::invalid("decay.temperature_K", format!("presets exist for 0, 77 and 300 K, got {t}")));
            }
            DecayPlan::Temperature { kelvin: t }
        }
        (None, Some(g)) => {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(ConfigError::invalid("decay.gamma_tot_per_us", format!("must be non-negative, got {g}")));
            }
            DecayPlan::Rate { gamma_tot_per_us: g }
        }
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "decay.gamma_tot_per_us",
                "give either decay.temperature_K or decay.gamma_tot_per_us",
            ))
        }
    };
    let (t_m, total) = pulses(cfg)?.expect("both pulse keys are required for full_router");
    Ok(FullRouterPlan {
        atoms: AtomsPlan::resolve(cfg)?,
        geometry_um: router_geometry(cfg)?,
        b_gauss: field(cfg)?,
        aux,
        t_m_us: t_m,
        total_us: total,
        peak_2pi_mhz: req_positive(cfg, "pulses.peak_2piMHz")?,
        decay,
        compensate: cfg.bool_or("compensation.enabled", false)?,
        samples: samples(cfg, 401)?,
    })
}

fn resolve_blockade(cfg: &Config) -> R<BlockadePlan> {
    let alpha = complex(cfg, "control.alpha", Complex64::new(FRAC_1_SQRT_2, 0.0))?;
    let beta = complex(cfg, "control.beta", Complex64::new(FRAC_1_SQRT_2, 0.0))?;
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-12 {
        return Err(ConfigError::invalid("control.beta", format!("|α|² + |β|² must be 1, got {n}")));
    }
    let finite = match cfg.str("blockade.mode")?.as_deref() {
        None | Some("ideal") => false,
        Some("finite") => true,
        Some(m) => return Err(ConfigError::invalid("blockade.mode", format!("expected \"ideal\" or \"finite\", got \"{m}\""))),
    };
    let (v, ratios) = if finite {
        let v = req_positive(cfg, "blockade.V_2piMHz")?;
        let ratios = cfg.f64_array("blockade.omega_over_V", None)?.unwrap_or(vec![0.2, 0.1, 0.05]);
        if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(ConfigError::invalid("blockade.omega_over_V", "needs positive ratios"));
        }
        (Some(v), ratios)
    } else {
        for k in ["blockade.V_2piMHz", "blockade.omega_over_V"] {
            if cfg.has(k) {
                return Err(ConfigError::invalid(k, "only used with blockade.mode = \"finite\""));
            }
        }
        (None, Vec::new())
    };
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let branch = |l: &str, r: &str, dl: Complex64, dr: Complex64| -> R<[Complex64; 2]> {
        let b = [complex(cfg, l, dl)?, complex(cfg, r, dr)?];
        if b[0].norm_sqr() + b[1].norm_sqr() > 1.0 + 1e-9 {
            return Err(ConfigError::invalid(r, "receiver populations of a branch exceed one"));
        }
        Ok(b)
    };
    Ok(BlockadePlan {
        alpha,
        beta,
        v_2pi_mhz: v,
        omega_over_v: ratios,
        via_four: branch("routing.left_four", "routing.right_four", one, zero)?,
        via_five: branch("routing.left_five", "routing.right_five", zero, one)?,
    })
}

fn resolve_spectrum(cfg: &Config) -> R<SpectrumPlan> {
    let n = cfg.req_uint("chain.N")?;
    if n == 0 {
        return Err(ConfigError::invalid("chain.N", "chain needs at least one site"));
    }
    Ok(SpectrumPlan {
        n: n as usize,
        j_2pi_mhz: req_positive(cfg, "chain.J_2piMHz")?,
    })
}

fn resolve_optimize(cfg: &Config) -> R<OptimizePlan> {
    let atoms = AtomsPlan::resolve(cfg)?;
    let a = req_positive(cfg, "geometry.a_um")?;
    let lo = a / 2.0 + 0.1;
    let objective = match cfg.str("objective")?.as_deref() {
        None | Some("circulation") => {
            for k in ["pulses.t_m_us", "pulses.T_us", "pulses.peak_2piMHz"] {
                if cfg.has(k) {
                    return Err(ConfigError::invalid(k, "only used with objective = \"transfer_fidelity\""));
                }
            }
            ObjectivePlan::Circulation
        }
        Some("transfer_fidelity") => {
            let (t_m, total) = pulses(cfg)?.ok_or(ConfigError::Missing("pulses.t_m_us".into()))?;
            ObjectivePlan::TransferFidelity {
                t_m_us: t_m,
                total_us: total,
                peak_2pi_mhz: req_positive(cfg, "pulses.peak_2piMHz")?,
            }
        }
        Some(o) => {
            return Err(ConfigError::invalid(
                "objective",
                format!("expected \"circulation\" or \"transfer_fidelity\", got \"{o}\""),
            ))
        }
    };
    let plan = OptimizePlan {
        atoms,
        a_um: a,
        initial: [cfg.f64("initial.b_um")?, cfg.f64("initial.c_um")?, cfg.f64("initial.B_gauss")?],
        bounds_b_um: interval(cfg, "bounds.b_um", (lo, 25.0))?,
        bounds_c_um: interval(cfg, "bounds.c_um", (lo, 25.0))?,
        bounds_b_gauss: interval(cfg, "bounds.B_gauss", (0.0, 80.0))?,
        objective,
        max_evaluations: cfg.uint_or("optimizer.max_evaluations", 500)? as usize,
        tol: positive("optimizer.tol", cfg.f64_or("optimizer.tol", 1e-4)?)?,
        restarts: cfg.uint_or("optimizer.restarts", 0)? as usize,
    };
    if plan.max_evaluations < 4 {
        return Err(ConfigError::invalid("optimizer.max_evaluations", "need at least 4 evaluations"));
    }
    let keys = ["initial.b_um", "initial.c_um", "initial.B_gauss"];
    let bounds = [plan.bounds_b_um, plan.bounds_c_um, plan.bounds_b_gauss];
    for ((x, key), (l, h)) in plan.initial.iter().zip(keys).zip(bounds) {
        if let Some(x) = x {
            if *x < l || *x > h {
                return Err(ConfigError::invalid(key, format!("{x} lies outside the bounds [{l}, {h}]")));
            }
        }
    }
    Ok(plan)
}
