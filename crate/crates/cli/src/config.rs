//! Scenario configuration: schema table, key validation and typed lookup.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("malformed TOML: {0}")]
    Parse(String),
    #[error("unknown key `{key}` for kind `{kind}`")]
    UnknownKey { key: String, kind: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown kind `{kind}`; valid kinds: {valid}")]
    UnknownKind { kind: String, valid: String },
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub required: bool,
    pub doc: &'static str,
}

pub struct KindSpec {
    pub name: &'static str,
    pub summary: &'static str,
    pub keys: &'static [KeySpec],
}

const fn req(key: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { key, required: true, doc }
}

const fn opt(key: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { key, required: false, doc }
}

/// Keys accepted by every kind.
pub const COMMON: &[KeySpec] = &[
    req("kind", "scenario kind"),
    opt("output.csv_path", "CSV file name relative to the output directory (default: <config stem>.csv)"),
];

/// Keys shared by the Rydberg-atom kinds.
pub const ATOMS: &[KeySpec] = &[
    opt("species.profile", "species table: \"literature\" (default) or \"benchmark\""),
    opt("atoms.main.species", "main-atom species (default \"Rb\")"),
    opt("atoms.main.n", "main-atom principal quantum number (default 70)"),
    opt("atoms.aux.species", "auxiliary-atom species (default \"Cs\")"),
    opt("atoms.aux.n", "auxiliary-atom principal quantum number (default 71)"),
    opt("atoms.assignment", "sublevel roles: \"standard\" (default) or \"stretched\""),
];

pub const KINDS: &[KindSpec] = &[
    KindSpec {
        name: "triangle",
        summary: "flux-triangle dynamics from one site",
        keys: &[
            req("triangle.J_2piMHz", "coupling magnitude |J|"),
            opt("triangle.magnitudes_2piMHz", "three magnitudes [|J1|, |J2|, |J3|] overriding triangle.J_2piMHz"),
            opt("triangle.phases_rad", "Peierls phases [γ1, γ2, γ3] (default −π/6 each)"),
            opt("triangle.start_site", "initially excited site 1, 2 or 3 (default 1)"),
            opt("time.t_end_us", "final time (default 1.5 estimated periods)"),
            opt("time.samples", "number of output times (default 301)"),
        ],
    },
    KindSpec {
        name: "chain_transfer",
        summary: "sender-chain-receiver transfer with ramped couplings",
        keys: &[
            req("chain.N", "chain length"),
            req("chain.J_2piMHz", "chain coupling J"),
            opt("chain.model", "\"nearest_neighbor\" (default) or \"dipolar_r3\""),
            opt("pulses.t_m_us", "ramp time t_m; with pulses.T_us skips the protocol scan"),
            opt("pulses.T_us", "total time T"),
            opt("scan.grid", "coarse scan points per axis (default 40)"),
            opt("time.samples", "number of output times (default 201)"),
        ],
    },
    KindSpec {
        name: "router_abstract",
        summary: "flux-triangle router with subchains, sender and two receivers",
        keys: &[
            req("router.J_2piMHz", "chain coupling J"),
            opt("router.N_left", "odd left subchain length, counting triangle site 2 (required without sweep.N)"),
            opt("router.N_right", "odd right subchain length, counting triangle site 3 (required without sweep.N)"),
            opt("sweep.N", "odd lengths used for both subchains; writes one table row per length"),
            opt("triangle.J_2piMHz", "triangle coupling magnitude (default router.J_2piMHz)"),
            opt("triangle.gamma_tot_rad", "total phase, split evenly over the bonds (default −π/2)"),
            opt("triangle.magnitudes_2piMHz", "[|J1|, |J2|, |J3|] overriding triangle.J_2piMHz"),
            opt("triangle.phases_rad", "[γ1, γ2, γ3] overriding triangle.gamma_tot_rad"),
            opt("triangle.onsite_2piMHz", "level shifts [μ1, μ2, μ3] of the triangle sites (default 0)"),
            opt("compensation.mode", "\"off\" (default), \"on\" or \"compare\" (both, same protocol)"),
            opt("pulses.t_m_us", "ramp time t_m; with pulses.T_us skips the protocol scan"),
            opt("pulses.T_us", "total time T"),
            opt("scan.grid", "coarse scan points per axis (default 40)"),
            opt("time.samples", "number of output times (default 201)"),
            opt("qubit.c0", "[re, im] of |g⟩ of a sender qubit to transfer (single length only)"),
            opt("qubit.c1", "[re, im] of |e⟩ of that qubit"),
        ],
    },
    KindSpec {
        name: "effective_solve",
        summary: "solve or evaluate the effective flux triangle of the Rydberg router",
        keys: &[
            req("geometry.a_um", "distance between atoms 2 and 3"),
            opt("mode", "\"solve\" (default) or \"evaluate\""),
            opt("guess.b_um", "solver start for b (default 9.0)"),
            opt("guess.c_um", "solver start for c (default 10.5)"),
            opt("guess.delta_2piMHz", "solver start for Δ (default 10.0)"),
            opt("geometry.b_um", "auxiliary distance b (evaluate mode)"),
            opt("geometry.c_um", "apex distance c (evaluate mode)"),
            opt("field.B_gauss", "magnetic field (evaluate mode; alternative to field.delta_2piMHz)"),
            opt("field.delta_2piMHz", "detuning Δ (evaluate mode)"),
            opt("aux.active", "auxiliary atom 4 (default) or 5"),
            opt("time.samples", "number of output times of the triangle dynamics (default 301)"),
        ],
    },
    KindSpec {
        name: "full_model",
        summary: "128-state dynamics of the main triangle and one auxiliary atom",
        keys: &[
            req("geometry.a_um", "distance between atoms 2 and 3"),
            req("geometry.b_um", "auxiliary distance b"),
            req("geometry.c_um", "apex distance c"),
            req("field.B_gauss", "magnetic field"),
            opt("aux.active", "auxiliary atom 4 (default) or 5"),
            opt("time.periods", "window in estimated periods (default 1.5)"),
            opt("time.samples", "number of output times (default 601)"),
        ],
    },
    KindSpec {
        name: "full_router",
        summary: "seven-atom router with sender and receivers in the full model",
        keys: &[
            req("geometry.a_um", "distance between atoms 2 and 3"),
            req("geometry.b_um", "auxiliary distance b"),
            req("geometry.c_um", "apex distance c"),
            req("field.B_gauss", "magnetic field"),
            req("pulses.t_m_us", "ramp time t_m"),
            req("pulses.T_us", "total time T"),
            req("pulses.peak_2piMHz", "peak sender and receiver coupling"),
            opt("aux.active", "4 (default), 5 or \"superposition\""),
            opt("aux.four_amplitude", "[re, im] weight of the atom-4 branch in a superposition (default [1/√2, 0])"),
            opt("aux.five_amplitude", "[re, im] weight of the atom-5 branch in a superposition (default [1/√2, 0])"),
            opt("decay.temperature_K", "preset total decay rate at 0, 77 or 300 K"),
            opt("decay.gamma_tot_per_us", "explicit total decay rate Γ_tot (default 0)"),
            opt("compensation.enabled", "subtract the effective level shifts μ_i (default false)"),
            opt("time.samples", "number of output times (default 401)"),
        ],
    },
    KindSpec {
        name: "blockade",
        summary: "blockade-gate preparation of the auxiliary atoms and the routing map",
        keys: &[
            opt("control.alpha", "[re, im] amplitude of |g⟩ (default [1/√2, 0])"),
            opt("control.beta", "[re, im] amplitude of |e⟩ (default [1/√2, 0])"),
            opt("blockade.mode", "\"ideal\" (default) or \"finite\""),
            opt("blockade.V_2piMHz", "blockade shift V (finite mode)"),
            opt("blockade.omega_over_V", "list of Ω/V ratios to scan (finite mode; default [0.2, 0.1, 0.05])"),
            opt("routing.left_four", "[re, im] rL amplitude of the atom-4 branch (default [1, 0])"),
            opt("routing.right_four", "[re, im] rR amplitude of the atom-4 branch (default [0, 0])"),
            opt("routing.left_five", "[re, im] rL amplitude of the atom-5 branch (default [0, 0])"),
            opt("routing.right_five", "[re, im] rR amplitude of the atom-5 branch (default [1, 0])"),
        ],
    },
    KindSpec {
        name: "spectrum",
        summary: "chain spectra from the closed forms and from diagonalisation",
        keys: &[
            req("chain.N", "chain length"),
            req("chain.J_2piMHz", "chain coupling J"),
        ],
    },
    KindSpec {
        name: "optimize",
        summary: "Nelder-Mead optimisation of (b, c, B) on the full model",
        keys: &[
            req("geometry.a_um", "distance between atoms 2 and 3"),
            opt("initial.b_um", "start b (default: flux-condition solution)"),
            opt("initial.c_um", "start c (default: flux-condition solution)"),
            opt("initial.B_gauss", "start field (default: flux-condition solution)"),
            opt("bounds.b_um", "[lo, hi] for b (default [a/2 + 0.1, 25])"),
            opt("bounds.c_um", "[lo, hi] for c (default [a/2 + 0.1, 25])"),
            opt("bounds.B_gauss", "[lo, hi] for B (default [0, 80])"),
            opt("objective", "\"circulation\" (default) or \"transfer_fidelity\""),
            opt("pulses.t_m_us", "ramp time for transfer_fidelity"),
            opt("pulses.T_us", "total time for transfer_fidelity"),
            opt("pulses.peak_2piMHz", "peak coupling for transfer_fidelity"),
            opt("optimizer.max_evaluations", "evaluation budget per start (default 500)"),
            opt("optimizer.tol", "relative simplex diameter for convergence (default 1e-4)"),
            opt("optimizer.restarts", "extra starts perturbed by ±10% using --seed (default 0)"),
        ],
    },
];

pub fn kind_names() -> Vec<&'static str> {
    KINDS.iter().map(|k| k.name).collect()
}

pub fn find_kind(name: &str) -> Result<&'static KindSpec, ConfigError> {
    KINDS.iter().find(|k| k.name == name).ok_or_else(|| ConfigError::UnknownKind {
        kind: name.into(),
        valid: kind_names().join(", "),
    })
}

/// Whether a kind takes the shared atom keys.
pub fn uses_atoms(kind: &str) -> bool {
    matches!(kind, "effective_solve" | "full_model" | "full_router" | "optimize")
}

/// Every key accepted by `kind`, in schema order.
pub fn allowed_keys(kind: &KindSpec) -> Vec<&'static KeySpec> {
    let mut v: Vec<&KeySpec> = COMMON.iter().collect();
    v.extend(kind.keys.iter());
    if uses_atoms(kind.name) {
        v.extend(ATOMS.iter());
    }
    v
}

/// A parsed, key-checked scenario file.
pub struct Config {
    pub kind: &'static KindSpec,
    table: toml::Table,
    used: RefCell<BTreeSet<String>>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            _ => out.push(key),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let kind_name = match table.get("kind") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(ConfigError::invalid("kind", "expected a string")),
            None => return Err(ConfigError::Missing("kind".into())),
        };
        let kind = find_kind(&kind_name)?;
        let allowed = allowed_keys(kind);
        let mut leaves = Vec::new();
        flatten("", &table, &mut leaves);
        for leaf in &leaves {
            if !allowed.iter().any(|k| k.key == leaf) {
                return Err(ConfigError::UnknownKey {
                    key: leaf.clone(),
                    kind: kind.name.into(),
                });
            }
        }
        for k in allowed.iter().filter(|k| k.required) {
            if !leaves.iter().any(|l| l == k.key) {
                return Err(ConfigError::Missing(k.key.into()));
            }
        }
        Ok(Config {
            kind,
            table,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn value(&self, key: &str) -> Option<&toml::Value> {
        self.used.borrow_mut().insert(key.to_string());
        let mut parts = key.split('.');
        let mut cur = self.table.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    pub fn has(&self, key: &str) -> bool {
        self.value(key).is_some()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(x)) => Ok(Some(*x as f64)),
            Some(_) => Err(ConfigError::invalid(key, "expected a number")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Integer(x)) if *x >= 0 => Ok(Some(*x as u64)),
            Some(_) => Err(ConfigError::invalid(key, "expected a non-negative integer")),
        }
    }

    pub fn uint_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.uint(key)?.unwrap_or(default))
    }

    pub fn req_uint(&self, key: &str) -> Result<u64, ConfigError> {
        self.uint(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn str(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ConfigError::invalid(key, "expected a string")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.value(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(ConfigError::invalid(key, "expected true or false")),
        }
    }

    pub fn f64_array(&self, key: &str, len: Option<usize>) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.value(key) else {
            return Ok(None);
        };
        let arr = v.as_array().ok_or_else(|| ConfigError::invalid(key, "expected an array of numbers"))?;
        let vals = arr
            .iter()
            .map(|x| match x {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(ConfigError::invalid(key, "expected an array of numbers")),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(n) = len {
            if vals.len() != n {
                return Err(ConfigError::invalid(key, format!("expected {n} numbers, got {}", vals.len())));
            }
        }
        Ok(Some(vals))
    }

    /// Raw value for keys that accept more than one type.
    pub fn raw(&self, key: &str) -> Option<toml::Value> {
        self.value(key).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let e = Config::parse("kind = \"full_model\"\n[geometry]\na_nm = 17\n").err().unwrap();
        assert!(e.to_string().contains("geometry.a_nm"), "{e}");
    }

    #[test]
    fn missing_required_key_is_named() {
        let e = Config::parse("kind = \"spectrum\"\n[chain]\nN = 3\n").err().unwrap();
        assert!(e.to_string().contains("chain.J_2piMHz"), "{e}");
    }

    #[test]
    fn unknown_kind_lists_valid_kinds() {
        let e = Config::parse("kind = \"bogus\"\n").err().unwrap();
        let s = e.to_string();
        for k in kind_names() {
            assert!(s.contains(k));
        }
    }

    #[test]
    fn typed_lookup() {
        let c = Config::parse("kind = \"spectrum\"\n[chain]\nN = 3\nJ_2piMHz = 1\n").unwrap();
        assert_eq!(c.req_uint("chain.N").unwrap(), 3);
        assert_eq!(c.req_f64("chain.J_2piMHz").unwrap(), 1.0);
        let c = Config::parse("kind = \"spectrum\"\n[chain]\nN = 3.5\nJ_2piMHz = 1\n").unwrap();
        assert!(c.req_uint("chain.N").unwrap_err().to_string().contains("chain.N"));
    }

    #[test]
    fn atom_keys_only_for_rydberg_kinds() {
        assert!(Config::parse("kind = \"spectrum\"\n[chain]\nN = 3\nJ_2piMHz = 1\n[species]\nprofile = \"benchmark\"\n").is_err());
        let text = "kind = \"full_model\"\n[geometry]\na_um = 17\nb_um = 12\nc_um = 10\n[field]\nB_gauss = 40\n[species]\nprofile = \"benchmark\"\n";
        assert!(Config::parse(text).is_ok());
    }

    #[test]
    fn schema_doc_matches_table() {
        let doc = include_str!("../../../docs/schema.md");
        for kind in KINDS {
            let start = doc.find(&format!("### `{}`", kind.name)).expect("kind documented");
            let section = &doc[start..];
            let section = &section[..section[4..].find("### ").map_or(section.len(), |e| e + 4)];
            for k in kind.keys {
                let tag = if k.required { "required" } else { "optional" };
                assert!(
                    section.contains(&format!("| `{}` | {tag} |", k.key)),
                    "{}: `{}` ({tag}) missing from docs/schema.md",
                    kind.name,
                    k.key
                );
            }
        }
        for k in COMMON.iter().chain(ATOMS) {
            assert!(doc.contains(&format!("| `{}` |", k.key)), "`{}` undocumented", k.key);
        }
    }
}
