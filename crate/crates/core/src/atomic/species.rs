use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::HalfInt;
use crate::error::{Error, Result};
use crate::units;

const LITERATURE_TOML: &str = include_str!("../../data/species_literature.toml");
const BENCHMARK_TOML: &str = include_str!("../../data/species_benchmark.toml");

/// Orbital and total angular momentum of a fine-structure level.
pub type LevelKey = (u32, HalfInt);

/// Per-species Rydberg data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeciesParams {
    pub name: String,
    #[serde(serialize_with = "serialize_level_map")]
    pub quantum_defects: BTreeMap<LevelKey, f64>,
    /// Rydberg constant in rad/μs.
    pub rydberg_constant: f64,
    #[serde(serialize_with = "serialize_level_map")]
    pub g_factors: BTreeMap<LevelKey, f64>,
    /// Multiplies every radial matrix element of this species.
    pub radial_scale: f64,
}

fn level_key_string(key: &LevelKey) -> String {
    format!("{},{}", key.0, key.1)
}

fn serialize_level_map<S: serde::Serializer>(
    map: &BTreeMap<LevelKey, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(&level_key_string(k), v)?;
    }
    m.end()
}

impl SpeciesParams {
    pub fn defect(&self, l: u32, j: HalfInt) -> Result<f64> {
        self.quantum_defects.get(&(l, j)).copied().ok_or_else(|| {
            Error::config(
                format!("species.{}.defects.\"{}\"", self.name, level_key_string(&(l, j))),
                "no quantum defect for this level",
            )
        })
    }

    pub fn g_factor(&self, l: u32, j: HalfInt) -> Result<f64> {
        self.g_factors.get(&(l, j)).copied().ok_or_else(|| {
            Error::config(
                format!("species.{}.g.\"{}\"", self.name, level_key_string(&(l, j))),
                "no Lande factor for this level",
            )
        })
    }

    /// Effective principal quantum number n − δ(l, j); must be positive.
    pub fn effective_n(&self, n: u32, l: u32, j: HalfInt) -> Result<f64> {
        let nu = n as f64 - self.defect(l, j)?;
        if nu <= 0.0 {
            return Err(Error::invalid(format!(
                "{}: effective quantum number {nu} for n={n}, l={l}, j={j} is not positive",
                self.name
            )));
        }
        Ok(nu)
    }

    fn validate(&self) -> Result<()> {
        let base = format!("species.{}", self.name);
        for key in [(0, HalfInt::HALF), (1, HalfInt::THREE_HALVES)] {
            if !self.quantum_defects.contains_key(&key) {
                return Err(Error::config(
                    format!("{base}.defects.\"{}\"", level_key_string(&key)),
                    "required entry missing",
                ));
            }
        }
        if !(self.rydberg_constant > 0.0) {
            return Err(Error::config(
                format!("{base}.rydberg_constant_2piMHz"),
                "must be positive",
            ));
        }
        if !(self.radial_scale > 0.0) {
            return Err(Error::config(format!("{base}.radial_scale"), "must be positive"));
        }
        Ok(())
    }
}

/// A set of species plus the Bohr magneton used for Zeeman shifts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeciesTable {
    pub species: BTreeMap<String, SpeciesParams>,
    /// Bohr magneton in rad/μs per gauss.
    pub bohr_magneton: f64,
}

/// Built-in parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesProfile {
    /// Literature quantum defects and physical constants.
    Literature,
    /// Calibrated to the reference couplings and detuning line.
    Benchmark,
}

impl SpeciesProfile {
    pub fn name(self) -> &'static str {
        match self {
            SpeciesProfile::Literature => "literature",
            SpeciesProfile::Benchmark => "benchmark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "literature" => Some(SpeciesProfile::Literature),
            "benchmark" => Some(SpeciesProfile::Benchmark),
            _ => None,
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            SpeciesProfile::Literature => LITERATURE_TOML,
            SpeciesProfile::Benchmark => BENCHMARK_TOML,
        }
    }

    pub fn table(self) -> SpeciesTable {
        SpeciesTable::from_toml_str(self.source()).expect("built-in species table parses")
    }
}

impl fmt::Display for SpeciesProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_level_key(raw: &str, key_path: &str) -> Result<LevelKey> {
    let bad = || Error::config(key_path, "expected \"l,j\" such as \"1,3/2\"");
    let (l, j) = raw.split_once(',').ok_or_else(bad)?;
    let l: u32 = l.trim().parse().map_err(|_| bad())?;
    let j: HalfInt = j.parse().map_err(|_| bad())?;
    if j.is_integer() || (j.twice() - 2 * l as i32).abs() != 1 {
        return Err(Error::config(key_path, "need |j - l| = 1/2"));
    }
    Ok((l, j))
}

fn as_f64(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn as_table<'a>(v: &'a toml::Value, key: &str) -> Result<&'a toml::Table> {
    v.as_table().ok_or_else(|| Error::config(key, "expected a table"))
}

fn level_map(v: &toml::Value, key: &str) -> Result<BTreeMap<LevelKey, f64>> {
    let mut out = BTreeMap::new();
    for (k, val) in as_table(v, key)? {
        let path = format!("{key}.\"{k}\"");
        out.insert(parse_level_key(k, &path)?, as_f64(val, &path)?);
    }
    Ok(out)
}

impl SpeciesTable {
    pub fn literature() -> Self {
        SpeciesProfile::Literature.table()
    }

    pub fn benchmark() -> Self {
        SpeciesProfile::Benchmark.table()
    }

    pub fn get(&self, name: &str) -> Result<&SpeciesParams> {
        self.species.get(name).ok_or_else(|| {
            Error::config(
                format!("species.{name}"),
                format!(
                    "unknown species; table has {}",
                    self.species.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            )
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<species table>", e.message().to_string()))?;
        Self::from_toml_table(&root)
    }

    pub fn from_toml_table(root: &toml::Table) -> Result<Self> {
        let mut bohr_magneton = units::bohr_magneton();
        let mut species = BTreeMap::new();
        for (key, value) in root {
            match key.as_str() {
                "field" => {
                    for (k, v) in as_table(value, "field")? {
                        let path = format!("field.{k}");
                        match k.as_str() {
                            "bohr_magneton_2piMHz_per_gauss" => {
                                bohr_magneton = units::from_2pi_mhz(as_f64(v, &path)?)
                            }
                            _ => return Err(Error::config(path, "unknown key")),
                        }
                    }
                }
                "species" => {
                    for (name, body) in as_table(value, "species")? {
                        let base = format!("species.{name}");
                        let body = as_table(body, &base)?;
                        let mut params = SpeciesParams {
                            name: name.clone(),
                            quantum_defects: BTreeMap::new(),
                            rydberg_constant: 0.0,
                            g_factors: BTreeMap::new(),
                            radial_scale: 1.0,
                        };
                        let mut have_ry = false;
                        for (k, v) in body {
                            let path = format!("{base}.{k}");
                            match k.as_str() {
                                "rydberg_constant_2piMHz" => {
                                    params.rydberg_constant = units::from_2pi_mhz(as_f64(v, &path)?);
                                    have_ry = true;
                                }
                                "radial_scale" => params.radial_scale = as_f64(v, &path)?,
                                "defects" => params.quantum_defects = level_map(v, &path)?,
                                "g" => params.g_factors = level_map(v, &path)?,
                                _ => return Err(Error::config(path, "unknown key")),
                            }
                        }
                        if !have_ry {
                            return Err(Error::config(
                                format!("{base}.rydberg_constant_2piMHz"),
                                "required key missing",
                            ));
                        }
                        params.validate()?;
                        species.insert(name.clone(), params);
                    }
                }
                _ => return Err(Error::config(key.clone(), "unknown key")),
            }
        }
        if species.is_empty() {
            return Err(Error::config("species", "no species defined"));
        }
        if !(bohr_magneton > 0.0) {
            return Err(Error::config(
                "field.bohr_magneton_2piMHz_per_gauss",
                "must be positive",
            ));
        }
        Ok(SpeciesTable {
            species,
            bohr_magneton,
        })
    }
}
