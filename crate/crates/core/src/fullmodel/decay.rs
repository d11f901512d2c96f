use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Rydberg decay rates in 1/μs, keyed by (species, n, l).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayModel {
    pub temperature_k: Option<f64>,
    pub rates: BTreeMap<String, f64>,
}

fn key(species: &str, n: u32, l: u32) -> String {
    const L: [char; 4] = ['S', 'P', 'D', 'F'];
    format!("{species}{n}{}", L.get(l as usize).copied().unwrap_or('?'))
}

/// Aggregate rates of the Rb 70 / Cs 71 router at 0, 77 and 300 K.
const PRESET_TOTALS: [(f64, f64); 3] = [(0.0, 1.0 / 62.0), (77.0, 1.0 / 45.0), (300.0, 1.0 / 24.0)];

impl DecayModel {
    pub fn new() -> Self {
        DecayModel {
            temperature_k: None,
            rates: BTreeMap::new(),
        }
    }

    pub fn with_rate(mut self, species: &str, n: u32, l: u32, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("decay rate must be finite and non-negative, got {rate}")));
        }
        self.rates.insert(key(species, n, l), rate);
        Ok(self)
    }

    pub fn rate(&self, species: &str, n: u32, l: u32) -> Result<f64> {
        let k = key(species, n, l);
        self.rates
            .get(&k)
            .copied()
            .ok_or_else(|| Error::invalid(format!("no decay rate for {k}")))
    }

    /// Preset for the Rb 70 / Cs 71 router at 0, 77 or 300 K.
    ///
    /// Only the aggregate rate is tabulated; it is split evenly over the seven
    /// single-atom terms of [`gamma_total`], so each of Rb70P, Rb70S and Cs71S
    /// carries Γ_tot/7.
    pub fn rb_cs_preset(temperature_k: f64) -> Result<Self> {
        let total = PRESET_TOTALS
            .iter()
            .find(|(t, _)| (t - temperature_k).abs() < 1e-9)
            .map(|(_, g)| *g)
            .ok_or_else(|| {
                Error::config(
                    "decay.temperature_K",
                    format!("no preset for {temperature_k} K; available: 0, 77, 300"),
                )
            })?;
        let each = total / 7.0;
        let mut m = DecayModel::new()
            .with_rate("Rb", 70, 1, each)?
            .with_rate("Rb", 70, 0, each)?
            .with_rate("Cs", 71, 0, each)?;
        m.temperature_k = Some(temperature_k);
        Ok(m)
    }
}

impl Default for DecayModel {
    fn default() -> Self {
        DecayModel::new()
    }
}

/// Γ_tot = Γ(main nP) + 5Γ(main nS) + Γ(aux n'S).
pub fn gamma_total(decay: &DecayModel, main: (&str, u32), aux: (&str, u32)) -> Result<f64> {
    Ok(decay.rate(main.0, main.1, 1)? + 5.0 * decay.rate(main.0, main.1, 0)? + decay.rate(aux.0, aux.1, 0)?)
}
