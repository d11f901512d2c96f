use serde::Serialize;

use super::{AtomLevel, HalfInt, SpeciesParams, SpeciesTable};
use crate::error::{Error, Result};
use crate::units;

/// Binding energy −Ry/(n − δ)² in rad/μs.
pub fn rydberg_energy(species: &SpeciesParams, n: u32, l: u32, j: HalfInt) -> Result<f64> {
    let nu = species.effective_n(n, l, j)?;
    Ok(-species.rydberg_constant / (nu * nu))
}

/// Linear Zeeman shift μ_B·B·g_j·m in rad/μs with the physical Bohr magneton.
pub fn zeeman_shift(level: &AtomLevel, species: &SpeciesParams, b_gauss: f64) -> Result<f64> {
    zeeman_shift_with(level, species, b_gauss, units::bohr_magneton())
}

/// Linear Zeeman shift with an explicit magneton (rad/μs per gauss).
pub fn zeeman_shift_with(
    level: &AtomLevel,
    species: &SpeciesParams,
    b_gauss: f64,
    bohr_magneton: f64,
) -> Result<f64> {
    let g = species.g_factor(level.l, level.j)?;
    Ok(bohr_magneton * b_gauss * g * level.m.to_f64())
}

/// Field-dependent energy of a level: Rydberg binding energy plus Zeeman shift.
pub fn level_energy(level: &AtomLevel, species: &SpeciesParams, b_gauss: f64, bohr_magneton: f64) -> Result<f64> {
    Ok(rydberg_energy(species, level.n, level.l, level.j)?
        + zeeman_shift_with(level, species, b_gauss, bohr_magneton)?)
}

/// An nS_1/2 → nP_3/2 transition between two chosen sublevels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionSpec {
    pub species: SpeciesParams,
    pub n: u32,
    pub lower_m: HalfInt,
    pub upper_m: HalfInt,
}


impl TransitionSpec {
    pub fn new(species: SpeciesParams, n: u32, lower_m: HalfInt, upper_m: HalfInt) -> Result<Self> {
        AtomLevel::s_half(&species.name, n, lower_m)?;
        AtomLevel::p_three_halves(&species.name, n, upper_m)?;
        Ok(TransitionSpec {
            species,
            n,
            lower_m,
            upper_m,
        })
    }

    pub fn lower(&self) -> AtomLevel {
        AtomLevel::s_half(&self.species.name, self.n, self.lower_m).expect("validated")
    }

    pub fn upper(&self) -> AtomLevel {
        AtomLevel::p_three_halves(&self.species.name, self.n, self.upper_m).expect("validated")
    }

    /// m(upper) − m(lower).
    pub fn delta_m(&self) -> i32 {
        (self.upper_m - self.lower_m).twice() / 2
    }

    /// Transition angular frequency (upper minus lower) at field `b_gauss`.
    pub fn frequency(&self, b_gauss: f64, bohr_magneton: f64) -> Result<f64> {
        Ok(level_energy(&self.upper(), &self.species, b_gauss, bohr_magneton)?
            - level_energy(&self.lower(), &self.species, b_gauss, bohr_magneton)?)
    }

    /// d(frequency)/dB in rad/μs per gauss.
    pub fn zeeman_slope(&self, bohr_magneton: f64) -> Result<f64> {
        let gu = self.species.g_factor(1, HalfInt::THREE_HALVES)?;
        let gl = self.species.g_factor(0, HalfInt::HALF)?;
        Ok(bohr_magneton * (gu * self.upper_m.to_f64() - gl * self.lower_m.to_f64()))
    }
}

/// Detuning Δ = ω_aux(|−⟩→|+⟩) − ω_main(|0⟩→|1⟩) with the physical magneton.
pub fn transition_detuning(main: &TransitionSpec, aux: &TransitionSpec, b_gauss: f64) -> Result<f64> {
    transition_detuning_with(main, aux, b_gauss, units::bohr_magneton())
}

pub fn transition_detuning_with(
    main: &TransitionSpec,
    aux: &TransitionSpec,
    b_gauss: f64,
    bohr_magneton: f64,
) -> Result<f64> {
    Ok(aux.frequency(b_gauss, bohr_magneton)? - main.frequency(b_gauss, bohr_magneton)?)
}

/// Which sublevels play the roles |0⟩, |1⟩ (main atoms) and |−⟩, |+⟩ (auxiliary).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SublevelAssignment {
    /// |0⟩ = S m=−1/2, |1⟩ = P m=+1/2; |−⟩ = S m=+1/2, |+⟩ = P m=−1/2.
    Standard,
    /// |0⟩ = S m=+1/2, |1⟩ = P m=+3/2; |−⟩ = S m=+1/2, |+⟩ = P m=−1/2.
    Stretched,
    /// Explicit (main lower, main upper, aux lower, aux upper) projections.
    Custom([HalfInt; 4]),
}

impl SublevelAssignment {
    pub fn projections(self) -> [HalfInt; 4] {
        let h = HalfInt::from_twice;
        match self {
            SublevelAssignment::Standard => [h(-1), h(1), h(1), h(-1)],
            SublevelAssignment::Stretched => [h(1), h(3), h(1), h(-1)],
            SublevelAssignment::Custom(m) => m,
        }
    }

    pub fn name(self) -> String {
        match self {
            SublevelAssignment::Standard => "standard".into(),
            SublevelAssignment::Stretched => "stretched".into(),
            SublevelAssignment::Custom(m) => {
                format!("custom({}, {}, {}, {})", m[0], m[1], m[2], m[3])
            }
        }
    }
}

/// The main/auxiliary atom pair of the router together with its Zeeman model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouterAtoms {
    pub main: TransitionSpec,
    pub aux: TransitionSpec,
    /// Bohr magneton in rad/μs per gauss.
    pub bohr_magneton: f64,
    pub assignment: SublevelAssignment,
}

impl RouterAtoms {
    /// Builds the pair and checks that the main transition raises m by one and
    /// the auxiliary |−⟩→|+⟩ transition lowers it by one.
    pub fn new(
        table: &SpeciesTable,
        main_species: &str,
        main_n: u32,
        aux_species: &str,
        aux_n: u32,
        assignment: SublevelAssignment,
    ) -> Result<Self> {
        let [m0, m1, mm, mp] = assignment.projections();
        let main = TransitionSpec::new(table.get(main_species)?.clone(), main_n, m0, m1)?;
        let aux = TransitionSpec::new(table.get(aux_species)?.clone(), aux_n, mm, mp)?;
        if main.delta_m() != 1 {
            return Err(Error::invalid(format!(
                "main transition must have Δm = +1, got {}",
                main.delta_m()
            )));
        }
        if aux.delta_m() != -1 {
            return Err(Error::invalid(format!(
                "auxiliary |−⟩→|+⟩ transition must have Δm = −1, got {}",
                aux.delta_m()
            )));
        }
        Ok(RouterAtoms {
            main,
            aux,
            bohr_magneton: table.bohr_magneton,
            assignment,
        })
    }

    /// Rb n=70 main atoms and Cs n=71 auxiliary atoms.
    pub fn rb_cs(table: &SpeciesTable, assignment: SublevelAssignment) -> Result<Self> {
        RouterAtoms::new(table, "Rb", 70, "Cs", 71, assignment)
    }

    pub fn detuning(&self, b_gauss: f64) -> Result<f64> {
        transition_detuning_with(&self.main, &self.aux, b_gauss, self.bohr_magneton)
    }

    /// dΔ/dB in rad/μs per gauss.
    pub fn detuning_slope(&self) -> Result<f64> {
        Ok(self.aux.zeeman_slope(self.bohr_magneton)? - self.main.zeeman_slope(self.bohr_magneton)?)
    }

    /// Field at which the detuning equals `delta`; `None` if Δ does not depend on B.
    pub fn field_for_detuning(&self, delta: f64) -> Result<Option<f64>> {
        let slope = self.detuning_slope()?;
        if slope == 0.0 {
            return Ok(None);
        }
        Ok(Some((delta - self.detuning(0.0)?) / slope))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{from_2pi_mhz, to_2pi_mhz};

    fn table() -> SpeciesTable {
        SpeciesTable::literature()
    }

    #[test]
    fn hydrogenic_ground_state() {
        let mut rb = table().get("Rb").unwrap().clone();
        rb.quantum_defects.insert((0, HalfInt::HALF), 0.0);
        let e = rydberg_energy(&rb, 1, 0, HalfInt::HALF).unwrap();
        assert_eq!(e, -rb.rydberg_constant);
    }

    #[test]
    fn energy_increases_with_n() {
        let t = table();
        let cs = t.get("Cs").unwrap();
        let mut prev = f64::NEG_INFINITY;
        for n in 6..400 {
            let e = rydberg_energy(cs, n, 1, HalfInt::THREE_HALVES).unwrap();
            assert!(e > prev && e < 0.0);
            prev = e;
        }
    }

    #[test]
    fn missing_defect_is_an_error() {
        let t = table();
        let rb = t.get("Rb").unwrap();
        assert!(rydberg_energy(rb, 70, 3, HalfInt::from_twice(7)).is_err());
    }

    #[test]
    fn zeeman_examples() {
        let t = table();
        let rb = t.get("Rb").unwrap();
        let s = AtomLevel::s_half("Rb", 70, HalfInt::HALF).unwrap();
        let shift = zeeman_shift(&s, rb, 26.84).unwrap();
        assert!((to_2pi_mhz(shift) - 1.399624 * 26.84).abs() < 1e-9);
        assert!((to_2pi_mhz(shift) - 37.56).abs() < 0.01);
        let s_neg = AtomLevel::s_half("Rb", 70, -HalfInt::HALF).unwrap();
        assert_eq!(zeeman_shift(&s_neg, rb, 26.84).unwrap(), -shift);
    }

    #[test]
    fn detuning_is_affine_in_field() {
        let atoms = RouterAtoms::rb_cs(&table(), SublevelAssignment::Standard).unwrap();
        let d0 = atoms.detuning(0.0).unwrap();
        let slope = atoms.detuning_slope().unwrap();
        for b in [1.0, 10.0, 46.38] {
            let d = atoms.detuning(b).unwrap();
            assert!((d - d0 - slope * b).abs() < 1e-6 * d0.abs().max(1.0));
        }
        // g·m slope: aux (−2/3 − 1) − main (2/3 + 1) = −10/3 magnetons.
        assert!((slope / atoms.bohr_magneton + 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn resonance_crossing_gives_zero_detuning() {
        let atoms = RouterAtoms::rb_cs(&table(), SublevelAssignment::Standard).unwrap();
        let b0 = atoms.field_for_detuning(0.0).unwrap().unwrap();
        assert!(atoms.detuning(b0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn benchmark_detuning_line() {
        let atoms = RouterAtoms::rb_cs(&SpeciesTable::benchmark(), SublevelAssignment::Stretched).unwrap();
        let d0 = to_2pi_mhz(atoms.detuning(0.0).unwrap());
        assert!((d0 - 30.23).abs() < 1e-3, "{d0}");
        let d = to_2pi_mhz(atoms.detuning(26.84).unwrap());
        assert!((d - 14.29).abs() < 0.01, "{d}");
        let d = to_2pi_mhz(atoms.detuning(46.38).unwrap());
        assert!((d - 2.68).abs() < 0.01, "{d}");
        let b = atoms.field_for_detuning(from_2pi_mhz(14.29)).unwrap().unwrap();
        assert!((b - 26.84).abs() < 0.02);
    }

    #[test]
    fn assignment_rules_enforced() {
        let h = HalfInt::from_twice;
        let bad = SublevelAssignment::Custom([h(-1), h(-1), h(1), h(-1)]);
        assert!(RouterAtoms::rb_cs(&table(), bad).is_err());
        let bad = SublevelAssignment::Custom([h(-1), h(1), h(-1), h(1)]);
        assert!(RouterAtoms::rb_cs(&table(), bad).is_err());
    }
}
