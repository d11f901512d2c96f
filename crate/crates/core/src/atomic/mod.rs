//! Angular-momentum algebra, Rydberg level energies, Zeeman shifts and
//! dipole matrix elements.

mod dipole;
mod energy;
mod halfint;
mod level;
mod species;
pub mod wigner;

pub use dipole::{angular_dipole, dipole_element, kepler_radial, radial_dipole, DipoleElement};
pub use energy::{
    level_energy, rydberg_energy, transition_detuning, transition_detuning_with, zeeman_shift,
    zeeman_shift_with, RouterAtoms, SublevelAssignment, TransitionSpec,
};
pub use halfint::HalfInt;
pub use level::AtomLevel;
pub use species::{LevelKey, SpeciesParams, SpeciesProfile, SpeciesTable};
pub use wigner::{clebsch_gordan, wigner_3j, wigner_6j};
