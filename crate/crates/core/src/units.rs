//! Unit conventions.
//!
//! Energies are angular frequencies in rad/μs internally. User-facing values
//! are quoted in units of 2π×MHz, so `from_2pi_mhz(1.0)` is one megahertz.
//! Distances are in μm, fields in gauss and times in μs.

use std::f64::consts::TAU;

/// Hartree energy divided by Planck's constant, in MHz.
pub const HARTREE_MHZ: f64 = 6.579_683_920_502e9;

/// Bohr radius in μm.
pub const BOHR_RADIUS_UM: f64 = 5.291_772_109_03e-5;

/// (e·a0)² / (4πε0·h) in MHz·μm³. Multiplying two dipole elements given in
/// atomic units by this constant yields a C3 coefficient in 2π×MHz·μm³.
pub const DIPOLE_MHZ_UM3: f64 = HARTREE_MHZ * BOHR_RADIUS_UM * BOHR_RADIUS_UM * BOHR_RADIUS_UM;

/// Bohr magneton over Planck's constant in MHz/G.
pub const BOHR_MAGNETON_MHZ_PER_GAUSS: f64 = 1.399_624;

/// One inverse centimetre expressed in MHz.
pub const INVERSE_CM_MHZ: f64 = 29_979.245_8;

/// Converts a value quoted in 2π×MHz to rad/μs.
pub fn from_2pi_mhz(x: f64) -> f64 {
    x * TAU
}

/// Converts rad/μs to 2π×MHz.
pub fn to_2pi_mhz(w: f64) -> f64 {
    w / TAU
}

/// Bohr magneton as an angular frequency per gauss (rad/μs/G).
pub fn bohr_magneton() -> f64 {
    from_2pi_mhz(BOHR_MAGNETON_MHZ_PER_GAUSS)
}

/// Dipole coupling constant as an angular frequency (rad/μs·μm³ per (e·a0)²).
pub fn dipole_constant() -> f64 {
    from_2pi_mhz(DIPOLE_MHZ_UM3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dipole_constant_value() {
        assert!((DIPOLE_MHZ_UM3 - 9.750_08e-4).abs() < 1e-8);
    }

    #[test]
    fn round_trip() {
        assert_eq!(to_2pi_mhz(from_2pi_mhz(14.29)), 14.29);
    }
}
