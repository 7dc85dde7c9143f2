//! Internal unit system: Å, eV, eV/Å, amu, fs, K and elementary charges.

/// Coulomb constant in eV·Å/e².
pub const COULOMB: f64 = 14.399645;

/// Boltzmann constant in eV/K.
pub const BOLTZMANN: f64 = 8.617333262e-5;

/// Bohr radius in Å.
pub const BOHR: f64 = 0.529177;

/// Converts a force/mass ratio in eV/(Å·amu) to an acceleration in Å/fs².
///
/// 1 eV = 1.602176634e-19 J and 1 amu = 1.66053906660e-27 kg, so
/// 1 eV/(Å·amu) = 9.64853321e17 m/s² = 9.64853321e-3 Å/fs².
pub const ACCEL: f64 = 1.602176634e-19 / (1.66053906660e-27 * 1e-10) * 1e-20;

/// Energy of one J/mol expressed in eV per particle.
pub const J_PER_MOL_IN_EV: f64 = 1.0 / 96485.33212;
