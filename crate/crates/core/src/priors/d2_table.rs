//! DFT-D2 dispersion coefficients and van der Waals radii.
//!
//! C6 values are stored in the original J·nm⁶/mol and converted to eV·Å⁶
//! on lookup (1 J·nm⁶/mol = 10⁶ J·Å⁶/mol).

use crate::units::J_PER_MOL_IN_EV;

/// (atomic number, C6 in J·nm⁶/mol, R0 in Å)
const TABLE: [(u32, f64, f64); 7] = [
    (1, 0.14, 1.001),
    (6, 1.75, 1.452),
    (7, 1.23, 1.397),
    (8, 0.70, 1.342),
    (9, 0.75, 1.287),
    (16, 5.57, 1.683),
    (17, 5.07, 1.639),
];

/// Per-element `(C6 [eV·Å⁶], R0 [Å])` for H, C, N, O, F, S and Cl.
pub fn builtin(z: u32) -> Option<(f64, f64)> {
    TABLE
        .iter()
        .find(|e| e.0 == z)
        .map(|&(_, c6, r0)| (c6 * 1e6 * J_PER_MOL_IN_EV, r0))
}

pub fn builtin_elements() -> impl Iterator<Item = u32> {
    TABLE.iter().map(|e| e.0)
}
