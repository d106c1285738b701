//! CODATA 2018 physical constants in SI units.

/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * core::f64::consts::PI);
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Electron rest mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum magnetic permeability, N/A^2.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Joules per electron-volt.
pub const JOULES_PER_EV: f64 = ELEMENTARY_CHARGE;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_are_consistent() {
        assert!((HBAR * 2.0 * core::f64::consts::PI - PLANCK).abs() / PLANCK < 1e-15);
        // mu_0 sits within 1e-9 of the pre-2019 exact value 4 pi 1e-7.
        let classical = 4.0e-7 * core::f64::consts::PI;
        assert!((MU_0 - classical).abs() / classical < 1e-9);
        // m_e c^2 = 510.998 95 keV
        let rest_kev = ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT / JOULES_PER_EV / 1e3;
        assert!((rest_kev - 510.998_95).abs() < 1e-4);
    }
}
