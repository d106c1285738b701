//! Beam particle constants and closed-form wave kinematics.
//!
//! Wavelengths use the relativistic momentum. At the 4.5-10 keV energies of a
//! thermionic electron gun the correction is below 0.5 %, but it is what makes
//! 5.6 keV land on 16.3 pm rather than 16.4 pm.

use alloc::vec::Vec;
use libm::sqrt;

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, JOULES_PER_EV, PLANCK, SPEED_OF_LIGHT};
use crate::error::{require_positive, Error, Result};

/// Charge, mass and rest energy of the beam particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    /// Coulombs, signed.
    pub charge: f64,
    /// Kilograms.
    pub mass: f64,
    /// Joules, always `mass * c^2`.
    pub rest_energy: f64,
}

impl ParticleSpec {
    pub fn new(charge: f64, mass: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        if !charge.is_finite() {
            return Err(Error::Domain {
                name: "charge",
                value: charge,
                expected: "finite",
            });
        }
        Ok(Self {
            charge,
            mass,
            rest_energy: mass * SPEED_OF_LIGHT * SPEED_OF_LIGHT,
        })
    }

    pub fn electron() -> Self {
        Self {
            charge: -ELEMENTARY_CHARGE,
            mass: ELECTRON_MASS,
            rest_energy: ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT,
        }
    }

    /// Fails for neutral particles, which no magnetic field can deflect.
    pub fn require_charged(&self) -> Result<f64> {
        if self.charge == 0.0 {
            Err(Error::Domain {
                name: "charge",
                value: 0.0,
                expected: "nonzero for field-sensing operations",
            })
        } else {
            Ok(self.charge)
        }
    }
}

impl Default for ParticleSpec {
    fn default() -> Self {
        Self::electron()
    }
}

/// Kinetic energy of the beam in electron-volts. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BeamEnergy(f64);

impl BeamEnergy {
    /// Energy range of the electron gun used for the reference experiment, eV.
    pub const GUN_RANGE_EV: (f64, f64) = (4_500.0, 10_000.0);

    pub fn from_ev(ev: f64) -> Result<Self> {
        require_positive("kinetic energy", ev).map(Self)
    }

    pub fn from_kev(kev: f64) -> Result<Self> {
        Self::from_ev(kev * 1e3)
    }

    pub fn ev(self) -> f64 {
        self.0
    }

    pub fn kev(self) -> f64 {
        self.0 * 1e-3
    }

    pub fn joules(self) -> f64 {
        self.0 * JOULES_PER_EV
    }

    pub fn in_gun_range(self) -> bool {
        let (lo, hi) = Self::GUN_RANGE_EV;
        (lo..=hi).contains(&self.0)
    }
}

/// Relativistic de Broglie wavelength in meters.
pub fn de_broglie_wavelength(energy: BeamEnergy, particle: &ParticleSpec) -> f64 {
    let e = energy.joules();
    let momentum = sqrt(2.0 * particle.mass * e * (1.0 + e / (2.0 * particle.rest_energy)));
    PLANCK / momentum
}

/// Newtonian wavelength `h / sqrt(2 m E)`; kept for comparison only.
pub fn nonrelativistic_wavelength(energy: BeamEnergy, particle: &ParticleSpec) -> f64 {
    PLANCK / sqrt(2.0 * particle.mass * energy.joules())
}

/// Talbot self-imaging length `2 d^2 / lambda`.
pub fn talbot_length(period: f64, wavelength: f64) -> Result<f64> {
    require_positive("grating period", period)?;
    require_positive("wavelength", wavelength)?;
    Ok(2.0 * period * period / wavelength)
}

/// Inverts [`de_broglie_wavelength`] by bisection on `[1 eV, 1 MeV]`.
pub fn energy_for_wavelength(wavelength: f64, particle: &ParticleSpec) -> Result<BeamEnergy> {
    const LO_EV: f64 = 1.0;
    const HI_EV: f64 = 1.0e6;
    require_positive("wavelength", wavelength)?;
    let at = |ev: f64| de_broglie_wavelength(BeamEnergy(ev), particle);
    if wavelength > at(LO_EV) || wavelength < at(HI_EV) {
        return Err(Error::Domain {
            name: "wavelength",
            value: wavelength,
            expected: "reachable with kinetic energy in [1 eV, 1 MeV]",
        });
    }
    let (mut lo, mut hi) = (LO_EV, HI_EV);
    // wavelength decreases with energy
    while (hi - lo) > 1e-10 * lo {
        let mid = 0.5 * (lo + hi);
        if at(mid) > wavelength {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BeamEnergy(0.5 * (lo + hi)))
}

/// One Talbot-Lau contrast resonance: `separation = order * L_T / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub order: u32,
    pub wavelength: f64,
    pub energy: BeamEnergy,
}

/// Energies at which the grating separation is an integer multiple of half
/// the Talbot length, for orders `1..=n_max`.
///
/// Orders whose wavelength exceeds `max_wavelength` (or cannot be reached in
/// the bisection bracket) are skipped.
pub fn resonant_energies(
    separation: f64,
    period: f64,
    n_max: u32,
    particle: &ParticleSpec,
    max_wavelength: Option<f64>,
) -> Result<Vec<Resonance>> {
    require_positive("grating separation", separation)?;
    require_positive("grating period", period)?;
    if n_max < 1 {
        return Err(Error::Domain {
            name: "n_max",
            value: n_max as f64,
            expected: ">= 1",
        });
    }
    let limit = max_wavelength.unwrap_or(f64::INFINITY);
    let mut out = Vec::new();
    for order in 1..=n_max {
        let wavelength = order as f64 * period * period / separation;
        if wavelength > limit {
            continue;
        }
        if let Ok(energy) = energy_for_wavelength(wavelength, particle) {
            out.push(Resonance {
                order,
                wavelength,
                energy,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PM: f64 = 1e-12;

    fn electron_wavelength(kev: f64) -> f64 {
        de_broglie_wavelength(BeamEnergy::from_kev(kev).unwrap(), &ParticleSpec::electron())
    }

    #[test]
    fn wavelengths_at_the_two_resonances() {
        // independent evaluation with CODATA 2018 constants
        assert!((electron_wavelength(8.8) / PM - 13.0178).abs() <= 0.0005);
        assert!((electron_wavelength(5.6) / PM - 16.3441).abs() <= 0.0005);
        assert!((electron_wavelength(5.6) / PM - 16.3).abs() <= 0.05);
    }

    #[test]
    fn wavelength_at_10_kev() {
        let rel = electron_wavelength(10.0);
        assert!((rel / PM - 12.20).abs() <= 0.02, "{}", rel / PM);
        let nonrel =
            nonrelativistic_wavelength(BeamEnergy::from_kev(10.0).unwrap(), &ParticleSpec::electron());
        assert!((nonrel / PM - 12.26).abs() <= 0.01);
    }

    #[test]
    fn rejects_non_positive_energy() {
        assert!(BeamEnergy::from_ev(0.0).is_err());
        assert!(BeamEnergy::from_ev(-5.0).is_err());
        assert!(BeamEnergy::from_ev(f64::NAN).is_err());
    }

    #[test]
    fn wavelength_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let kev = 1.0 + 19.0 * i as f64 / 99.0;
            let l = electron_wavelength(kev);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn relativistic_correction_below_0_6_percent_under_10_kev() {
        let e = ParticleSpec::electron();
        for i in 1..=100 {
            let energy = BeamEnergy::from_ev(100.0 * i as f64).unwrap();
            let rel = de_broglie_wavelength(energy, &e);
            let nonrel = nonrelativistic_wavelength(energy, &e);
            assert!((nonrel - rel) / rel < 0.006);
        }
    }

    #[test]
    fn talbot_lengths() {
        let lt = talbot_length(100e-9, 13.1 * PM).unwrap();
        assert!((lt - 1.527e-3).abs() < 0.0005e-3);
        let lt = talbot_length(100e-9, 16.3 * PM).unwrap();
        assert!((lt - 1.227e-3).abs() < 0.0005e-3);
        let a = talbot_length(100e-9, 10.0 * PM).unwrap();
        let b = talbot_length(100e-9, 20.0 * PM).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert!(talbot_length(0.0, 1e-12).is_err());
        assert!(talbot_length(1e-7, -1e-12).is_err());
    }

    #[test]
    fn resonances_of_the_reference_device() {
        let r = resonant_energies(3.06e-3, 100e-9, 6, &ParticleSpec::electron(), None).unwrap();
        let n4 = r.iter().find(|r| r.order == 4).unwrap();
        let n5 = r.iter().find(|r| r.order == 5).unwrap();
        assert!((n4.energy.kev() - 8.8).abs() / 8.8 < 0.01, "{}", n4.energy.kev());
        assert!((n5.energy.kev() - 5.6).abs() / 5.6 < 0.01, "{}", n5.energy.kev());
    }

    #[test]
    fn resonance_round_trips_through_talbot_length() {
        let e = ParticleSpec::electron();
        let l = 3.06e-3;
        for r in resonant_energies(l, 100e-9, 12, &e, None).unwrap() {
            let lt = talbot_length(100e-9, de_broglie_wavelength(r.energy, &e)).unwrap();
            assert!((l - r.order as f64 * lt / 2.0).abs() / l < 1e-9);
        }
    }

    #[test]
    fn doubling_separation_halves_wavelength() {
        let e = ParticleSpec::electron();
        let a = resonant_energies(3e-3, 100e-9, 3, &e, None).unwrap();
        let b = resonant_energies(6e-3, 100e-9, 3, &e, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.wavelength - 2.0 * y.wavelength).abs() < 1e-24);
        }
    }

    #[test]
    fn max_wavelength_skips_orders() {
        let e = ParticleSpec::electron();
        let r = resonant_energies(3.06e-3, 100e-9, 8, &e, Some(17e-12)).unwrap();
        assert!(r.iter().all(|r| r.wavelength <= 17e-12));
        assert_eq!(r.last().unwrap().order, 5);
        assert!(resonant_energies(3.06e-3, 100e-9, 0, &e, None).is_err());
    }

    #[test]
    fn particle_invariants() {
        let p = ParticleSpec::electron();
        let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
        assert!((p.rest_energy - p.mass * c2).abs() / p.rest_energy < 1e-12);
        assert!(ParticleSpec::new(1.0, 0.0).is_err());
        assert!(ParticleSpec::new(0.0, 1.0).unwrap().require_charged().is_err());
    }
}
