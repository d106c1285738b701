//! Simulation kernels for a three-grating Talbot-Lau interferometer driven by
//! an electron beam, and the closed-form magnetometry built on top of it.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Enabling `std` turns on parallel evaluation of independent point
//! sources and sweep points; results are bit-identical either way because
//! every reduction runs in a fixed order.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constants;
mod error;
pub mod fft;
pub mod interferometer;
pub mod kinematics;
pub mod optics;
mod par;
pub mod sensing;
pub mod wave;

pub use error::{Error, Result};
pub use interferometer::{
    contrast, misalignment_factor, scan_fringe, simulate_throughput, sweep_energy,
    BeamlineConfig, FringeCurve, GridPolicy,
};
pub use kinematics::{de_broglie_wavelength, resonant_energies, talbot_length, BeamEnergy, ParticleSpec};
pub use optics::{apply_plane, grating_amplitude, translate_grating, ApertureSpec, Element, GratingSpec, PhaseModel};
pub use sensing::{CradleSpec, FieldRegion, SensorReport};
pub use wave::{Grid, Method, PropagationPlan, SamplingReport, WaveField};
