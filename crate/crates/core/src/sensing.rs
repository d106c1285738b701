//! Closed-form magnetometry on top of a simulated fringe.
//!
//! Two estimates of the field that moves the fringe by one period coexist:
//! the classical impulse deflection `s = q B L^2 / (2 sqrt(2 m E))` and the
//! Aharonov-Bohm phase `phi = (q / hbar) B L^2 lambda / d`. For the reference
//! geometry they differ by roughly a factor two. Throughput prediction uses
//! the classical route, which matches the 1.8 uT per period quoted for 10 keV.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::sqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::constants::{HBAR, MU_0};
use crate::error::{require_positive, Error, Result};
use crate::interferometer::FringeCurve;
use crate::kinematics::{BeamEnergy, ParticleSpec};

/// Wire cradle wound on the edges of a cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CradleSpec {
    /// Cube edge length, m.
    pub edge_length: f64,
    /// Wire current, A.
    pub current: f64,
    /// Ratio of the field the beam actually sees to the ideal center value.
    pub efficiency: f64,
}

impl CradleSpec {
    pub fn new(edge_length: f64, current: f64) -> Result<Self> {
        require_positive("cradle edge length", edge_length)?;
        Ok(Self {
            edge_length,
            current,
            efficiency: 1.0,
        })
    }

    pub fn with_current(self, current: f64) -> Self {
        Self { current, ..self }
    }
}

impl Default for CradleSpec {
    fn default() -> Self {
        Self {
            edge_length: 54e-3,
            current: 0.0,
            efficiency: 1.0,
        }
    }
}

/// Uniform field over a region of the beam path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegion {
    /// Tesla.
    pub field: f64,
    /// Meters. Defaults to the first-to-third grating distance.
    pub length: f64,
}

impl FieldRegion {
    pub const DEFAULT_LENGTH: f64 = 6.12e-3;

    pub fn new(field: f64, length: f64) -> Result<Self> {
        require_positive("field region length", length)?;
        Ok(Self { field, length })
    }
}

/// Field at the cradle center, `eta (4 / sqrt 3) mu_0 I / (pi w)`.
pub fn cradle_field(c: &CradleSpec) -> Result<f64> {
    require_positive("cradle edge length", c.edge_length)?;
    require_positive("cradle efficiency", c.efficiency)?;
    Ok(c.efficiency * 4.0 / sqrt(3.0) * MU_0 * c.current / (PI * c.edge_length))
}

/// Transverse impulse deflection in meters (nonrelativistic).
pub fn classical_deflection(r: &FieldRegion, energy: BeamEnergy, p: &ParticleSpec) -> Result<f64> {
    require_positive("field region length", r.length)?;
    let q = p.require_charged()?;
    Ok(q * r.field * r.length * r.length / (2.0 * sqrt(2.0 * p.mass * energy.joules())))
}

/// Field magnitude that deflects the beam by one grating period.
pub fn field_per_period(period: f64, length: f64, energy: BeamEnergy, p: &ParticleSpec) -> Result<f64> {
    require_positive("grating period", period)?;
    require_positive("field region length", length)?;
    let q = p.require_charged()?;
    Ok(2.0 * period * sqrt(2.0 * p.mass * energy.joules()) / (q.abs() * length * length))
}

/// Aharonov-Bohm phase with the enclosed area approximated as `L^2 lambda / d`.
pub fn ab_phase(field: f64, length: f64, wavelength: f64, period: f64, p: &ParticleSpec) -> Result<f64> {
    require_positive("field region length", length)?;
    require_positive("wavelength", wavelength)?;
    require_positive("grating period", period)?;
    let q = p.require_charged()?;
    Ok(q / HBAR * field * length * length * wavelength / period)
}

/// Reads a fringe curve at the offset the field deflects the beam to.
pub fn predict_throughput(
    curve: &FringeCurve,
    field: f64,
    r: &FieldRegion,
    energy: BeamEnergy,
    p: &ParticleSpec,
) -> Result<f64> {
    Readout::new(curve.clone(), r.length, energy, *p).throughput(field, 0.0)
}

/// `sqrt(R) / |dS/dB|`: field noise in one second of Poisson counting.
pub fn shot_noise_sensitivity(count_rate: f64, slope: f64) -> Result<f64> {
    require_positive("count rate", count_rate)?;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::Undefined("sensitivity at zero fringe slope"));
    }
    Ok(sqrt(count_rate) / slope.abs())
}

/// Projected sensitivity of a scaled device: `base / (L_ratio^2 C sqrt(A_ratio))`.
pub fn scaled_sensitivity(base: f64, length_ratio: f64, concentrator_gain: f64, area_ratio: f64) -> Result<f64> {
    require_positive("base sensitivity", base)?;
    require_positive("length ratio", length_ratio)?;
    require_positive("concentrator gain", concentrator_gain)?;
    require_positive("area ratio", area_ratio)?;
    Ok(base / (length_ratio * length_ratio * concentrator_gain * sqrt(area_ratio)))
}

/// Counting-rate figures at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReport {
    /// counts s^-1 T^-1
    pub slope: f64,
    /// counts s^-1
    pub count_rate: f64,
    /// T Hz^-1/2
    pub sensitivity: f64,
}

/// A fringe curve turned into a field sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub curve: FringeCurve,
    pub region_length: f64,
    pub energy: BeamEnergy,
    pub particle: ParticleSpec,
}

/// One second of the on/off step protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSample {
    pub t: u32,
    pub field_on: bool,
    pub counts: u64,
}

/// Seconds the step field stays on, then off.
pub const STEP_HALF_PERIOD_S: u32 = 10;

impl Readout {
    pub fn new(curve: FringeCurve, region_length: f64, energy: BeamEnergy, particle: ParticleSpec) -> Self {
        Self {
            curve,
            region_length,
            energy,
            particle,
        }
    }

    pub fn deflection(&self, field: f64) -> Result<f64> {
        classical_deflection(&FieldRegion::new(field, self.region_length)?, self.energy, &self.particle)
    }

    /// Normalized throughput at `bias_offset` plus the field's deflection.
    pub fn throughput(&self, field: f64, bias_offset: f64) -> Result<f64> {
        Ok(self.curve.interpolate(bias_offset + self.deflection(field)?))
    }

    /// d(throughput)/dB at zero field and the given bias, per tesla.
    pub fn slope(&self, bias_offset: f64) -> Result<f64> {
        let per_tesla = self.deflection(1.0)?;
        Ok(self.curve.slope(bias_offset) * per_tesla)
    }

    pub fn report(&self, bias_offset: f64, rate_scale: f64) -> Result<SensorReport> {
        require_positive("rate scale", rate_scale)?;
        let count_rate = rate_scale * self.throughput(0.0, bias_offset)?;
        let slope = rate_scale * self.slope(bias_offset)?;
        Ok(SensorReport {
            slope,
            count_rate,
            sensitivity: shot_noise_sensitivity(count_rate, slope)?,
        })
    }

    /// Rate scale at which the shot-noise sensitivity equals `target`.
    pub fn rate_for_sensitivity(&self, bias_offset: f64, target: f64) -> Result<f64> {
        require_positive("target sensitivity", target)?;
        let t = self.throughput(0.0, bias_offset)?;
        let dt = self.slope(bias_offset)?;
        if dt == 0.0 {
            return Err(Error::Undefined("sensitivity at zero fringe slope"));
        }
        require_positive("throughput at bias", t)?;
        Ok(t / (target * dt) / (target * dt))
    }

    /// Poisson counts for each second of a 10 s on / 10 s off field step.
    pub fn step_response(
        &self,
        bias_offset: f64,
        step_field: f64,
        rate_scale: f64,
        seconds: u32,
        seed: u64,
    ) -> Result<Vec<StepSample>> {
        require_positive("rate scale", rate_scale)?;
        let on = rate_scale * self.throughput(step_field, bias_offset)?;
        let off = rate_scale * self.throughput(0.0, bias_offset)?;
        let poisson = |mean: f64| {
            Poisson::new(mean).map_err(|_| Error::Domain {
                name: "mean count rate",
                value: mean,
                expected: "finite and > 0",
            })
        };
        let (on_dist, off_dist) = (poisson(on)?, poisson(off)?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..seconds)
            .map(|t| {
                let field_on = (t / STEP_HALF_PERIOD_S) % 2 == 0;
                let dist = if field_on { &on_dist } else { &off_dist };
                StepSample {
                    t,
                    field_on,
                    counts: dist.sample(&mut rng) as u64,
                }
            })
            .collect())
    }
}

/// Free-function form of [`Readout::step_response`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_step_response(
    curve: &FringeCurve,
    bias_offset: f64,
    step_field: f64,
    rate_scale: f64,
    seconds: u32,
    seed: u64,
    region_length: f64,
    energy: BeamEnergy,
    particle: &ParticleSpec,
) -> Result<Vec<StepSample>> {
    Readout::new(curve.clone(), region_length, energy, *particle).step_response(
        bias_offset,
        step_field,
        rate_scale,
        seconds,
        seed,
    )
}

/// `|mean_on - mean_off|` over the pooled per-second standard deviation.
pub fn step_snr(samples: &[StepSample]) -> Result<f64> {
    let stats = |on: bool| {
        let v: Vec<f64> = samples
            .iter()
            .filter(|s| s.field_on == on)
            .map(|s| s.counts as f64)
            .collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let ss = v.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>();
        (v.len(), mean, ss)
    };
    let (n_on, m_on, ss_on) = stats(true);
    let (n_off, m_off, ss_off) = stats(false);
    if n_on < 2 || n_off < 2 {
        return Err(Error::Undefined("step SNR needs two samples in each state"));
    }
    let pooled = sqrt((ss_on + ss_off) / (n_on + n_off - 2) as f64);
    if pooled == 0.0 {
        return Err(Error::Undefined("step SNR with zero noise"));
    }
    Ok((m_on - m_off).abs() / pooled)
}
