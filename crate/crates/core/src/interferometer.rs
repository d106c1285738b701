//! Full beamline: two collimation slits followed by three gratings.
//!
//! Each point source on the first slit is propagated coherently through the
//! second slit and the first two gratings up to the third grating; sources
//! are then added incoherently. The magnetic field itself is never put into
//! the wave simulation. Its deflection is mimicked by translating the third
//! grating, and throughput is read off directly behind that grating.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, sin};
use num_complex::Complex64;

use crate::error::{require_positive, Error, Result};
use crate::kinematics::{de_broglie_wavelength, BeamEnergy, ParticleSpec};
use crate::optics::{grating_amplitude, translate_grating, ApertureSpec, Element, GratingSpec, PhaseModel};
use crate::par;
use crate::wave::{self, direct_sum, flux, Grid, Method, ParaxialKernel, SamplingReport, WaveField};

/// How the transverse sampling step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPolicy {
    /// `period / n` with the smallest `n >= min_samples_per_period` that
    /// passes the sampling check on every leg.
    Auto { min_samples_per_period: usize },
    /// Exactly `period / n`; refuses to run if any leg is undersampled.
    Fixed { samples_per_period: usize },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto {
            min_samples_per_period: 100,
        }
    }
}

/// Geometry and numerics of one interferometer run.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamlineConfig {
    pub particle: ParticleSpec,
    pub source_slit: ApertureSpec,
    pub second_slit: ApertureSpec,
    pub slit_separation: f64,
    pub slit2_to_g1: f64,
    pub grating_gap: f64,
    pub gratings: [GratingSpec; 3],
    pub phase_model: PhaseModel,
    pub energy: BeamEnergy,
    pub n_sources: usize,
    pub propagator: Method,
    pub grid: GridPolicy,
    /// Grid half-width relative to the geometrically illuminated half-width.
    pub window_factor: f64,
    pub pad_factor: usize,
}

impl Default for BeamlineConfig {
    fn default() -> Self {
        let g = GratingSpec::reference();
        Self {
            particle: ParticleSpec::electron(),
            source_slit: ApertureSpec {
                width: 5e-6,
                center: 0.0,
            },
            second_slit: ApertureSpec {
                width: 2e-6,
                center: 0.0,
            },
            slit_separation: 0.24,
            slit2_to_g1: 0.05,
            grating_gap: 3.06e-3,
            gratings: [g; 3],
            phase_model: PhaseModel::default(),
            energy: BeamEnergy::from_ev(10_000.0).expect("positive"),
            n_sources: 32,
            propagator: Method::Paraxial,
            grid: GridPolicy::default(),
            window_factor: 1.5,
            pad_factor: 2,
        }
    }
}

impl BeamlineConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("slit separation", self.slit_separation)?;
        require_positive("slit 2 to G1 distance", self.slit2_to_g1)?;
        require_positive("grating gap", self.grating_gap)?;
        require_positive("source slit width", self.source_slit.width)?;
        require_positive("second slit width", self.second_slit.width)?;
        for g in &self.gratings {
            GratingSpec::new(g.period, g.open_fraction, g.offset, g.extent)?;
        }
        self.phase_model.validate()?;
        if self.n_sources < 1 {
            return Err(Error::Domain {
                name: "n_sources",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if self.window_factor < 1.0 || !self.window_factor.is_finite() {
            return Err(Error::Domain {
                name: "window factor",
                value: self.window_factor,
                expected: ">= 1",
            });
        }
        if self.pad_factor < 2 {
            return Err(Error::Domain {
                name: "pad factor",
                value: self.pad_factor as f64,
                expected: ">= 2",
            });
        }
        let min_samples = match self.grid {
            GridPolicy::Auto {
                min_samples_per_period,
            } => min_samples_per_period,
            GridPolicy::Fixed { samples_per_period } => samples_per_period,
        };
        if min_samples < 2 {
            return Err(Error::Domain {
                name: "samples per period",
                value: min_samples as f64,
                expected: ">= 2",
            });
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        de_broglie_wavelength(self.energy, &self.particle)
    }

    pub fn with_energy(&self, energy: BeamEnergy) -> Self {
        Self {
            energy,
            ..self.clone()
        }
    }

    /// Every grating shifted by the same `delta`.
    pub fn with_gratings_translated(&self, delta: f64) -> Self {
        let mut cfg = self.clone();
        for g in cfg.gratings.iter_mut() {
            *g = translate_grating(g, delta);
        }
        cfg
    }

    /// Point-source positions spread uniformly across the first slit.
    pub fn source_positions(&self) -> Vec<f64> {
        let s = self.source_slit;
        let n = self.n_sources as f64;
        (0..self.n_sources)
            .map(|i| s.center - 0.5 * s.width + (i as f64 + 0.5) * s.width / n)
            .collect()
    }

    /// Largest |x| reached by a straight ray from the first slit through the
    /// second slit, evaluated at the third grating.
    pub fn illuminated_half_width(&self) -> f64 {
        let (s1, s2) = (self.source_slit, self.second_slit);
        let beyond = self.slit2_to_g1 + 2.0 * self.grating_gap;
        let mut widest = (s1.center.abs() + 0.5 * s1.width).max(s2.center.abs() + 0.5 * s2.width);
        for xs in [s1.center - 0.5 * s1.width, s1.center + 0.5 * s1.width] {
            for x2 in [s2.center - 0.5 * s2.width, s2.center + 0.5 * s2.width] {
                let x = x2 + (x2 - xs) * beyond / self.slit_separation;
                widest = widest.max(x.abs());
            }
        }
        widest
    }

    fn legs(&self) -> [(&'static str, f64); 4] {
        [
            ("source slit -> second slit", self.slit_separation),
            ("second slit -> G1", self.slit2_to_g1),
            ("G1 -> G2", self.grating_gap),
            ("G2 -> G3", self.grating_gap),
        ]
    }

    /// Transverse grid shared by every plane of the beamline.
    pub fn grid(&self) -> Result<Grid> {
        self.validate()?;
        let period = self.gratings[0].period;
        let half = self.window_factor * self.illuminated_half_width();
        let lambda = self.wavelength();
        let shortest = self.legs().iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        // identical source and target windows: max separation is the full span
        let required = lambda * shortest / (2.0 * 2.0 * half);
        let samples = match self.grid {
            GridPolicy::Auto {
                min_samples_per_period,
            } => {
                let need = ceil(period / required) as usize;
                need.max(min_samples_per_period)
            }
            GridPolicy::Fixed { samples_per_period } => samples_per_period,
        };
        let dx = period / samples as f64;
        let mut grid = grid_for(half, dx)?;
        if let GridPolicy::Auto { .. } = self.grid {
            // rounding the half-width up to whole samples can nudge the span
            let mut k = samples;
            while !self.sampling_reports_on(&grid).iter().all(|r| r.1.passes) {
                k += 1;
                grid = grid_for(half, period / k as f64)?;
            }
        }
        Ok(grid)
    }

    fn sampling_reports_on(&self, grid: &Grid) -> Vec<(&'static str, SamplingReport)> {
        let lambda = self.wavelength();
        self.legs()
            .iter()
            .map(|&(name, dz)| (name, wave::sampling_check_grids(grid, grid, lambda, dz)))
            .collect()
    }

    /// Kernel sampling check for each propagation leg.
    pub fn sampling_reports(&self) -> Result<Vec<(&'static str, SamplingReport)>> {
        let grid = self.grid()?;
        Ok(self.sampling_reports_on(&grid))
    }
}

/// Largest beamline grid accepted before refusing the configuration.
pub const MAX_GRID_POINTS: usize = 1 << 21;

fn grid_for(half: f64, dx: f64) -> Result<Grid> {
    let n_half = ceil(half / dx) as usize;
    if 2 * n_half + 1 > MAX_GRID_POINTS {
        return Err(Error::Misconfigured(format!(
            "beamline window of +/-{half:e} m needs {} samples, above the limit of {MAX_GRID_POINTS}",
            2 * n_half + 1
        )));
    }
    Grid::centered(0.0, dx, 2 * n_half + 1)
}

enum Leg {
    Paraxial(ParaxialKernel),
    Direct(f64),
}

impl Leg {
    fn run(&self, psi: &WaveField) -> Result<WaveField> {
        match self {
            Leg::Paraxial(k) => k.propagate(psi),
            Leg::Direct(dz) => {
                let mut raw = direct_sum(psi, *psi.grid(), *dz);
                wave::renormalize(&mut raw, psi.grid().dx, psi.flux())?;
                WaveField::new(raw, *psi.grid(), psi.z() + dz, psi.wavelength())
            }
        }
    }
}

/// A beamline with grid, kernels and the fixed masks precomputed. Only the
/// third grating remains free, so one preparation serves a whole fringe scan.
pub struct PreparedBeamline {
    cfg: BeamlineConfig,
    grid: Grid,
    wavelength: f64,
    legs: [Leg; 3],
    source_leg: Leg,
    slit2: Vec<Complex64>,
    g1: Vec<Complex64>,
    g2: Vec<Complex64>,
}

impl PreparedBeamline {
    pub fn new(cfg: &BeamlineConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        for (name, report) in cfg.sampling_reports_on(&grid) {
            report.into_result().map_err(|e| match e {
                Error::Undersampled { .. } => Error::Contract(format!("{name}: {e}")),
                other => other,
            })?;
        }
        let wavelength = cfg.wavelength();
        let make = |dz: f64| -> Result<Leg> {
            Ok(match cfg.propagator {
                Method::Paraxial => Leg::Paraxial(ParaxialKernel::new(grid, wavelength, dz, cfg.pad_factor)?),
                Method::Direct => Leg::Direct(dz),
            })
        };
        let gap = make(cfg.grating_gap)?;
        let gap2 = match &gap {
            Leg::Paraxial(k) => Leg::Paraxial(k.clone()),
            Leg::Direct(dz) => Leg::Direct(*dz),
        };
        let pm = &cfg.phase_model;
        Ok(Self {
            grid,
            wavelength,
            source_leg: make(cfg.slit_separation)?,
            legs: [make(cfg.slit2_to_g1)?, gap, gap2],
            slit2: Element::Aperture(cfg.second_slit).transmission(&grid, pm, None)?,
            // random phase only on the first two gratings
            g1: Element::Grating(cfg.gratings[0]).transmission(&grid, pm, Some(0))?,
            g2: Element::Grating(cfg.gratings[1]).transmission(&grid, pm, Some(1))?,
            cfg: cfg.clone(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `|psi|^2` arriving at the third grating from one point source,
    /// normalized to unit flux entering the first grating.
    pub fn source_intensity_at_g3(&self, source_x: f64) -> Result<Vec<f64>> {
        let z0 = 0.0;
        let psi = WaveField::point_source(self.grid, source_x, z0, self.wavelength)?;
        let psi = self.source_leg.run(&psi)?;
        let psi = masked(psi, &self.slit2)?;
        let at_g1 = self.legs[0].run(&psi)?;
        let entering = at_g1.flux();
        if !(entering > 0.0) {
            return Err(Error::Misconfigured("no flux reaches the first grating".into()));
        }
        let psi = masked(at_g1, &self.g1)?;
        let psi = self.legs[1].run(&psi)?;
        let psi = masked(psi, &self.g2)?;
        let psi = self.legs[2].run(&psi)?;
        Ok(psi.amplitudes().iter().map(|a| a.norm_sqr() / entering).collect())
    }

    /// Incoherent mean over all point sources of [`source_intensity_at_g3`].
    ///
    /// [`source_intensity_at_g3`]: Self::source_intensity_at_g3
    pub fn intensity_at_g3(&self) -> Result<Vec<f64>> {
        let sources = self.cfg.source_positions();
        let per_source = par::map(&sources, |&x| self.source_intensity_at_g3(x));
        let mut total = vec![0.0; self.grid.count];
        for intensity in per_source {
            for (t, v) in total.iter_mut().zip(intensity?) {
                *t += v;
            }
        }
        let n = sources.len() as f64;
        for t in total.iter_mut() {
            *t /= n;
        }
        Ok(total)
    }

    /// Flux behind the third grating, shifted by `g3_offset`, for a given
    /// intensity at its plane.
    pub fn throughput_behind_g3(&self, intensity: &[f64], g3_offset: f64) -> f64 {
        let g3 = translate_grating(&self.cfg.gratings[2], g3_offset);
        let dx = self.grid.dx;
        self.grid
            .coordinates()
            .zip(intensity)
            .map(|(x, i)| i * grating_amplitude(x, &g3))
            .sum::<f64>()
            * dx
    }
}

fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = libm::fmod(x, m);
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

fn masked(psi: WaveField, mask: &[Complex64]) -> Result<WaveField> {
    let grid = *psi.grid();
    let (z, lambda) = (psi.z(), psi.wavelength());
    let mut amps = psi.into_amplitudes();
    for (a, t) in amps.iter_mut().zip(mask) {
        *a *= t;
    }
    if !(flux(&amps, grid.dx) > 0.0) {
        return Err(Error::Misconfigured("a mask blocks the entire beam".into()));
    }
    WaveField::new(amps, grid, z, lambda)
}

/// Throughput vs. lateral offset of the third grating over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeCurve {
    pub offsets: Vec<f64>,
    pub throughput: Vec<f64>,
    pub period: f64,
}

impl FringeCurve {
    pub fn new(offsets: Vec<f64>, throughput: Vec<f64>, period: f64) -> Result<Self> {
        require_positive("fringe period", period)?;
        if offsets.len() != throughput.len() || offsets.is_empty() {
            return Err(Error::Contract("offsets and throughput must be equal, nonzero length".into()));
        }
        if throughput.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Contract("throughput must be finite and nonnegative".into()));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("offsets must increase strictly".into()));
        }
        if offsets[offsets.len() - 1] - offsets[0] >= period {
            return Err(Error::Contract("offsets must lie within one period".into()));
        }
        Ok(Self {
            offsets,
            throughput,
            period,
        })
    }

    /// `n` uniform samples of `f` over `[0, period)`.
    pub fn sample(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let offsets: Vec<f64> = (0..n).map(|k| k as f64 * period / n as f64).collect();
        let throughput = offsets.iter().map(|&o| f(o)).collect();
        Self::new(offsets, throughput, period)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.throughput.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.throughput.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.throughput.iter().sum::<f64>() / self.len() as f64
    }

    /// Periodic linear interpolation at any offset.
    pub fn interpolate(&self, offset: f64) -> f64 {
        let (i, j, t) = self.bracket(offset);
        self.throughput[i] * (1.0 - t) + self.throughput[j] * t
    }

    /// Slope of the interpolant at `offset`, throughput per meter.
    pub fn slope(&self, offset: f64) -> f64 {
        let (i, j, _) = self.bracket(offset);
        let mut width = self.offsets[j] - self.offsets[i];
        if j <= i {
            width += self.period;
        }
        (self.throughput[j] - self.throughput[i]) / width
    }

    fn bracket(&self, offset: f64) -> (usize, usize, f64) {
        let n = self.len();
        let first = self.offsets[0];
        let rel = rem_euclid(offset - first, self.period);
        let x = first + rel;
        let i = match self.offsets.iter().rposition(|&o| o <= x) {
            Some(i) => i,
            None => n - 1,
        };
        let j = (i + 1) % n;
        let mut next = self.offsets[j];
        if j <= i {
            next += self.period;
        }
        let t = if next > self.offsets[i] {
            (x - self.offsets[i]) / (next - self.offsets[i])
        } else {
            0.0
        };
        (i, j, t)
    }

    /// Offset of the steepest segment midpoint: the half-fringe operating point.
    pub fn steepest_offset(&self) -> f64 {
        let n = self.len();
        let mut best = (0.0, 0usize);
        for i in 0..n {
            let s = self.slope(self.offsets[i]).abs();
            if s > best.0 {
                best = (s, i);
            }
        }
        let i = best.1;
        let j = (i + 1) % n;
        let mut next = self.offsets[j];
        if j <= i {
            next += self.period;
        }
        0.5 * (self.offsets[i] + next)
    }
}

/// Normalized throughput behind the third grating shifted by `g3_offset`.
pub fn simulate_throughput(cfg: &BeamlineConfig, g3_offset: f64) -> Result<f64> {
    let beam = PreparedBeamline::new(cfg)?;
    let intensity = beam.intensity_at_g3()?;
    Ok(beam.throughput_behind_g3(&intensity, g3_offset))
}

/// Throughput at `n_offsets` uniform third-grating offsets over `[0, d)`,
/// relative to the configured third-grating offset.
pub fn scan_fringe(cfg: &BeamlineConfig, n_offsets: usize) -> Result<FringeCurve> {
    if n_offsets < 8 {
        return Err(Error::Domain {
            name: "n_offsets",
            value: n_offsets as f64,
            expected: ">= 8",
        });
    }
    let beam = PreparedBeamline::new(cfg)?;
    let intensity = beam.intensity_at_g3()?;
    let period = cfg.gratings[2].period;
    FringeCurve::sample(period, n_offsets, |o| beam.throughput_behind_g3(&intensity, o))
}

/// `(S_max - S_min) / (S_max + S_min)` over the sampled curve.
pub fn contrast(curve: &FringeCurve) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Undefined("contrast of an empty curve"));
    }
    let (max, min) = (curve.max(), curve.min());
    if !(max > 0.0) {
        return Err(Error::Undefined("contrast of an all-zero curve"));
    }
    Ok((max - min) / (max + min))
}

/// Contrast at each energy with every other parameter held fixed.
///
/// Energies outside the electron gun's 4.5-10 keV range are refused unless
/// `allow_out_of_range` is set.
pub fn sweep_energy(
    cfg: &BeamlineConfig,
    energies: &[BeamEnergy],
    n_offsets: usize,
    allow_out_of_range: bool,
) -> Result<Vec<(BeamEnergy, f64)>> {
    if !allow_out_of_range {
        if let Some(e) = energies.iter().find(|e| !e.in_gun_range()) {
            return Err(Error::Domain {
                name: "sweep energy (eV)",
                value: e.ev(),
                expected: "within the 4.5-10 keV gun range",
            });
        }
    }
    energies
        .iter()
        .map(|&e| {
            let curve = scan_fringe(&cfg.with_energy(e), n_offsets)?;
            Ok((e, contrast(&curve)?))
        })
        .collect()
}

/// Fringe-displacement span across the beam height per unit rotation,
/// between the outer gratings.
pub const DEFAULT_GEOMETRY_CONSTANT: f64 = 2.0;

/// Contrast multiplier from rotational misalignment `alpha` over a beam of
/// height `h`: `|sinc(pi c_geom alpha h / d)|`.
pub fn misalignment_factor(beam_height: f64, alpha: f64, period: f64, c_geom: f64) -> Result<f64> {
    require_positive("beam height", beam_height)?;
    require_positive("grating period", period)?;
    if !(alpha >= 0.0) || !(c_geom >= 0.0) {
        return Err(Error::Domain {
            name: "misalignment",
            value: alpha,
            expected: "alpha >= 0 and c_geom >= 0",
        });
    }
    let u = core::f64::consts::PI * c_geom * alpha * beam_height / period;
    Ok(if u == 0.0 { 1.0 } else { (sin(u) / u).abs() })
}
