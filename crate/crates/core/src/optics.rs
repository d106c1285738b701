//! Masks applied at beamline planes: `psi_out = A(x) exp(i phi(x)) psi_in`.

use alloc::vec::Vec;

use libm::{exp, round};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{require_positive, Error, Result};
use crate::wave::{Grid, WaveField};

/// Open fraction that best reproduces the measured contrast maxima.
pub const FITTED_OPEN_FRACTION: f64 = 0.35;
/// Open fractions the gratings were manufactured to.
pub const MANUFACTURED_OPEN_FRACTION: (f64, f64) = (0.50, 0.60);

/// Rectangular collimation slit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureSpec {
    pub width: f64,
    pub center: f64,
}

impl ApertureSpec {
    pub fn new(width: f64, center: f64) -> Result<Self> {
        require_positive("aperture width", width)?;
        Ok(Self { width, center })
    }

    pub fn is_open(&self, x: f64) -> bool {
        (x - self.center).abs() <= 0.5 * self.width
    }
}

/// Periodic bar grating. The comb and its support window move together
/// with `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec {
    pub period: f64,
    pub open_fraction: f64,
    pub offset: f64,
    /// Width of the patterned area, centered on `offset`.
    pub extent: f64,
}

impl GratingSpec {
    pub fn new(period: f64, open_fraction: f64, offset: f64, extent: f64) -> Result<Self> {
        require_positive("grating period", period)?;
        require_positive("grating extent", extent)?;
        if !(open_fraction > 0.0 && open_fraction < 1.0) {
            return Err(Error::Domain {
                name: "open fraction",
                value: open_fraction,
                expected: "strictly between 0 and 1",
            });
        }
        if !offset.is_finite() {
            return Err(Error::Domain {
                name: "grating offset",
                value: offset,
                expected: "finite",
            });
        }
        Ok(Self {
            period,
            open_fraction,
            offset,
            extent,
        })
    }

    /// 100 nm period at the fitted open fraction, 1 mm wide.
    pub fn reference() -> Self {
        Self {
            period: 100e-9,
            open_fraction: FITTED_OPEN_FRACTION,
            offset: 0.0,
            extent: 1e-3,
        }
    }

    /// Slit index and position within the period, in units of `period`,
    /// measured from the nearest slit center.
    fn locate(&self, x: f64) -> (i64, f64) {
        let u = (x - self.offset) / self.period;
        let n = round(u);
        (n as i64, u - n)
    }

    fn inside_extent(&self, x: f64) -> bool {
        (x - self.offset).abs() <= 0.5 * self.extent
    }
}

/// Phenomenological phase imprinted by the grating bars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModel {
    /// Image-charge phase scale, rad m. The phase at a bar wall is
    /// `image_charge_strength / image_charge_range`.
    pub image_charge_strength: f64,
    /// Decay length of the image-charge phase away from a wall, m.
    pub image_charge_range: f64,
    /// Upper bound of the per-slit uniform random phase, rad.
    pub random_phase_max: f64,
    pub rng_seed: u64,
}

impl Default for PhaseModel {
    fn default() -> Self {
        Self {
            image_charge_strength: 0.0,
            image_charge_range: 20e-9,
            random_phase_max: 0.0,
            rng_seed: 0,
        }
    }
}

impl PhaseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("image charge strength", self.image_charge_strength),
            ("random phase amplitude", self.random_phase_max),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    expected: "finite and >= 0",
                });
            }
        }
        require_positive("image charge range", self.image_charge_range)?;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.image_charge_strength == 0.0 && self.random_phase_max == 0.0
    }

    /// Random phase for one slit of one plane; a pure function of
    /// `(rng_seed, stream, slit)` so evaluation order never matters.
    pub fn random_phase(&self, stream: u64, slit: i64) -> f64 {
        if self.random_phase_max == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(stream);
        // zigzag so negative slit indices get their own block
        let index = ((slit << 1) ^ (slit >> 63)) as u64;
        rng.set_word_pos(u128::from(index) * 16);
        rng.random::<f64>() * self.random_phase_max
    }
}

/// Slit edges are widened by this fraction of a period so that grid points
/// landing on an edge stay open whatever the rounding of `x - offset`.
const EDGE_SNAP: f64 = 1e-9;

/// A plane element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Aperture(ApertureSpec),
    Grating(GratingSpec),
}

/// Binary transmission of the grating comb: 1 inside an open slit (edges
/// included), 0 on a bar or outside the patterned extent.
pub fn grating_amplitude(x: f64, g: &GratingSpec) -> f64 {
    if !g.inside_extent(x) {
        return 0.0;
    }
    let (_, frac) = g.locate(x);
    if frac.abs() <= 0.5 * g.open_fraction + EDGE_SNAP {
        1.0
    } else {
        0.0
    }
}

/// Returns `g` shifted laterally by `delta`.
pub fn translate_grating(g: &GratingSpec, delta: f64) -> GratingSpec {
    GratingSpec {
        offset: g.offset + delta,
        ..*g
    }
}

impl Element {
    /// Complex transmission `A(x) exp(i phi(x))` sampled on `grid`.
    ///
    /// `random_stream` enables the per-slit random phase with the given
    /// stream id; apertures ignore the phase model entirely.
    pub fn transmission(
        &self,
        grid: &Grid,
        phase: &PhaseModel,
        random_stream: Option<u64>,
    ) -> Result<Vec<Complex64>> {
        phase.validate()?;
        let mask: Vec<Complex64> = match self {
            Element::Aperture(a) => grid
                .coordinates()
                .map(|x| Complex64::new(if a.is_open(x) { 1.0 } else { 0.0 }, 0.0))
                .collect(),
            Element::Grating(g) => grating_transmission(g, grid, phase, random_stream),
        };
        if mask.iter().all(|t| t.re == 0.0 && t.im == 0.0) {
            return Err(Error::Contract(alloc::format!(
                "{} does not overlap the grid [{:e}, {:e}] m",
                self.name(),
                grid.x_start,
                grid.x_end()
            )));
        }
        Ok(mask)
    }

    fn name(&self) -> &'static str {
        match self {
            Element::Aperture(_) => "aperture",
            Element::Grating(_) => "grating",
        }
    }
}

fn grating_transmission(
    g: &GratingSpec,
    grid: &Grid,
    phase: &PhaseModel,
    random_stream: Option<u64>,
) -> Vec<Complex64> {
    let half_open = 0.5 * g.open_fraction;
    let wall_phase = phase.image_charge_strength / phase.image_charge_range;
    let mut cached: Option<(i64, f64)> = None;
    grid.coordinates()
        .map(|x| {
            if !g.inside_extent(x) {
                return Complex64::new(0.0, 0.0);
            }
            let (slit, frac) = g.locate(x);
            if frac.abs() > half_open + EDGE_SNAP {
                return Complex64::new(0.0, 0.0);
            }
            let mut phi = 0.0;
            if wall_phase != 0.0 {
                let wall_distance = (half_open - frac.abs()).max(0.0) * g.period;
                phi += wall_phase * exp(-wall_distance / phase.image_charge_range);
            }
            if let Some(stream) = random_stream {
                let r = match cached {
                    Some((s, r)) if s == slit => r,
                    _ => {
                        let r = phase.random_phase(stream, slit);
                        cached = Some((slit, r));
                        r
                    }
                };
                phi += r;
            }
            if phi == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, phi)
            }
        })
        .collect()
}

/// Applies `element` to `psi`. See [`Element::transmission`].
pub fn apply_plane(
    psi: &WaveField,
    element: &Element,
    phase: &PhaseModel,
    random_stream: Option<u64>,
) -> Result<WaveField> {
    let t = element.transmission(psi.grid(), phase, random_stream)?;
    let amplitudes = psi.amplitudes().iter().zip(&t).map(|(a, t)| a * t).collect();
    WaveField::new(amplitudes, *psi.grid(), psi.z(), psi.wavelength())
}
