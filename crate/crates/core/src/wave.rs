//! Plane-to-plane propagation of a scalar wavefield along the beam axis.
//!
//! The free-space kernel between planes separated by `delta_z` is a pure
//! phase `exp(2 pi i r / lambda)` with `r` the straight-line path length. Two
//! evaluators are provided:
//!
//! * [`propagate_direct`] sums the exact kernel over every source sample,
//!   `O(N * M)`, and accepts any target grid.
//! * [`propagate_paraxial`] expands `r ~ dz + u^2 / (2 dz)` and evaluates the
//!   resulting convolution with a zero-padded FFT, `O(P log P)`.
//!
//! Both drop the constant carrier `exp(2 pi i dz / lambda)`, which cancels in
//! every intensity, and both rescale their output so the total probability
//! `sum |psi|^2 dx` equals the input's.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use num_complex::Complex64;

use crate::error::{require_positive, Error, Result};
use crate::fft::FftPlan;
use crate::par;

/// Uniform 1-D sampling grid: `x_i = x_start + i * dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_start: f64,
    pub dx: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(x_start: f64, dx: f64, count: usize) -> Result<Self> {
        require_positive("grid step", dx)?;
        if !x_start.is_finite() {
            return Err(Error::Domain {
                name: "grid start",
                value: x_start,
                expected: "finite",
            });
        }
        if count < 2 {
            return Err(Error::Domain {
                name: "grid count",
                value: count as f64,
                expected: ">= 2",
            });
        }
        Ok(Self { x_start, dx, count })
    }

    /// Grid of `count` samples with step `dx`, symmetric about `center`.
    pub fn centered(center: f64, dx: f64, count: usize) -> Result<Self> {
        Self::new(center - 0.5 * dx * (count as f64 - 1.0), dx, count)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_start + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.count - 1)
    }

    /// Distance between the outermost samples.
    pub fn span(&self) -> f64 {
        self.dx * (self.count - 1) as f64
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.x_start + self.x_end())
    }

    /// Index of the sample nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = libm::round((x - self.x_start) / self.dx);
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.count - 1)
        }
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.x(i))
    }

    fn same_as(&self, other: &Grid) -> bool {
        let tol = 1e-9 * self.dx;
        self.count == other.count
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x_start - other.x_start).abs() <= tol
    }
}

/// Complex amplitude sampled on a [`Grid`] at longitudinal position `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    amplitudes: Vec<Complex64>,
    grid: Grid,
    z: f64,
    wavelength: f64,
}

impl WaveField {
    pub fn new(amplitudes: Vec<Complex64>, grid: Grid, z: f64, wavelength: f64) -> Result<Self> {
        require_positive("wavelength", wavelength)?;
        if amplitudes.len() != grid.count {
            return Err(Error::Contract(format!(
                "{} amplitudes for a grid of {} samples",
                amplitudes.len(),
                grid.count
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Contract("wavefield contains non-finite amplitudes".into()));
        }
        Ok(Self {
            amplitudes,
            grid,
            z,
            wavelength,
        })
    }

    /// A single nonzero sample at the grid point nearest `x`, carrying unit flux.
    pub fn point_source(grid: Grid, x: f64, z: f64, wavelength: f64) -> Result<Self> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.count];
        amplitudes[grid.nearest_index(x)] = Complex64::new(1.0 / sqrt(grid.dx), 0.0);
        Self::new(amplitudes, grid, z, wavelength)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Total probability `sum |psi|^2 dx`.
    pub fn flux(&self) -> f64 {
        flux(&self.amplitudes, self.grid.dx)
    }

    /// Mirror image `x -> -x` about the origin; requires a grid symmetric about 0.
    pub fn reflected(&self) -> Result<Self> {
        if self.grid.center().abs() > 1e-9 * self.grid.dx {
            return Err(Error::Contract("reflection needs a grid centered on x = 0".into()));
        }
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.reverse();
        Ok(Self {
            amplitudes,
            ..*self
        })
    }
}

pub(crate) fn flux(amplitudes: &[Complex64], dx: f64) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx
}

/// Kernel evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Exact path-length phase summed sample by sample.
    Direct,
    /// Quadratic-phase convolution via zero-padded FFT.
    #[default]
    Paraxial,
}

/// Where and how to propagate a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPlan {
    pub delta_z: f64,
    pub target: Grid,
    pub method: Method,
    /// Zero-padding factor of the paraxial convolution; at least 2.
    pub pad_factor: usize,
    /// Skip the kernel sampling check.
    pub allow_undersampled: bool,
}

impl PropagationPlan {
    pub fn new(delta_z: f64, target: Grid, method: Method) -> Result<Self> {
        require_positive("propagation distance", delta_z)?;
        Ok(Self {
            delta_z,
            target,
            method,
            pad_factor: 2,
            allow_undersampled: false,
        })
    }
}

/// Outcome of the kernel sampling test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingReport {
    pub passes: bool,
    /// Step of the source grid.
    pub dx: f64,
    /// Largest step keeping the kernel phase change between neighbours below pi.
    pub required_dx: f64,
    /// Largest transverse separation between a source and a target sample.
    pub max_separation: f64,
    pub delta_z: f64,
}

impl SamplingReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passes {
            Ok(self)
        } else {
            Err(Error::Undersampled {
                dx: self.dx,
                required_dx: self.required_dx,
                delta_z: self.delta_z,
            })
        }
    }
}

/// Checks `dx <= lambda dz / (2 (X_src + X_tgt))` where `X_src` is the
/// half-span of the field's grid and `X_tgt = target_span / 2`, both windows
/// centered on the same axis.
pub fn sampling_check(psi: &WaveField, delta_z: f64, target_span: f64) -> SamplingReport {
    let separation = 0.5 * (psi.grid.span() + target_span);
    report(psi.grid.dx, psi.wavelength, delta_z, separation)
}

/// Same criterion with the exact largest separation between two grids.
pub fn sampling_check_grids(source: &Grid, target: &Grid, wavelength: f64, delta_z: f64) -> SamplingReport {
    let separation = (target.x_end() - source.x_start).abs().max((source.x_end() - target.x_start).abs());
    report(source.dx, wavelength, delta_z, separation)
}

fn report(dx: f64, wavelength: f64, delta_z: f64, separation: f64) -> SamplingReport {
    let required_dx = if separation > 0.0 {
        wavelength * delta_z / (2.0 * separation)
    } else {
        f64::INFINITY
    };
    SamplingReport {
        passes: dx <= required_dx,
        dx,
        required_dx,
        max_separation: separation,
        delta_z,
    }
}

/// Dispatches on `plan.method`.
pub fn propagate(psi: &WaveField, plan: &PropagationPlan) -> Result<WaveField> {
    match plan.method {
        Method::Direct => propagate_direct(psi, plan),
        Method::Paraxial => propagate_paraxial(psi, plan),
    }
}

/// Exact-kernel propagation onto `plan.target`.
pub fn propagate_direct(psi: &WaveField, plan: &PropagationPlan) -> Result<WaveField> {
    require_positive("propagation distance", plan.delta_z)?;
    if !plan.allow_undersampled {
        sampling_check_grids(&psi.grid, &plan.target, psi.wavelength, plan.delta_z).into_result()?;
    }
    let raw = direct_sum(psi, plan.target, plan.delta_z);
    finish(psi, raw, plan.target, plan.delta_z)
}

/// Unnormalized `sum_j exp(2 pi i (r - dz) / lambda) psi_j dx` on `target`.
pub fn direct_sum(psi: &WaveField, target: Grid, delta_z: f64) -> Vec<Complex64> {
    let k = 2.0 * PI / psi.wavelength;
    let src = &psi.grid;
    let sources: Vec<(f64, Complex64)> = psi
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
        .map(|(j, a)| (src.x(j), *a * src.dx))
        .collect();
    let indices: Vec<usize> = (0..target.count).collect();
    par::map(&indices, |&i| {
        let x = target.x(i);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(xs, a) in &sources {
            let u = x - xs;
            let r = sqrt(u * u + delta_z * delta_z);
            // r - dz without cancellation
            let phase = k * (u * u / (r + delta_z));
            acc += a * Complex64::new(cos(phase), sin(phase));
        }
        acc
    })
}

/// Quadratic-phase convolution on the field's own grid.
pub fn propagate_paraxial(psi: &WaveField, plan: &PropagationPlan) -> Result<WaveField> {
    if !psi.grid.same_as(&plan.target) {
        return Err(Error::Contract(
            "paraxial propagation needs identical source and target grids".into(),
        ));
    }
    if !plan.allow_undersampled {
        sampling_check_grids(&psi.grid, &plan.target, psi.wavelength, plan.delta_z).into_result()?;
    }
    let kernel = ParaxialKernel::new(psi.grid, psi.wavelength, plan.delta_z, plan.pad_factor)?;
    let raw = kernel.apply(&psi.amplitudes);
    finish(psi, raw, psi.grid, plan.delta_z)
}

fn finish(psi: &WaveField, mut raw: Vec<Complex64>, target: Grid, delta_z: f64) -> Result<WaveField> {
    renormalize(&mut raw, target.dx, psi.flux())?;
    WaveField::new(raw, target, psi.z + delta_z, psi.wavelength)
}

/// Scales `amplitudes` so that `sum |a|^2 dx == flux`.
pub fn renormalize(amplitudes: &mut [Complex64], dx: f64, target_flux: f64) -> Result<()> {
    let current = flux(amplitudes, dx);
    if !(current > 0.0) {
        return Err(Error::Misconfigured("no flux left to renormalize".into()));
    }
    let scale = sqrt(target_flux / current);
    for a in amplitudes.iter_mut() {
        *a *= scale;
    }
    Ok(())
}

/// Precomputed transform of the Fresnel kernel for one grid, wavelength and
/// distance. Reusable across fields, which is where the interferometer gets
/// its speed.
#[derive(Debug, Clone)]
pub struct ParaxialKernel {
    grid: Grid,
    wavelength: f64,
    delta_z: f64,
    fft: FftPlan,
    spectrum: Vec<Complex64>,
}

impl ParaxialKernel {
    pub fn new(grid: Grid, wavelength: f64, delta_z: f64, pad_factor: usize) -> Result<Self> {
        require_positive("wavelength", wavelength)?;
        require_positive("propagation distance", delta_z)?;
        if pad_factor < 2 {
            return Err(Error::Domain {
                name: "pad factor",
                value: pad_factor as f64,
                expected: ">= 2",
            });
        }
        let n = grid.count;
        let len = (pad_factor * n).max(2 * n - 1).next_power_of_two();
        let fft = FftPlan::new(len);
        // dx / sqrt(i lambda dz) makes the continuous transform unitary.
        let prefactor = Complex64::from_polar(grid.dx / sqrt(wavelength * delta_z), -PI / 4.0);
        let chirp = PI / (wavelength * delta_z);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        for m in 0..n {
            let u = m as f64 * grid.dx;
            let h = prefactor * Complex64::from_polar(1.0, chirp * u * u);
            spectrum[m] = h;
            if m > 0 {
                spectrum[len - m] = h;
            }
        }
        fft.forward(&mut spectrum);
        Ok(Self {
            grid,
            wavelength,
            delta_z,
            fft,
            spectrum,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn delta_z(&self) -> f64 {
        self.delta_z
    }

    /// Padded transform length.
    pub fn padded_len(&self) -> usize {
        self.fft.len()
    }

    /// Linear convolution of `amplitudes` with the kernel, no renormalization.
    pub fn apply(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.count;
        assert_eq!(amplitudes.len(), n, "field does not match kernel grid");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        buf[..n].copy_from_slice(amplitudes);
        self.fft.forward(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.spectrum) {
            *b *= h;
        }
        self.fft.inverse(&mut buf);
        buf.truncate(n);
        buf
    }

    /// [`apply`](Self::apply) followed by flux renormalization.
    pub fn propagate(&self, psi: &WaveField) -> Result<WaveField> {
        if !psi.grid.same_as(&self.grid) || psi.wavelength != self.wavelength {
            return Err(Error::Contract("field does not match the kernel's grid or wavelength".into()));
        }
        let raw = self.apply(&psi.amplitudes);
        finish(psi, raw, self.grid, self.delta_z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        let g = Grid::centered(0.0, 1.0, 5).unwrap();
        assert_eq!(g.x_start, -2.0);
        assert_eq!(g.x_end(), 2.0);
        assert_eq!(g.nearest_index(0.4), 2);
        assert_eq!(g.nearest_index(-10.0), 0);
        assert_eq!(g.nearest_index(10.0), 4);
    }

    #[test]
    fn wavefield_rejects_bad_input() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        assert!(WaveField::new(vec![c(0.0, 0.0); 2], g, 0.0, 1.0).is_err());
        assert!(WaveField::new(vec![c(f64::NAN, 0.0); 3], g, 0.0, 1.0).is_err());
        assert!(WaveField::new(vec![c(1.0, 0.0); 3], g, 0.0, 0.0).is_err());
    }

    #[test]
    fn sampling_example_at_8_8_kev() {
        // 20 um windows (half-spans of 10 um) at 13.1 pm over 3.06 mm.
        let g = Grid::centered(0.0, 1e-9, 20_001).unwrap();
        let psi = WaveField::point_source(g, 0.0, 0.0, 13.1e-12).unwrap();
        let r = sampling_check(&psi, 3.06e-3, 20e-6);
        assert!((r.required_dx - 1.0e-9).abs() < 0.01e-9, "{}", r.required_dx);
        assert!(!r.passes || r.dx <= r.required_dx);
        let r2 = sampling_check(&psi, 6.12e-3, 20e-6);
        assert!((r2.required_dx - 2.0 * r.required_dx).abs() < 1e-20);
    }

    #[test]
    fn sampling_flags_coarse_grid() {
        let g = Grid::centered(0.0, 10e-9, 2001).unwrap();
        let psi = WaveField::point_source(g, 0.0, 0.0, 13.1e-12).unwrap();
        let r = sampling_check(&psi, 3.06e-3, 20e-6);
        assert!(!r.passes);
        assert!(r.required_dx < r.dx);
        let plan = PropagationPlan::new(3.06e-3, g, Method::Paraxial).unwrap();
        match propagate(&psi, &plan) {
            Err(Error::Undersampled { required_dx, .. }) => assert!(required_dx < 10e-9),
            other => panic!("expected undersampled error, got {other:?}"),
        }
    }

    #[test]
    fn point_source_gives_flat_magnitude() {
        let g = Grid::centered(0.0, 2e-9, 501).unwrap();
        let psi = WaveField::point_source(g, 0.0, 0.0, 13e-12).unwrap();
        for method in [Method::Direct, Method::Paraxial] {
            let plan = PropagationPlan::new(1e-3, g, method).unwrap();
            let out = propagate(&psi, &plan).unwrap();
            let i = out.intensity();
            let mean = i.iter().sum::<f64>() / i.len() as f64;
            assert!(i.iter().all(|v| (v - mean).abs() < 1e-9 * mean), "{method:?}");
            assert!((out.flux() - psi.flux()).abs() < 1e-12 * psi.flux());
            assert_eq!(out.z(), 1e-3);
        }
    }

    #[test]
    fn plane_wave_center_stays_flat() {
        // 10 um window, light in the central 9 um, 0.1 mm hop: the hard
        // edges sit ~150 Fresnel scales from the probed center.
        let g = Grid::centered(0.0, 0.05e-9, 200_001).unwrap();
        let amps = g
            .coordinates()
            .map(|x| if x.abs() <= 4.5e-6 { c(1.0, 0.0) } else { c(0.0, 0.0) })
            .collect();
        let psi = WaveField::new(amps, g, 0.0, 13e-12).unwrap();
        let plan = PropagationPlan::new(0.1e-3, g, Method::Paraxial).unwrap();
        let out = propagate(&psi, &plan).unwrap();
        let i = out.intensity();
        let central: Vec<f64> = g
            .coordinates()
            .zip(&i)
            .filter(|(x, _)| x.abs() <= 0.5e-6)
            .map(|(_, v)| *v)
            .collect();
        let mean = central.iter().sum::<f64>() / central.len() as f64;
        let worst = central.iter().map(|v| (v - mean).abs() / mean).fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn paraxial_requires_matching_grid() {
        let g = Grid::centered(0.0, 1e-9, 101).unwrap();
        let psi = WaveField::point_source(g, 0.0, 0.0, 13e-12).unwrap();
        let other = Grid::centered(0.0, 1e-9, 103).unwrap();
        let plan = PropagationPlan::new(1e-3, other, Method::Paraxial).unwrap();
        assert!(matches!(propagate_paraxial(&psi, &plan), Err(Error::Contract(_))));
        let mut plan = PropagationPlan::new(1e-3, g, Method::Paraxial).unwrap();
        plan.pad_factor = 1;
        assert!(propagate_paraxial(&psi, &plan).is_err());
    }

    #[test]
    fn unnormalized_gaussian_conserves_flux() {
        let g = Grid::centered(0.0, 2e-9, 4096).unwrap();
        let w0 = 200e-9;
        let amps: Vec<Complex64> = g
            .coordinates()
            .map(|x| c(libm::exp(-x * x / (w0 * w0)), 0.0))
            .collect();
        let kernel = ParaxialKernel::new(g, 13e-12, 3e-3, 2).unwrap();
        let out = kernel.apply(&amps);
        let before = flux(&amps, g.dx);
        let after = flux(&out, g.dx);
        assert!((after - before).abs() / before < 1e-6, "{}", (after - before) / before);
        assert!(kernel.padded_len() >= 2 * g.count);
    }

    #[test]
    fn reflection_commutes_with_propagation() {
        let g = Grid::centered(0.0, 1e-9, 1001).unwrap();
        let amps: Vec<Complex64> = g
            .coordinates()
            .map(|x| {
                if (x - 60e-9).abs() < 10e-9 {
                    c(1.0, 0.3)
                } else if (x + 150e-9).abs() < 25e-9 {
                    c(-0.4, 0.8)
                } else {
                    c(0.0, 0.0)
                }
            })
            .collect();
        let psi = WaveField::new(amps, g, 0.0, 13e-12).unwrap();
        for method in [Method::Direct, Method::Paraxial] {
            let plan = PropagationPlan::new(1e-3, g, method).unwrap();
            let a = propagate(&psi, &plan).unwrap().reflected().unwrap();
            let b = propagate(&psi.reflected().unwrap(), &plan).unwrap();
            let scale = a.amplitudes().iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() <= 1e-10 * scale, "{method:?}");
            }
        }
    }
}
