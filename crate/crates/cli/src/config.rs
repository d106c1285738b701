//! `[section]` / `key = value` run configuration.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Lines starting with `#` are comments. Units are SI except energies,
//! which are given in eV.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;
use tli_core::{
    ApertureSpec, BeamEnergy, BeamlineConfig, CradleSpec, GratingSpec, GridPolicy, Method, ParticleSpec,
    PhaseModel,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: expected `key = value` or `[section]`")]
    Syntax { line: usize },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
}

/// Grid choice as written in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Auto,
    Fixed,
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! integer_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
integer_value!(usize, u32, u64);

impl ConfigValue for bool {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("`{s}` is not true or false")),
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Method {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s {
            "paraxial" => Ok(Method::Paraxial),
            "direct" => Ok(Method::Direct),
            _ => Err(format!("`{s}` is not paraxial or direct")),
        }
    }
    fn render(&self) -> String {
        match self {
            Method::Paraxial => "paraxial".into(),
            Method::Direct => "direct".into(),
        }
    }
}

impl ConfigValue for GridKind {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(GridKind::Auto),
            "fixed" => Ok(GridKind::Fixed),
            _ => Err(format!("`{s}` is not auto or fixed")),
        }
    }
    fn render(&self) -> String {
        match self {
            GridKind::Auto => "auto".into(),
            GridKind::Fixed => "fixed".into(),
        }
    }
}

/// `auto` or a number.
impl ConfigValue for Option<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            f64::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        match self {
            None => "auto".into(),
            Some(v) => v.render(),
        }
    }
}

impl ConfigValue for Option<PathBuf> {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(if s.is_empty() { None } else { Some(PathBuf::from(s)) })
    }
    fn render(&self) -> String {
        match self {
            None => String::new(),
            Some(p) => p.display().to_string(),
        }
    }
}

type Check<T> = fn(&T) -> Result<(), &'static str>;

fn any<T>(_: &T) -> Result<(), &'static str> {
    Ok(())
}

fn positive(v: &f64) -> Result<(), &'static str> {
    if *v > 0.0 {
        Ok(())
    } else {
        Err("must be > 0")
    }
}

fn non_negative(v: &f64) -> Result<(), &'static str> {
    if *v >= 0.0 {
        Ok(())
    } else {
        Err("must be >= 0")
    }
}

fn fraction(v: &f64) -> Result<(), &'static str> {
    if *v > 0.0 && *v < 1.0 {
        Ok(())
    } else {
        Err("must lie strictly between 0 and 1")
    }
}

fn at_least_one<T: Copy + Into<u64>>(v: &T) -> Result<(), &'static str> {
    if (*v).into() >= 1 {
        Ok(())
    } else {
        Err("must be >= 1")
    }
}

fn at_least_one_usize(v: &usize) -> Result<(), &'static str> {
    at_least_one(&(*v as u64))
}

fn at_least_two(v: &usize) -> Result<(), &'static str> {
    if *v >= 2 {
        Ok(())
    } else {
        Err("must be >= 2")
    }
}

fn at_least_eight(v: &usize) -> Result<(), &'static str> {
    if *v >= 8 {
        Ok(())
    } else {
        Err("must be >= 8")
    }
}

fn window(v: &f64) -> Result<(), &'static str> {
    if *v >= 1.0 {
        Ok(())
    } else {
        Err("must be >= 1")
    }
}

fn positive_or_auto(v: &Option<f64>) -> Result<(), &'static str> {
    match v {
        Some(x) if *x <= 0.0 => Err("must be > 0 or auto"),
        _ => Ok(()),
    }
}

fn finite_or_auto(_: &Option<f64>) -> Result<(), &'static str> {
    Ok(())
}

macro_rules! run_config {
    ($( [$section:literal] $( $key:ident : $ty:ty = $default:expr, $check:expr; )* )*) => {
        /// Everything one CLI invocation needs.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $( $( pub $key: $ty, )* )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $( $( $key: $default, )* )* }
            }
        }

        impl RunConfig {
            const SECTIONS: &'static [&'static str] = &[$($section),*];

            fn set(&mut self, section: &str, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
                let value_error = |message: String| ConfigError::Value { line, key: key.to_string(), message };
                match (section, key) {
                    $( $( ($section, stringify!($key)) => {
                        let v = <$ty as ConfigValue>::parse_value(raw).map_err(value_error)?;
                        let check: Check<$ty> = $check;
                        check(&v).map_err(|m| value_error(m.to_string()))?;
                        self.$key = v;
                        Ok(())
                    } )* )*
                    _ => Err(ConfigError::UnknownKey { line, section: section.to_string(), key: key.to_string() }),
                }
            }

            fn render_sections(&self, out: &mut String) {
                $(
                    out.push_str(concat!("[", $section, "]\n"));
                    $( out.push_str(&format!("{} = {}\n", stringify!($key), ConfigValue::render(&self.$key))); )*
                    out.push('\n');
                )*
            }
        }
    };
}

run_config! {
    ["run"]
    seed: u64 = 0, any;
    output: Option<PathBuf> = None, any;

    ["beamline"]
    source_slit_width: f64 = 5e-6, positive;
    source_slit_center: f64 = 0.0, any;
    second_slit_width: f64 = 2e-6, positive;
    second_slit_center: f64 = 0.0, any;
    slit_separation: f64 = 0.24, positive;
    slit2_to_g1: f64 = 0.05, positive;
    grating_gap: f64 = 3.06e-3, positive;
    period: f64 = 100e-9, positive;
    open_fraction: f64 = 0.35, fraction;
    grating_extent: f64 = 1e-3, positive;
    g1_offset: f64 = 0.0, any;
    g2_offset: f64 = 0.0, any;
    g3_offset: f64 = 0.0, any;
    energy_ev: f64 = 10_000.0, positive;
    n_sources: usize = 32, at_least_one_usize;
    propagator: Method = Method::Paraxial, any;
    grid: GridKind = GridKind::Auto, any;
    samples_per_period: usize = 100, at_least_two;
    window_factor: f64 = 1.5, window;
    pad_factor: usize = 2, at_least_two;

    ["phase"]
    image_charge_strength: f64 = 0.0, non_negative;
    image_charge_range: f64 = 20e-9, positive;
    random_phase_max: f64 = 0.0, non_negative;

    ["cradle"]
    edge_length: f64 = 54e-3, positive;
    efficiency: f64 = 1.0, positive;

    ["field_region"]
    length: f64 = 6.12e-3, positive;

    ["sweep"]
    energy_min_ev: f64 = 4_500.0, positive;
    energy_max_ev: f64 = 10_000.0, positive;
    energy_points: usize = 23, at_least_one_usize;
    n_offsets: usize = 16, at_least_eight;
    current_min: f64 = -0.15, any;
    current_max: f64 = 0.15, any;
    current_points: usize = 121, at_least_two;
    allow_out_of_range: bool = false, any;

    ["step"]
    step_current: f64 = 2.5e-3, any;
    seconds: u32 = 200, at_least_one;
    rate_scale: Option<f64> = None, positive_or_auto;
    target_sensitivity: f64 = 9.5e-9, positive;
    bias_offset: Option<f64> = None, finite_or_auto;

    ["scale"]
    base_sensitivity: f64 = 9.5e-9, positive;
    length_ratio: f64 = 10.0 / 3.0, positive;
    concentrator_gain: f64 = 20.0, positive;
    area_ratio: f64 = (3e-3 / 10e-6) * (1e-3 / 30e-6), positive;
}

/// Parses a configuration, filling omitted keys with defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section = String::from("run");
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut lines_of: Vec<(String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Syntax { line })?.trim();
            if !RunConfig::SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection {
                    line,
                    section: name.to_string(),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        let id = (section.clone(), key.to_string());
        if seen.contains(&id) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        cfg.set(&section, key, value, line)?;
        seen.push(id);
        lines_of.push((key.to_string(), line));
    }
    cfg.cross_check(&lines_of)?;
    Ok(cfg)
}

impl RunConfig {
    /// Canonical text form; `parse_config(cfg.to_text())` returns `cfg`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.render_sections(&mut out);
        out
    }

    fn cross_check(&self, lines_of: &[(String, usize)]) -> Result<(), ConfigError> {
        let fail = |key: &str, message: &str| {
            let line = lines_of.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l);
            Err(ConfigError::Value {
                line,
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if self.energy_max_ev < self.energy_min_ev {
            return fail("energy_max_ev", "must be >= energy_min_ev");
        }
        if self.current_max <= self.current_min {
            return fail("current_max", "must be > current_min");
        }
        if !self.allow_out_of_range {
            let (lo, hi) = BeamEnergy::GUN_RANGE_EV;
            if self.energy_min_ev < lo || self.energy_max_ev > hi {
                return fail(
                    if self.energy_min_ev < lo { "energy_min_ev" } else { "energy_max_ev" },
                    "outside the 4500-10000 eV gun range (set allow_out_of_range = true)",
                );
            }
        }
        Ok(())
    }

    /// The interferometer described by the `[beamline]` and `[phase]` sections.
    pub fn beamline(&self) -> tli_core::Result<BeamlineConfig> {
        let grating = |offset: f64| GratingSpec::new(self.period, self.open_fraction, offset, self.grating_extent);
        let cfg = BeamlineConfig {
            particle: ParticleSpec::electron(),
            source_slit: ApertureSpec::new(self.source_slit_width, self.source_slit_center)?,
            second_slit: ApertureSpec::new(self.second_slit_width, self.second_slit_center)?,
            slit_separation: self.slit_separation,
            slit2_to_g1: self.slit2_to_g1,
            grating_gap: self.grating_gap,
            gratings: [grating(self.g1_offset)?, grating(self.g2_offset)?, grating(self.g3_offset)?],
            phase_model: PhaseModel {
                image_charge_strength: self.image_charge_strength,
                image_charge_range: self.image_charge_range,
                random_phase_max: self.random_phase_max,
                rng_seed: self.seed,
            },
            energy: BeamEnergy::from_ev(self.energy_ev)?,
            n_sources: self.n_sources,
            propagator: self.propagator,
            grid: match self.grid {
                GridKind::Auto => GridPolicy::Auto {
                    min_samples_per_period: self.samples_per_period,
                },
                GridKind::Fixed => GridPolicy::Fixed {
                    samples_per_period: self.samples_per_period,
                },
            },
            window_factor: self.window_factor,
            pad_factor: self.pad_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cradle(&self) -> CradleSpec {
        CradleSpec {
            edge_length: self.edge_length,
            current: 0.0,
            efficiency: self.efficiency,
        }
    }

    pub fn energy(&self) -> tli_core::Result<BeamEnergy> {
        BeamEnergy::from_ev(self.energy_ev)
    }

    /// `energy_points` energies spaced evenly over the sweep range.
    pub fn sweep_energies(&self) -> tli_core::Result<Vec<BeamEnergy>> {
        linspace(self.energy_min_ev, self.energy_max_ev, self.energy_points)
            .into_iter()
            .map(BeamEnergy::from_ev)
            .collect()
    }

    pub fn sweep_currents(&self) -> Vec<f64> {
        linspace(self.current_min, self.current_max, self.current_points)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
