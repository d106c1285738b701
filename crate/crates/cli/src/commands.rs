//! Experiment recipes behind each subcommand.

use std::io::Write;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use tli_core::interferometer::PreparedBeamline;
use tli_core::kinematics::energy_for_wavelength;
use tli_core::sensing::{cradle_field, field_per_period, scaled_sensitivity, Readout};
use tli_core::{
    contrast, de_broglie_wavelength, resonant_energies, scan_fringe, sweep_energy, talbot_length, BeamEnergy,
    FringeCurve, ParticleSpec,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kinematics,
    SweepEnergy,
    SweepField,
    Fringe,
    Step,
    Sensitivity,
    Scale,
    Validate,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Kinematics,
        Command::SweepEnergy,
        Command::SweepField,
        Command::Fringe,
        Command::Step,
        Command::Sensitivity,
        Command::Scale,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kinematics => "kinematics",
            Command::SweepEnergy => "sweep-energy",
            Command::SweepField => "sweep-field",
            Command::Fringe => "fringe",
            Command::Step => "step",
            Command::Sensitivity => "sensitivity",
            Command::Scale => "scale",
            Command::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .with_context(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.8e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// A header row plus data rows, all of the header's width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Numeric column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    /// Value of a `(quantity, value, ...)` row.
    pub fn lookup(&self, key: &str) -> Option<f64> {
        self.rows.iter().find_map(|r| match (&r[0], &r[1]) {
            (Cell::Text(k), Cell::Num(v)) if k == key => Some(*v),
            _ => None,
        })
    }

    /// RFC 4180 CSV with LF line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                bail!("row {r} has {} fields, header has {}", row.len(), self.header.len());
            }
            for cell in row {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        bail!("non-finite value in row {r}");
                    }
                }
            }
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Table> {
    match cmd {
        Command::Kinematics => kinematics(cfg),
        Command::SweepEnergy => sweep_energy_table(cfg),
        Command::SweepField => sweep_field(cfg),
        Command::Fringe => fringe(cfg),
        Command::Step => step(cfg),
        Command::Sensitivity => sensitivity(cfg),
        Command::Scale => scale(cfg),
        Command::Validate => validate(cfg),
    }
}

fn kinematics(cfg: &RunConfig) -> Result<Table> {
    let p = ParticleSpec::electron();
    let energy = cfg.energy()?;
    let lambda = de_broglie_wavelength(energy, &p);
    let mut t = Table::new(&["quantity", "value", "unit"]);
    let mut row = |q: &str, v: f64, unit: &str| t.push(vec![q.into(), v.into(), unit.into()]);
    row("energy", energy.ev(), "eV");
    row("wavelength", lambda, "m");
    row("talbot_length", talbot_length(cfg.period, lambda)?, "m");
    row("gap_over_half_talbot", 2.0 * cfg.grating_gap / talbot_length(cfg.period, lambda)?, "1");
    row("field_per_period", field_per_period(cfg.period, cfg.length, energy, &p)?, "T");
    let per_amp = cradle_field(&cfg.cradle().with_current(1.0))?;
    row("cradle_field_per_ampere", per_amp, "T/A");
    row("current_per_period", field_per_period(cfg.period, cfg.length, energy, &p)? / per_amp, "A");
    // orders reachable by the gun
    let shortest = de_broglie_wavelength(BeamEnergy::from_ev(BeamEnergy::GUN_RANGE_EV.1)?, &p);
    let longest = de_broglie_wavelength(BeamEnergy::from_ev(BeamEnergy::GUN_RANGE_EV.0)?, &p);
    for r in resonant_energies(cfg.grating_gap, cfg.period, 64, &p, Some(longest))? {
        if r.wavelength < shortest {
            continue;
        }
        row(&format!("resonance_{}_energy", r.order), r.energy.ev(), "eV");
        row(&format!("resonance_{}_wavelength", r.order), r.wavelength, "m");
    }
    row("energy_for_wavelength_check", energy_for_wavelength(lambda, &p)?.ev(), "eV");
    Ok(t)
}

fn sweep_energy_table(cfg: &RunConfig) -> Result<Table> {
    let beamline = cfg.beamline()?;
    let energies = cfg.sweep_energies()?;
    let mut t = Table::new(&["energy_eV", "contrast"]);
    for (e, c) in sweep_energy(&beamline, &energies, cfg.n_offsets, cfg.allow_out_of_range)? {
        t.push(vec![e.ev().into(), c.into()]);
    }
    Ok(t)
}

fn fringe_curve(cfg: &RunConfig) -> Result<FringeCurve> {
    Ok(scan_fringe(&cfg.beamline()?, cfg.n_offsets)?)
}

fn readout(cfg: &RunConfig) -> Result<Readout> {
    Ok(Readout::new(fringe_curve(cfg)?, cfg.length, cfg.energy()?, ParticleSpec::electron()))
}

fn sweep_field(cfg: &RunConfig) -> Result<Table> {
    let r = readout(cfg)?;
    let mut t = Table::new(&["current_A", "B_T", "throughput"]);
    for current in cfg.sweep_currents() {
        let b = cradle_field(&cfg.cradle().with_current(current))?;
        t.push(vec![current.into(), b.into(), r.throughput(b, 0.0)?.into()]);
    }
    Ok(t)
}

fn fringe(cfg: &RunConfig) -> Result<Table> {
    let curve = fringe_curve(cfg)?;
    let mut t = Table::new(&["offset_m", "throughput"]);
    for (o, s) in curve.offsets.iter().zip(&curve.throughput) {
        t.push(vec![(*o).into(), (*s).into()]);
    }
    Ok(t)
}

/// Bias offset, rate scale and step field of the magnetometer run.
pub struct OperatingPoint {
    pub readout: Readout,
    pub bias: f64,
    pub rate_scale: f64,
    pub step_field: f64,
}

pub fn operating_point(cfg: &RunConfig) -> Result<OperatingPoint> {
    let readout = readout(cfg)?;
    let bias = cfg.bias_offset.unwrap_or_else(|| readout.curve.steepest_offset());
    let rate_scale = match cfg.rate_scale {
        Some(r) => r,
        None => readout.rate_for_sensitivity(bias, cfg.target_sensitivity)?,
    };
    let step_field = cradle_field(&cfg.cradle().with_current(cfg.step_current))?;
    Ok(OperatingPoint {
        readout,
        bias,
        rate_scale,
        step_field,
    })
}

fn step(cfg: &RunConfig) -> Result<Table> {
    let op = operating_point(cfg)?;
    let samples = op
        .readout
        .step_response(op.bias, op.step_field, op.rate_scale, cfg.seconds, cfg.seed)?;
    let mut t = Table::new(&["t_s", "counts"]);
    for s in samples {
        t.push(vec![Cell::Int(s.t as u64), Cell::Int(s.counts)]);
    }
    Ok(t)
}

fn sensitivity(cfg: &RunConfig) -> Result<Table> {
    let op = operating_point(cfg)?;
    let report = op.readout.report(op.bias, op.rate_scale)?;
    let mut t = Table::new(&["quantity", "value", "unit"]);
    let mut row = |q: &str, v: f64, unit: &str| t.push(vec![q.into(), v.into(), unit.into()]);
    row("contrast", contrast(&op.readout.curve)?, "1");
    row("bias_offset", op.bias, "m");
    row("rate_scale", op.rate_scale, "1/s");
    row("count_rate", report.count_rate, "1/s");
    row("slope", report.slope, "1/(s T)");
    row("sensitivity", report.sensitivity, "T/Hz^0.5");
    row("step_field", op.step_field, "T");
    row("expected_step_snr", (op.step_field / report.sensitivity).abs(), "1");
    Ok(t)
}

fn scale(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["parameter", "value"]);
    let mut row = |q: &str, v: f64| t.push(vec![q.into(), v.into()]);
    row("base_sensitivity", cfg.base_sensitivity);
    row("length_ratio", cfg.length_ratio);
    row("concentrator_gain", cfg.concentrator_gain);
    row("area_ratio", cfg.area_ratio);
    row(
        "scaled_sensitivity",
        scaled_sensitivity(cfg.base_sensitivity, cfg.length_ratio, cfg.concentrator_gain, cfg.area_ratio)?,
    );
    Ok(t)
}

/// Sampling report for every leg; fails if any leg is undersampled.
fn validate(cfg: &RunConfig) -> Result<Table> {
    let beamline = cfg.beamline()?;
    let reports = beamline.sampling_reports()?;
    let grid = beamline.grid()?;
    let mut t = Table::new(&[
        "leg",
        "delta_z_m",
        "dx_m",
        "required_dx_m",
        "max_separation_m",
        "grid_points",
        "passes",
    ]);
    for (name, r) in &reports {
        t.push(vec![
            (*name).into(),
            r.delta_z.into(),
            r.dx.into(),
            r.required_dx.into(),
            r.max_separation.into(),
            Cell::Int(grid.count as u64),
            Cell::Text(r.passes.to_string()),
        ]);
    }
    if let Some((name, r)) = reports.iter().find(|(_, r)| !r.passes) {
        bail!(
            "leg `{name}` is undersampled: dx = {:e} m, needs <= {:e} m",
            r.dx,
            r.required_dx
        );
    }
    // masks must overlap the beam
    PreparedBeamline::new(&beamline)?;
    Ok(t)
}
