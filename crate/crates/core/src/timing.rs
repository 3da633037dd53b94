//! Pulse-train and modulation scheduling: decides which drive phase each
//! counter-propagating pulse sees, enforcing the loop-asymmetry timing
//! constraint.
//!
//! The delay-line imbalance makes the clockwise traveller reach the
//! modulator a time `dt` before the counter-clockwise one, so a voltage held
//! during the early window addresses only the clockwise pulse and one held
//! during the late window only the counter-clockwise pulse.

use rand::Rng;
use std::fmt;
use std::str::FromStr;

use crate::components::PhaseModulator;
use crate::error::{Result, SimError};
use crate::polarization::StateLabel;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The source pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrain {
    /// Repetition rate in Hz.
    pub rate_hz: f64,
    /// Intensity full width at half maximum of one pulse, seconds.
    pub fwhm_s: f64,
    /// Whether successive pulses carry independent random global phases.
    /// Global phase never enters the polarization algebra, so the flag is
    /// bookkeeping for protocol-level assumptions only.
    pub phase_randomized: bool,
}

impl Default for PulseTrain {
    fn default() -> Self {
        PulseTrain {
            rate_hz: 5e7,
            fwhm_s: 270e-12,
            phase_randomized: true,
        }
    }
}

impl PulseTrain {
    /// Repetition period in seconds.
    pub fn period_s(&self) -> f64 {
        1.0 / self.rate_hz
    }

    /// Checks the structural invariant `period > FWHM`.
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "pulse rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if !(self.fwhm_s > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "pulse FWHM must be positive, got {}",
                self.fwhm_s
            )));
        }
        if self.period_s() <= self.fwhm_s {
            return Err(SimError::InvalidInput(format!(
                "pulse period {:.3e} s must exceed the FWHM {:.3e} s",
                self.period_s(),
                self.fwhm_s
            )));
        }
        Ok(())
    }
}

/// Which expression converts the delay-line imbalance into a transit-time
/// difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AsymmetryFormula {
    /// `dt = n_f * dL / c`: transit time through the extra fiber.
    #[default]
    Physical,
    /// `dt = dL / (n_f * c)`: an alternative printed form kept selectable
    /// for comparison; dimensionally it is not a fiber transit time.
    Alternate,
}

impl AsymmetryFormula {
    /// The config-file spelling of this variant.
    pub fn as_str(self) -> &'static str {
        match self {
            AsymmetryFormula::Physical => "physical",
            AsymmetryFormula::Alternate => "paper",
        }
    }
}

impl FromStr for AsymmetryFormula {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "physical" => Ok(AsymmetryFormula::Physical),
            "paper" => Ok(AsymmetryFormula::Alternate),
            other => Err(SimError::config(
                "timing.formula",
                format!("expected \"physical\" or \"paper\", got {other:?}"),
            )),
        }
    }
}

/// Sagnac-loop delay-line geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGeometry {
    /// Delay-line imbalance in metres.
    pub delta_l_m: f64,
    /// Slow-axis group index of the loop fiber.
    pub n_f: f64,
    /// Formula used to derive the asymmetry.
    pub formula: AsymmetryFormula,
}

impl Default for LoopGeometry {
    fn default() -> Self {
        LoopGeometry::new(1.0, 1.467, AsymmetryFormula::Physical)
            .expect("default geometry is valid")
    }
}

impl LoopGeometry {
    /// Builds a validated geometry.  Errors on non-positive `delta_l_m` or
    /// an index below one.
    pub fn new(delta_l_m: f64, n_f: f64, formula: AsymmetryFormula) -> Result<Self> {
        let geometry = LoopGeometry {
            delta_l_m,
            n_f,
            formula,
        };
        geometry.validated()?;
        Ok(geometry)
    }

    /// Range checks, reusable after field edits.
    pub fn validated(&self) -> Result<()> {
        if !(self.delta_l_m > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "delay-line imbalance must be positive, got {} m",
                self.delta_l_m
            )));
        }
        if !(self.n_f >= 1.0) {
            return Err(SimError::InvalidInput(format!(
                "fiber index must be at least 1, got {}",
                self.n_f
            )));
        }
        Ok(())
    }

    /// The transit-time difference `dt` between the loop directions,
    /// derived from the selected formula.
    pub fn asymmetry(&self) -> f64 {
        match self.formula {
            AsymmetryFormula::Physical => self.n_f * self.delta_l_m / SPEED_OF_LIGHT,
            AsymmetryFormula::Alternate => self.delta_l_m / (self.n_f * SPEED_OF_LIGHT),
        }
    }
}

/// One pulse's modulation assignment: voltages and window placement, offsets
/// measured from the pulse's own period start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub pulse_index: u64,
    /// Target state this entry encodes.
    pub target: StateLabel,
    /// Voltage held during the early window (addresses the cw pulse).
    pub early_voltage: f64,
    /// Voltage held during the late window (addresses the ccw pulse).
    pub late_voltage: f64,
    /// Start offset of the early window, seconds.
    pub early_start_s: f64,
    /// Start offset of the late window, seconds.
    pub late_start_s: f64,
    /// Width shared by both windows, seconds.
    pub window_width_s: f64,
}

/// Per-pulse modulation plan for one repetition of a target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl ModulationSchedule {
    /// Number of scheduled pulses.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the schedule is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for a pulse index, if scheduled.
    pub fn entry(&self, pulse_index: u64) -> Option<&ScheduleEntry> {
        self.entries
            .iter()
            .find(|e| e.pulse_index == pulse_index)
    }
}

/// A single violated timing constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleViolation {
    pub pulse_index: u64,
    pub constraint: ViolationKind,
}

/// The timing constraints a schedule can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Early and late windows overlap, so the two pulse transits cannot be
    /// addressed separately.
    WindowsOverlap,
    /// A window extends beyond the repetition period (or starts before it).
    WindowExceedsPeriod,
    /// A window is too narrow to cover its transit with the required margin.
    InsufficientMargin,
    /// The window centres are not separated by the loop asymmetry, so the
    /// late window misses the ccw transit.
    SeparationMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationKind::WindowsOverlap => "windows overlap pulse transits",
            ViolationKind::WindowExceedsPeriod => "window exceeds period",
            ViolationKind::InsufficientMargin => "window margin below FWHM/2 plus rise allowance",
            ViolationKind::SeparationMismatch => "window separation does not match loop asymmetry",
        };
        f.write_str(text)
    }
}

/// Outcome of schedule validation: empty means the schedule is usable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleReport {
    pub violations: Vec<ScheduleViolation>,
}

impl ScheduleReport {
    /// True when no constraint is violated.
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ScheduleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let mut first = true;
        for v in &self.violations {
            if !first {
                f.write_str("; ")?;
            }
            write!(f, "pulse {}: {}", v.pulse_index, v.constraint)?;
            first = false;
        }
        Ok(())
    }
}

/// Maps a target state to its (early, late) voltage pair.  Only the
/// three-state alphabet {D, L, R} is encodable; anything else is rejected
/// here rather than silently passed through.
pub fn voltages_for_target(target: StateLabel, modulator: &PhaseModulator) -> Result<(f64, f64)> {
    match target {
        StateLabel::D => Ok((0.0, 0.0)),
        StateLabel::L => Ok((modulator.v_halfpi, 0.0)),
        StateLabel::R => Ok((0.0, modulator.v_halfpi)),
        other => Err(SimError::InvalidInput(format!(
            "target state {other} is not encodable; the modulator alphabet is D, L, R"
        ))),
    }
}

/// Builds the modulation schedule for a target sequence.
///
/// Window placement: both windows share the width `2 (FWHM + rise)`; the
/// early window opens at offset zero (covering the cw transit at its centre)
/// and the late window opens `dt` later (covering the ccw transit).  The
/// result is validated before being returned.
pub fn schedule_for_sequence(
    train: &PulseTrain,
    geometry: &LoopGeometry,
    modulator: &PhaseModulator,
    targets: &[StateLabel],
) -> Result<ModulationSchedule> {
    if targets.is_empty() {
        return Err(SimError::InvalidInput(
            "target sequence must not be empty".into(),
        ));
    }
    train.validate()?;
    let width = 2.0 * (train.fwhm_s + modulator.rise_s);
    let mut entries = Vec::with_capacity(targets.len());
    for (i, &target) in targets.iter().enumerate() {
        let (early_voltage, late_voltage) = voltages_for_target(target, modulator)?;
        entries.push(ScheduleEntry {
            pulse_index: i as u64,
            target,
            early_voltage,
            late_voltage,
            early_start_s: 0.0,
            late_start_s: geometry.asymmetry(),
            window_width_s: width,
        });
    }
    let schedule = ModulationSchedule { entries };
    let report = validate_schedule(&schedule, train, geometry, modulator);
    if !report.is_ok() {
        return Err(SimError::InvalidSchedule(report.to_string()));
    }
    Ok(schedule)
}

/// Checks every entry of a schedule against the timing constraints and
/// reports each violation with the offending pulse index.
pub fn validate_schedule(
    schedule: &ModulationSchedule,
    train: &PulseTrain,
    geometry: &LoopGeometry,
    modulator: &PhaseModulator,
) -> ScheduleReport {
    let period = train.period_s();
    let required_margin = train.fwhm_s / 2.0 + modulator.rise_s;
    // Absolute slack absorbing floating-point noise in margin arithmetic.
    let slack = 1e-12 * period;
    let mut violations = Vec::new();
    for e in &schedule.entries {
        let early_end = e.early_start_s + e.window_width_s;
        let late_end = e.late_start_s + e.window_width_s;
        if e.early_start_s < 0.0 || late_end > period + slack || e.window_width_s > period {
            violations.push(ScheduleViolation {
                pulse_index: e.pulse_index,
                constraint: ViolationKind::WindowExceedsPeriod,
            });
        }
        if early_end > e.late_start_s + slack {
            violations.push(ScheduleViolation {
                pulse_index: e.pulse_index,
                constraint: ViolationKind::WindowsOverlap,
            });
        }
        let margin = (e.window_width_s - train.fwhm_s) / 2.0;
        if margin + slack < required_margin {
            violations.push(ScheduleViolation {
                pulse_index: e.pulse_index,
                constraint: ViolationKind::InsufficientMargin,
            });
        }
        let separation = e.late_start_s - e.early_start_s;
        if (separation - geometry.asymmetry()).abs() > slack {
            violations.push(ScheduleViolation {
                pulse_index: e.pulse_index,
                constraint: ViolationKind::SeparationMismatch,
            });
        }
    }
    ScheduleReport { violations }
}

/// Converts a scheduled pulse's window voltages into the effective drive
/// phase pair `(phi_e, phi_l)`, adding one zero-mean Gaussian noise draw of
/// width `sigma_phi` per window from the caller's seeded stream.
pub fn effective_phases(
    schedule: &ModulationSchedule,
    pulse_index: u64,
    modulator: &PhaseModulator,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let entry = schedule.entry(pulse_index).ok_or_else(|| {
        SimError::InvalidInput(format!(
            "pulse index {pulse_index} is not in the schedule (len {})",
            schedule.len()
        ))
    })?;
    let phi_e = modulator.phase_for_voltage(entry.early_voltage) + modulator.noise_draw(rng);
    let phi_l = modulator.phase_for_voltage(entry.late_voltage) + modulator.noise_draw(rng);
    Ok((phi_e, phi_l))
}
