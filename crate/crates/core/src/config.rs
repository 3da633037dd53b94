//! Flat-key experiment configuration: parsing, defaults, validation.
//!
//! Config files are plain text, one `key = value` per line, `#` starts a
//! comment, keys are dotted paths (`snspd.dark_hz = 27`).  The same
//! `key=value` syntax is accepted for command-line overrides, applied after
//! the file so they win.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::components::{FiberPbs, FreeSpaceBs, PhaseModulator, PmfSegment, SpectralModel};
use crate::encoder::{EncoderModel, InlineEncoder, IpognacEncoder, PognacEncoder};
use crate::error::{Result, SimError};
use crate::polarization::StateLabel;
use crate::receiver::Basis;
use crate::timing::{AsymmetryFormula, LoopGeometry, PulseTrain};

/// Which encoder the run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Ipognac,
    Pognac,
    Inline,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Ipognac => "ipognac",
            EncoderKind::Pognac => "pognac",
            EncoderKind::Inline => "inline",
        }
    }
}

impl FromStr for EncoderKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ipognac" => Ok(EncoderKind::Ipognac),
            "pognac" => Ok(EncoderKind::Pognac),
            "inline" => Ok(EncoderKind::Inline),
            other => Err(SimError::config(
                "encoder.kind",
                format!("expected ipognac, pognac, or inline, got '{other}'"),
            )),
        }
    }
}

/// Pulse-level vs analytically scaled event generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Analytic per-bin event counts with sampled fluctuations; desk-scale
    /// runtime for multi-hour experiments.
    Fast,
    /// Every pulse simulated individually.
    Exact,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Fast => "fast",
            RunMode::Exact => "exact",
        }
    }
}

impl FromStr for RunMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fast" => Ok(RunMode::Fast),
            "exact" => Ok(RunMode::Exact),
            other => Err(SimError::config(
                "run.mode",
                format!("expected fast or exact, got '{other}'"),
            )),
        }
    }
}

/// What sifting does with pulses where both detectors clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleClickPolicy {
    Discard,
    RandomAssign,
}

impl DoubleClickPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            DoubleClickPolicy::Discard => "discard",
            DoubleClickPolicy::RandomAssign => "random",
        }
    }
}

impl FromStr for DoubleClickPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "discard" => Ok(DoubleClickPolicy::Discard),
            "random" => Ok(DoubleClickPolicy::RandomAssign),
            other => Err(SimError::config(
                "sifting.double_clicks",
                format!("expected discard or random, got '{other}'"),
            )),
        }
    }
}

/// Transmitted state pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSpec {
    /// Repeat this sequence forever.
    Fixed(Vec<StateLabel>),
    /// Per-pulse pseudo-random choice: key basis with probability
    /// `pattern.key_fraction` (L and R equally likely inside it), otherwise D.
    Random,
}

impl PatternSpec {
    pub fn as_str(&self) -> String {
        match self {
            PatternSpec::Fixed(seq) => seq
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(","),
            PatternSpec::Random => "random".to_string(),
        }
    }

    fn parse(value: &str) -> Result<Self> {
        if value.trim().eq_ignore_ascii_case("random") {
            return Ok(PatternSpec::Random);
        }
        let mut seq = Vec::new();
        for part in value.split(',') {
            let label: StateLabel = part
                .parse()
                .map_err(|e| SimError::config("pattern", format!("{e}")))?;
            if !matches!(label, StateLabel::D | StateLabel::L | StateLabel::R) {
                return Err(SimError::config(
                    "pattern",
                    format!("state {label} is not encodable; use D, L, or R"),
                ));
            }
            seq.push(label);
        }
        if seq.is_empty() {
            return Err(SimError::config("pattern", "empty state sequence"));
        }
        Ok(PatternSpec::Fixed(seq))
    }
}

/// Laser source settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub rate_hz: f64,
    pub fwhm_s: f64,
    /// Mean photon number per pulse entering the channel.
    pub mu: f64,
    pub phase_randomized: bool,
}

/// Detector settings shared by both SNSPDs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnspdConfig {
    pub eta: f64,
    pub eps_pol: f64,
    pub dark_hz: f64,
    /// Input-fiber drift scale, radians per square-root hour.
    pub drift_rate: f64,
    /// Timing gate used for dark-count accounting, seconds.
    pub gate_s: f64,
    /// Dead time after a click; 0 disables the filter.
    pub dead_time_s: f64,
}

/// Run shape and bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub duration_s: f64,
    pub bin_s: f64,
    pub mode: RunMode,
    /// Master switch for every slow drift process (encoder fibers and
    /// detector pigtails).
    pub drift_enabled: bool,
    pub seed: u64,
}

/// Full declarative description of a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub geometry: LoopGeometry,
    pub modulator: PhaseModulator,
    pub pbs: FiberPbs,
    pub pmf: PmfSegment,
    pub spectrum: SpectralModel,
    pub bs: FreeSpaceBs,
    /// Fraction of intensity lost inside the Sagnac loop.
    pub loop_loss: f64,
    pub channel_loss_db: f64,
    pub snspd: SnspdConfig,
    pub basis: Basis,
    pub encoder_kind: EncoderKind,
    pub pognac_calibrated: bool,
    /// Differential group delay of the inline encoder's modulator crystal.
    pub inline_pmd_delay_s: f64,
    pub run: RunConfig,
    pub pattern: PatternSpec,
    pub pattern_key_fraction: f64,
    pub double_clicks: DoubleClickPolicy,
    pub compare_haar_samples: usize,
    pub sweep_key: String,
    pub sweep_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceConfig {
                rate_hz: 5.0e7,
                fwhm_s: 270e-12,
                mu: 0.5,
                phase_randomized: true,
            },
            geometry: LoopGeometry::default(),
            modulator: PhaseModulator::default(),
            pbs: FiberPbs::default(),
            pmf: PmfSegment::default(),
            spectrum: SpectralModel::default(),
            bs: FreeSpaceBs::default(),
            loop_loss: 0.2,
            channel_loss_db: 40.0,
            snspd: SnspdConfig {
                eta: 0.85,
                eps_pol: 0.02,
                dark_hz: 27.0,
                drift_rate: 0.05,
                gate_s: 1e-9,
                dead_time_s: 0.0,
            },
            basis: Basis::Key,
            encoder_kind: EncoderKind::Ipognac,
            pognac_calibrated: true,
            inline_pmd_delay_s: 5e-12,
            run: RunConfig {
                duration_s: 54_000.0,
                bin_s: 60.0,
                mode: RunMode::Fast,
                drift_enabled: true,
                seed: 1,
            },
            pattern: PatternSpec::Fixed(vec![StateLabel::L, StateLabel::R, StateLabel::D]),
            pattern_key_fraction: 0.9,
            double_clicks: DoubleClickPolicy::Discard,
            compare_haar_samples: 200,
            sweep_key: String::new(),
            sweep_values: Vec::new(),
        }
    }
}

fn num(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| SimError::config(key, format!("expected a number, got '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(SimError::config(
            key,
            format!("expected true or false, got '{other}'"),
        )),
    }
}

fn integer(key: &str, value: &str) -> Result<u64> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| SimError::config(key, format!("expected a non-negative integer, got '{value}'")))
}

/// Formats a float the way config files and echo blocks show it; `Display`
/// for `f64` is shortest-round-trip, so nothing is lost.
fn fmt_f64(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl ExperimentConfig {
    /// Parses file text (defaults plus the file's assignments).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (key, value) in parse_assignments(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, expr: &str) -> Result<()> {
        let (key, value) = expr.split_once('=').ok_or_else(|| {
            SimError::config(expr, "override must have the form key=value")
        })?;
        self.set(key.trim(), value.trim())
    }

    /// Sets one key; unknown keys and malformed values are structured
    /// errors naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "source.rate_hz" => self.source.rate_hz = num(key, value)?,
            "source.fwhm_s" => self.source.fwhm_s = num(key, value)?,
            "source.mu" => self.source.mu = num(key, value)?,
            "source.phase_randomized" => self.source.phase_randomized = boolean(key, value)?,
            "loop.delta_l_m" => self.geometry.delta_l_m = num(key, value)?,
            "loop.n_f" => self.geometry.n_f = num(key, value)?,
            "loop.loss" => self.loop_loss = num(key, value)?,
            "timing.formula" => {
                self.geometry.formula = value
                    .parse::<AsymmetryFormula>()
                    .map_err(|e| SimError::config(key, format!("{e}")))?
            }
            "modulator.v_halfpi" => self.modulator.v_halfpi = num(key, value)?,
            "modulator.sigma_phi" => self.modulator.sigma_phi = num(key, value)?,
            "modulator.rise_s" => self.modulator.rise_s = num(key, value)?,
            "pbs.extinction" => self.pbs.extinction = num(key, value)?,
            "pmf.delta_rad" => self.pmf.delta_rad = num(key, value)?,
            "pmf.group_delay_s" => self.pmf.group_delay_s = num(key, value)?,
            "spectral.coherence_time_s" => self.spectrum.coherence_time_s = num(key, value)?,
            "spectral.center_wavelength_m" => {
                self.spectrum.center_wavelength_m = num(key, value)?
            }
            "bs.transmittance" => self.bs.transmittance = num(key, value)?,
            "bs.reflectance" => self.bs.reflectance = num(key, value)?,
            "channel.loss_db" => self.channel_loss_db = num(key, value)?,
            "snspd.eta" => self.snspd.eta = num(key, value)?,
            "snspd.eps_pol" => self.snspd.eps_pol = num(key, value)?,
            "snspd.dark_hz" => self.snspd.dark_hz = num(key, value)?,
            "snspd.drift_rate" => self.snspd.drift_rate = num(key, value)?,
            "snspd.gate_s" => self.snspd.gate_s = num(key, value)?,
            "snspd.dead_time_s" => self.snspd.dead_time_s = num(key, value)?,
            "receiver.basis" => {
                self.basis = value
                    .parse::<Basis>()
                    .map_err(|e| SimError::config(key, format!("{e}")))?
            }
            "encoder.kind" => self.encoder_kind = value.parse()?,
            "pognac.calibrated" => self.pognac_calibrated = boolean(key, value)?,
            "inline.pmd_delay_s" => self.inline_pmd_delay_s = num(key, value)?,
            "run.duration_s" => self.run.duration_s = num(key, value)?,
            "run.bin_s" => self.run.bin_s = num(key, value)?,
            "run.mode" => self.run.mode = value.parse()?,
            "run.drift_enabled" => self.run.drift_enabled = boolean(key, value)?,
            "run.seed" => self.run.seed = integer(key, value)?,
            "pattern" => self.pattern = PatternSpec::parse(value)?,
            "pattern.key_fraction" => self.pattern_key_fraction = num(key, value)?,
            "sifting.double_clicks" => self.double_clicks = value.parse()?,
            "compare.haar_samples" => self.compare_haar_samples = integer(key, value)? as usize,
            "sweep.key" => self.sweep_key = value.trim().to_string(),
            "sweep.values" => {
                let mut vals = Vec::new();
                for part in value.split(',') {
                    vals.push(num(key, part)?);
                }
                self.sweep_values = vals;
            }
            _ => return Err(SimError::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Range and consistency checks; called before any run.
    pub fn validate(&self) -> Result<()> {
        fn demand(cond: bool, key: &str, reason: &str) -> Result<()> {
            if cond {
                Ok(())
            } else {
                Err(SimError::config(key, reason))
            }
        }
        demand(
            self.source.rate_hz > 0.0 && self.source.rate_hz.is_finite(),
            "source.rate_hz",
            "must be positive",
        )?;
        demand(self.source.fwhm_s > 0.0, "source.fwhm_s", "must be positive")?;
        demand(
            self.source.mu >= 0.0 && self.source.mu.is_finite(),
            "source.mu",
            "must be non-negative",
        )?;
        self.geometry.validated().map_err(|e| match e {
            SimError::InvalidInput(msg) => SimError::config("loop.delta_l_m", msg),
            other => other,
        })?;
        demand(
            self.modulator.v_halfpi > 0.0,
            "modulator.v_halfpi",
            "must be positive",
        )?;
        demand(
            self.modulator.sigma_phi >= 0.0,
            "modulator.sigma_phi",
            "must be non-negative",
        )?;
        demand(
            self.modulator.rise_s >= 0.0,
            "modulator.rise_s",
            "must be non-negative",
        )?;
        demand(
            (0.0..0.5).contains(&self.pbs.extinction),
            "pbs.extinction",
            "must lie in [0, 0.5)",
        )?;
        demand(
            self.pmf.group_delay_s >= 0.0,
            "pmf.group_delay_s",
            "must be non-negative",
        )?;
        demand(
            self.spectrum.coherence_time_s > 0.0,
            "spectral.coherence_time_s",
            "must be positive",
        )?;
        demand(
            self.bs.transmittance > 0.0
                && self.bs.reflectance > 0.0
                && self.bs.transmittance + self.bs.reflectance <= 1.0 + 1e-12,
            "bs.transmittance",
            "transmittance and reflectance must be positive and sum to at most 1",
        )?;
        demand(
            (0.0..=1.0).contains(&self.loop_loss),
            "loop.loss",
            "must lie in [0, 1]",
        )?;
        demand(
            self.channel_loss_db >= 0.0,
            "channel.loss_db",
            "must be non-negative",
        )?;
        demand(
            (0.0..=1.0).contains(&self.snspd.eta),
            "snspd.eta",
            "must lie in [0, 1]",
        )?;
        demand(
            (0.0..=1.0).contains(&self.snspd.eps_pol),
            "snspd.eps_pol",
            "must lie in [0, 1]",
        )?;
        demand(self.snspd.dark_hz >= 0.0, "snspd.dark_hz", "must be non-negative")?;
        demand(
            self.snspd.drift_rate >= 0.0,
            "snspd.drift_rate",
            "must be non-negative",
        )?;
        demand(self.snspd.gate_s > 0.0, "snspd.gate_s", "must be positive")?;
        demand(
            self.snspd.dead_time_s >= 0.0,
            "snspd.dead_time_s",
            "must be non-negative",
        )?;
        demand(
            self.inline_pmd_delay_s >= 0.0,
            "inline.pmd_delay_s",
            "must be non-negative",
        )?;
        demand(self.run.bin_s > 0.0, "run.bin_s", "must be positive")?;
        demand(
            self.run.duration_s >= self.run.bin_s,
            "run.duration_s",
            "must be at least one bin width",
        )?;
        demand(
            (0.0..=1.0).contains(&self.pattern_key_fraction),
            "pattern.key_fraction",
            "must lie in [0, 1]",
        )?;
        demand(
            self.compare_haar_samples >= 1,
            "compare.haar_samples",
            "must be at least 1",
        )?;
        Ok(())
    }

    /// The pulse train this run drives.
    pub fn pulse_train(&self) -> PulseTrain {
        PulseTrain {
            rate_hz: self.source.rate_hz,
            fwhm_s: self.source.fwhm_s,
            phase_randomized: self.source.phase_randomized,
        }
    }

    /// Channel intensity transmittance from the configured dB loss.
    pub fn channel_transmittance(&self) -> f64 {
        10f64.powf(-self.channel_loss_db / 10.0)
    }

    /// Assembles the configured encoder.  The loop-based encoders inherit
    /// every optical imperfection from this config; the inline encoder
    /// shares the modulator and its own group-delay knob.
    pub fn build_encoder(&self) -> EncoderModel {
        let ipognac = IpognacEncoder {
            lead_pmf: self.pmf,
            modulator: self.modulator,
            pbs: self.pbs,
            bs: self.bs,
            geometry: self.geometry,
            loop_loss: self.loop_loss,
            ..IpognacEncoder::default()
        };
        match self.encoder_kind {
            EncoderKind::Ipognac => EncoderModel::Ipognac(ipognac),
            EncoderKind::Pognac => EncoderModel::Pognac(PognacEncoder {
                core: ipognac,
                output_fiber: crate::components::SmfUnitary::identity(),
                calibrated: self.pognac_calibrated,
            }),
            EncoderKind::Inline => EncoderModel::Inline(InlineEncoder {
                modulator: self.modulator,
                pmd_delay_s: self.inline_pmd_delay_s,
            }),
        }
    }

    /// Every key with its current value, fixed order, for the summary echo.
    pub fn echo(&self) -> Vec<(String, String)> {
        let f = fmt_f64;
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("source.rate_hz", f(self.source.rate_hz));
        push("source.fwhm_s", f(self.source.fwhm_s));
        push("source.mu", f(self.source.mu));
        push(
            "source.phase_randomized",
            self.source.phase_randomized.to_string(),
        );
        push("loop.delta_l_m", f(self.geometry.delta_l_m));
        push("loop.n_f", f(self.geometry.n_f));
        push("loop.loss", f(self.loop_loss));
        push("timing.formula", self.geometry.formula.as_str().to_string());
        push("modulator.v_halfpi", f(self.modulator.v_halfpi));
        push("modulator.sigma_phi", f(self.modulator.sigma_phi));
        push("modulator.rise_s", f(self.modulator.rise_s));
        push("pbs.extinction", f(self.pbs.extinction));
        push("pmf.delta_rad", f(self.pmf.delta_rad));
        push("pmf.group_delay_s", f(self.pmf.group_delay_s));
        push(
            "spectral.coherence_time_s",
            f(self.spectrum.coherence_time_s),
        );
        push(
            "spectral.center_wavelength_m",
            f(self.spectrum.center_wavelength_m),
        );
        push("bs.transmittance", f(self.bs.transmittance));
        push("bs.reflectance", f(self.bs.reflectance));
        push("channel.loss_db", f(self.channel_loss_db));
        push("snspd.eta", f(self.snspd.eta));
        push("snspd.eps_pol", f(self.snspd.eps_pol));
        push("snspd.dark_hz", f(self.snspd.dark_hz));
        push("snspd.drift_rate", f(self.snspd.drift_rate));
        push("snspd.gate_s", f(self.snspd.gate_s));
        push("snspd.dead_time_s", f(self.snspd.dead_time_s));
        push("receiver.basis", self.basis.as_str().to_string());
        push("encoder.kind", self.encoder_kind.as_str().to_string());
        push("pognac.calibrated", self.pognac_calibrated.to_string());
        push("inline.pmd_delay_s", f(self.inline_pmd_delay_s));
        push("run.duration_s", f(self.run.duration_s));
        push("run.bin_s", f(self.run.bin_s));
        push("run.mode", self.run.mode.as_str().to_string());
        push("run.drift_enabled", self.run.drift_enabled.to_string());
        push("run.seed", self.run.seed.to_string());
        push("pattern", self.pattern.as_str());
        push("pattern.key_fraction", f(self.pattern_key_fraction));
        push("sifting.double_clicks", self.double_clicks.as_str().to_string());
        push(
            "compare.haar_samples",
            self.compare_haar_samples.to_string(),
        );
        if !self.sweep_key.is_empty() {
            push("sweep.key", self.sweep_key.clone());
            let mut vals = String::new();
            for (i, v) in self.sweep_values.iter().enumerate() {
                if i > 0 {
                    vals.push(',');
                }
                let _ = write!(vals, "{}", f(*v));
            }
            push("sweep.values", vals);
        }
        out
    }
}

/// Splits config text into ordered `(key, value)` pairs; syntax errors name
/// the offending line.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SimError::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got '{line}'"),
            )
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(SimError::config(
                format!("line {}", lineno + 1),
                "empty key before '='",
            ));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
