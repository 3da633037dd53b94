//! End-to-end experiment runner: drives the encoder over the configured
//! state pattern, pushes pulses through channel loss and the measurement
//! station, sifts clicks, and aggregates per-bin QBER time series with a run
//! summary.
//!
//! Two run modes share the same physics.  `exact` simulates every pulse with
//! its own seeded noise and detection streams.  `fast` computes each bin's
//! click intensities analytically (with modulator noise averaged in closed
//! form) and samples only the aggregate counts, which keeps multi-hour runs
//! at desk scale.  Slow receiver drift advances once per bin in a sequential
//! prepass; all remaining randomness comes from per-bin or per-pulse
//! streams, so bins are independently evaluable and the output is fully
//! determined by (config, seed).

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::config::{
    DoubleClickPolicy, EncoderKind, ExperimentConfig, PatternSpec, RunMode,
};
use crate::encoder::EncoderModel;
use crate::error::{Result, SimError};
use crate::polarization::{JonesVector, LightState, StateLabel, StokesVector};
use crate::receiver::{
    click_means, detect, Basis, DetectionSettings, MeasurementStation, SnspdPair,
};
use crate::streams::{stream, StreamDomain};
use crate::timing::{schedule_for_sequence, voltages_for_target};

/// One time bin of the QBER series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberSample {
    pub bin_start_s: f64,
    pub sifted: u64,
    pub errors: u64,
    /// Absent when the bin holds no sifted events (never reported as zero).
    pub qber: Option<f64>,
    /// Binomial standard deviation of `qber`; absent alongside it.
    pub qber_std: Option<f64>,
}

/// Whole-run statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub basis: Basis,
    pub total_sifted: u64,
    pub total_errors: u64,
    /// Unweighted mean of the per-bin QBERs (the time-series convention).
    pub mean_qber: Option<f64>,
    /// Sample standard deviation of the per-bin QBERs.
    pub qber_std_bins: Option<f64>,
    /// `total_errors / total_sifted`.
    pub pooled_qber: Option<f64>,
    /// Binomial standard deviation of the pooled estimate.
    pub pooled_qber_std: Option<f64>,
    /// Least-squares trend of per-bin QBER versus time, per hour.
    pub trend_slope_per_hour: Option<f64>,
    /// Standard error of the trend slope.
    pub trend_slope_std: Option<f64>,
    pub seed: u64,
    /// Every config key with its value at run time.
    pub config_echo: Vec<(String, String)>,
}

/// Time series plus summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub samples: Vec<QberSample>,
    pub summary: RunSummary,
}

/// One emitted state of a `simulate-states` request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRow {
    pub index: u64,
    pub target: StateLabel,
    /// Canonical Jones amplitudes; absent for partially polarized output.
    pub jones: Option<JonesVector>,
    pub stokes: StokesVector,
    pub dop: f64,
}

/// One row of the encoder comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderComparison {
    pub encoder: String,
    pub mean_qber: Option<f64>,
    pub mean_dop: f64,
}

/// Binomial QBER estimate: `q = errors/sifted`,
/// `std = sqrt(q (1-q) / sifted)`.  Zero sifted events yield absent values;
/// more errors than sifted events is an input error.
pub fn qber_estimate(errors: u64, sifted: u64) -> Result<(Option<f64>, Option<f64>)> {
    if errors > sifted {
        return Err(SimError::InvalidInput(format!(
            "error count {errors} exceeds sifted count {sifted}"
        )));
    }
    if sifted == 0 {
        return Ok((None, None));
    }
    let q = errors as f64 / sifted as f64;
    let std = (q * (1.0 - q) / sifted as f64).sqrt();
    Ok((Some(q), Some(std)))
}

/// Classification of one pulse's clicks against the sent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseVerdict {
    /// The sent state is not in the measured basis; discarded in sifting.
    BasisMismatch,
    /// Neither detector fired.
    NoClick,
    /// Single click on the detector matching the sent state.
    Correct,
    /// Single click on the opposite detector.
    Error,
    /// Both detectors fired and the policy discards such pulses.
    DoubleDiscarded,
}

/// Sifts one pulse.  `tie` is consulted once, and only when both detectors
/// fired under the random-assignment policy.
pub fn classify_pulse(
    sent: StateLabel,
    basis: Basis,
    click0: bool,
    click1: bool,
    policy: DoubleClickPolicy,
    tie: &mut impl Rng,
) -> PulseVerdict {
    if !basis.contains(sent) {
        return PulseVerdict::BasisMismatch;
    }
    let detector = match (click0, click1) {
        (false, false) => return PulseVerdict::NoClick,
        (true, false) => 0u8,
        (false, true) => 1u8,
        (true, true) => match policy {
            DoubleClickPolicy::Discard => return PulseVerdict::DoubleDiscarded,
            DoubleClickPolicy::RandomAssign => u8::from(tie.random::<bool>()),
        },
    };
    let (det0_state, _) = basis.detector_states();
    let correct = if sent == det0_state { 0 } else { 1 };
    if detector == correct {
        PulseVerdict::Correct
    } else {
        PulseVerdict::Error
    }
}

/// Running totals for one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct BinTally {
    sifted: u64,
    errors: u64,
}

impl BinTally {
    fn add(&mut self, verdict: PulseVerdict) {
        match verdict {
            PulseVerdict::Correct => self.sifted += 1,
            PulseVerdict::Error => {
                self.sifted += 1;
                self.errors += 1;
            }
            PulseVerdict::BasisMismatch
            | PulseVerdict::NoClick
            | PulseVerdict::DoubleDiscarded => {}
        }
    }

    fn add_counts(&mut self, sifted: u64, errors: u64) {
        self.sifted += sifted;
        self.errors += errors;
    }
}

/// The sent state for a global pulse index.  Random patterns draw once from
/// the pulse's tie-break stream (the same stream later used for double-click
/// assignment, in that order).
fn target_for_pulse(cfg: &ExperimentConfig, pulse: u64, tie: &mut impl Rng) -> StateLabel {
    match &cfg.pattern {
        PatternSpec::Fixed(seq) => seq[(pulse % seq.len() as u64) as usize],
        PatternSpec::Random => {
            let u: f64 = tie.random();
            let kf = cfg.pattern_key_fraction;
            if u < kf / 2.0 {
                StateLabel::L
            } else if u < kf {
                StateLabel::R
            } else {
                StateLabel::D
            }
        }
    }
}

/// How many indices in `[start, end)` are congruent to `residue` mod `len`.
fn residue_count(start: u64, end: u64, len: u64, residue: u64) -> u64 {
    let below = |n: u64| {
        if n <= residue {
            0
        } else {
            (n - residue).div_ceil(len)
        }
    };
    below(end) - below(start)
}

/// Ideal drive phases for a target state.
fn ideal_phases(cfg: &ExperimentConfig, target: StateLabel) -> Result<(f64, f64)> {
    let (ve, vl) = voltages_for_target(target, &cfg.modulator)?;
    Ok((
        cfg.modulator.phase_for_voltage(ve),
        cfg.modulator.phase_for_voltage(vl),
    ))
}

/// The unique encodable states the pattern can emit, in fixed {L, R, D}
/// order (the order fixes the fast mode's draw sequence).
fn pattern_states(cfg: &ExperimentConfig) -> Vec<StateLabel> {
    let all = [StateLabel::L, StateLabel::R, StateLabel::D];
    match &cfg.pattern {
        PatternSpec::Fixed(seq) => all
            .into_iter()
            .filter(|s| seq.contains(s))
            .collect(),
        PatternSpec::Random => all.to_vec(),
    }
}

/// Builds the encoder for a run, drawing the uncalibrated fiber rotation
/// from the seed's Haar stream.
fn encoder_for_run(cfg: &ExperimentConfig) -> EncoderModel {
    let encoder = cfg.build_encoder();
    if cfg.encoder_kind == EncoderKind::Pognac && !cfg.pognac_calibrated {
        let mut rng = stream(cfg.run.seed, StreamDomain::Haar, 0);
        encoder.with_output_fiber(crate::components::SmfUnitary::haar_random(&mut rng, 0.0))
    } else {
        encoder
    }
}

/// Validates the modulation timing for the configured pattern (one cycle;
/// random patterns are checked over the full three-state alphabet, which
/// shares the window placement).
fn validate_timing(cfg: &ExperimentConfig) -> Result<()> {
    let cycle: Vec<StateLabel> = match &cfg.pattern {
        PatternSpec::Fixed(seq) => seq.clone(),
        PatternSpec::Random => vec![StateLabel::L, StateLabel::R, StateLabel::D],
    };
    schedule_for_sequence(&cfg.pulse_train(), &cfg.geometry, &cfg.modulator, &cycle)?;
    Ok(())
}

/// Receiver state at the start of each bin: a sequential walk, one drift
/// step per bin boundary, each step fed by its own seeded stream.
fn drift_prepass(cfg: &ExperimentConfig, n_bins: u64) -> Vec<SnspdPair> {
    let rate = if cfg.run.drift_enabled {
        cfg.snspd.drift_rate
    } else {
        0.0
    };
    let mut pairs = Vec::with_capacity(n_bins as usize);
    let mut pair = SnspdPair::matched(cfg.snspd.eta, cfg.snspd.eps_pol, cfg.snspd.dark_hz, rate);
    pairs.push(pair);
    for b in 1..n_bins {
        let mut rng = stream(cfg.run.seed, StreamDomain::ReceiverDrift, b);
        pair = pair.drift_step(cfg.run.bin_s, &mut rng);
        pairs.push(pair);
    }
    pairs
}

fn detection_settings(cfg: &ExperimentConfig) -> DetectionSettings {
    DetectionSettings {
        mu: cfg.source.mu,
        channel_transmittance: cfg.channel_transmittance(),
        gate_s: cfg.snspd.gate_s,
    }
}

/// Simulates every pulse of one bin individually.
fn run_bin_exact(
    cfg: &ExperimentConfig,
    encoder: &EncoderModel,
    station: &MeasurementStation,
    settings: &DetectionSettings,
    pair: &SnspdPair,
    bin_index: u64,
    pulses_per_bin: u64,
) -> Result<BinTally> {
    let mut tally = BinTally::default();
    let period = 1.0 / cfg.source.rate_hz;
    let sigma = cfg.modulator.sigma_phi;
    // Dead-time bookkeeping is kept within the bin so bins stay
    // independently evaluable; at the default dead time of zero this is
    // exact.
    let mut last_click = [f64::NEG_INFINITY; 2];
    let first = bin_index * pulses_per_bin;
    for pulse in first..first + pulses_per_bin {
        let mut tie = stream(cfg.run.seed, StreamDomain::TieBreak, pulse);
        let target = target_for_pulse(cfg, pulse, &mut tie);
        if !cfg.basis.contains(target) {
            continue;
        }
        let (mut phi_e, mut phi_l) = ideal_phases(cfg, target)?;
        if sigma > 0.0 {
            let mut noise = stream(cfg.run.seed, StreamDomain::PulsePhase, pulse);
            phi_e += cfg.modulator.noise_draw(&mut noise);
            phi_l += cfg.modulator.noise_draw(&mut noise);
        }
        let state = encoder.emit(&cfg.spectrum, phi_e, phi_l);
        let mut det_rng = stream(cfg.run.seed, StreamDomain::Detection, pulse);
        let records = detect(
            &state,
            settings,
            pair,
            station,
            pulse,
            pulse as f64 * period,
            &mut det_rng,
        );
        let mut clicks = [false; 2];
        for r in records {
            let d = r.detector as usize;
            if cfg.snspd.dead_time_s > 0.0
                && r.timestamp_s - last_click[d] < cfg.snspd.dead_time_s
            {
                continue;
            }
            last_click[d] = r.timestamp_s;
            clicks[d] = true;
        }
        // When the pattern is random, `tie` has already consumed the
        // pattern draw; double-click assignment is its next draw.
        tally.add(classify_pulse(
            target,
            cfg.basis,
            clicks[0],
            clicks[1],
            cfg.double_clicks,
            &mut tie,
        ));
    }
    Ok(tally)
}

fn binomial_draw(rng: &mut impl Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability checked to lie in (0, 1)")
        .sample(rng)
}

/// Analytic per-bin aggregation: per-state click intensities from the
/// noise-averaged emitted state, then multinomial sampling of the
/// single/double click counts.
///
/// The only approximation relative to exact mode is evaluating the click
/// law at the noise-averaged intensity instead of averaging the click law
/// over noise; the gap is half the variance of the per-pulse intensity,
/// which is quadratic in an already-small number.  Dead time is ignored
/// here (rates are far below saturation at desk-scale settings).
fn run_bin_fast(
    cfg: &ExperimentConfig,
    encoder: &EncoderModel,
    station: &MeasurementStation,
    settings: &DetectionSettings,
    pair: &SnspdPair,
    bin_index: u64,
    pulses_per_bin: u64,
) -> Result<BinTally> {
    let mut tally = BinTally::default();
    let sigma = cfg.modulator.sigma_phi;
    let mut rng = stream(cfg.run.seed, StreamDomain::Detection, bin_index);

    // Pulse counts per state in this bin.
    let states = pattern_states(cfg);
    let mut counts: Vec<(StateLabel, u64)> = Vec::new();
    match &cfg.pattern {
        PatternSpec::Fixed(seq) => {
            let len = seq.len() as u64;
            let start = bin_index * pulses_per_bin;
            let end = start + pulses_per_bin;
            for &s in &states {
                let n: u64 = seq
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| t == s)
                    .map(|(r, _)| residue_count(start, end, len, r as u64))
                    .sum();
                counts.push((s, n));
            }
        }
        PatternSpec::Random => {
            // Sequential conditional binomials realise the multinomial
            // pattern statistics.
            let kf = cfg.pattern_key_fraction;
            let n_l = binomial_draw(&mut rng, pulses_per_bin, kf / 2.0);
            let rest = pulses_per_bin - n_l;
            let p_r = if kf / 2.0 >= 1.0 {
                1.0
            } else {
                (kf / 2.0) / (1.0 - kf / 2.0)
            };
            let n_r = binomial_draw(&mut rng, rest, p_r);
            counts.push((StateLabel::L, n_l));
            counts.push((StateLabel::R, n_r));
            counts.push((StateLabel::D, rest - n_r));
        }
    }

    for (target, n) in counts {
        if n == 0 || !cfg.basis.contains(target) {
            continue;
        }
        let (phi_e, phi_l) = ideal_phases(cfg, target)?;
        // `mu` is defined at the channel input, so the emitted state is
        // normalized here exactly as exact mode normalizes each pulse; the
        // encoder's internal throughput does not scale the photon budget.
        let averaged = encoder.noise_averaged_emit(&cfg.spectrum, phi_e, phi_l, sigma);
        let state = LightState::Mixed(averaged.coherency().normalized()?);
        let (lambda0, lambda1) = click_means(&state, settings, pair, station);
        let p0 = -(-lambda0).exp_m1();
        let p1 = -(-lambda1).exp_m1();
        let p_both = p0 * p1;
        let p_only0 = p0 - p_both;
        let p_only1 = p1 - p_both;

        let n_both = binomial_draw(&mut rng, n, p_both);
        let rest = n - n_both;
        let denom = 1.0 - p_both;
        let n_only0 = binomial_draw(&mut rng, rest, (p_only0 / denom).clamp(0.0, 1.0));
        let rest = rest - n_only0;
        let denom = denom - p_only0;
        let n_only1 = if denom <= 0.0 {
            0
        } else {
            binomial_draw(&mut rng, rest, (p_only1 / denom).clamp(0.0, 1.0))
        };

        let (det0_state, _) = cfg.basis.detector_states();
        let wrong_singles = if target == det0_state { n_only1 } else { n_only0 };
        tally.add_counts(n_only0 + n_only1, wrong_singles);
        if cfg.double_clicks == DoubleClickPolicy::RandomAssign {
            let wrong_doubles = binomial_draw(&mut rng, n_both, 0.5);
            tally.add_counts(n_both, wrong_doubles);
        }
    }
    Ok(tally)
}

/// Runs the experiment described by `cfg` with a caller-supplied encoder
/// (the comparison table injects specific fiber rotations through this).
fn run_with_encoder(cfg: &ExperimentConfig, encoder: &EncoderModel) -> Result<RunOutput> {
    cfg.validate()?;
    validate_timing(cfg)?;
    let station = MeasurementStation::for_basis(cfg.basis);
    let settings = detection_settings(cfg);
    let n_bins = (cfg.run.duration_s / cfg.run.bin_s).floor() as u64;
    let pulses_per_bin = (cfg.source.rate_hz * cfg.run.bin_s).round() as u64;
    let pairs = drift_prepass(cfg, n_bins);

    let mut samples = Vec::with_capacity(n_bins as usize);
    for b in 0..n_bins {
        let tally = match cfg.run.mode {
            RunMode::Exact => run_bin_exact(
                cfg,
                encoder,
                &station,
                &settings,
                &pairs[b as usize],
                b,
                pulses_per_bin,
            )?,
            RunMode::Fast => run_bin_fast(
                cfg,
                encoder,
                &station,
                &settings,
                &pairs[b as usize],
                b,
                pulses_per_bin,
            )?,
        };
        let (qber, qber_std) = qber_estimate(tally.errors, tally.sifted)?;
        samples.push(QberSample {
            bin_start_s: b as f64 * cfg.run.bin_s,
            sifted: tally.sifted,
            errors: tally.errors,
            qber,
            qber_std,
        });
    }
    let summary = summarize(cfg, &samples)?;
    Ok(RunOutput { samples, summary })
}

/// Runs the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let encoder = encoder_for_run(cfg);
    run_with_encoder(cfg, &encoder)
}

/// Least-squares slope of `y` against `x` plus its standard error; `None`
/// below three points or for degenerate spreads.
fn trend(x: &[f64], y: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = x.len();
    if n < 3 {
        return (None, None);
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return (None, None);
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - xbar) * (b - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let sigma2 = ss_res / (nf - 2.0);
    (Some(slope), Some((sigma2 / sxx).sqrt()))
}

fn summarize(cfg: &ExperimentConfig, samples: &[QberSample]) -> Result<RunSummary> {
    let total_sifted: u64 = samples.iter().map(|s| s.sifted).sum();
    let total_errors: u64 = samples.iter().map(|s| s.errors).sum();
    let present: Vec<&QberSample> = samples.iter().filter(|s| s.qber.is_some()).collect();

    let (mean_qber, qber_std_bins) = if present.is_empty() {
        (None, None)
    } else {
        let qs: Vec<f64> = present.iter().map(|s| s.qber.unwrap()).collect();
        let mean = qs.iter().sum::<f64>() / qs.len() as f64;
        let std = if qs.len() > 1 {
            let var =
                qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (qs.len() - 1) as f64;
            Some(var.sqrt())
        } else {
            Some(0.0)
        };
        (Some(mean), std)
    };
    let (pooled_qber, pooled_qber_std) = qber_estimate(total_errors, total_sifted)?;

    let x: Vec<f64> = present
        .iter()
        .map(|s| (s.bin_start_s + cfg.run.bin_s / 2.0) / 3600.0)
        .collect();
    let y: Vec<f64> = present.iter().map(|s| s.qber.unwrap()).collect();
    let (trend_slope_per_hour, trend_slope_std) = trend(&x, &y);

    Ok(RunSummary {
        basis: cfg.basis,
        total_sifted,
        total_errors,
        mean_qber,
        qber_std_bins,
        pooled_qber,
        pooled_qber_std,
        trend_slope_per_hour,
        trend_slope_std,
        seed: cfg.run.seed,
        config_echo: cfg.echo(),
    })
}

/// Emits the pattern's states (one cycle) with ideal drive phases, in
/// canonical form.  Requires a fixed pattern.
pub fn simulate_states(cfg: &ExperimentConfig) -> Result<Vec<StateRow>> {
    cfg.validate()?;
    let seq = match &cfg.pattern {
        PatternSpec::Fixed(seq) => seq.clone(),
        PatternSpec::Random => {
            return Err(SimError::InvalidInput(
                "simulate-states needs a fixed pattern; set `pattern` to a state list".into(),
            ))
        }
    };
    let encoder = encoder_for_run(cfg);
    let mut rows = Vec::with_capacity(seq.len());
    for (i, &target) in seq.iter().enumerate() {
        let (phi_e, phi_l) = ideal_phases(cfg, target)?;
        let state = encoder.emit(&cfg.spectrum, phi_e, phi_l);
        let (jones, stokes) = match &state {
            LightState::Pure(s) => {
                let canon = s.renormalized()?.canonical();
                (Some(canon), canon.to_stokes())
            }
            LightState::Mixed(rho) => (None, rho.normalized()?.to_stokes()),
        };
        rows.push(StateRow {
            index: i as u64,
            target,
            jones,
            stokes,
            dop: state.dop(),
        });
    }
    Ok(rows)
}

/// Mean degree of polarization of the states the encoder emits over the
/// pattern alphabet, with ideal drive phases.
fn mean_emitted_dop(cfg: &ExperimentConfig, encoder: &EncoderModel) -> Result<f64> {
    let states = pattern_states(cfg);
    let mut sum = 0.0;
    for &s in &states {
        let (phi_e, phi_l) = ideal_phases(cfg, s)?;
        sum += encoder.emit(&cfg.spectrum, phi_e, phi_l).dop();
    }
    Ok(sum / states.len() as f64)
}

/// Runs the identical protocol with each encoder variant and reports mean
/// QBER (pooled) plus mean output DOP per row.
///
/// The uncalibrated row is averaged over `compare.haar_samples` independent
/// fiber rotations drawn from the seed's Haar stream; every other source of
/// randomness is held identical across rows.
pub fn compare_encoders(cfg: &ExperimentConfig) -> Result<Vec<EncoderComparison>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(4);

    let with_kind = |kind: EncoderKind, calibrated: bool| -> ExperimentConfig {
        let mut c = cfg.clone();
        c.encoder_kind = kind;
        c.pognac_calibrated = calibrated;
        c
    };

    let ipognac_cfg = with_kind(EncoderKind::Ipognac, true);
    let ipognac_encoder = ipognac_cfg.build_encoder();
    let out = run_with_encoder(&ipognac_cfg, &ipognac_encoder)?;
    rows.push(EncoderComparison {
        encoder: "ipognac".into(),
        mean_qber: out.summary.pooled_qber,
        mean_dop: mean_emitted_dop(&ipognac_cfg, &ipognac_encoder)?,
    });

    let uncal_cfg = with_kind(EncoderKind::Pognac, false);
    let base = uncal_cfg.build_encoder();
    let mut qber_sum = 0.0;
    let mut qber_n = 0usize;
    let mut dop_sum = 0.0;
    for j in 0..cfg.compare_haar_samples as u64 {
        let mut rng = stream(cfg.run.seed, StreamDomain::Haar, j);
        let fiber = crate::components::SmfUnitary::haar_random(&mut rng, 0.0);
        let encoder = base.with_output_fiber(fiber);
        let out = run_with_encoder(&uncal_cfg, &encoder)?;
        if let Some(q) = out.summary.pooled_qber {
            qber_sum += q;
            qber_n += 1;
        }
        dop_sum += mean_emitted_dop(&uncal_cfg, &encoder)?;
    }
    rows.push(EncoderComparison {
        encoder: "pognac_uncalibrated".into(),
        mean_qber: (qber_n > 0).then(|| qber_sum / qber_n as f64),
        mean_dop: dop_sum / cfg.compare_haar_samples as f64,
    });

    let cal_cfg = with_kind(EncoderKind::Pognac, true);
    let cal_encoder = cal_cfg.build_encoder();
    let out = run_with_encoder(&cal_cfg, &cal_encoder)?;
    rows.push(EncoderComparison {
        encoder: "pognac_calibrated".into(),
        mean_qber: out.summary.pooled_qber,
        mean_dop: mean_emitted_dop(&cal_cfg, &cal_encoder)?,
    });

    let inline_cfg = with_kind(EncoderKind::Inline, true);
    let inline_encoder = inline_cfg.build_encoder();
    let out = run_with_encoder(&inline_cfg, &inline_encoder)?;
    rows.push(EncoderComparison {
        encoder: "inline".into(),
        mean_qber: out.summary.pooled_qber,
        mean_dop: mean_emitted_dop(&inline_cfg, &inline_encoder)?,
    });

    Ok(rows)
}

/// Runs the experiment once per sweep value of `sweep.key`, returning the
/// value alongside each run's output.
pub fn sweep_experiment(cfg: &ExperimentConfig) -> Result<Vec<(f64, RunOutput)>> {
    if cfg.sweep_key.is_empty() {
        return Err(SimError::config("sweep.key", "must name the key to sweep"));
    }
    if cfg.sweep_values.is_empty() {
        return Err(SimError::config(
            "sweep.values",
            "must list at least one value",
        ));
    }
    let mut results = Vec::with_capacity(cfg.sweep_values.len());
    for &v in &cfg.sweep_values {
        let mut point = cfg.clone();
        let rendered = if v.fract() == 0.0 && v.abs() < 9.0e15 {
            format!("{}", v as i64)
        } else {
            format!("{v}")
        };
        point.set(&cfg.sweep_key, &rendered)?;
        results.push((v, run_experiment(&point)?));
    }
    Ok(results)
}
