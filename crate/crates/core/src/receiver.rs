//! The free-space measurement station (quarter-wave plate, half-wave plate,
//! polarizing beam splitter) and superconducting-nanowire detector
//! statistics.
//!
//! The half-wave plate stays fixed at 22.5 degrees; switching between the
//! key basis (circular states) and the check basis (diagonal states) is done
//! purely by rotating the quarter-wave plate, 90 degrees for key and 45
//! degrees for check.  Detector 0 sits on the analyzer's H port, detector 1
//! on V.

use rand::Rng;
use std::fmt;
use std::str::FromStr;

use crate::components::SmfUnitary;
use crate::error::{Result, SimError};
use crate::polarization::{JonesOperator, JonesVector, LightState, StateLabel};

/// Measurement basis of the receiving station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Key-generation basis {L, R}.
    Key,
    /// Check basis {D, A}.
    Check,
}

impl Basis {
    /// The state routed to detector 0 / detector 1 in this basis.
    pub fn detector_states(self) -> (StateLabel, StateLabel) {
        match self {
            Basis::Key => (StateLabel::L, StateLabel::R),
            Basis::Check => (StateLabel::D, StateLabel::A),
        }
    }

    /// Whether a sent state belongs to this basis.
    pub fn contains(self, label: StateLabel) -> bool {
        let (a, b) = self.detector_states();
        label == a || label == b
    }

    /// Short name ("K" or "C").
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Key => "K",
            Basis::Check => "C",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Basis {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "K" | "k" | "key" => Ok(Basis::Key),
            "C" | "c" | "check" => Ok(Basis::Check),
            other => Err(SimError::UnknownBasis(other.to_string())),
        }
    }
}

/// Waveplate pair plus polarizing beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementStation {
    pub basis: Basis,
    /// Quarter-wave plate fast-axis angle, radians.
    pub qwp_rad: f64,
    /// Half-wave plate fast-axis angle, radians.
    pub hwp_rad: f64,
}

impl MeasurementStation {
    /// The station configured for a basis: the analyzer maps that basis's
    /// detector-0 state onto H and its detector-1 state onto V.
    pub fn for_basis(basis: Basis) -> Self {
        let qwp_rad = match basis {
            Basis::Key => std::f64::consts::FRAC_PI_2,
            Basis::Check => std::f64::consts::FRAC_PI_4,
        };
        MeasurementStation {
            basis,
            qwp_rad,
            hwp_rad: std::f64::consts::FRAC_PI_8,
        }
    }

    /// Composed analyzer operator (light crosses the quarter-wave plate
    /// first, then the half-wave plate).
    pub fn operator(&self) -> JonesOperator {
        let qwp = JonesOperator::retarder(self.qwp_rad, std::f64::consts::FRAC_PI_2);
        let hwp = JonesOperator::retarder(self.hwp_rad, std::f64::consts::PI);
        hwp.matmul(&qwp)
    }

    /// Intensities reaching the two analyzer ports.  For unit-intensity
    /// input these are the detection probabilities and sum to one; in
    /// general they sum to the input intensity.
    pub fn projection_probs(&self, state: &LightState) -> (f64, f64) {
        let analyzed = state.apply(&self.operator());
        match analyzed {
            LightState::Pure(s) => (s.a_h.norm_sqr(), s.a_v.norm_sqr()),
            LightState::Mixed(r) => (r.m[0][0].re, r.m[1][1].re),
        }
    }
}

/// One superconducting-nanowire detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnspdModel {
    /// Peak system detection efficiency.
    pub eta: f64,
    /// Polarization-dependence amplitude: efficiency drops to
    /// `eta * (1 - eps_pol)` for light orthogonal to the preferred axis.
    pub eps_pol: f64,
    /// Dark-count rate, Hz.
    pub dark_hz: f64,
    /// The nanowire's preferred polarization axis, in the frame after the
    /// detector's input fiber.
    pub preferred: JonesVector,
    /// Fiber pigtail between the analyzer port and the nanowire; its slow
    /// drift is what moves the effective efficiency.
    pub input_fiber: SmfUnitary,
}

impl SnspdModel {
    /// Detector with the given drift rate, preferred axis H, perfectly
    /// aligned at start of run.
    pub fn new(eta: f64, eps_pol: f64, dark_hz: f64, drift_rate: f64) -> Self {
        SnspdModel {
            eta,
            eps_pol,
            dark_hz,
            preferred: JonesVector::basis_state(StateLabel::H),
            input_fiber: SmfUnitary::identity_with_drift(drift_rate),
        }
    }

    /// Effective efficiency for light of the given polarization at the
    /// analyzer port: `eta * (1 - eps_pol * (1 - |<p_max|U s>|^2))`.
    pub fn effective_efficiency(&self, port_state: &JonesVector) -> f64 {
        let at_nanowire = self.input_fiber.apply(port_state);
        let overlap = self.preferred.fidelity(&at_nanowire);
        self.eta * (1.0 - self.eps_pol * (1.0 - overlap))
    }
}

/// The station's two detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnspdPair {
    pub det0: SnspdModel,
    pub det1: SnspdModel,
}

impl SnspdPair {
    /// A matched pair: each nanowire's preferred axis starts aligned with
    /// its own analyzer port (H for detector 0, V for detector 1), so both
    /// open the run at the peak efficiency and drift degrades them
    /// symmetrically.
    pub fn matched(eta: f64, eps_pol: f64, dark_hz: f64, drift_rate: f64) -> Self {
        SnspdPair {
            det0: SnspdModel::new(eta, eps_pol, dark_hz, drift_rate),
            det1: SnspdModel {
                preferred: JonesVector::basis_state(StateLabel::V),
                ..SnspdModel::new(eta, eps_pol, dark_hz, drift_rate)
            },
        }
    }

    /// Advances both input-fiber drift walks by `dt_s` using draws from the
    /// caller's seeded stream (detector 0 first, then detector 1, so a fixed
    /// stream gives a fixed trajectory).
    pub fn drift_step(&self, dt_s: f64, rng: &mut impl Rng) -> Self {
        SnspdPair {
            det0: SnspdModel {
                input_fiber: self.det0.input_fiber.drifted(dt_s, rng),
                ..self.det0
            },
            det1: SnspdModel {
                input_fiber: self.det1.input_fiber.drifted(dt_s, rng),
                ..self.det1
            },
        }
    }

    /// Current effective efficiencies for the analyzer's H and V ports.
    pub fn port_efficiencies(&self) -> (f64, f64) {
        (
            self.det0
                .effective_efficiency(&JonesVector::basis_state(StateLabel::H)),
            self.det1
                .effective_efficiency(&JonesVector::basis_state(StateLabel::V)),
        )
    }
}

/// One recorded click.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub pulse_index: u64,
    /// 0 or 1.
    pub detector: u8,
    pub timestamp_s: f64,
}

/// Per-pulse photon budget seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSettings {
    /// Mean photon number per pulse at the channel input.
    pub mu: f64,
    /// Channel intensity transmittance in `[0, 1]`.
    pub channel_transmittance: f64,
    /// Detector gate length, seconds.
    pub gate_s: f64,
}

/// Expected click intensity (Poisson mean) per detector for a pulse,
/// including dark counts: signal `mu * t * p_i * eff_i` plus
/// `dark_i * gate`.
pub fn click_means(
    state: &LightState,
    settings: &DetectionSettings,
    pair: &SnspdPair,
    station: &MeasurementStation,
) -> (f64, f64) {
    let (p0, p1) = station.projection_probs(state);
    let (eff0, eff1) = pair.port_efficiencies();
    let scale = settings.mu * settings.channel_transmittance;
    (
        scale * p0 * eff0 + pair.det0.dark_hz * settings.gate_s,
        scale * p1 * eff1 + pair.det1.dark_hz * settings.gate_s,
    )
}

/// Simulates the clicks for one pulse.
///
/// The incident photon number is Poisson with mean `mu * transmittance`;
/// routing a Poisson number of photons multinomially and thinning each by
/// its detector's efficiency yields independent Poisson counts per detector,
/// so each detector clicks independently with probability
/// `1 - exp(-lambda_i)`.  Both detectors may click on the same pulse; both
/// records are returned (detector 0 first).
pub fn detect(
    state: &LightState,
    settings: &DetectionSettings,
    pair: &SnspdPair,
    station: &MeasurementStation,
    pulse_index: u64,
    timestamp_s: f64,
    rng: &mut impl Rng,
) -> Vec<DetectionRecord> {
    let (lambda0, lambda1) = click_means(state, settings, pair, station);
    let mut records = Vec::new();
    // Fixed draw order (detector 0 then 1) keeps streams reproducible.
    if rng.random::<f64>() < -(-lambda0).exp_m1() {
        records.push(DetectionRecord {
            pulse_index,
            detector: 0,
            timestamp_s,
        });
    }
    if rng.random::<f64>() < -(-lambda1).exp_m1() {
        records.push(DetectionRecord {
            pulse_index,
            detector: 1,
            timestamp_s,
        });
    }
    records
}
