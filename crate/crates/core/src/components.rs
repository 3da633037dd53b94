//! Parametric models of the individual optical elements: polarization-
//! maintaining fiber, phase modulator, fiber polarizing beam splitter,
//! free-space beam splitter, single-mode-fiber unitary, and the source
//! spectrum.
//!
//! Each element is an immutable parameter record exposing its pure-state
//! (Jones) action and, where finite coherence matters, its coherency-matrix
//! action.  Drift returns a new record instead of mutating.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::polarization::{CoherencyMatrix, JonesOperator, JonesVector};
use crate::timing::SPEED_OF_LIGHT;

/// Gaussian source spectrum: centre wavelength plus coherence time.
///
/// The spectral width is `sigma_omega = 1/tau_c`, which makes the field
/// autocorrelation magnitude `exp(-(dt/tau_c)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    /// Centre wavelength in metres.
    pub center_wavelength_m: f64,
    /// Coherence time `tau_c` in seconds.
    pub coherence_time_s: f64,
}

impl Default for SpectralModel {
    fn default() -> Self {
        SpectralModel {
            center_wavelength_m: 1550e-9,
            coherence_time_s: 5e-12,
        }
    }
}

impl SpectralModel {
    /// Angular-frequency standard deviation of the spectrum, `1/tau_c`.
    pub fn sigma_omega(&self) -> f64 {
        1.0 / self.coherence_time_s
    }

    /// Centre angular frequency `2 pi c / lambda`.
    pub fn omega0(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.center_wavelength_m
    }

    /// Magnitude of the complex degree of coherence at relative delay `dt`.
    pub fn coherence_mag(&self, dt_s: f64) -> f64 {
        let x = dt_s / self.coherence_time_s;
        (-0.5 * x * x).exp()
    }
}

/// A birefringent polarization-maintaining fiber segment.
///
/// Light aligned with an axis is preserved; a superposition accumulates the
/// carrier phase `delta` between the axes and a group delay `group_delay_s`
/// that separates the two wave packets in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfSegment {
    /// Physical length in metres (bookkeeping only; the optical action is
    /// fully described by `delta_rad` and `group_delay_s`).
    pub length_m: f64,
    /// Carrier birefringent phase in radians (stored unreduced).
    pub delta_rad: f64,
    /// Differential group delay between the axes, in seconds.
    pub group_delay_s: f64,
    /// Temperature sensitivity of `delta_rad`, rad/K.
    pub temp_coeff_rad_per_k: f64,
}

impl Default for PmfSegment {
    /// The encoder's default lead fiber: a quarter-wave carrier phase and a
    /// 1.3 ps group delay (a few metres of standard PM fiber).
    fn default() -> Self {
        PmfSegment::with_phase(FRAC_PI_2, 1.3e-12)
    }
}

impl PmfSegment {
    /// Segment described directly by its phase and group delay (the default
    /// way to configure one, since `delta` is what sweeps care about).
    pub fn with_phase(delta_rad: f64, group_delay_s: f64) -> Self {
        PmfSegment {
            length_m: 0.0,
            delta_rad,
            group_delay_s,
            temp_coeff_rad_per_k: 0.0,
        }
    }

    /// Segment derived from geometry: birefringence `delta_n`, length, and
    /// centre wavelength give `delta = 2 pi delta_n L / lambda` and
    /// `group delay = delta_n L / c` (phase and group birefringence taken
    /// equal, adequate at a single wavelength).
    pub fn from_geometry(length_m: f64, delta_n: f64, wavelength_m: f64) -> Self {
        PmfSegment {
            length_m,
            delta_rad: TAU * delta_n * length_m / wavelength_m,
            group_delay_s: delta_n * length_m / SPEED_OF_LIGHT,
            temp_coeff_rad_per_k: 0.0,
        }
    }

    /// The carrier phase reduced to `[0, 2 pi)` for reporting.
    pub fn delta_reduced(&self) -> f64 {
        self.delta_rad.rem_euclid(TAU)
    }

    /// The same segment at a temperature offset `dt_k` from its reference.
    pub fn at_temperature_offset(&self, dt_k: f64) -> Self {
        PmfSegment {
            delta_rad: self.delta_rad + self.temp_coeff_rad_per_k * dt_k,
            ..*self
        }
    }

    /// Carrier Jones action `diag(1, e^{i delta})`.
    pub fn jones(&self) -> JonesOperator {
        JonesOperator::relative_phase(self.delta_rad)
    }

    /// Pure-state action (infinite-coherence limit).
    pub fn apply_pure(&self, s: &JonesVector) -> JonesVector {
        self.jones().apply(s)
    }

    /// Finite-coherence action on a coherency matrix: the axis populations
    /// are untouched while the cross-coherence is multiplied by
    /// `gamma = exp(-(group_delay/tau_c)^2/2) * e^{i delta}` (its conjugate
    /// on the opposite off-diagonal).  As `tau_c -> inf` this converges to
    /// the pure action.
    pub fn apply_coherency(&self, spectrum: &SpectralModel, rho: &CoherencyMatrix) -> CoherencyMatrix {
        let gamma = Complex64::from_polar(
            spectrum.coherence_mag(self.group_delay_s),
            self.delta_rad,
        );
        rho.damp_coherence(gamma)
    }
}

/// Lithium-niobate style phase modulator driven by rectangular voltage
/// windows.
///
/// # Sign convention
///
/// A drive phase `phi` retards the optical carrier, multiplying the field by
/// `e^{-i phi}`.  All phase arithmetic in the encoder uses this factor; the
/// operational state rules (no voltage -> unchanged, early-window voltage
/// `V_halfpi` -> left circular, late-window voltage -> right circular) come
/// out of it together with the beam-splitter reflection bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModulator {
    /// Voltage producing a pi/2 phase shift.
    pub v_halfpi: f64,
    /// RMS phase noise per modulation window, radians.
    pub sigma_phi: f64,
    /// Electrical rise/fall allowance folded into timing margins, seconds.
    pub rise_s: f64,
}

impl Default for PhaseModulator {
    fn default() -> Self {
        PhaseModulator {
            v_halfpi: 2.5,
            sigma_phi: 0.015,
            rise_s: 50e-12,
        }
    }
}

impl PhaseModulator {
    /// Drive phase for a voltage: `(pi/2) * v / v_halfpi` (linear, zero at
    /// zero).
    pub fn phase_for_voltage(&self, v: f64) -> f64 {
        FRAC_PI_2 * v / self.v_halfpi
    }

    /// Voltage needed for a drive phase.
    pub fn voltage_for_phase(&self, phase: f64) -> f64 {
        phase * self.v_halfpi / FRAC_PI_2
    }

    /// Field factor for a drive phase under the retardation convention.
    pub fn field_factor(phase: f64) -> Complex64 {
        Complex64::from_polar(1.0, -phase)
    }

    /// One zero-mean Gaussian phase-noise draw for a modulation window.
    pub fn noise_draw(&self, rng: &mut impl Rng) -> f64 {
        if self.sigma_phi == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, self.sigma_phi)
            .expect("sigma_phi must be finite and non-negative")
            .sample(rng)
    }
}

/// Amplitudes leaving (or re-entering) the two ports of the fiber PBS.
///
/// `cw` is the reflected port feeding the clockwise loop direction (ideally
/// the V component); `ccw` is the transmitted port feeding the
/// counter-clockwise direction (ideally H).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAmplitudes {
    pub cw: Complex64,
    pub ccw: Complex64,
}

/// Result of a PBS pass, keeping the ideal routing and the extinction
/// leakage separate so imperfection budgets stay auditable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsSplit {
    /// Ideally-routed amplitudes, scaled by `sqrt(1 - r)`.
    pub through: BranchAmplitudes,
    /// Cross-talk amplitudes, scaled by `sqrt(r)`.  The sign pattern (plus
    /// into the cw port, minus into the ccw port) is the unitary completion
    /// that conserves intensity under coherent recombination.
    pub leaked: BranchAmplitudes,
}

impl PbsSplit {
    /// Coherent per-port totals.
    pub fn combined(&self) -> BranchAmplitudes {
        BranchAmplitudes {
            cw: self.through.cw + self.leaked.cw,
            ccw: self.through.ccw + self.leaked.ccw,
        }
    }
}

/// Fiber polarizing beam splitter with a finite extinction ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberPbs {
    /// Intensity leakage into the wrong port (e.g. `1e-3` for 30 dB).
    pub extinction: f64,
}

impl Default for FiberPbs {
    fn default() -> Self {
        FiberPbs { extinction: 1e-3 }
    }
}

impl FiberPbs {
    /// Ideal splitter.
    pub fn ideal() -> Self {
        FiberPbs { extinction: 0.0 }
    }

    fn amps(&self) -> (f64, f64) {
        ((1.0 - self.extinction).sqrt(), self.extinction.sqrt())
    }

    /// Splits an input field into the loop's two counter-propagating
    /// branches.  V reflects into the cw branch and H transmits into the ccw
    /// branch; a fraction `r` of each intensity leaks across.
    pub fn split(&self, s: &JonesVector) -> PbsSplit {
        let (t, eps) = self.amps();
        PbsSplit {
            through: BranchAmplitudes {
                cw: s.a_v * t,
                ccw: s.a_h * t,
            },
            leaked: BranchAmplitudes {
                cw: s.a_h * eps,
                ccw: -s.a_v * eps,
            },
        }
    }

    /// Recombines the returning branches into an output field.
    ///
    /// In the ideal limit this together with [`FiberPbs::split`] realises the
    /// loop exchange: the cw traveller (originally V) exits on H and the ccw
    /// traveller (originally H) exits on V with a sign flip, i.e. the
    /// composite is `[[0, 1], [-1, 0]]`.
    pub fn recombine(&self, b: &BranchAmplitudes) -> JonesVector {
        let (t, eps) = self.amps();
        JonesVector::raw(b.cw * t + b.ccw * eps, b.cw * eps - b.ccw * t)
    }
}

/// Which way a field traverses the free-space beam splitter in front of the
/// loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsPath {
    /// Source side to loop side on the way in.
    ForwardTransmit,
    /// Loop side to the output port on the way back.
    ReturnReflect,
}

/// Free-space beam splitter.  `transmittance + reflectance <= 1`; the
/// deficit, if any, is absorbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpaceBs {
    pub transmittance: f64,
    pub reflectance: f64,
}

impl Default for FreeSpaceBs {
    fn default() -> Self {
        FreeSpaceBs {
            transmittance: 0.5,
            reflectance: 0.5,
        }
    }
}

impl FreeSpaceBs {
    /// Applies one traversal.  Forward transmission scales the field by
    /// `sqrt(T)` and leaves the polarization untouched.  Return reflection
    /// scales by `sqrt(R)` and applies the fold's pi shift to the in-plane
    /// (H) component, flipping the relative H-V phase — the observable form
    /// of the "extra pi on reflection".
    pub fn interact(&self, s: &JonesVector, path: BsPath) -> JonesVector {
        match path {
            BsPath::ForwardTransmit => {
                let a = Complex64::new(self.transmittance.sqrt(), 0.0);
                JonesVector::raw(s.a_h * a, s.a_v * a)
            }
            BsPath::ReturnReflect => {
                let a = Complex64::new(self.reflectance.sqrt(), 0.0);
                JonesVector::raw(-s.a_h * a, s.a_v * a)
            }
        }
    }
}

/// An arbitrary fiber polarization rotation, parametrised by three Euler-like
/// angles: a relative-phase stage, an axis rotation, and another
/// relative-phase stage.
///
/// `operator() = phase(alpha) . rotation(beta/2) . phase(gamma)` — enough to
/// reach any polarization unitary up to global phase.  `beta` is the middle
/// rotation angle on the Stokes sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmfUnitary {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Random-walk scale: standard deviation, in radians, accumulated by
    /// each angle over one hour of drift.
    pub drift_rate_rad_per_sqrt_hour: f64,
}

impl SmfUnitary {
    /// The identity rotation (a perfectly aligned fiber).
    pub fn identity() -> Self {
        SmfUnitary {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            drift_rate_rad_per_sqrt_hour: 0.0,
        }
    }

    /// Identity rotation with a drift rate attached.
    pub fn identity_with_drift(rate: f64) -> Self {
        SmfUnitary {
            drift_rate_rad_per_sqrt_hour: rate,
            ..SmfUnitary::identity()
        }
    }

    /// Draws a Haar-uniform polarization rotation: outer angles uniform on
    /// `[0, 2 pi)`, cosine of the middle angle uniform on `[-1, 1]`.
    pub fn haar_random(rng: &mut impl Rng, drift_rate: f64) -> Self {
        let alpha = rng.random_range(0.0..TAU);
        let gamma = rng.random_range(0.0..TAU);
        let cos_beta: f64 = rng.random_range(-1.0..1.0);
        SmfUnitary {
            alpha,
            beta: cos_beta.acos(),
            gamma,
            drift_rate_rad_per_sqrt_hour: drift_rate,
        }
    }

    /// The represented Jones operator.
    pub fn operator(&self) -> JonesOperator {
        JonesOperator::relative_phase(self.alpha)
            .matmul(&JonesOperator::rotation(self.beta / 2.0))
            .matmul(&JonesOperator::relative_phase(self.gamma))
    }

    /// Applies the rotation to a pure state.
    pub fn apply(&self, s: &JonesVector) -> JonesVector {
        self.operator().apply(s)
    }

    /// Advances the drift random walk by `dt_s` seconds.  Each angle takes an
    /// independent Gaussian step with standard deviation
    /// `rate * sqrt(dt / 1 h)`, the diffusive scaling that makes a walk in
    /// two half-steps statistically identical to one full step.
    pub fn drifted(&self, dt_s: f64, rng: &mut impl Rng) -> Self {
        if self.drift_rate_rad_per_sqrt_hour == 0.0 || dt_s == 0.0 {
            return *self;
        }
        let sigma = self.drift_rate_rad_per_sqrt_hour * (dt_s / 3600.0).sqrt();
        let step = Normal::new(0.0, sigma).expect("drift sigma must be finite");
        SmfUnitary {
            alpha: self.alpha + step.sample(rng),
            beta: self.beta + step.sample(rng),
            gamma: self.gamma + step.sample(rng),
            drift_rate_rad_per_sqrt_hour: self.drift_rate_rad_per_sqrt_hour,
        }
    }
}
