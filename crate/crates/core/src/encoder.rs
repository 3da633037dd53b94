//! Encoder models: the self-compensating Sagnac-loop polarization modulator,
//! the earlier Sagnac variant whose output traverses an uncontrolled
//! single-mode fiber, and an in-line birefringent modulator baseline.
//!
//! The Sagnac pipeline is built stage by stage — beam splitter, lead fiber,
//! PBS split, counter-propagating drive phases, PBS recombination, return
//! passes — rather than by substituting the closed-form result, so that
//! imperfections (extinction leakage, phase noise, loop loss) enter at their
//! physical locations.  The closed forms then serve as oracles in the ideal
//! limit.

use num_complex::Complex64;

use crate::components::{
    BranchAmplitudes, BsPath, FiberPbs, FreeSpaceBs, PhaseModulator, PmfSegment, SmfUnitary,
    SpectralModel,
};
use crate::polarization::{CoherencyMatrix, JonesVector, LightState, StateLabel};
use crate::timing::LoopGeometry;

/// The self-compensating Sagnac encoder.
///
/// Input light (default `|D>`) crosses the free-space beam splitter, picks up
/// the lead-fiber birefringent phase, splits at the PBS into clockwise
/// (V-polarized, modulated early) and counter-clockwise (H-polarized,
/// modulated late) travellers, recombines with the H/V exchange, and returns
/// through the lead fiber and the beam splitter's reflected port.  The
/// return pass undoes both the carrier phase and the group delay of the lead
/// fiber because the exchange swaps which axis carries them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpognacEncoder {
    /// Launched polarization state (unit norm).
    pub input: JonesVector,
    /// Lead birefringent fiber between the beam splitter and the loop.
    pub lead_pmf: PmfSegment,
    /// Drive electronics shared with the scheduler.
    pub modulator: PhaseModulator,
    /// Loop polarizing beam splitter.
    pub pbs: FiberPbs,
    /// Input/output free-space beam splitter.
    pub bs: FreeSpaceBs,
    /// Delay-line geometry (used by the scheduler; carried here so one
    /// record describes the whole device).
    pub geometry: LoopGeometry,
    /// Scalar intensity fraction lost per loop round trip (off by default).
    pub loop_loss: f64,
}

impl Default for IpognacEncoder {
    /// The fitted hardware-like configuration: 30 dB PBS extinction and the
    /// documented default lead-fiber phase.
    fn default() -> Self {
        IpognacEncoder {
            input: JonesVector::basis_state(StateLabel::D),
            lead_pmf: PmfSegment::default(),
            modulator: PhaseModulator::default(),
            pbs: FiberPbs::default(),
            bs: FreeSpaceBs::default(),
            geometry: LoopGeometry::default(),
            loop_loss: 0.0,
        }
    }
}

impl IpognacEncoder {
    /// An imperfection-free device (ideal PBS), for oracle comparisons.
    pub fn ideal() -> Self {
        IpognacEncoder {
            pbs: FiberPbs::ideal(),
            modulator: PhaseModulator {
                sigma_phi: 0.0,
                ..PhaseModulator::default()
            },
            ..IpognacEncoder::default()
        }
    }

    /// Amplitude factor for one pass through the loop's scalar loss knob.
    fn loop_amp(&self) -> Complex64 {
        Complex64::new((1.0 - self.loop_loss).sqrt(), 0.0)
    }

    /// Branch propagation: the cw traveller sees the early drive phase, the
    /// ccw traveller the late one; both share the scalar loop loss.
    fn traverse_loop(&self, amps: BranchAmplitudes, phi_e: f64, phi_l: f64) -> BranchAmplitudes {
        let a = self.loop_amp();
        BranchAmplitudes {
            cw: amps.cw * PhaseModulator::field_factor(phi_e) * a,
            ccw: amps.ccw * PhaseModulator::field_factor(phi_l) * a,
        }
    }

    /// The field emerging from the PBS after one loop round trip, before the
    /// return pass through the lead fiber.
    fn field_after_loop(&self, phi_e: f64, phi_l: f64) -> JonesVector {
        let launched = self.bs.interact(&self.input, BsPath::ForwardTransmit);
        let at_pbs = self.lead_pmf.apply_pure(&launched);
        let branches = self.pbs.split(&at_pbs).combined();
        let returned = self.traverse_loop(branches, phi_e, phi_l);
        self.pbs.recombine(&returned)
    }

    /// Full stagewise output field, amplitude scale included (intensity
    /// `T * R * (1 - loop_loss)` of the input for ideal elements).
    pub fn output_field(&self, phi_e: f64, phi_l: f64) -> JonesVector {
        let back = self.lead_pmf.apply_pure(&self.field_after_loop(phi_e, phi_l));
        self.bs.interact(&back, BsPath::ReturnReflect)
    }

    /// The emitted polarization state (unit norm).
    ///
    /// # Panics
    ///
    /// Panics if the configured splitting ratios leave no output amplitude
    /// (`T = 0` or `R = 0`); configuration validation rejects those upstream.
    pub fn output_state(&self, phi_e: f64, phi_l: f64) -> JonesVector {
        self.output_field(phi_e, phi_l)
            .renormalized()
            .expect("beam-splitter ratios must leave a nonzero output field")
    }

    /// The output field split into the part that travelled the loop
    /// clockwise and the part that travelled it counter-clockwise; they sum
    /// to [`IpognacEncoder::output_field`].
    ///
    /// Every optical element is linear, and each photon path crosses the
    /// modulator in exactly one window, so the full output is
    /// `cw_part * e^{-i n_e} + ccw_part * e^{-i n_l}` for window phase
    /// noises `(n_e, n_l)`.  That linearity is what allows Gaussian phase
    /// noise to be averaged in closed form.
    pub fn output_field_split(&self, phi_e: f64, phi_l: f64) -> (JonesVector, JonesVector) {
        let launched = self.bs.interact(&self.input, BsPath::ForwardTransmit);
        let at_pbs = self.lead_pmf.apply_pure(&launched);
        let branches = self.pbs.split(&at_pbs).combined();
        let finish = |amps: BranchAmplitudes| {
            let recombined = self.pbs.recombine(&self.traverse_loop(amps, phi_e, phi_l));
            let back = self.lead_pmf.apply_pure(&recombined);
            self.bs.interact(&back, BsPath::ReturnReflect)
        };
        (
            finish(BranchAmplitudes {
                cw: branches.cw,
                ccw: Complex64::ZERO,
            }),
            finish(BranchAmplitudes {
                cw: Complex64::ZERO,
                ccw: branches.ccw,
            }),
        )
    }

    /// Output coherency averaged over the modulator's Gaussian window
    /// noise, exactly.
    ///
    /// With independent window noises of RMS `sigma` the emitted field is
    /// `cw e^{-i n_e} + ccw e^{-i n_l}`; taking the expectation of the outer
    /// product leaves the direct terms untouched and multiplies the cross
    /// terms by `E[e^{-i(n_e - n_l)}] = e^{-sigma^2}`.  The lost coherence
    /// corresponds to light scattered into the unused beam-splitter port, so
    /// the trace drops slightly below the noiseless output intensity.
    pub fn noise_averaged_coherency(&self, phi_e: f64, phi_l: f64, sigma: f64) -> CoherencyMatrix {
        let (cw, ccw) = self.output_field_split(phi_e, phi_l);
        let g = (-sigma * sigma).exp();
        let cw_a = [cw.a_h, cw.a_v];
        let ccw_a = [ccw.a_h, ccw.a_v];
        let mut m = [[Complex64::ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let direct = cw_a[i] * cw_a[j].conj() + ccw_a[i] * ccw_a[j].conj();
                let cross = cw_a[i] * ccw_a[j].conj() + ccw_a[i] * cw_a[j].conj();
                *cell = direct + cross * g;
            }
        }
        CoherencyMatrix::from_matrix(m)
            .expect("a noise-averaged outer product is a valid coherency matrix")
    }

    /// The normalized state emerging from the PBS (before the return fiber
    /// pass).  For a `|D>` input and ideal elements this equals
    /// `(|H> - e^{i(phi_e - phi_l - delta)} |V>)/sqrt(2)` up to global phase.
    pub fn intermediate_state(&self, phi_e: f64, phi_l: f64) -> JonesVector {
        self.field_after_loop(phi_e, phi_l)
            .renormalized()
            .expect("beam-splitter transmittance must be nonzero")
    }

    /// The bare PBS-plus-loop action with both drive phases at zero and the
    /// lead fiber removed: for an ideal PBS it maps `|H> -> -|V>` and
    /// `|V> -> |H>` exactly.
    pub fn sagnac_bare(&self, s: &JonesVector) -> JonesVector {
        let branches = self.pbs.split(s).combined();
        self.pbs.recombine(&self.traverse_loop(branches, 0.0, 0.0))
    }

    /// Output coherency matrix for finite source coherence.
    ///
    /// Tracks, alongside the carrier Jones factors, the per-axis group delay
    /// accumulated by each spectral component; the lead fiber's delay lands
    /// on the slow axis going in and on the exchanged axis coming back, so
    /// the differential delay cancels structurally and the output stays
    /// fully polarized for any `delta` and any delay.  The PBS is taken as
    /// ideal on this path: extinction's polarization error is a pure-state
    /// effect handled by [`IpognacEncoder::output_state`], while this method
    /// models the interferometric compensation itself.
    pub fn output_coherency(
        &self,
        spectrum: &SpectralModel,
        phi_e: f64,
        phi_l: f64,
    ) -> CoherencyMatrix {
        let t = Complex64::new(self.bs.transmittance.sqrt(), 0.0);
        let r = Complex64::new(self.bs.reflectance.sqrt(), 0.0);
        let delta = Complex64::from_polar(1.0, self.lead_pmf.delta_rad);
        let dgd = self.lead_pmf.group_delay_s;
        let a = self.loop_amp();

        let mut pipe = DelayedPipeline::new();
        // Beam splitter in, lead fiber forward (slow axis on V).
        pipe.push_diagonal(t, t, 0.0, 0.0);
        pipe.push_diagonal(Complex64::new(1.0, 0.0), delta, 0.0, dgd);
        // Loop: exchange with drive phases; both directions share the loop
        // transit, so no differential delay arises here.
        pipe.push_antidiagonal(
            PhaseModulator::field_factor(phi_e) * a,
            -PhaseModulator::field_factor(phi_l) * a,
            0.0,
            0.0,
        );
        // Lead fiber backward and the reflected beam-splitter exit.
        pipe.push_diagonal(Complex64::new(1.0, 0.0), delta, 0.0, dgd);
        pipe.push_diagonal(-r, r, 0.0, 0.0);

        pipe.output_coherency(spectrum, &self.input)
    }

    /// Negative control: the same lead fiber traversed twice on the same
    /// axis (no exchange in between), so carrier phase and group delay both
    /// double instead of cancelling.  A `|D>` input comes out with
    /// `DOP = exp(-(2 dgd / tau_c)^2 / 2)`.
    pub fn uncompensated_double_pass_coherency(&self, spectrum: &SpectralModel) -> CoherencyMatrix {
        let delta = Complex64::from_polar(1.0, self.lead_pmf.delta_rad);
        let dgd = self.lead_pmf.group_delay_s;
        let mut pipe = DelayedPipeline::new();
        pipe.push_diagonal(Complex64::new(1.0, 0.0), delta, 0.0, dgd);
        pipe.push_diagonal(Complex64::new(1.0, 0.0), delta, 0.0, dgd);
        pipe.output_coherency(spectrum, &self.input)
    }
}

/// Frequency-resolved Jones pipeline in normal form
/// `J(nu) = diag(e^{i nu u}, e^{i nu v}) . M`: a carrier matrix `M` plus one
/// accumulated group delay per output axis.
///
/// Elements whose carrier is diagonal add their delays axis-wise; elements
/// whose carrier is antidiagonal first swap which axis the accumulated
/// delays ride on.  Averaging over a symmetric Gaussian spectrum then damps
/// the output coherence by `exp(-((u - v)/tau_c)^2 / 2)` — the closed form
/// the brute-force spectral integration tests verify.
struct DelayedPipeline {
    carrier: [[Complex64; 2]; 2],
    delay_h: f64,
    delay_v: f64,
}

impl DelayedPipeline {
    fn new() -> Self {
        let one = Complex64::new(1.0, 0.0);
        DelayedPipeline {
            carrier: [[one, Complex64::ZERO], [Complex64::ZERO, one]],
            delay_h: 0.0,
            delay_v: 0.0,
        }
    }

    fn compose_carrier(&mut self, b: [[Complex64; 2]; 2]) {
        let a = self.carrier;
        let mut m = [[Complex64::ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = b[i][0] * a[0][j] + b[i][1] * a[1][j];
            }
        }
        self.carrier = m;
    }

    /// Appends `diag(c_h, c_v)` whose axes delay by `(d_h, d_v)`.
    fn push_diagonal(&mut self, c_h: Complex64, c_v: Complex64, d_h: f64, d_v: f64) {
        self.compose_carrier([[c_h, Complex64::ZERO], [Complex64::ZERO, c_v]]);
        self.delay_h += d_h;
        self.delay_v += d_v;
    }

    /// Appends `[[0, c_hv], [c_vh, 0]]` whose output axes delay by
    /// `(d_h, d_v)`.  The exchange reroutes previously accumulated delays to
    /// the opposite axis first.
    fn push_antidiagonal(&mut self, c_hv: Complex64, c_vh: Complex64, d_h: f64, d_v: f64) {
        self.compose_carrier([[Complex64::ZERO, c_hv], [c_vh, Complex64::ZERO]]);
        std::mem::swap(&mut self.delay_h, &mut self.delay_v);
        self.delay_h += d_h;
        self.delay_v += d_v;
    }

    /// Spectrum-averaged output coherency for a pure input.
    fn output_coherency(&self, spectrum: &SpectralModel, input: &JonesVector) -> CoherencyMatrix {
        let m = &self.carrier;
        let out = JonesVector::raw(
            m[0][0] * input.a_h + m[0][1] * input.a_v,
            m[1][0] * input.a_h + m[1][1] * input.a_v,
        );
        let gamma = spectrum.coherence_mag(self.delay_h - self.delay_v);
        out.to_coherency()
            .damp_coherence(Complex64::new(gamma, 0.0))
    }
}

/// The earlier Sagnac encoder variant: same loop, but the output reaches the
/// quantum channel through an uncontrolled single-mode fiber, so emitted
/// states are rotated by an unknown unitary unless a receiver-side
/// calibration undoes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PognacEncoder {
    pub core: IpognacEncoder,
    /// The uncontrolled output fiber.
    pub output_fiber: SmfUnitary,
    /// Whether the receiver applies the exact inverse rotation.
    pub calibrated: bool,
}

impl PognacEncoder {
    /// Emitted state.  When calibrated, the fiber rotation and its
    /// receiver-side inverse compose to the identity, which is applied as
    /// such — making the calibrated device agree with the Sagnac-only
    /// encoder not just within rounding but bit for bit.
    pub fn output_state(&self, phi_e: f64, phi_l: f64) -> JonesVector {
        let core = self.core.output_state(phi_e, phi_l);
        if self.calibrated {
            core
        } else {
            self.output_fiber.apply(&core)
        }
    }
}

/// In-line birefringent phase modulator baseline: drives a relative phase
/// directly between H and V of a `|D>` input, at the cost of a
/// polarization-mode-dispersion group delay that depolarizes short pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlineEncoder {
    pub modulator: PhaseModulator,
    /// Differential group delay between the modulator axes, seconds.
    pub pmd_delay_s: f64,
}

impl InlineEncoder {
    /// Output for a drive voltage.
    pub fn output_for_voltage(&self, spectrum: &SpectralModel, v: f64) -> CoherencyMatrix {
        self.output_with_phase(spectrum, self.modulator.phase_for_voltage(v))
    }

    /// Output for a drive phase: relative phase `phi` on V with the
    /// cross-coherence damped by the PMD delay.
    pub fn output_with_phase(&self, spectrum: &SpectralModel, phi: f64) -> CoherencyMatrix {
        let gamma = Complex64::from_polar(spectrum.coherence_mag(self.pmd_delay_s), phi);
        JonesVector::basis_state(StateLabel::D)
            .to_coherency()
            .damp_coherence(gamma)
    }
}

/// Any of the three encoder implementations, presenting one emission
/// interface to the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncoderModel {
    Ipognac(IpognacEncoder),
    Pognac(PognacEncoder),
    Inline(InlineEncoder),
}

impl EncoderModel {
    /// Emits the pulse state for an effective drive-phase pair.
    ///
    /// The in-line device has a single modulation window; it realises the
    /// same three-state map by driving the phase difference `phi_e - phi_l`.
    pub fn emit(&self, spectrum: &SpectralModel, phi_e: f64, phi_l: f64) -> LightState {
        match self {
            EncoderModel::Ipognac(enc) => LightState::Pure(enc.output_state(phi_e, phi_l)),
            EncoderModel::Pognac(enc) => LightState::Pure(enc.output_state(phi_e, phi_l)),
            EncoderModel::Inline(enc) => {
                LightState::Mixed(enc.output_with_phase(spectrum, phi_e - phi_l))
            }
        }
    }

    /// Emits the pulse state with Gaussian window noise of RMS `sigma`
    /// averaged analytically, for the event-count-scaling run mode.  With
    /// `sigma = 0` this coincides with [`EncoderModel::emit`].
    ///
    /// The in-line device is driven by the same two-window electronics, so
    /// its relative phase carries both window noises and its coherence is
    /// damped by the same `e^{-sigma^2}` factor.
    pub fn noise_averaged_emit(
        &self,
        spectrum: &SpectralModel,
        phi_e: f64,
        phi_l: f64,
        sigma: f64,
    ) -> LightState {
        match self {
            EncoderModel::Ipognac(enc) => {
                LightState::Mixed(enc.noise_averaged_coherency(phi_e, phi_l, sigma))
            }
            EncoderModel::Pognac(enc) => {
                let rho = enc.core.noise_averaged_coherency(phi_e, phi_l, sigma);
                LightState::Mixed(if enc.calibrated {
                    rho
                } else {
                    enc.output_fiber.operator().apply_coherency(&rho)
                })
            }
            EncoderModel::Inline(enc) => {
                let g = (-sigma * sigma).exp();
                let rho = enc.output_with_phase(spectrum, phi_e - phi_l);
                LightState::Mixed(rho.damp_coherence(Complex64::new(g, 0.0)))
            }
        }
    }

    /// The Sagnac core's modulator, or the inline modulator.
    pub fn modulator(&self) -> &PhaseModulator {
        match self {
            EncoderModel::Ipognac(enc) => &enc.modulator,
            EncoderModel::Pognac(enc) => &enc.core.modulator,
            EncoderModel::Inline(enc) => &enc.modulator,
        }
    }

    /// Replaces the uncontrolled output fiber, if this encoder has one.
    pub fn with_output_fiber(&self, fiber: SmfUnitary) -> EncoderModel {
        match self {
            EncoderModel::Pognac(enc) => EncoderModel::Pognac(PognacEncoder {
                output_fiber: fiber,
                ..*enc
            }),
            other => *other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{stream, StreamDomain};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    /// Closed-form state emerging from the PBS for a |D> input:
    /// (|H> - e^{i(phi_e - phi_l - delta)} |V>)/sqrt(2).
    fn closed_form_intermediate(phi_e: f64, phi_l: f64, delta: f64) -> JonesVector {
        JonesVector::raw(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            -Complex64::from_polar(FRAC_1_SQRT_2, phi_e - phi_l - delta),
        )
    }

    /// Closed-form emitted state for a generic input (alpha, beta):
    /// beta |H> + alpha e^{i(phi_e - phi_l)} |V>, delta-independent.
    fn closed_form_output(alpha: Complex64, beta: Complex64, phi_e: f64, phi_l: f64) -> JonesVector {
        JonesVector::raw(beta, alpha * Complex64::from_polar(1.0, phi_e - phi_l))
    }

    fn ideal_with_delta(delta: f64) -> IpognacEncoder {
        let mut enc = IpognacEncoder::ideal();
        enc.lead_pmf = PmfSegment::with_phase(delta, enc.lead_pmf.group_delay_s);
        enc
    }

    #[test]
    fn intermediate_matches_closed_form_examples() {
        // No drive, no birefringence: the loop exchange turns |D> into |A>.
        let enc = ideal_with_delta(0.0);
        let out = enc.intermediate_state(0.0, 0.0);
        assert_close(
            out.fidelity(&JonesVector::basis_state(StateLabel::A)),
            1.0,
            1e-12,
        );

        // A pi late phase flips the sign back to |D>.
        let out = enc.intermediate_state(0.0, PI);
        assert_close(
            out.fidelity(&JonesVector::basis_state(StateLabel::D)),
            1.0,
            1e-12,
        );

        // Generic point checked against the closed form.
        let enc = ideal_with_delta(0.7);
        let out = enc.intermediate_state(FRAC_PI_2, 0.0);
        let oracle = closed_form_intermediate(FRAC_PI_2, 0.0, 0.7);
        assert!(1.0 - out.fidelity(&oracle) < 1e-12);
    }

    #[test]
    fn intermediate_matches_closed_form_on_a_grid() {
        for i in 0..6 {
            let delta = TAU * i as f64 / 6.0;
            let enc = ideal_with_delta(delta);
            for j in 0..4 {
                for k in 0..4 {
                    let phi_e = FRAC_PI_2 * j as f64;
                    let phi_l = FRAC_PI_2 * k as f64;
                    let out = enc.intermediate_state(phi_e, phi_l);
                    let oracle = closed_form_intermediate(phi_e, phi_l, delta);
                    assert!(
                        1.0 - out.fidelity(&oracle) < 1e-12,
                        "mismatch at delta={delta}, phi=({phi_e},{phi_l})"
                    );
                }
            }
        }
    }

    #[test]
    fn output_realises_the_three_state_rules() {
        let enc = ideal_with_delta(1.3);
        let cases = [
            ((0.0, 0.0), StateLabel::D),
            ((FRAC_PI_2, 0.0), StateLabel::L),
            ((0.0, FRAC_PI_2), StateLabel::R),
        ];
        for ((phi_e, phi_l), want) in cases {
            let out = enc.output_state(phi_e, phi_l);
            assert!(
                1.0 - out.fidelity(&JonesVector::basis_state(want)) < 1e-12,
                "phase pair ({phi_e},{phi_l}) should emit {want}"
            );
        }
    }

    #[test]
    fn output_is_independent_of_the_lead_fiber_phase() {
        let reference = ideal_with_delta(0.0);
        for (phi_e, phi_l) in [(0.0, 0.0), (FRAC_PI_2, 0.0), (0.0, FRAC_PI_2), (FRAC_PI_2, FRAC_PI_2)] {
            let base = reference.output_state(phi_e, phi_l);
            for i in 0..11 {
                let enc = ideal_with_delta(TAU * i as f64 / 10.0);
                let out = enc.output_state(phi_e, phi_l);
                assert!(
                    1.0 - out.fidelity(&base) < 1e-12,
                    "delta step {i} moved the output at ({phi_e},{phi_l})"
                );
            }
        }
    }

    #[test]
    fn output_depends_only_on_the_phase_difference() {
        let enc = ideal_with_delta(0.9);
        let a = enc.output_state(0.3, 1.1);
        for x in [0.0, 0.7, 2.0, 5.5] {
            let b = enc.output_state(0.3 + x, 1.1 + x);
            assert!(1.0 - a.fidelity(&b) < 1e-12);
        }
    }

    #[test]
    fn output_stays_on_the_equator_for_d_input() {
        let enc = ideal_with_delta(2.2);
        for i in 0..12 {
            let phi = TAU * i as f64 / 12.0;
            let out = enc.output_state(phi, 0.0);
            assert_close(out.a_h.norm_sqr(), 0.5, 1e-12);
        }
    }

    #[test]
    fn throughput_is_a_quarter_with_balanced_splitting() {
        let enc = IpognacEncoder::ideal();
        let field = enc.output_field(FRAC_PI_2, 0.0);
        assert_close(field.intensity(), 0.25, 1e-12);

        let mut lossy = enc;
        lossy.loop_loss = 0.2;
        assert_close(lossy.output_field(0.0, 0.0).intensity(), 0.25 * 0.8, 1e-12);
    }

    #[test]
    fn bare_loop_is_the_exchange_exactly() {
        let enc = IpognacEncoder::ideal();
        let h = enc.sagnac_bare(&JonesVector::basis_state(StateLabel::H));
        assert!((h.a_h.norm()) < 1e-12);
        assert!((h.a_v + Complex64::new(1.0, 0.0)).norm() < 1e-12); // -|V>

        let v = enc.sagnac_bare(&JonesVector::basis_state(StateLabel::V));
        assert!((v.a_h - Complex64::new(1.0, 0.0)).norm() < 1e-12); // +|H>
        assert!(v.a_v.norm() < 1e-12);

        // Twice: minus the identity, so fidelity to the input is one.
        let d = JonesVector::basis_state(StateLabel::D);
        let twice = enc.sagnac_bare(&enc.sagnac_bare(&d));
        assert!(1.0 - twice.fidelity(&d) < 1e-12);
        assert!((twice.a_h + d.a_h).norm() < 1e-12);
        assert!((twice.a_v + d.a_v).norm() < 1e-12);
    }

    #[test]
    fn output_coherency_stays_fully_polarized_for_long_delays() {
        let spectrum = SpectralModel::default();
        for i in 0..5 {
            let delta = TAU * i as f64 / 5.0;
            let mut enc = ideal_with_delta(delta);
            enc.lead_pmf.group_delay_s = 5.0 * spectrum.coherence_time_s;
            let rho = enc.output_coherency(&spectrum, 0.0, 0.0);
            assert_close(rho.dop(), 1.0, 1e-9);
            // And it matches the pure-state prediction once normalized.
            let pure = enc.output_state(0.0, 0.0).to_coherency();
            let rho_n = rho.normalized().unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((rho_n.m[r][c] - pure.m[r][c]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn output_coherency_with_zero_delay_equals_the_pure_path() {
        let spectrum = SpectralModel::default();
        let mut enc = ideal_with_delta(1.7);
        enc.lead_pmf.group_delay_s = 0.0;
        let rho = enc
            .output_coherency(&spectrum, FRAC_PI_2, 0.0)
            .normalized()
            .unwrap();
        let pure = enc.output_state(FRAC_PI_2, 0.0).to_coherency();
        for r in 0..2 {
            for c in 0..2 {
                assert!((rho.m[r][c] - pure.m[r][c]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn uncompensated_double_pass_depolarizes_as_the_gaussian_law() {
        let spectrum = SpectralModel::default();
        let mut enc = ideal_with_delta(0.4);
        enc.lead_pmf.group_delay_s = 3.0 * spectrum.coherence_time_s;
        let rho = enc.uncompensated_double_pass_coherency(&spectrum);
        // Total same-axis delay 6 tau_c: DOP = exp(-18).
        assert_close(rho.dop(), (-18.0f64).exp(), 1e-10);
    }

    #[test]
    fn pognac_identity_fiber_and_calibration_reproduce_the_core() {
        let core = IpognacEncoder::ideal();
        let with_identity = PognacEncoder {
            core,
            output_fiber: SmfUnitary::identity(),
            calibrated: false,
        };
        let d = with_identity.output_state(0.0, 0.0);
        assert!(1.0 - d.fidelity(&JonesVector::basis_state(StateLabel::D)) < 1e-12);

        let mut rng = stream(3, StreamDomain::Haar, 0);
        let scrambled = PognacEncoder {
            core,
            output_fiber: SmfUnitary::haar_random(&mut rng, 0.0),
            calibrated: true,
        };
        let l = scrambled.output_state(FRAC_PI_2, 0.0);
        assert!(1.0 - l.fidelity(&JonesVector::basis_state(StateLabel::L)) < 1e-12);
        // Calibrated output is bitwise the core output.
        let core_l = core.output_state(FRAC_PI_2, 0.0);
        assert_eq!(l, core_l);
    }

    #[test]
    fn literal_inverse_composition_justifies_the_calibration_shortcut() {
        // Applying U then U^-1 explicitly recovers the core output within
        // rounding, which is what the exact-identity shortcut models.
        let core = IpognacEncoder::ideal();
        let mut rng = stream(4, StreamDomain::Haar, 0);
        let fiber = SmfUnitary::haar_random(&mut rng, 0.0);
        let sent = fiber.apply(&core.output_state(FRAC_PI_2, 0.0));
        let undone = fiber.operator().adjoint().apply(&sent);
        assert!(1.0 - undone.fidelity(&core.output_state(FRAC_PI_2, 0.0)) < 1e-12);
    }

    #[test]
    fn pognac_uncalibrated_haar_average_fidelity_is_one_half() {
        let core = IpognacEncoder::ideal();
        let d = JonesVector::basis_state(StateLabel::D);
        let mut rng = stream(6, StreamDomain::Haar, 1);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let enc = PognacEncoder {
                core,
                output_fiber: SmfUnitary::haar_random(&mut rng, 0.0),
                calibrated: false,
            };
            acc += enc.output_state(0.0, 0.0).fidelity(&d);
        }
        let mean = acc / n as f64;
        let three_sigma = 3.0 / (12.0f64.sqrt() * (n as f64).sqrt());
        assert_close(mean, 0.5, three_sigma);
    }

    #[test]
    fn inline_examples_hold() {
        let spectrum = SpectralModel::default();
        let m = PhaseModulator {
            sigma_phi: 0.0,
            ..PhaseModulator::default()
        };

        // No PMD: a half-pi voltage gives pure |L>.
        let enc = InlineEncoder {
            modulator: m,
            pmd_delay_s: 0.0,
        };
        let rho = enc.output_for_voltage(&spectrum, m.v_halfpi);
        assert_close(rho.dop(), 1.0, 1e-12);
        assert_close(
            rho.project(&JonesVector::basis_state(StateLabel::L)),
            1.0,
            1e-12,
        );

        // One coherence time of PMD at zero drive: DOP = exp(-1/2).
        let enc = InlineEncoder {
            modulator: m,
            pmd_delay_s: spectrum.coherence_time_s,
        };
        let rho = enc.output_for_voltage(&spectrum, 0.0);
        assert_close(rho.dop(), (-0.5f64).exp(), 1e-12);

        // Enormous PMD: fully depolarized.
        let enc = InlineEncoder {
            modulator: m,
            pmd_delay_s: 1e4 * spectrum.coherence_time_s,
        };
        assert_close(enc.output_for_voltage(&spectrum, 0.0).dop(), 0.0, 1e-12);
    }

    #[test]
    fn encoder_model_emits_through_one_interface() {
        let spectrum = SpectralModel::default();
        let sagnac = EncoderModel::Ipognac(IpognacEncoder::ideal());
        let inline = EncoderModel::Inline(InlineEncoder {
            modulator: PhaseModulator::default(),
            pmd_delay_s: 0.0,
        });
        let l_target = JonesVector::basis_state(StateLabel::L);
        for model in [sagnac, inline] {
            let emitted = model.emit(&spectrum, FRAC_PI_2, 0.0);
            let p = emitted.coherency().normalized().unwrap().project(&l_target);
            assert_close(p, 1.0, 1e-12);
        }
    }

    #[test]
    fn split_fields_sum_to_the_full_output() {
        let enc = IpognacEncoder {
            loop_loss: 0.15,
            ..IpognacEncoder::default()
        };
        for (phi_e, phi_l) in [(0.0, 0.0), (FRAC_PI_2, 0.0), (0.4, 1.9)] {
            let full = enc.output_field(phi_e, phi_l);
            let (cw, ccw) = enc.output_field_split(phi_e, phi_l);
            assert!((full.a_h - (cw.a_h + ccw.a_h)).norm() < 1e-15);
            assert!((full.a_v - (cw.a_v + ccw.a_v)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_noise_average_reproduces_the_pure_output() {
        let enc = IpognacEncoder::default();
        for (phi_e, phi_l) in [(0.0, 0.0), (FRAC_PI_2, 0.0), (0.0, FRAC_PI_2)] {
            let rho = enc
                .noise_averaged_coherency(phi_e, phi_l, 0.0)
                .normalized()
                .unwrap();
            assert_close(rho.dop(), 1.0, 1e-12);
            let pure = enc.output_state(phi_e, phi_l);
            assert_close(rho.project(&pure), 1.0, 1e-12);
        }
    }

    #[test]
    fn noise_average_damps_the_cross_coherence_by_the_gaussian_factor() {
        // Ideal device, |D> target: output is (|H> + |V>)/sqrt(2) up to
        // global phase, so the off-diagonal magnitude of the normalized
        // noise-averaged coherency is e^{-sigma^2}/2.
        let enc = IpognacEncoder::ideal();
        let sigma = 0.3;
        let rho = enc
            .noise_averaged_coherency(0.0, 0.0, sigma)
            .normalized()
            .unwrap();
        let expected = ((-sigma * sigma as f64).exp()) / 2.0;
        assert!((rho.m[0][1].norm() - expected).abs() < 1e-9);
    }

    #[test]
    fn noise_average_matches_a_monte_carlo_mean_over_drawn_phases() {
        let enc = IpognacEncoder::default();
        let sigma = 0.2;
        let analytic = enc.noise_averaged_coherency(FRAC_PI_2, 0.0, sigma);
        let noisy = PhaseModulator {
            sigma_phi: sigma,
            ..enc.modulator
        };
        let n = 40_000;
        let mut mean = [[Complex64::ZERO; 2]; 2];
        let mut rng = stream(5, StreamDomain::PulsePhase, 0);
        for _ in 0..n {
            let f = enc.output_field(
                FRAC_PI_2 + noisy.noise_draw(&mut rng),
                noisy.noise_draw(&mut rng),
            );
            let a = [f.a_h, f.a_v];
            for (i, row) in mean.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell += a[i] * a[j].conj() / n as f64;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (mean[i][j] - analytic.m[i][j]).norm() < 3e-3,
                    "element ({i},{j}) differed: {} vs {}",
                    mean[i][j],
                    analytic.m[i][j]
                );
            }
        }
    }

    #[test]
    fn noise_scatters_intensity_out_of_the_output_port() {
        let enc = IpognacEncoder::default();
        let noiseless = enc.output_field(FRAC_PI_2, 0.0).intensity();
        let averaged = enc.noise_averaged_coherency(FRAC_PI_2, 0.0, 0.3).trace();
        assert!(averaged < noiseless);
        assert!(averaged > 0.5 * noiseless);
    }

    #[test]
    fn noise_averaged_emit_is_uniform_across_encoders() {
        let spectrum = SpectralModel::default();
        let sigma = 0.25;
        let g = (-sigma * sigma as f64).exp();
        // The inline |D> output's off-diagonal shrinks by e^{-sigma^2} on
        // top of its PMD damping.
        let inline = EncoderModel::Inline(InlineEncoder {
            modulator: PhaseModulator::default(),
            pmd_delay_s: 5e-12,
        });
        let damped = inline
            .noise_averaged_emit(&spectrum, 0.0, 0.0, sigma)
            .coherency()
            .normalized()
            .unwrap();
        let undamped = inline
            .noise_averaged_emit(&spectrum, 0.0, 0.0, 0.0)
            .coherency()
            .normalized()
            .unwrap();
        assert_close(damped.m[0][1].norm(), undamped.m[0][1].norm() * g, 1e-12);

        // The uncalibrated fiber rotates the averaged state without
        // changing its degree of polarization.
        let mut rng = stream(9, StreamDomain::Haar, 0);
        let fiber = SmfUnitary::haar_random(&mut rng, 0.0);
        let uncal = EncoderModel::Pognac(PognacEncoder {
            core: IpognacEncoder::default(),
            output_fiber: fiber,
            calibrated: false,
        });
        let cal = EncoderModel::Pognac(PognacEncoder {
            core: IpognacEncoder::default(),
            output_fiber: fiber,
            calibrated: true,
        });
        let rho_uncal = uncal.noise_averaged_emit(&spectrum, FRAC_PI_2, 0.0, sigma);
        let rho_cal = cal.noise_averaged_emit(&spectrum, FRAC_PI_2, 0.0, sigma);
        assert_close(rho_uncal.dop(), rho_cal.dop(), 1e-12);
        assert_close(
            rho_uncal.coherency().trace(),
            rho_cal.coherency().trace(),
            1e-12,
        );
    }

    proptest! {
        #[test]
        fn generic_input_law_holds_up_to_global_phase(
            re_a in -1.0f64..1.0, im_a in -1.0f64..1.0,
            re_b in -1.0f64..1.0, im_b in -1.0f64..1.0,
            delta in 0.0f64..TAU,
            phi_e in 0.0f64..TAU,
            phi_l in 0.0f64..TAU,
        ) {
            let input = match JonesVector::normalized(
                Complex64::new(re_a, im_a), Complex64::new(re_b, im_b)) {
                Ok(s) => s,
                Err(_) => return Ok(()),
            };
            let mut enc = ideal_with_delta(delta);
            enc.input = input;
            let out = enc.output_state(phi_e, phi_l).canonical();
            let oracle = closed_form_output(input.a_h, input.a_v, phi_e, phi_l)
                .renormalized()
                .unwrap()
                .canonical();
            prop_assert!((out.a_h - oracle.a_h).norm() < 1e-9);
            prop_assert!((out.a_v - oracle.a_v).norm() < 1e-9);
        }

        #[test]
        fn stagewise_output_matches_closed_form_over_random_points(
            delta in 0.0f64..TAU,
            phi_e in 0.0f64..TAU,
            phi_l in 0.0f64..TAU,
        ) {
            let enc = ideal_with_delta(delta);
            let out = enc.output_state(phi_e, phi_l);
            let oracle = closed_form_output(
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                phi_e, phi_l,
            );
            prop_assert!(1.0 - out.fidelity(&oracle) < 1e-12);
        }
    }
}
