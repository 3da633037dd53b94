//! Two-mode polarization algebra: Jones vectors and operators, coherency
//! matrices, Stokes parameters, and degree of polarization.
//!
//! # Conventions
//!
//! Circular states are written in a frame whose handedness follows the source
//! material this simulator models: `|L> = (|H> + i|V>)/sqrt(2)` and
//! `|R> = (|H> - i|V>)/sqrt(2)`.  The matching Stokes component is
//! `S3 = 2 Im(a_H^* a_V)`, so `|L>` sits at `S3 = +1`.  Readers who use the
//! right-handed optics convention should negate `S3` when comparing numbers.
//!
//! Diagonal states are `|D> = (|H> + |V>)/sqrt(2)` and `|A> = (|H> - |V>)/sqrt(2)`.
//!
//! Jones vectors are allowed to carry intensity other than one so that lossy
//! elements can scale amplitudes; constructors that promise a unit state
//! normalise explicitly.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};

/// Tolerance for algebraic identities (unitarity, normalisation, Hermiticity).
pub const TOL_ALGEBRA: f64 = 1e-12;

/// Slack allowed on coherency-matrix eigenvalues before a matrix is rejected
/// as non-positive.  Looser than [`TOL_ALGEBRA`] because eigenvalues inherit
/// accumulated rounding from long operator chains.
pub const TOL_POSITIVITY: f64 = 1e-9;

/// The six named pure states used throughout the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateLabel {
    H,
    V,
    D,
    A,
    L,
    R,
}

impl StateLabel {
    /// All labels, in a fixed display order.
    pub const ALL: [StateLabel; 6] = [
        StateLabel::H,
        StateLabel::V,
        StateLabel::D,
        StateLabel::A,
        StateLabel::L,
        StateLabel::R,
    ];

    /// Single-letter name of the state.
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::H => "H",
            StateLabel::V => "V",
            StateLabel::D => "D",
            StateLabel::A => "A",
            StateLabel::L => "L",
            StateLabel::R => "R",
        }
    }

    /// The state orthogonal to this one within its basis pair.
    pub fn orthogonal(self) -> StateLabel {
        match self {
            StateLabel::H => StateLabel::V,
            StateLabel::V => StateLabel::H,
            StateLabel::D => StateLabel::A,
            StateLabel::A => StateLabel::D,
            StateLabel::L => StateLabel::R,
            StateLabel::R => StateLabel::L,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateLabel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" => Ok(StateLabel::H),
            "V" => Ok(StateLabel::V),
            "D" => Ok(StateLabel::D),
            "A" => Ok(StateLabel::A),
            "L" => Ok(StateLabel::L),
            "R" => Ok(StateLabel::R),
            other => Err(SimError::UnknownStateLabel(other.to_string())),
        }
    }
}

/// Complex two-component field amplitude `(a_H, a_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub a_h: Complex64,
    pub a_v: Complex64,
}

impl JonesVector {
    /// Builds a vector from raw amplitudes without normalising.  Use this for
    /// loss-carrying fields; use [`JonesVector::normalized`] when a unit state
    /// is required.
    pub fn raw(a_h: Complex64, a_v: Complex64) -> Self {
        JonesVector { a_h, a_v }
    }

    /// Builds a unit-norm state from the given amplitudes.  Errors if the
    /// amplitudes are numerically zero.
    pub fn normalized(a_h: Complex64, a_v: Complex64) -> Result<Self> {
        let n = (a_h.norm_sqr() + a_v.norm_sqr()).sqrt();
        if n < TOL_ALGEBRA {
            return Err(SimError::NonPhysical(
                "cannot normalise a zero Jones vector".into(),
            ));
        }
        Ok(JonesVector {
            a_h: a_h / n,
            a_v: a_v / n,
        })
    }

    /// The named pure state for a label.  All six returned states have unit
    /// norm exactly (up to floating-point representation of `1/sqrt(2)`).
    pub fn basis_state(label: StateLabel) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::ZERO;
        let s = FRAC_1_SQRT_2;
        match label {
            StateLabel::H => JonesVector::raw(one, zero),
            StateLabel::V => JonesVector::raw(zero, one),
            StateLabel::D => JonesVector::raw(Complex64::new(s, 0.0), Complex64::new(s, 0.0)),
            StateLabel::A => JonesVector::raw(Complex64::new(s, 0.0), Complex64::new(-s, 0.0)),
            StateLabel::L => JonesVector::raw(Complex64::new(s, 0.0), Complex64::new(0.0, s)),
            StateLabel::R => JonesVector::raw(Complex64::new(s, 0.0), Complex64::new(0.0, -s)),
        }
    }

    /// Total intensity `|a_H|^2 + |a_V|^2`.
    pub fn intensity(&self) -> f64 {
        self.a_h.norm_sqr() + self.a_v.norm_sqr()
    }

    /// Euclidean norm of the amplitude pair.
    pub fn norm(&self) -> f64 {
        self.intensity().sqrt()
    }

    /// Returns the same polarization state rescaled to unit norm.
    pub fn renormalized(&self) -> Result<Self> {
        JonesVector::normalized(self.a_h, self.a_v)
    }

    /// Inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.a_h.conj() * other.a_h + self.a_v.conj() * other.a_v
    }

    /// Squared overlap `|<self|other>|^2 / (|self|^2 |other|^2)`.
    ///
    /// Normalising inside the definition makes the result independent of the
    /// intensity either vector happens to carry, and of global phase.
    pub fn fidelity(&self, other: &JonesVector) -> f64 {
        let denom = self.intensity() * other.intensity();
        if denom == 0.0 {
            return 0.0;
        }
        self.inner(other).norm_sqr() / denom
    }

    /// Canonical representative of the ray through this vector.
    ///
    /// Rules: rescale so the largest-magnitude rule applies in order —
    /// if `|a_H| >= 1e-12` the global phase is chosen so `a_H` is real and
    /// `>= 0`; otherwise `a_H` is forced to exactly zero and the phase is
    /// chosen so `a_V` is real and `>= 0`.  The vector keeps its norm.
    ///
    /// The method first checks whether the vector already satisfies the
    /// rules and, if so, returns it bit-for-bit unchanged, which makes the
    /// operation idempotent at the representation level.
    pub fn canonical(&self) -> JonesVector {
        let phase_ref_h = self.a_h.norm() >= 1e-12;
        // Fast path: already canonical.  Returning `*self` untouched (rather
        // than re-deriving it) is what guarantees bitwise idempotence.
        if phase_ref_h {
            if self.a_h.im == 0.0 && self.a_h.re >= 0.0 {
                return *self;
            }
        } else if self.a_h == Complex64::ZERO && self.a_v.im == 0.0 && self.a_v.re >= 0.0 {
            return *self;
        }
        if phase_ref_h {
            let phase = self.a_h / self.a_h.norm();
            let corr = phase.conj();
            let a_h = Complex64::new(self.a_h.norm(), 0.0);
            JonesVector::raw(a_h, self.a_v * corr)
        } else {
            JonesVector::raw(Complex64::ZERO, Complex64::new(self.a_v.norm(), 0.0))
        }
    }

    /// Rank-one coherency matrix `|s><s|` (unnormalised: trace = intensity).
    pub fn to_coherency(&self) -> CoherencyMatrix {
        CoherencyMatrix {
            m: [
                [
                    Complex64::new(self.a_h.norm_sqr(), 0.0),
                    self.a_h * self.a_v.conj(),
                ],
                [
                    self.a_v * self.a_h.conj(),
                    Complex64::new(self.a_v.norm_sqr(), 0.0),
                ],
            ],
        }
    }

    /// Stokes parameters of this (pure) field.
    pub fn to_stokes(&self) -> StokesVector {
        self.to_coherency().to_stokes()
    }
}

impl fmt::Display for JonesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:+.6}{:+.6}i, {:+.6}{:+.6}i)",
            self.a_h.re, self.a_h.im, self.a_v.re, self.a_v.im
        )
    }
}

/// A 2x2 complex operator on Jones vectors, flagged if it is (expected to be)
/// unitary.  Applying a unitary operator renormalises the result so that
/// rounding never drifts the norm of a pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesOperator {
    pub m: [[Complex64; 2]; 2],
    unitary: bool,
}

impl JonesOperator {
    /// Identity operator.
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        JonesOperator {
            m: [[one, Complex64::ZERO], [Complex64::ZERO, one]],
            unitary: true,
        }
    }

    /// Builds an operator flagged unitary, verifying `M^dagger M = I` within
    /// [`TOL_ALGEBRA`].
    pub fn unitary(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let op = JonesOperator { m, unitary: true };
        let p = op.adjoint().matmul(&op);
        let id = JonesOperator::identity();
        let mut dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                dev = dev.max((p.m[i][j] - id.m[i][j]).norm());
            }
        }
        if dev > TOL_ALGEBRA {
            return Err(SimError::NonPhysical(format!(
                "matrix flagged unitary deviates from unitarity by {dev:.3e}"
            )));
        }
        Ok(op)
    }

    /// Builds an operator with no unitarity claim (attenuating or amplifying
    /// elements).
    pub fn lossy(m: [[Complex64; 2]; 2]) -> Self {
        JonesOperator { m, unitary: false }
    }

    /// Whether this operator was constructed as unitary.
    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Diagonal operator `diag(p_h, p_v)`; flagged unitary when both entries
    /// have unit magnitude.
    pub fn diagonal(p_h: Complex64, p_v: Complex64) -> Self {
        let unitary =
            (p_h.norm() - 1.0).abs() <= TOL_ALGEBRA && (p_v.norm() - 1.0).abs() <= TOL_ALGEBRA;
        JonesOperator {
            m: [[p_h, Complex64::ZERO], [Complex64::ZERO, p_v]],
            unitary,
        }
    }

    /// Pure phase retarder `diag(1, e^{i delta})`.
    pub fn relative_phase(delta: f64) -> Self {
        JonesOperator::diagonal(Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, delta))
    }

    /// Pauli `sigma_y` (in the H/V basis): `[[0, -i], [i, 0]]`.
    pub fn sigma_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        JonesOperator {
            m: [[Complex64::ZERO, -i], [i, Complex64::ZERO]],
            unitary: true,
        }
    }

    /// The port-exchange operator realised by one round trip of the Sagnac
    /// loop with both modulation phases at zero: maps `|H> -> -|V>` and
    /// `|V> -> |H>`.  Equal to `i sigma_y`, up to the global phase `i`.
    pub fn loop_exchange() -> Self {
        let one = Complex64::new(1.0, 0.0);
        JonesOperator {
            m: [[Complex64::ZERO, one], [-one, Complex64::ZERO]],
            unitary: true,
        }
    }

    /// Real rotation of the transverse axes by `theta` (radians).
    pub fn rotation(theta: f64) -> Self {
        let c = Complex64::new(theta.cos(), 0.0);
        let s = Complex64::new(theta.sin(), 0.0);
        JonesOperator {
            m: [[c, s], [-s, c]],
            unitary: true,
        }
    }

    /// Linear retarder with retardance `gamma` whose fast axis sits at angle
    /// `theta` from horizontal: `R(-theta) diag(1, e^{i gamma}) R(theta)`.
    pub fn retarder(theta: f64, gamma: f64) -> Self {
        let r = JonesOperator::rotation(theta);
        let d = JonesOperator::relative_phase(gamma);
        r.adjoint().matmul(&d).matmul(&r)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> JonesOperator {
        JonesOperator {
            m: [
                [self.m[0][0].conj(), self.m[1][0].conj()],
                [self.m[0][1].conj(), self.m[1][1].conj()],
            ],
            unitary: self.unitary,
        }
    }

    /// Matrix product `self * rhs` (apply `rhs` first).  The product is
    /// flagged unitary only when both factors are.
    pub fn matmul(&self, rhs: &JonesOperator) -> JonesOperator {
        let a = &self.m;
        let b = &rhs.m;
        let mut m = [[Complex64::ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        JonesOperator {
            m,
            unitary: self.unitary && rhs.unitary,
        }
    }

    /// Applies the operator to a field.  For unitary operators the result is
    /// rescaled to the input norm so that long chains cannot drift.
    pub fn apply(&self, s: &JonesVector) -> JonesVector {
        let out = JonesVector::raw(
            self.m[0][0] * s.a_h + self.m[0][1] * s.a_v,
            self.m[1][0] * s.a_h + self.m[1][1] * s.a_v,
        );
        if self.unitary {
            let want = s.norm();
            let got = out.norm();
            if got > 0.0 && want > 0.0 {
                let c = want / got;
                return JonesVector::raw(out.a_h * c, out.a_v * c);
            }
        }
        out
    }

    /// Conjugation `M rho M^dagger` on a coherency matrix.
    pub fn apply_coherency(&self, rho: &CoherencyMatrix) -> CoherencyMatrix {
        let a = &self.m;
        let r = &rho.m;
        let mut tmp = [[Complex64::ZERO; 2]; 2];
        for (i, row) in tmp.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * r[0][j] + a[i][1] * r[1][j];
            }
        }
        let mut out = [[Complex64::ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = tmp[i][0] * a[j][0].conj() + tmp[i][1] * a[j][1].conj();
            }
        }
        CoherencyMatrix { m: out }
    }
}

/// Hermitian, positive-semidefinite 2x2 coherency matrix.  The trace carries
/// the total intensity and is not forced to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencyMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl CoherencyMatrix {
    /// Validating constructor: checks Hermiticity within [`TOL_ALGEBRA`]
    /// (relative to the trace), positivity within [`TOL_POSITIVITY`], and a
    /// strictly positive trace.
    pub fn from_matrix(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let tr = m[0][0].re + m[1][1].re;
        if !(tr > 0.0) {
            return Err(SimError::NonPhysical(format!(
                "coherency matrix trace must be positive, got {tr}"
            )));
        }
        let herm_dev = (m[0][1] - m[1][0].conj()).norm().max(m[0][0].im.abs()).max(m[1][1].im.abs());
        if herm_dev > TOL_ALGEBRA * tr.max(1.0) {
            return Err(SimError::NonPhysical(format!(
                "coherency matrix deviates from Hermiticity by {herm_dev:.3e}"
            )));
        }
        let rho = CoherencyMatrix { m };
        let (lo, _hi) = rho.eigenvalues();
        if lo < -TOL_POSITIVITY * tr {
            return Err(SimError::NonPhysical(format!(
                "coherency matrix has negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Convex mixture of pure states with the given non-negative weights.
    pub fn mixture(parts: &[(f64, JonesVector)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(SimError::InvalidInput("mixture needs at least one part".into()));
        }
        let mut m = [[Complex64::ZERO; 2]; 2];
        for (w, s) in parts {
            if *w < 0.0 {
                return Err(SimError::InvalidInput(format!(
                    "mixture weight must be non-negative, got {w}"
                )));
            }
            let p = s.to_coherency();
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += p.m[i][j] * *w;
                }
            }
        }
        CoherencyMatrix::from_matrix(m)
    }

    /// Completely unpolarized light of the given intensity.
    pub fn unpolarized(intensity: f64) -> Self {
        let half = Complex64::new(intensity / 2.0, 0.0);
        CoherencyMatrix {
            m: [[half, Complex64::ZERO], [Complex64::ZERO, half]],
        }
    }

    /// Total intensity (the trace).
    pub fn trace(&self) -> f64 {
        self.m[0][0].re + self.m[1][1].re
    }

    /// The same state rescaled to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(SimError::NonPhysical(
                "cannot normalise a coherency matrix with non-positive trace".into(),
            ));
        }
        let mut m = self.m;
        for row in &mut m {
            for cell in row {
                *cell /= tr;
            }
        }
        Ok(CoherencyMatrix { m })
    }

    /// Eigenvalues of the Hermitian matrix, ordered `(low, high)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.trace();
        let det = (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    /// Stokes parameters `(S0, S1, S2, S3)` with the house circular
    /// convention `S3 = 2 Im(rho_VH) = 2 Im(a_H^* a_V)` for pure light.
    pub fn to_stokes(&self) -> StokesVector {
        StokesVector {
            s0: self.trace(),
            s1: self.m[0][0].re - self.m[1][1].re,
            s2: 2.0 * self.m[0][1].re,
            s3: 2.0 * self.m[1][0].im,
        }
    }

    /// Degree of polarization, `sqrt(S1^2 + S2^2 + S3^2) / S0`.
    pub fn dop(&self) -> f64 {
        self.to_stokes().dop()
    }

    /// Multiplies the HV coherence (the off-diagonals) by a complex factor of
    /// magnitude at most one: `rho_VH *= g`, `rho_HV *= conj(g)`.
    ///
    /// The phase convention matches the pure-state phase element
    /// `diag(1, e^{i delta})`, whose conjugation action multiplies `rho_VH`
    /// by `e^{i delta}`; a fully coherent factor `g = e^{i delta}` therefore
    /// reproduces the pure action exactly.
    pub fn damp_coherence(&self, g: Complex64) -> CoherencyMatrix {
        let mut m = self.m;
        m[1][0] *= g;
        m[0][1] *= g.conj();
        CoherencyMatrix { m }
    }

    /// Probability of projecting onto the (normalised) analyzer state:
    /// `<p| rho |p> / trace`.
    pub fn project(&self, onto: &JonesVector) -> f64 {
        let tr = self.trace();
        if tr <= 0.0 {
            return 0.0;
        }
        let p = onto.renormalized().unwrap_or(*onto);
        let mp = JonesVector::raw(
            self.m[0][0] * p.a_h + self.m[0][1] * p.a_v,
            self.m[1][0] * p.a_h + self.m[1][1] * p.a_v,
        );
        (p.inner(&mp).re / tr).clamp(0.0, 1.0)
    }
}

/// Classical Stokes four-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// Degree of polarization; zero intensity maps to zero.
    pub fn dop(&self) -> f64 {
        if self.s0 <= 0.0 {
            return 0.0;
        }
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt() / self.s0
    }
}

/// Light arriving at a measurement: either a pure field or a partially
/// polarized ensemble.
#[derive(Debug, Clone, Copy)]
pub enum LightState {
    Pure(JonesVector),
    Mixed(CoherencyMatrix),
}

impl LightState {
    /// Coherency-matrix view of the state (rank one for pure light).
    pub fn coherency(&self) -> CoherencyMatrix {
        match self {
            LightState::Pure(s) => s.to_coherency(),
            LightState::Mixed(r) => *r,
        }
    }

    /// Degree of polarization.
    pub fn dop(&self) -> f64 {
        self.coherency().dop()
    }

    /// Applies a Jones operator (conjugation for the mixed case).
    pub fn apply(&self, op: &JonesOperator) -> LightState {
        match self {
            LightState::Pure(s) => LightState::Pure(op.apply(s)),
            LightState::Mixed(r) => LightState::Mixed(op.apply_coherency(r)),
        }
    }
}
