//! Path-spin states of a single spin-1/2 particle and the optical elements
//! acting on them: the source beam splitter and spin flipper, the four
//! protocol states, the receiver's interferometer and spin-Hadamard stage,
//! and the path/spin measurement.
//!
//! Kets are built in the `qmath` composite ordering (spin ⊗ path, the
//! transmitted channel first). Physical predictions are made with
//! projectors only, so global phases never matter.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmath::{
    born, cx, kron, lift_path, lift_spin, tensor, Cx, Mat2, Mat4, QmathError, Rng, Vec2, Vec4,
};

/// Probabilities below this are treated as structural zeros when reading
/// off outcome supports.
pub const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("beam splitter amplitudes must be finite reals with α² + β² = 1, got α={alpha}, β={beta}")]
    InvalidBeamSplitter { alpha: f64, beta: f64 },
    #[error("protocol phase must be 0 or π/2, got {0}")]
    InvalidPhase(f64),
    #[error(transparent)]
    Math(#[from] QmathError),
}

/// The two announcement groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    G1,
    G2,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::G1, Group::G2];

    pub fn members(self) -> [StateLabel; 2] {
        match self {
            Group::G1 => [StateLabel::Psi, StateLabel::PsiPerp],
            Group::G2 => [StateLabel::Phi, StateLabel::PhiPerp],
        }
    }
}

/// One of the four prepared states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateLabel {
    Psi,
    PsiPerp,
    Phi,
    PhiPerp,
}

impl StateLabel {
    pub const ALL: [StateLabel; 4] = [
        StateLabel::Psi,
        StateLabel::PsiPerp,
        StateLabel::Phi,
        StateLabel::PhiPerp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn group(self) -> Group {
        match self {
            StateLabel::Psi | StateLabel::PsiPerp => Group::G1,
            StateLabel::Phi | StateLabel::PhiPerp => Group::G2,
        }
    }

    /// Member index within the group: 0 for Ψ and Φ, 1 for Ψ⊥ and Φ⊥.
    pub fn bit(self) -> u8 {
        match self {
            StateLabel::Psi | StateLabel::Phi => 0,
            StateLabel::PsiPerp | StateLabel::PhiPerp => 1,
        }
    }

    pub fn from_group_bit(group: Group, bit: u8) -> Self {
        group.members()[usize::from(bit & 1)]
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateLabel::Psi => "Ψ",
            StateLabel::PsiPerp => "Ψ⊥",
            StateLabel::Phi => "Φ",
            StateLabel::PhiPerp => "Φ⊥",
        })
    }
}

/// Real transmission/reflection amplitudes of a lossless beam splitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitterSpec {
    alpha: f64,
    beta: f64,
}

impl BeamSplitterSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, OpticsError> {
        if !alpha.is_finite() || !beta.is_finite() || (alpha * alpha + beta * beta - 1.0).abs() > 1e-12 {
            return Err(OpticsError::InvalidBeamSplitter { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn balanced() -> Self {
        Self {
            alpha: FRAC_1_SQRT_2,
            beta: FRAC_1_SQRT_2,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Path unitary: |T⟩ ↦ α|T⟩ + iβ|R⟩, |R⟩ ↦ iβ|T⟩ + α|R⟩.
    pub fn matrix(&self) -> Mat2 {
        let a = cx(self.alpha, 0.0);
        let ib = cx(0.0, self.beta);
        Mat2::new([[a, ib], [ib, a]])
    }
}

/// Receiver's phase-shifter setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSetting {
    Zero,
    HalfPi,
}

impl PhaseSetting {
    pub const ALL: [PhaseSetting; 2] = [PhaseSetting::Zero, PhaseSetting::HalfPi];

    /// Accepts only the two protocol values, within 1e-12 rad.
    pub fn from_radians(phi: f64) -> Result<Self, OpticsError> {
        if phi.abs() <= 1e-12 {
            Ok(PhaseSetting::Zero)
        } else if (phi - std::f64::consts::FRAC_PI_2).abs() <= 1e-12 {
            Ok(PhaseSetting::HalfPi)
        } else {
            Err(OpticsError::InvalidPhase(phi))
        }
    }

    pub fn radians(self) -> f64 {
        match self {
            PhaseSetting::Zero => 0.0,
            PhaseSetting::HalfPi => std::f64::consts::FRAC_PI_2,
        }
    }

    /// `e^{iφ}`, exact for both settings.
    pub fn phase_factor(self) -> Cx {
        match self {
            PhaseSetting::Zero => cx(1.0, 0.0),
            PhaseSetting::HalfPi => cx(0.0, 1.0),
        }
    }
}

impl fmt::Display for PhaseSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseSetting::Zero => "0",
            PhaseSetting::HalfPi => "π/2",
        })
    }
}

/// Spin measurement basis. `Z` = {|0⟩, |1⟩}; `Y` = {χ₊, χ₋} with
/// χ₊ = (|1⟩ − i|0⟩)/√2 and χ₋ = (|1⟩ + i|0⟩)/√2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinBasis {
    Z,
    Y,
}

impl SpinBasis {
    pub const ALL: [SpinBasis; 2] = [SpinBasis::Z, SpinBasis::Y];

    /// Basis kets in outcome order `[S0, S1]`.
    pub fn states(self) -> [Vec2; 2] {
        match self {
            SpinBasis::Z => [Vec2::basis(0), Vec2::basis(1)],
            SpinBasis::Y => {
                let h = FRAC_1_SQRT_2;
                [
                    Vec2::new([cx(0.0, -h), cx(h, 0.0)]),
                    Vec2::new([cx(0.0, h), cx(h, 0.0)]),
                ]
            }
        }
    }
}

impl fmt::Display for SpinBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinBasis::Z => "Z",
            SpinBasis::Y => "Y",
        })
    }
}

/// Output port of the receiver's second beam splitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    TPrime,
    RPrime,
}

/// Spin outcome: first or second ket of the measured basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinOutcome {
    S0,
    S1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomePair {
    pub port: Port,
    pub spin: SpinOutcome,
}

impl OutcomePair {
    /// Canonical order, matching `measure_distribution`.
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair::new(Port::TPrime, SpinOutcome::S0),
        OutcomePair::new(Port::TPrime, SpinOutcome::S1),
        OutcomePair::new(Port::RPrime, SpinOutcome::S0),
        OutcomePair::new(Port::RPrime, SpinOutcome::S1),
    ];

    pub const fn new(port: Port, spin: SpinOutcome) -> Self {
        Self { port, spin }
    }

    pub fn index(self) -> usize {
        2 * self.port as usize + self.spin as usize
    }

    pub fn label(self, basis: SpinBasis) -> &'static str {
        match (self.port, basis, self.spin) {
            (Port::TPrime, SpinBasis::Z, SpinOutcome::S0) => "(T′,|0⟩)",
            (Port::TPrime, SpinBasis::Z, SpinOutcome::S1) => "(T′,|1⟩)",
            (Port::RPrime, SpinBasis::Z, SpinOutcome::S0) => "(R′,|0⟩)",
            (Port::RPrime, SpinBasis::Z, SpinOutcome::S1) => "(R′,|1⟩)",
            (Port::TPrime, SpinBasis::Y, SpinOutcome::S0) => "(T′,χ₊)",
            (Port::TPrime, SpinBasis::Y, SpinOutcome::S1) => "(T′,χ₋)",
            (Port::RPrime, SpinBasis::Y, SpinOutcome::S0) => "(R′,χ₊)",
            (Port::RPrime, SpinBasis::Y, SpinOutcome::S1) => "(R′,χ₋)",
        }
    }
}

/// Normalized vector in the 4-dimensional spin ⊗ path space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpinState(Vec4);

impl PathSpinState {
    pub fn new(v: Vec4) -> Result<Self, QmathError> {
        v.check_normalized()?;
        Ok(Self(v))
    }

    pub fn vector(&self) -> &Vec4 {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Cx {
        self.0.inner(&other.0)
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Equality up to a global phase: `| |⟨a|b⟩| − 1 | ≤ tol`.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        (self.overlap(other).norm() - 1.0).abs() <= tol
    }

    pub fn projector(&self) -> Mat4 {
        Mat4::projector(&self.0)
    }

    /// Applies a unitary. Callers pass unitaries only; the norm is carried
    /// through unchanged up to rounding.
    pub fn evolve(&self, u: &Mat4) -> Self {
        Self(u.apply(&self.0))
    }
}

fn path_t() -> Vec2 {
    Vec2::basis(0)
}

fn spin_up() -> Vec2 {
    Vec2::basis(0)
}

fn pauli_x() -> Mat2 {
    let (o, l) = (cx(0.0, 0.0), cx(1.0, 0.0));
    Mat2::new([[o, l], [l, o]])
}

/// Spin flipper acting only on the reflected channel.
fn spin_flip_on_reflected() -> Mat4 {
    let on_t = Mat2::projector(&Vec2::basis(0));
    let on_r = Mat2::projector(&Vec2::basis(1));
    kron(&Mat2::identity(), &on_t) + kron(&pauli_x(), &on_r)
}

/// Source pipeline: spin-up particle in the incident channel, through the
/// first beam splitter, then the spin flipper. Produces
/// α|0⟩⊗|T⟩ + iβ|1⟩⊗|R⟩.
pub fn source_state(bs: &BeamSplitterSpec) -> PathSpinState {
    let incident = tensor(&spin_up(), &path_t()).expect("basis kets are normalized");
    let split = lift_path(&bs.matrix()).apply(&incident);
    PathSpinState(spin_flip_on_reflected().apply(&split))
}

/// Spin Hadamard: |0⟩ ↦ (|0⟩+|1⟩)/√2, |1⟩ ↦ (|0⟩−|1⟩)/√2.
pub fn spin_hadamard() -> Mat2 {
    let h = cx(FRAC_1_SQRT_2, 0.0);
    Mat2::new([[h, h], [h, -h]])
}

/// Spin map preparing the second group: |0⟩ ↦ i(|0⟩−|1⟩)/√2,
/// |1⟩ ↦ (|0⟩+|1⟩)/√2. It sends the σ_y eigenbasis onto the σ_z eigenbasis.
pub fn spin_g() -> Mat2 {
    let h = FRAC_1_SQRT_2;
    Mat2::new([[cx(0.0, h), cx(h, 0.0)], [cx(0.0, -h), cx(h, 0.0)]])
}

fn psi_pair(sign: f64) -> PathSpinState {
    let h = FRAC_1_SQRT_2;
    PathSpinState(Vec4::new([
        cx(h, 0.0),
        cx(0.0, 0.0),
        cx(0.0, 0.0),
        cx(0.0, sign * h),
    ]))
}

/// The four protocol states:
/// Ψ = (|0⟩|T⟩ + i|1⟩|R⟩)/√2, Ψ⊥ = (|0⟩|T⟩ − i|1⟩|R⟩)/√2,
/// Φ = (G ⊗ I)Ψ and Φ⊥ = (G ⊗ I)Ψ⊥.
pub fn prepare(label: StateLabel) -> PathSpinState {
    match label {
        StateLabel::Psi => psi_pair(1.0),
        StateLabel::PsiPerp => psi_pair(-1.0),
        StateLabel::Phi => psi_pair(1.0).evolve(&lift_spin(&spin_g())),
        StateLabel::PhiPerp => psi_pair(-1.0).evolve(&lift_spin(&spin_g())),
    }
}

/// Receiver's phase shifter plus second beam splitter as one path unitary,
/// written in the output basis (T′, R′):
/// |T⟩ ↦ e^{iφ}(|T′⟩ + i|R′⟩)/√2, |R⟩ ↦ (|T′⟩ − i|R′⟩)/√2.
pub fn interferometer_with_factor(phase: Cx) -> Mat2 {
    let h = cx(FRAC_1_SQRT_2, 0.0);
    let i = cx(0.0, 1.0);
    Mat2::new([[phase * h, h], [i * phase * h, -i * h]])
}

pub fn interferometer(phi: f64) -> Mat2 {
    interferometer_with_factor(Cx::from_polar(1.0, phi))
}

pub fn bob_transform(state: &PathSpinState, phi: PhaseSetting) -> PathSpinState {
    state.evolve(&lift_path(&interferometer_with_factor(phi.phase_factor())))
}

/// Interferometer at an arbitrary phase, for analysis.
pub fn bob_transform_at(state: &PathSpinState, phi: f64) -> PathSpinState {
    state.evolve(&lift_path(&interferometer(phi)))
}

/// Spin Hadamard when φ = π/2, identity when φ = 0.
pub fn hadamard_stage(state: &PathSpinState, phi: PhaseSetting) -> PathSpinState {
    match phi {
        PhaseSetting::Zero => *state,
        PhaseSetting::HalfPi => state.evolve(&lift_spin(&spin_hadamard())),
    }
}

/// Both receiver stages for one phase setting.
pub fn receiver_stages(state: &PathSpinState, phi: PhaseSetting) -> PathSpinState {
    hadamard_stage(&bob_transform(state, phi), phi)
}

/// The spin kets χ₁..χ₄ that accompany the output ports after the
/// interferometer:
/// χ₁ = (|1⟩ − ie^{iφ}|0⟩)/√2, χ₂ = (|1⟩ + ie^{iφ}|0⟩)/√2,
/// χ₃ = ((1+e^{iφ})|0⟩ + (1−e^{iφ})|1⟩)/2, χ₄ = ((1−e^{iφ})|0⟩ + (1+e^{iφ})|1⟩)/2.
pub fn chi_states(phi: f64) -> [Vec2; 4] {
    let e = Cx::from_polar(1.0, phi);
    let h = cx(FRAC_1_SQRT_2, 0.0);
    let i = cx(0.0, 1.0);
    let one = cx(1.0, 0.0);
    let half = cx(0.5, 0.0);
    [
        Vec2::new([-i * e * h, h]),
        Vec2::new([i * e * h, h]),
        Vec2::new([(one + e) * half, (one - e) * half]),
        Vec2::new([(one - e) * half, (one + e) * half]),
    ]
}

/// Projectors onto the four (port, spin) outcomes, in `OutcomePair::ALL`
/// order.
pub fn outcome_projectors(basis: SpinBasis) -> [Mat4; 4] {
    let spins = basis.states();
    OutcomePair::ALL.map(|o| {
        let spin = Mat2::projector(&spins[o.spin as usize]);
        let port = Mat2::projector(&Vec2::basis(o.port as usize));
        kron(&spin, &port)
    })
}

/// Exact Born distribution over `OutcomePair::ALL`.
pub fn measure_distribution(state: &PathSpinState, basis: SpinBasis) -> [f64; 4] {
    let probs = born(&state.0, &outcome_projectors(basis))
        .expect("outcome projectors resolve the identity and states are normalized");
    [probs[0], probs[1], probs[2], probs[3]]
}

/// Samples one (port, spin) outcome.
pub fn measure(state: &PathSpinState, basis: SpinBasis, rng: &Rng) -> (OutcomePair, Rng) {
    let dist = measure_distribution(state, basis);
    let (k, next) = rng
        .sample(&dist)
        .expect("Born distributions are valid probability vectors");
    (OutcomePair::ALL[k], next)
}

/// Outcome distribution for a prepared label under one receiver setting.
/// Computed once for all 16 combinations and cached.
pub fn setting_distribution(label: StateLabel, phi: PhaseSetting, basis: SpinBasis) -> [f64; 4] {
    static TABLE: OnceLock<[[[[f64; 4]; 2]; 2]; 4]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        StateLabel::ALL.map(|l| {
            PhaseSetting::ALL
                .map(|p| SpinBasis::ALL.map(|b| measure_distribution(&receiver_stages(&prepare(l), p), b)))
        })
    });
    table[label.index()][phi as usize][basis as usize]
}

/// Outcomes with non-negligible probability.
pub fn support(dist: &[f64; 4]) -> Vec<OutcomePair> {
    OutcomePair::ALL
        .into_iter()
        .filter(|o| dist[o.index()] > SUPPORT_TOL)
        .collect()
}

/// Output-port kets expressed in the incoming (T, R) path basis:
/// T′ = (|T⟩ + ie^{iφ}|R⟩)/√2, R′ = (i|T⟩ + e^{iφ}|R⟩)/√2.
pub fn output_port_kets(phi: f64) -> [Vec2; 2] {
    let e = Cx::from_polar(1.0, phi);
    let h = cx(FRAC_1_SQRT_2, 0.0);
    let i = cx(0.0, 1.0);
    [Vec2::new([h, i * e * h]), Vec2::new([i * h, e * h])]
}

/// Path observable |T′⟩⟨T′| − |R′⟩⟨R′| in the (T, R) basis, equal to
/// [[0, −ie^{−iφ}], [ie^{iφ}, 0]].
pub fn path_observable(phi: f64) -> Mat2 {
    let [t, r] = output_port_kets(phi);
    Mat2::projector(&t) - Mat2::projector(&r)
}
