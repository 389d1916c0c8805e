//! Round engine, sifting, key extraction and session transcripts.

mod transcript;

pub use transcript::{load_transcript, save_transcript, ParseError, TRANSCRIPT_VERSION};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{tap, EveModel};
use crate::optics::{
    measure, prepare, receiver_stages, setting_distribution, Group, OutcomePair, PhaseSetting,
    SpinBasis, StateLabel, SUPPORT_TOL,
};
use crate::qmath::Rng;
use crate::security::{
    ensemble_from_aborts, security_decision, AbortEnsemble, FrameSelection, SecurityError,
    SecurityOptions, SecurityReport, DEFAULT_MIN_ABORTS,
};

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("setting ({group:?}, φ={phi}, {basis}) is not kept")]
    NotKept {
        group: Group,
        phi: PhaseSetting,
        basis: SpinBasis,
    },
    #[error("outcome {outcome:?} is outside the support of every {group:?} member under (φ={phi}, {basis})")]
    Decoding {
        group: Group,
        phi: PhaseSetting,
        basis: SpinBasis,
        outcome: OutcomePair,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Abort,
}

/// Keep iff (G1, 0, Y), (G1, π/2, Z), (G2, 0, Z) or (G2, π/2, Y).
pub fn sift(group: Group, phi: PhaseSetting, basis: SpinBasis) -> Verdict {
    use Group::*;
    use PhaseSetting::*;
    use SpinBasis::*;
    match (group, phi, basis) {
        (G1, Zero, Y) | (G1, HalfPi, Z) | (G2, Zero, Z) | (G2, HalfPi, Y) => Verdict::Keep,
        _ => Verdict::Abort,
    }
}

/// Bit of the unique member of `group` whose outcome support under the
/// setting contains `outcome`.
pub fn decode_bit(
    group: Group,
    phi: PhaseSetting,
    basis: SpinBasis,
    outcome: OutcomePair,
) -> Result<u8, ProtocolError> {
    if sift(group, phi, basis) == Verdict::Abort {
        return Err(ProtocolError::NotKept { group, phi, basis });
    }
    let mut hits = group
        .members()
        .into_iter()
        .filter(|&l| setting_distribution(l, phi, basis)[outcome.index()] > SUPPORT_TOL);
    match (hits.next(), hits.next()) {
        (Some(label), None) => Ok(label.bit()),
        _ => Err(ProtocolError::Decoding {
            group,
            phi,
            basis,
            outcome,
        }),
    }
}

/// Sender's preparation weights over (Ψ, Ψ⊥, Φ, Φ⊥).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct AlicePolicy([f64; 4]);

impl AlicePolicy {
    pub fn new(weights: [f64; 4]) -> Result<Self, ProtocolError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ProtocolError::InvalidPolicy(format!(
                "weights must be finite and non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ProtocolError::InvalidPolicy(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform() -> Self {
        Self([0.25; 4])
    }

    /// (p, (1−p)/3, (1−p)/3, (1−p)/3).
    pub fn family(p: f64) -> Result<Self, ProtocolError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ProtocolError::InvalidPolicy(format!(
                "family parameter must lie in [0, 1], got {p}"
            )));
        }
        let q = (1.0 - p) / 3.0;
        Self::new([p, q, q, q])
    }

    pub fn weights(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for AlicePolicy {
    fn default() -> Self {
        Self::uniform()
    }
}

impl TryFrom<[f64; 4]> for AlicePolicy {
    type Error = ProtocolError;
    fn try_from(w: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<AlicePolicy> for [f64; 4] {
    fn from(p: AlicePolicy) -> Self {
        p.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    #[default]
    IndependentUniform,
    AlwaysZ,
}

/// Receiver policy: φ is uniform over {0, π/2}; the basis follows `basis_mode`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BobPolicy {
    pub basis_mode: BasisMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u64,
    pub label: StateLabel,
    pub phi: PhaseSetting,
    pub basis: SpinBasis,
    pub outcome: OutcomePair,
    pub verdict: Verdict,
    pub alice_bit: u8,
    pub bob_bit: Option<u8>,
    /// Kept round whose outcome could not be decoded.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub decode_error: bool,
}

fn coin<T>(rng: &Rng, heads: T, tails: T) -> (T, Rng) {
    let (u, next) = rng.next_f64();
    (if u < 0.5 { heads } else { tails }, next)
}

/// One round. Draws are consumed in a fixed order (label, φ, basis, two
/// for the channel, outcome) so every model sees the same preparation and
/// settings for a given stream.
pub fn run_round(
    i: u64,
    alice: &AlicePolicy,
    bob: &BobPolicy,
    eve: &EveModel,
    rng: &Rng,
) -> RoundRecord {
    let (k, rng) = rng
        .sample(&alice.0)
        .expect("policy weights are validated on construction");
    let label = StateLabel::ALL[k];
    let (phi, rng) = coin(&rng, PhaseSetting::Zero, PhaseSetting::HalfPi);
    let (basis, rng) = coin(&rng, SpinBasis::Z, SpinBasis::Y);
    let basis = match bob.basis_mode {
        BasisMode::IndependentUniform => basis,
        BasisMode::AlwaysZ => SpinBasis::Z,
    };
    let (state, rng) = tap(&prepare(label), eve, &rng);
    let (outcome, _) = measure(&receiver_stages(&state, phi), basis, &rng);

    let group = label.group();
    let verdict = sift(group, phi, basis);
    let (bob_bit, decode_error) = match verdict {
        Verdict::Abort => (None, false),
        Verdict::Keep => match decode_bit(group, phi, basis, outcome) {
            Ok(b) => (Some(b), false),
            Err(_) => (None, true),
        },
    };
    RoundRecord {
        round_index: i,
        label,
        phi,
        basis,
        outcome,
        verdict,
        alice_bit: label.bit(),
        bob_bit,
        decode_error,
    }
}

fn default_n_rounds() -> u64 {
    10_000
}

fn default_seed() -> u64 {
    42
}

fn default_min_aborts() -> u64 {
    DEFAULT_MIN_ABORTS
}

/// Everything that determines a session. Embedded verbatim in transcripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default = "default_n_rounds")]
    pub n_rounds: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub alice_weights: AlicePolicy,
    #[serde(default)]
    pub basis_mode: BasisMode,
    #[serde(default)]
    pub eve: EveModel,
    #[serde(default = "default_min_aborts")]
    pub min_aborts: u64,
    #[serde(default)]
    pub frame: FrameSelection,
    /// Transcript destination; not part of the snapshot.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_rounds: default_n_rounds(),
            seed: default_seed(),
            alice_weights: AlicePolicy::default(),
            basis_mode: BasisMode::default(),
            eve: EveModel::default(),
            min_aborts: default_min_aborts(),
            frame: FrameSelection::default(),
            out: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_rounds == 0 {
            return Err(ProtocolError::InvalidConfig(
                "n_rounds must be at least 1".into(),
            ));
        }
        self.eve
            .validate()
            .map_err(|e| ProtocolError::InvalidConfig(e.to_string()))
    }

    pub fn bob(&self) -> BobPolicy {
        BobPolicy {
            basis_mode: self.basis_mode,
        }
    }

    pub fn security_options(&self) -> SecurityOptions {
        SecurityOptions {
            frame: self.frame,
            min_aborts: self.min_aborts,
        }
    }

    fn round(&self, i: u64) -> RoundRecord {
        run_round(
            i,
            &self.alice_weights,
            &self.bob(),
            &self.eve,
            &Rng::new(self.seed, i),
        )
    }
}

/// Runs all rounds on the calling thread.
pub fn run_session(config: &SessionConfig) -> Result<Transcript, ProtocolError> {
    config.validate()?;
    let records = (0..config.n_rounds).map(|i| config.round(i)).collect();
    Ok(Transcript::assemble(config.clone(), records))
}

/// Runs rounds on `jobs` worker threads (0 picks the core count). Output is
/// identical to [`run_session`].
pub fn run_session_parallel(config: &SessionConfig, jobs: usize) -> Result<Transcript, ProtocolError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ProtocolError::InvalidConfig(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        (0..config.n_rounds)
            .into_par_iter()
            .map(|i| config.round(i))
            .collect()
    });
    Ok(Transcript::assemble(config.clone(), records))
}

/// A label the sender reveals for an aborted round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub round_index: u64,
    pub label: StateLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub n_rounds: u64,
    pub kept: u64,
    pub aborted: u64,
    pub keep_fraction: f64,
    /// Aborted rounds per label, in (Ψ, Ψ⊥, Φ, Φ⊥) order.
    pub abort_counts: [u64; 4],
    pub decode_errors: u64,
    pub key_length: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub config: SessionConfig,
    pub records: Vec<RoundRecord>,
    pub declarations: Vec<Declaration>,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
    pub summary: SessionSummary,
}

impl Transcript {
    /// Derives declarations, keys and summary from ordered records.
    pub fn assemble(config: SessionConfig, records: Vec<RoundRecord>) -> Self {
        let mut declarations = Vec::new();
        let (mut alice_key, mut bob_key) = (Vec::new(), Vec::new());
        let mut abort_counts = [0u64; 4];
        let (mut kept, mut decode_errors) = (0u64, 0u64);
        for r in &records {
            match r.verdict {
                Verdict::Abort => {
                    abort_counts[r.label.index()] += 1;
                    declarations.push(Declaration {
                        round_index: r.round_index,
                        label: r.label,
                    });
                }
                Verdict::Keep => {
                    kept += 1;
                    match r.bob_bit {
                        Some(b) => {
                            alice_key.push(r.alice_bit);
                            bob_key.push(b);
                        }
                        None => decode_errors += 1,
                    }
                }
            }
        }
        let n = records.len() as u64;
        let summary = SessionSummary {
            n_rounds: n,
            kept,
            aborted: n - kept,
            keep_fraction: if n == 0 { 0.0 } else { kept as f64 / n as f64 },
            abort_counts,
            decode_errors,
            key_length: alice_key.len() as u64,
        };
        Self {
            config,
            records,
            declarations,
            alice_key,
            bob_key,
            summary,
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn declared_labels(&self) -> Vec<StateLabel> {
        self.declarations.iter().map(|d| d.label).collect()
    }

    pub fn abort_ensemble(&self) -> Result<AbortEnsemble, SecurityError> {
        ensemble_from_aborts(&self.declared_labels())
    }

    /// Security check with the transcript's own frame and minimum.
    pub fn security_report(&self) -> Result<SecurityReport, SecurityError> {
        self.security_report_with(&self.config.security_options())
    }

    pub fn security_report_with(&self, opts: &SecurityOptions) -> Result<SecurityReport, SecurityError> {
        security_decision(&self.abort_ensemble()?, opts)
    }

    /// Regenerates the session from its seed and config and compares.
    pub fn verify_replay(&self) -> Result<(), ProtocolError> {
        let fresh = run_session(&self.config)?;
        if let Some((a, b)) = fresh
            .records
            .iter()
            .zip(&self.records)
            .find(|(a, b)| a != b)
        {
            return Err(ProtocolError::ReplayMismatch(format!(
                "round {} differs (replayed {:?}, recorded {:?})",
                b.round_index, a, b
            )));
        }
        if fresh != *self {
            return Err(ProtocolError::ReplayMismatch(
                "round count, declarations, keys or summary differ".into(),
            ));
        }
        Ok(())
    }
}
