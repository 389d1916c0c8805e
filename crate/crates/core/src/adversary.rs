//! Eavesdropper models acting on the in-flight state, and QBER estimation.
//!
//! The security check in [`crate::security`] only sees the sender's declared
//! labels, so an intercept-resend attack leaves M unchanged. The attack is
//! still visible as a non-zero error rate on the kept key bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{
    measure, prepare, receiver_stages, setting_distribution, OutcomePair, PathSpinState,
    PhaseSetting, SpinBasis, StateLabel,
};
use crate::protocol::{decode_bit, sift, AlicePolicy, BasisMode, BobPolicy, Transcript, Verdict};
use crate::qmath::Rng;

/// Likelihoods within this of each other count as a tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("no kept rounds with decoded bits")]
    InsufficientData,
    #[error("invalid eavesdropper model: {0}")]
    InvalidModel(String),
}

fn full_fraction() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveModel {
    #[default]
    None,
    /// Measures with a fixed receiver setting and re-sends her best guess.
    /// `fraction` is the probability that a given round is intercepted.
    InterceptResend {
        phi_e: PhaseSetting,
        basis_e: SpinBasis,
        #[serde(default = "full_fraction")]
        fraction: f64,
    },
}

impl EveModel {
    pub fn intercept_resend(phi_e: PhaseSetting, basis_e: SpinBasis) -> Self {
        EveModel::InterceptResend {
            phi_e,
            basis_e,
            fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        match *self {
            EveModel::InterceptResend { fraction, .. } if !(0.0..=1.0).contains(&fraction) => {
                Err(AdversaryError::InvalidModel(format!(
                    "intercept fraction must lie in [0, 1], got {fraction}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Maximum-likelihood label for an outcome seen under Eve's setting,
/// uniform prior, ties to the lower label index.
pub fn eve_guess(phi_e: PhaseSetting, basis_e: SpinBasis, outcome: OutcomePair) -> StateLabel {
    let mut best = StateLabel::Psi;
    let mut best_p = f64::NEG_INFINITY;
    for label in StateLabel::ALL {
        let p = setting_distribution(label, phi_e, basis_e)[outcome.index()];
        if p > best_p + TIE_TOL {
            best = label;
            best_p = p;
        }
    }
    best
}

/// Passes the state through the channel. Always consumes two draws (the
/// intercept coin and Eve's measurement) so downstream draws line up
/// across models.
pub fn tap(state: &PathSpinState, eve: &EveModel, rng: &Rng) -> (PathSpinState, Rng) {
    let (u, rng) = rng.next_f64();
    match *eve {
        EveModel::InterceptResend {
            phi_e,
            basis_e,
            fraction,
        } if u < fraction => {
            let (outcome, rng) = measure(&receiver_stages(state, phi_e), basis_e, &rng);
            (prepare(eve_guess(phi_e, basis_e, outcome)), rng)
        }
        _ => (*state, rng.next_u64().1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub mismatches: u64,
    pub kept: u64,
    pub rate: f64,
    /// Three binomial standard errors of `rate`.
    pub three_sigma: f64,
}

/// Mismatch rate over kept rounds with a decoded bit.
pub fn qber(t: &Transcript) -> Result<QberEstimate, AdversaryError> {
    let (mut kept, mut mismatches) = (0u64, 0u64);
    for r in &t.records {
        if let Some(b) = r.bob_bit {
            kept += 1;
            mismatches += u64::from(b != r.alice_bit);
        }
    }
    if kept == 0 {
        return Err(AdversaryError::InsufficientData);
    }
    let rate = mismatches as f64 / kept as f64;
    Ok(QberEstimate {
        mismatches,
        kept,
        rate,
        three_sigma: 3.0 * (rate * (1.0 - rate) / kept as f64).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedQber {
    pub keep_probability: f64,
    pub error_probability: f64,
    /// error_probability / keep_probability.
    pub rate: f64,
}

/// Exact QBER by enumerating label, receiver setting, Eve's outcome and
/// the receiver's outcome.
pub fn expected_qber(alice: &AlicePolicy, bob: &BobPolicy, eve: &EveModel) -> ExpectedQber {
    let bases: &[(SpinBasis, f64)] = match bob.basis_mode {
        BasisMode::IndependentUniform => &[(SpinBasis::Z, 0.5), (SpinBasis::Y, 0.5)],
        BasisMode::AlwaysZ => &[(SpinBasis::Z, 1.0)],
    };
    // Channel as a mixture of resent labels with weights.
    let channel = |label: StateLabel| -> Vec<(StateLabel, f64)> {
        match *eve {
            EveModel::None => vec![(label, 1.0)],
            EveModel::InterceptResend {
                phi_e,
                basis_e,
                fraction,
            } => {
                let mut out = vec![(label, 1.0 - fraction)];
                let dist = setting_distribution(label, phi_e, basis_e);
                for o in OutcomePair::ALL {
                    out.push((eve_guess(phi_e, basis_e, o), fraction * dist[o.index()]));
                }
                out
            }
        }
    };
    let (mut keep, mut error) = (0.0, 0.0);
    for label in StateLabel::ALL {
        let w = alice.weights()[label.index()];
        for phi in PhaseSetting::ALL {
            for &(basis, pb) in bases {
                if sift(label.group(), phi, basis) == Verdict::Abort {
                    continue;
                }
                let base = w * 0.5 * pb;
                for (sent, pc) in channel(label) {
                    let dist = setting_distribution(sent, phi, basis);
                    for o in OutcomePair::ALL {
                        let p = base * pc * dist[o.index()];
                        if let Ok(b) = decode_bit(label.group(), phi, basis, o) {
                            keep += p;
                            if b != label.bit() {
                                error += p;
                            }
                        }
                    }
                }
            }
        }
    }
    ExpectedQber {
        keep_probability: keep,
        error_probability: error,
        rate: if keep > 0.0 { error / keep } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Group;
    use crate::protocol::{run_session, SessionConfig};
    use PhaseSetting::*;
    use SpinBasis::*;

    const SETTINGS: [(PhaseSetting, SpinBasis); 4] = [(Zero, Z), (Zero, Y), (HalfPi, Z), (HalfPi, Y)];

    fn keeps(group: Group, (phi, basis): (PhaseSetting, SpinBasis)) -> bool {
        sift(group, phi, basis) == Verdict::Keep
    }

    #[test]
    fn none_is_identity() {
        for label in StateLabel::ALL {
            let s = prepare(label);
            let (out, _) = tap(&s, &EveModel::None, &Rng::new(1, 2));
            assert!(out.vector().max_abs_diff(s.vector()) <= 1e-15);
        }
    }

    #[test]
    fn tap_consumes_two_draws_for_every_model() {
        let r = Rng::new(3, 4);
        let s = prepare(StateLabel::Phi);
        for eve in [
            EveModel::None,
            EveModel::intercept_resend(Zero, Y),
            EveModel::InterceptResend {
                phi_e: HalfPi,
                basis_e: Z,
                fraction: 0.0,
            },
        ] {
            assert_eq!(tap(&s, &eve, &r).1.position(), 4);
        }
    }

    #[test]
    fn matched_setting_resends_exactly() {
        for label in StateLabel::ALL {
            for setting in SETTINGS.into_iter().filter(|&s| keeps(label.group(), s)) {
                let eve = EveModel::intercept_resend(setting.0, setting.1);
                for stream in 0..50 {
                    let s = prepare(label);
                    let (out, _) = tap(&s, &eve, &Rng::new(10, stream));
                    assert!(out.same_ray(&s, 1e-12));
                }
            }
        }
    }

    #[test]
    fn mismatched_setting_resends_other_group() {
        for label in StateLabel::ALL {
            for setting in SETTINGS.into_iter().filter(|&s| !keeps(label.group(), s)) {
                let eve = EveModel::intercept_resend(setting.0, setting.1);
                for stream in 0..50 {
                    let s = prepare(label);
                    let (out, _) = tap(&s, &eve, &Rng::new(11, stream));
                    assert!((out.vector().norm_sqr() - 1.0).abs() < 1e-12);
                    assert!((s.fidelity(&out) - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn guesses_are_never_ties() {
        for (phi, basis) in SETTINGS {
            for o in OutcomePair::ALL {
                let mut p: Vec<f64> = StateLabel::ALL
                    .iter()
                    .map(|&l| setting_distribution(l, phi, basis)[o.index()])
                    .collect();
                p.sort_by(|a, b| b.total_cmp(a));
                assert!(p[0] - p[1] > 0.2);
            }
        }
    }

    #[test]
    fn invalid_fraction() {
        let eve = EveModel::InterceptResend {
            phi_e: Zero,
            basis_e: Z,
            fraction: 1.5,
        };
        assert!(eve.validate().is_err());
    }

    #[test]
    fn expected_qber_values() {
        let (a, b) = (AlicePolicy::uniform(), BobPolicy::default());
        assert_eq!(expected_qber(&a, &b, &EveModel::None).error_probability, 0.0);
        assert!((expected_qber(&a, &b, &EveModel::None).keep_probability - 0.5).abs() < 1e-12);
        for (phi, basis) in SETTINGS {
            let e = expected_qber(&a, &b, &EveModel::intercept_resend(phi, basis));
            assert!((e.rate - 0.25).abs() < 1e-12, "{phi} {basis}: {}", e.rate);
        }
        let half = EveModel::InterceptResend {
            phi_e: Zero,
            basis_e: Y,
            fraction: 0.5,
        };
        assert!((expected_qber(&a, &b, &half).rate - 0.125).abs() < 1e-12);
    }

    #[test]
    fn qber_requires_kept_rounds() {
        let t = run_session(&SessionConfig {
            n_rounds: 1,
            seed: 0,
            ..SessionConfig::default()
        })
        .unwrap();
        let mut t = t;
        for r in &mut t.records {
            r.bob_bit = None;
        }
        assert_eq!(qber(&t), Err(AdversaryError::InsufficientData));
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&EveModel::intercept_resend(HalfPi, Y)).unwrap();
        assert_eq!(json, r#"{"kind":"intercept_resend","phi_e":"half_pi","basis_e":"y","fraction":1.0}"#);
        let parsed: EveModel =
            serde_json::from_str(r#"{"kind":"intercept_resend","phi_e":"zero","basis_e":"z"}"#).unwrap();
        assert_eq!(parsed, EveModel::intercept_resend(Zero, Z));
        assert_eq!(serde_json::to_string(&EveModel::None).unwrap(), r#"{"kind":"none"}"#);
    }
}
