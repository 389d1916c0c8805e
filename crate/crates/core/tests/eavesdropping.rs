mod support;

use pathspin_qkd::adversary::{expected_qber, qber, EveModel};
use pathspin_qkd::optics::{PhaseSetting, SpinBasis};
use pathspin_qkd::protocol::{run_session, AlicePolicy, BobPolicy, SessionConfig};
use pathspin_qkd::security::{assess, Frame};
use support::oracle;

const SETTINGS: [(PhaseSetting, SpinBasis); 4] = [
    (PhaseSetting::Zero, SpinBasis::Z),
    (PhaseSetting::Zero, SpinBasis::Y),
    (PhaseSetting::HalfPi, SpinBasis::Z),
    (PhaseSetting::HalfPi, SpinBasis::Y),
];

fn eve(phi: PhaseSetting, basis: SpinBasis, fraction: f64) -> EveModel {
    EveModel::InterceptResend {
        phi_e: phi,
        basis_e: basis,
        fraction,
    }
}

fn session(e: EveModel, n: u64, seed: u64) -> pathspin_qkd::protocol::Transcript {
    run_session(&SessionConfig {
        n_rounds: n,
        seed,
        eve: e,
        ..SessionConfig::default()
    })
    .unwrap()
}

#[test]
fn library_enumeration_matches_oracle() {
    for (phi, basis) in SETTINGS {
        for f in [0.0, 0.25, 0.5, 1.0] {
            let lib = expected_qber(&AlicePolicy::uniform(), &BobPolicy::default(), &eve(phi, basis, f)).rate;
            let want = oracle::qber(phi as usize, basis == SpinBasis::Y, f);
            assert!((lib - want).abs() < 1e-12, "{phi} {basis} f={f}: {lib} vs {want}");
        }
    }
}

#[test]
fn full_intercept_matches_oracle_and_is_visible() {
    let (phi, basis) = (PhaseSetting::Zero, SpinBasis::Z);
    let want = oracle::qber(0, false, 1.0);
    let q = qber(&session(eve(phi, basis, 1.0), 100_000, 42)).unwrap();
    let sigma = (want * (1.0 - want) / q.kept as f64).sqrt();
    assert!((q.rate - want).abs() < 3.0 * sigma, "{} vs {want}", q.rate);
    assert!(q.rate > q.three_sigma);
}

#[test]
fn visible_at_ten_thousand_rounds_for_every_setting() {
    for (i, (phi, basis)) in SETTINGS.into_iter().enumerate() {
        let q = qber(&session(eve(phi, basis, 1.0), 10_000, i as u64)).unwrap();
        assert!(q.rate > q.three_sigma, "{phi} {basis}: {q:?}");
    }
}

#[test]
fn rate_scales_with_intercept_fraction() {
    let full = oracle::qber(1, true, 1.0);
    for f in [0.25, 0.5, 0.75] {
        let q = qber(&session(eve(PhaseSetting::HalfPi, SpinBasis::Y, f), 100_000, 17)).unwrap();
        let want = f * full;
        let sigma = (want * (1.0 - want) / q.kept as f64).sqrt();
        assert!((q.rate - want).abs() < 3.0 * sigma, "f={f}: {} vs {want}", q.rate);
    }
}

#[test]
fn declarations_and_m_ignore_the_channel() {
    let quiet = session(EveModel::None, 20_000, 8);
    let loud = session(eve(PhaseSetting::Zero, SpinBasis::Y, 1.0), 20_000, 8);
    assert_eq!(quiet.declarations, loud.declarations);
    let m = |t: &pathspin_qkd::protocol::Transcript| {
        assess(&t.abort_ensemble().unwrap().weights(), Frame::PaperFormula, 0).m
    };
    assert!((m(&quiet) - m(&loud)).abs() < 1e-12);
}
