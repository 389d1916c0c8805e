use pathspin_qkd::adversary::qber;
use pathspin_qkd::optics::{setting_distribution, Group, PhaseSetting, SpinBasis, StateLabel};
use pathspin_qkd::protocol::{
    load_transcript, run_session, save_transcript, AlicePolicy, BasisMode, SessionConfig,
    Transcript, Verdict,
};
use pathspin_qkd::security::SecurityOptions;

// Upper 0.1% quantile of chi-square with 3 degrees of freedom.
const CHI2_DF3_999: f64 = 16.266;

fn config(n: u64, seed: u64) -> SessionConfig {
    SessionConfig {
        n_rounds: n,
        seed,
        ..SessionConfig::default()
    }
}

#[test]
fn no_eve_no_errors_and_half_kept() {
    let t = run_session(&config(100_000, 42)).unwrap();
    let kept: Vec<_> = t.records.iter().filter(|r| r.verdict == Verdict::Keep).collect();
    assert!(kept.iter().all(|r| r.bob_bit == Some(r.alice_bit)));
    assert_eq!(t.summary.decode_errors, 0);
    assert!((t.summary.keep_fraction - 0.5).abs() <= 0.005);
    assert_eq!(qber(&t).unwrap().mismatches, 0);
}

#[test]
fn always_z_keeps_exactly_the_z_settings() {
    let t = run_session(&SessionConfig {
        basis_mode: BasisMode::AlwaysZ,
        ..config(100_000, 7)
    })
    .unwrap();
    assert!((t.summary.keep_fraction - 0.5).abs() <= 0.005);
    for r in &t.records {
        assert_eq!(r.basis, SpinBasis::Z);
        let expect_keep = matches!(
            (r.label.group(), r.phi),
            (Group::G1, PhaseSetting::HalfPi) | (Group::G2, PhaseSetting::Zero)
        );
        assert_eq!(r.verdict == Verdict::Keep, expect_keep);
    }
}

#[test]
fn aborted_outcomes_are_uniform() {
    let t = run_session(&config(100_000, 99)).unwrap();
    for label in StateLabel::ALL {
        let mut counts = [0u64; 4];
        for r in t.records.iter().filter(|r| r.label == label && r.verdict == Verdict::Abort) {
            counts[r.outcome.index()] += 1;
        }
        let n: u64 = counts.iter().sum();
        let e = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < CHI2_DF3_999, "{label}: chi2 = {chi2}, counts {counts:?}");
    }
}

#[test]
fn kept_outcomes_follow_the_table() {
    let t = run_session(&config(20_000, 5)).unwrap();
    for r in t.records.iter().filter(|r| r.verdict == Verdict::Keep) {
        let d = setting_distribution(r.label, r.phi, r.basis);
        assert!(d[r.outcome.index()] > 0.4, "{r:?}");
    }
}

#[test]
fn declarations_survive_save_and_load() {
    let t = run_session(&config(1000, 2024)).unwrap();
    let aborts = t.summary.aborted;
    assert!((400..=600).contains(&aborts), "{aborts}");

    let mut buf = Vec::new();
    save_transcript(&t, &mut buf).unwrap();
    let loaded = load_transcript(buf.as_slice()).unwrap();
    assert_eq!(loaded, t);
    assert_eq!(loaded.abort_ensemble().unwrap(), t.abort_ensemble().unwrap());
    assert_eq!(loaded.abort_ensemble().unwrap().total(), aborts);

    let opts = SecurityOptions::default();
    assert_eq!(
        loaded.security_report_with(&opts).unwrap(),
        t.security_report_with(&opts).unwrap()
    );
}

#[test]
fn save_is_byte_stable() {
    let c = SessionConfig {
        alice_weights: AlicePolicy::family(0.8).unwrap(),
        ..config(5000, 3)
    };
    let bytes = |t: &Transcript| {
        let mut b = Vec::new();
        save_transcript(t, &mut b).unwrap();
        b
    };
    let a = bytes(&run_session(&c).unwrap());
    let b = bytes(&run_session(&c).unwrap());
    assert_eq!(a, b);
    let reloaded = load_transcript(a.as_slice()).unwrap();
    assert_eq!(bytes(&reloaded), a);
}
