//! Contextuality-based security check on the aborted rounds.
//!
//! The receiver rebuilds the mixed state ρ = Σ pᵢ |sᵢ⟩⟨sᵢ| from the
//! preparations the sender declares for aborted rounds and evaluates the
//! Horodecki quantity M(ρ) = λ + μ, the sum of the two largest eigenvalues of
//! TᵀT. The CHSH inequality is violated, and the key accepted, iff M > 1.
//!
//! Two correlation matrices are available:
//! - [`Frame::AbInitio`]: Tᵢⱼ = Tr[ρ (σᵢ ⊗ σⱼ)] with the standard Pauli triad
//!   on spin and path, computed from the prepared kets;
//! - [`Frame::PaperFormula`]: the closed form in the ensemble weights,
//!   which reproduces the reference table.
//!
//! The two matrices differ entrywise whenever p₃ ≠ p₄ or p₁ ≠ p₂, but their
//! TᵀT spectra (and hence M) coincide. Every report carries a cross-check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{prepare, StateLabel};
use crate::qmath::{kron, sym3_eigs, Cx, Mat2, Mat3R, Mat4};

pub const DEFAULT_MIN_ABORTS: u64 = 100;

/// |ΔM| between frames above which a report is flagged as divergent.
pub const FRAME_DIVERGENCE_TOL: f64 = 1e-6;

/// Agreement required against the two-decimal reference table.
pub const TABLE_TOL: f64 = 0.01;

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("insufficient data: {got} aborted rounds, at least {required} required")]
    InsufficientData { required: u64, got: u64 },
    #[error("family parameter p must lie in [0, 1], got {0}")]
    Domain(f64),
    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Probabilities (p₁, p₂, p₃, p₄) over (Ψ, Ψ⊥, Φ, Φ⊥).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct EnsembleWeights([f64; 4]);

impl EnsembleWeights {
    pub fn new(w: [f64; 4]) -> Result<Self, SecurityError> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SecurityError::InvalidWeights(format!(
                "weights must be finite and non-negative: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SecurityError::InvalidWeights(format!(
                "weights sum to {sum}"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform() -> Self {
        Self([0.25; 4])
    }

    /// (p, (1−p)/3, (1−p)/3, (1−p)/3).
    pub fn family(p: f64) -> Result<Self, SecurityError> {
        check_unit_interval(p)?;
        let q = (1.0 - p) / 3.0;
        Ok(Self([p, q, q, q]))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, label: StateLabel) -> f64 {
        self.0[label.index()]
    }
}

impl TryFrom<[f64; 4]> for EnsembleWeights {
    type Error = SecurityError;
    fn try_from(w: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<EnsembleWeights> for [f64; 4] {
    fn from(w: EnsembleWeights) -> Self {
        w.0
    }
}

fn check_unit_interval(p: f64) -> Result<(), SecurityError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SecurityError::Domain(p))
    }
}

/// Declared-label counts over the aborted rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortEnsemble {
    counts: [u64; 4],
}

impl AbortEnsemble {
    pub fn from_counts(counts: [u64; 4]) -> Result<Self, SecurityError> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(SecurityError::InsufficientData {
                required: 1,
                got: 0,
            });
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> [u64; 4] {
        self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn weights(&self) -> EnsembleWeights {
        let total = self.total() as f64;
        EnsembleWeights(self.counts.map(|c| c as f64 / total))
    }
}

/// Tallies the labels the sender declared for aborted rounds.
pub fn ensemble_from_aborts(declarations: &[StateLabel]) -> Result<AbortEnsemble, SecurityError> {
    let mut counts = [0u64; 4];
    for label in declarations {
        counts[label.index()] += 1;
    }
    AbortEnsemble::from_counts(counts)
}

/// Hermitian, unit-trace, positive 4x4 operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityOperator(Mat4);

impl DensityOperator {
    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Conjugation ρ ↦ U ρ U†.
    pub fn conjugate(&self, u: &Mat4) -> Self {
        Self(*u * self.0 * u.dagger())
    }

    /// Tr[ρ A].
    pub fn expectation(&self, a: &Mat4) -> Cx {
        (self.0 * *a).trace()
    }
}

pub fn density_from_weights(w: &EnsembleWeights) -> DensityOperator {
    let rho = StateLabel::ALL
        .iter()
        .map(|&l| prepare(l).projector().scale(Cx::new(w.get(l), 0.0)))
        .fold(Mat4::zero(), |acc, p| acc + p);
    DensityOperator(rho)
}

pub fn density_from_ensemble(e: &AbortEnsemble) -> DensityOperator {
    density_from_weights(&e.weights())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    AbInitio,
    PaperFormula,
}

/// Which frame(s) a check should report. `Both` decides on the
/// closed-form frame and prints both.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSelection {
    AbInitio,
    PaperFormula,
    #[default]
    Both,
}

impl FrameSelection {
    pub fn verdict_frame(self) -> Frame {
        match self {
            FrameSelection::AbInitio => Frame::AbInitio,
            FrameSelection::PaperFormula | FrameSelection::Both => Frame::PaperFormula,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub t: Mat3R,
    pub frame: Frame,
}

fn pauli() -> [Mat2; 3] {
    let o = Cx::new(0.0, 0.0);
    let l = Cx::new(1.0, 0.0);
    let i = Cx::new(0.0, 1.0);
    [
        Mat2::new([[o, l], [l, o]]),
        Mat2::new([[o, -i], [i, o]]),
        Mat2::new([[l, o], [o, -l]]),
    ]
}

/// Tᵢⱼ = Tr[ρ (σᵢ^spin ⊗ σⱼ^path)].
pub fn correlation_ab_initio(rho: &DensityOperator) -> CorrelationMatrix {
    let s = pauli();
    let mut t = Mat3R::zero();
    for i in 0..3 {
        for j in 0..3 {
            t.0[i][j] = rho.expectation(&kron(&s[i], &s[j])).re;
        }
    }
    CorrelationMatrix {
        t,
        frame: Frame::AbInitio,
    }
}

/// Closed-form correlation matrix in the ensemble weights:
///
/// ```text
/// | p1−p2   −(p3−p4)     0      |
/// |   0       p1−p2    p3−p4    |
/// | p3+p4       0     −(p1+p2)  |
/// ```
pub fn correlation_formula(w: &EnsembleWeights) -> CorrelationMatrix {
    let [p1, p2, p3, p4] = w.as_array();
    let t = Mat3R([
        [p1 - p2, -(p3 - p4), 0.0],
        [0.0, p1 - p2, p3 - p4],
        [p3 + p4, 0.0, -(p1 + p2)],
    ]);
    CorrelationMatrix {
        t,
        frame: Frame::PaperFormula,
    }
}

pub fn correlation_matrix(w: &EnsembleWeights, frame: Frame) -> CorrelationMatrix {
    match frame {
        Frame::AbInitio => correlation_ab_initio(&density_from_weights(w)),
        Frame::PaperFormula => correlation_formula(w),
    }
}

/// λ ≥ μ ≥ `third` are the eigenvalues of TᵀT; `m = λ + μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horodecki {
    pub lambda: f64,
    pub mu: f64,
    pub third: f64,
    pub m: f64,
}

pub fn horodecki_m(t: &CorrelationMatrix) -> Horodecki {
    let [lambda, mu, third] =
        sym3_eigs(&t.t.gram()).expect("Gram matrices are symmetric with finite entries");
    Horodecki {
        lambda,
        mu,
        third,
        m: lambda + mu,
    }
}

/// Strict violation: M = 1 is not secure.
pub fn is_violation(m: f64) -> bool {
    m > 1.0
}

/// λ, μ and M for the one-parameter family
/// (p, (1−p)/3, (1−p)/3, (1−p)/3), evaluated from the closed forms
/// λ = (16p² − 8p + 1)/9 and
/// μ = (4p² − 2p + 1)/3 + 2√(20p⁴ − 44p³ + 30p² − 8p + 2)/9.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyValues {
    pub lambda: f64,
    pub mu: f64,
    pub m: f64,
}

pub fn closed_form_family(p: f64) -> Result<FamilyValues, SecurityError> {
    check_unit_interval(p)?;
    let p2 = p * p;
    let lambda = (16.0 * p2 - 8.0 * p + 1.0) / 9.0;
    let radicand = 20.0 * p2 * p2 + 30.0 * p2 - 44.0 * p2 * p + 2.0 - 8.0 * p;
    let mu = (4.0 * p2 - 2.0 * p + 1.0) / 3.0 + 2.0 * radicand.sqrt() / 9.0;
    Ok(FamilyValues {
        lambda,
        mu,
        m: lambda + mu,
    })
}

/// Pointwise check that the closed-form λ, μ are the two largest
/// eigenvalues of the closed-form-frame TᵀT.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub p: f64,
    pub closed_form: FamilyValues,
    pub eigenvalues: [f64; 3],
    pub agrees: bool,
}

pub fn family_eigen_check(p: f64, tol: f64) -> Result<FamilyCheck, SecurityError> {
    let closed_form = closed_form_family(p)?;
    let h = horodecki_m(&correlation_formula(&EnsembleWeights::family(p)?));
    let eigenvalues = [h.lambda, h.mu, h.third];
    let mut pair = [closed_form.lambda, closed_form.mu];
    pair.sort_by(|a, b| b.total_cmp(a));
    let agrees = (pair[0] - h.lambda).abs() <= tol && (pair[1] - h.mu).abs() <= tol;
    Ok(FamilyCheck {
        p,
        closed_form,
        eigenvalues,
        agrees,
    })
}

/// Grid points in `[0, 1]` where the closed-form pair is not the top two.
pub fn family_mismatches(grid_points: usize, tol: f64) -> Vec<FamilyCheck> {
    let n = grid_points.max(2) - 1;
    (0..=n)
        .map(|k| k as f64 / n as f64)
        .filter_map(|p| family_eigen_check(p, tol).ok())
        .filter(|c| !c.agrees)
        .collect()
}

/// Family parameter p* where M(p*) = 1, by bisection on [1/3, 1].
pub fn violation_threshold() -> Result<f64, SecurityError> {
    let f = |p: f64| closed_form_family(p).map(|v| v.m - 1.0);
    let (mut lo, mut hi) = (1.0 / 3.0, 1.0);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(SecurityError::Numerical(format!(
            "M − 1 does not change sign on [1/3, 1]: {f_lo}, {f_hi}"
        )));
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Failure probabilities: η₁ = (p₁+p₂)/2 (first group at φ = 0) and
/// η₂ = (p₃+p₄)/2 (second group at φ = π/2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRates {
    pub eta1: f64,
    pub eta2: f64,
}

pub fn eta_rates(w: &EnsembleWeights) -> EtaRates {
    let [p1, p2, p3, p4] = w.as_array();
    EtaRates {
        eta1: 0.5 * (p1 + p2),
        eta2: 0.5 * (p3 + p4),
    }
}

/// η₁ = (2p+1)/6, η₂ = (1−p)/3 on the one-parameter family.
pub fn family_eta(p: f64) -> Result<EtaRates, SecurityError> {
    check_unit_interval(p)?;
    Ok(EtaRates {
        eta1: (2.0 * p + 1.0) / 6.0,
        eta2: (1.0 - p) / 3.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityOptions {
    pub frame: FrameSelection,
    pub min_aborts: u64,
}

impl Default for SecurityOptions {
    fn default() -> Self {
        Self {
            frame: FrameSelection::Both,
            min_aborts: DEFAULT_MIN_ABORTS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCrossCheck {
    pub ab_initio_m: f64,
    pub paper_formula_m: f64,
    pub m_difference: f64,
    /// Largest entrywise difference between the two TᵀT matrices.
    pub gram_divergence: f64,
    pub divergent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub lambda: f64,
    pub mu: f64,
    pub m: f64,
    pub secure: bool,
    pub eta1: f64,
    pub eta2: f64,
    pub frame: Frame,
    pub n_aborts: u64,
    pub cross_check: FrameCrossCheck,
}

/// Evaluates the check on explicit weights without a sample-size floor.
pub fn assess(w: &EnsembleWeights, frame: Frame, n_aborts: u64) -> SecurityReport {
    let ab = correlation_matrix(w, Frame::AbInitio);
    let pf = correlation_formula(w);
    let (h_ab, h_pf) = (horodecki_m(&ab), horodecki_m(&pf));
    let chosen = match frame {
        Frame::AbInitio => h_ab,
        Frame::PaperFormula => h_pf,
    };
    let m_difference = (h_ab.m - h_pf.m).abs();
    let eta = eta_rates(w);
    SecurityReport {
        lambda: chosen.lambda,
        mu: chosen.mu,
        m: chosen.m,
        secure: is_violation(chosen.m),
        eta1: eta.eta1,
        eta2: eta.eta2,
        frame,
        n_aborts,
        cross_check: FrameCrossCheck {
            ab_initio_m: h_ab.m,
            paper_formula_m: h_pf.m,
            m_difference,
            gram_divergence: ab.t.gram().max_abs_diff(&pf.t.gram()),
            divergent: m_difference > FRAME_DIVERGENCE_TOL,
        },
    }
}

/// Secure/insecure verdict on an abort ensemble.
pub fn security_decision(
    e: &AbortEnsemble,
    opts: &SecurityOptions,
) -> Result<SecurityReport, SecurityError> {
    if e.total() < opts.min_aborts {
        return Err(SecurityError::InsufficientData {
            required: opts.min_aborts,
            got: e.total(),
        });
    }
    Ok(assess(&e.weights(), opts.frame.verdict_frame(), e.total()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub p: f64,
    pub m: f64,
    pub eta1: f64,
    pub eta2: f64,
}

pub const TABLE_PS: [f64; 8] = [0.67, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0];

/// Two-decimal reference values of (p, M, η₁, η₂).
pub const REFERENCE_TABLE: [TableRow; 8] = [
    TableRow { p: 0.67, m: 1.01, eta1: 0.39, eta2: 0.11 },
    TableRow { p: 0.70, m: 1.08, eta1: 0.40, eta2: 0.10 },
    TableRow { p: 0.75, m: 1.20, eta1: 0.41, eta2: 0.08 },
    TableRow { p: 0.80, m: 1.34, eta1: 0.43, eta2: 0.06 },
    TableRow { p: 0.85, m: 1.49, eta1: 0.45, eta2: 0.05 },
    TableRow { p: 0.90, m: 1.64, eta1: 0.46, eta2: 0.03 },
    TableRow { p: 0.95, m: 1.81, eta1: 0.48, eta2: 0.01 },
    TableRow { p: 1.0, m: 2.0, eta1: 0.50, eta2: 0.00 },
];

pub fn reproduction_table() -> Vec<TableRow> {
    TABLE_PS
        .iter()
        .map(|&p| {
            let v = closed_form_family(p).expect("table points lie in [0, 1]");
            let eta = family_eta(p).expect("table points lie in [0, 1]");
            TableRow {
                p,
                m: v.m,
                eta1: eta.eta1,
                eta2: eta.eta2,
            }
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("p,M,eta1,eta2\n");
    for r in rows {
        out.push_str(&format!("{:.2},{:.6},{:.6},{:.6}\n", r.p, r.m, r.eta1, r.eta2));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableMismatch {
    pub row: usize,
    pub column: &'static str,
    pub computed: f64,
    pub reference: f64,
}

/// Cells of `rows` that differ from the reference by more than `tol`.
pub fn verify_table(rows: &[TableRow], tol: f64) -> Vec<TableMismatch> {
    let mut out = Vec::new();
    if rows.len() != REFERENCE_TABLE.len() {
        out.push(TableMismatch {
            row: rows.len(),
            column: "rows",
            computed: rows.len() as f64,
            reference: REFERENCE_TABLE.len() as f64,
        });
    }
    for (i, (r, want)) in rows.iter().zip(REFERENCE_TABLE.iter()).enumerate() {
        for (column, computed, reference) in [
            ("p", r.p, want.p),
            ("M", r.m, want.m),
            ("eta1", r.eta1, want.eta1),
            ("eta2", r.eta2, want.eta2),
        ] {
            if (computed - reference).abs() > tol {
                out.push(TableMismatch {
                    row: i,
                    column,
                    computed,
                    reference,
                });
            }
        }
    }
    out
}
