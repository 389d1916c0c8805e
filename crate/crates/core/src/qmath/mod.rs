//! Fixed-size complex linear algebra for the 2- and 4-dimensional spaces of
//! the simulator, a real symmetric 3x3 eigensolver, and a counter-based
//! random source.
//!
//! Composite vectors are ordered spin ⊗ path: `index = 2 * spin + path`,
//! where path 0 is the transmitted channel and path 1 the reflected one.
//! Nothing in this module knows about the physics built on top of it.

mod eigen;
mod rng;

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{sym3_eigen, sym3_eigs, Mat3R, SymEigen};
pub use rng::Rng;

/// Complex scalar.
pub type Cx = Complex64;

/// Tolerance for normalization and unitarity checks.
pub const NORM_TOL: f64 = 1e-12;

/// Born probabilities in `[-CLAMP_TOL, 0)` are rounded up to zero.
pub const CLAMP_TOL: f64 = 1e-14;

const PROJECTOR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmathError {
    #[error("invalid state: squared norm {norm_sqr} is not 1")]
    InvalidState { norm_sqr: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

#[inline]
pub const fn cx(re: f64, im: f64) -> Cx {
    Cx::new(re, im)
}

/// Column vector of `N` complex amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec<const N: usize>(pub [Cx; N]);

pub type Vec2 = CVec<2>;
pub type Vec4 = CVec<4>;

impl<const N: usize> CVec<N> {
    pub const fn new(components: [Cx; N]) -> Self {
        Self(components)
    }

    pub fn zero() -> Self {
        Self([Cx::new(0.0, 0.0); N])
    }

    /// Standard basis vector `e_i`.
    pub fn basis(i: usize) -> Self {
        let mut v = Self::zero();
        v.0[i] = Cx::new(1.0, 0.0);
        v
    }

    pub fn from_slice(components: &[Cx]) -> Result<Self, QmathError> {
        let arr: [Cx; N] = components.try_into().map_err(|_| QmathError::Dimension {
            expected: N,
            got: components.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// Errors unless `|‖v‖² − 1| ≤ NORM_TOL`.
    pub fn check_normalized(&self) -> Result<(), QmathError> {
        let norm_sqr = self.norm_sqr();
        if norm_sqr.is_finite() && (norm_sqr - 1.0).abs() <= NORM_TOL {
            Ok(())
        } else {
            Err(QmathError::InvalidState { norm_sqr })
        }
    }

    pub fn normalized(&self) -> Self {
        self.scale(Cx::new(1.0 / self.norm_sqr().sqrt(), 0.0))
    }

    /// Inner product `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Cx {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: Cx) -> Self {
        Self(self.0.map(|a| a * c))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        out
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        out
    }
}

/// Row-major `N x N` complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize>(pub [[Cx; N]; N]);

pub type Mat2 = CMat<2>;
pub type Mat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub const fn new(rows: [[Cx; N]; N]) -> Self {
        Self(rows)
    }

    pub fn zero() -> Self {
        Self([[Cx::new(0.0, 0.0); N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.0[i][i] = Cx::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from `N*N` row-major entries.
    pub fn from_rows(entries: &[Cx]) -> Result<Self, QmathError> {
        if entries.len() != N * N {
            return Err(QmathError::Dimension {
                expected: N * N,
                got: entries.len(),
            });
        }
        let mut m = Self::zero();
        for (k, e) in entries.iter().enumerate() {
            m.0[k / N][k % N] = *e;
        }
        Ok(m)
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &CVec<N>, b: &CVec<N>) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = a.0[i] * b.0[j].conj();
            }
        }
        m
    }

    /// Rank-one projector onto a normalized vector.
    pub fn projector(v: &CVec<N>) -> Self {
        Self::outer(v, v)
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn scale(&self, c: Cx) -> Self {
        Self(self.0.map(|row| row.map(|a| a * c)))
    }

    pub fn trace(&self) -> Cx {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn apply(&self, v: &CVec<N>) -> CVec<N> {
        let mut out = CVec::zero();
        for i in 0..N {
            out.0[i] = (0..N).map(|j| self.0[i][j] * v.0[j]).sum();
        }
        out
    }

    /// `⟨v|self|v⟩`.
    pub fn expectation(&self, v: &CVec<N>) -> Cx {
        v.inner(&self.apply(v))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    /// `‖U†U − I‖_max ≤ tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.dagger() * *self).max_abs_diff(&Self::identity()) <= tol
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = (0..N).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        out
    }
}

impl<const N: usize> Mul<CVec<N>> for CMat<N> {
    type Output = CVec<N>;
    fn mul(self, rhs: CVec<N>) -> CVec<N> {
        self.apply(&rhs)
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

/// Kronecker product of two 2-vectors without any normalization check.
pub fn kron_vec(a: &Vec2, b: &Vec2) -> Vec4 {
    let mut v = Vec4::zero();
    for i in 0..2 {
        for j in 0..2 {
            v.0[2 * i + j] = a.0[i] * b.0[j];
        }
    }
    v
}

/// Kronecker product `a ⊗ b` of two 2x2 matrices.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut m = Mat4::zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    m
}

/// Composite state `spin ⊗ path`. Both factors must be normalized.
pub fn tensor(spin: &Vec2, path: &Vec2) -> Result<Vec4, QmathError> {
    spin.check_normalized()?;
    path.check_normalized()?;
    Ok(kron_vec(spin, path))
}

/// `U ⊗ I`: acts on the spin factor only.
pub fn lift_spin(u: &Mat2) -> Mat4 {
    kron(u, &Mat2::identity())
}

/// `I ⊗ U`: acts on the path factor only.
pub fn lift_path(u: &Mat2) -> Mat4 {
    kron(&Mat2::identity(), u)
}

/// Born-rule probabilities of a normalized state under a projective
/// measurement. The projectors must be Hermitian idempotents resolving the
/// identity.
pub fn born(v: &Vec4, projectors: &[Mat4]) -> Result<Vec<f64>, QmathError> {
    v.check_normalized()?;
    if projectors.is_empty() {
        return Err(QmathError::InvalidMeasurement("no projectors".into()));
    }
    let mut total = Mat4::zero();
    for (k, p) in projectors.iter().enumerate() {
        if !p.is_hermitian(PROJECTOR_TOL) {
            return Err(QmathError::InvalidMeasurement(format!(
                "projector {k} is not Hermitian"
            )));
        }
        if (*p * *p).max_abs_diff(p) > PROJECTOR_TOL {
            return Err(QmathError::InvalidMeasurement(format!(
                "projector {k} is not idempotent"
            )));
        }
        total = total + *p;
    }
    if total.max_abs_diff(&Mat4::identity()) > PROJECTOR_TOL {
        return Err(QmathError::InvalidMeasurement(
            "projectors do not sum to the identity".into(),
        ));
    }
    projectors
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let prob = p.expectation(v).re;
            if prob >= 0.0 {
                Ok(prob)
            } else if prob >= -CLAMP_TOL {
                Ok(0.0)
            } else {
                Err(QmathError::InvalidMeasurement(format!(
                    "projector {k} yields negative probability {prob}"
                )))
            }
        })
        .collect()
}
