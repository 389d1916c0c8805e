//! Eigen-decomposition of real symmetric 3x3 matrices.
//!
//! Eigenvalues come from the trigonometric form of Cardano's formula.
//! When the normalized discriminant of the characteristic cubic falls below
//! `DEGENERATE_DISC` (a repeated root), or the closed-form eigenvectors miss
//! the residual target, the cyclic Jacobi method takes over.

use std::f64::consts::PI;

use super::QmathError;

const SYMMETRY_TOL: f64 = 1e-12;
const DEGENERATE_DISC: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Row-major real 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3R(pub [[f64; 3]; 3]);

impl Mat3R {
    pub fn zero() -> Self {
        Self([[0.0; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zero();
        for (i, x) in d.into_iter().enumerate() {
            m.0[i][i] = x;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        out
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| self.0[i][k] * v[k]).sum();
        }
        out
    }

    /// `Mᵀ M`, symmetric by construction.
    pub fn gram(&self) -> Self {
        let mut g = self.transpose().mul(self);
        for i in 0..3 {
            for j in 0..i {
                let avg = 0.5 * (g.0[i][j] + g.0[j][i]);
                g.0[i][j] = avg;
                g.0[j][i] = avg;
            }
        }
        g
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |a, b| a.max(b.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.transpose()) <= tol
    }
}

/// Eigenpairs sorted by descending eigenvalue; `vectors[k]` belongs to
/// `values[k]` and has unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn sym3_eigs(m: &Mat3R) -> Result<[f64; 3], QmathError> {
    sym3_eigen(m).map(|e| e.values)
}

pub fn sym3_eigen(m: &Mat3R) -> Result<SymEigen, QmathError> {
    if m.0.iter().flatten().any(|x| !x.is_finite()) {
        return Err(QmathError::InvalidMatrix("non-finite entry".into()));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(QmathError::InvalidMatrix(format!(
            "asymmetry {:.3e} exceeds {SYMMETRY_TOL:e}",
            m.max_abs_diff(&m.transpose())
        )));
    }
    // Symmetrize away sub-tolerance noise so both solvers see the same matrix.
    let mut a = *m;
    for i in 0..3 {
        for j in 0..i {
            let avg = 0.5 * (a.0[i][j] + a.0[j][i]);
            a.0[i][j] = avg;
            a.0[j][i] = avg;
        }
    }

    if a.0[0][1] == 0.0 && a.0[0][2] == 0.0 && a.0[1][2] == 0.0 {
        let d = [a.0[0][0], a.0[1][1], a.0[2][2]];
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        return Ok(sorted(d, axes));
    }

    match cardano(&a) {
        Some(e) => Ok(e),
        None => Ok(jacobi(&a)),
    }
}

fn sorted(values: [f64; 3], vectors: [[f64; 3]; 3]) -> SymEigen {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    SymEigen {
        values: order.map(|k| values[k]),
        vectors: order.map(|k| vectors[k]),
    }
}

/// Closed-form path. Returns `None` near a repeated root or when an
/// eigenvector fails the residual check.
fn cardano(a: &Mat3R) -> Option<SymEigen> {
    let m = &a.0;
    let q = a.trace() / 3.0;
    let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let spread = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * off;
    let p = (spread / 6.0).sqrt();
    if p == 0.0 {
        return None;
    }
    let mut b = *a;
    for i in 0..3 {
        b.0[i][i] -= q;
    }
    for row in b.0.iter_mut() {
        for x in row.iter_mut() {
            *x /= p;
        }
    }
    // B has trace 0 and tr(B²) = 6, so its characteristic polynomial is
    // t³ − 3t − 2r with discriminant proportional to 1 − r².
    let r = (b.det() / 2.0).clamp(-1.0, 1.0);
    if 1.0 - r * r < DEGENERATE_DISC {
        return None;
    }
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let values = [e1, e2, e3];

    let scale = a.max_abs().max(1.0);
    let mut vectors = [[0.0; 3]; 3];
    for (k, &lambda) in values.iter().enumerate() {
        let v = null_vector(a, lambda)?;
        let av = a.apply(&v);
        let residual = (0..3)
            .map(|i| (av[i] - lambda * v[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > RESIDUAL_TOL * scale {
            return None;
        }
        vectors[k] = v;
    }
    Some(sorted(values, vectors))
}

/// Unit vector in the null space of `A − λI`, taken as the largest cross
/// product of two of its rows.
fn null_vector(a: &Mat3R, lambda: f64) -> Option<[f64; 3]> {
    let mut rows = a.0;
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[0], &rows[2]),
        cross(&rows[1], &rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|x, y| norm_sqr(x).total_cmp(&norm_sqr(y)))?;
    let n = norm_sqr(best).sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(best.map(|x| x / n))
}

fn cross(u: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn norm_sqr(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
fn jacobi(a: &Mat3R) -> SymEigen {
    let mut m = a.0;
    let mut v = Mat3R::identity().0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        if off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for row in m.iter_mut() {
                let (mkp, mkq) = (row[p], row[q]);
                row[p] = c * mkp - s * mkq;
                row[q] = s * mkp + c * mkq;
            }
            let (rp, rq) = (m[p], m[q]);
            for k in 0..3 {
                m[p][k] = c * rp[k] - s * rq[k];
                m[q][k] = s * rp[k] + c * rq[k];
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let values = [m[0][0], m[1][1], m[2][2]];
    let vectors = [0, 1, 2].map(|k| [v[0][k], v[1][k], v[2][k]]);
    sorted(values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Roots of det(λI − M) by bracketing bisection on the monic cubic,
    /// independent of both solvers.
    fn charpoly_roots(m: &Mat3R) -> [f64; 3] {
        let c2 = -m.trace();
        let x = &m.0;
        let c1 = x[0][0] * x[1][1] + x[0][0] * x[2][2] + x[1][1] * x[2][2]
            - x[0][1] * x[1][0]
            - x[0][2] * x[2][0]
            - x[1][2] * x[2][1];
        let c0 = -m.det();
        let f = |l: f64| ((l + c2) * l + c1) * l + c0;
        // Gershgorin-style bound on the spectrum.
        let bound = 1.0 + m.0.iter().flatten().map(|v| v.abs()).sum::<f64>();
        let n = 20_000;
        let mut roots = Vec::new();
        let mut prev = -bound;
        for k in 1..=n {
            let cur = -bound + 2.0 * bound * k as f64 / n as f64;
            if f(prev) == 0.0 {
                roots.push(prev);
            } else if f(prev) * f(cur) < 0.0 {
                let (mut lo, mut hi) = (prev, cur);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(lo) * f(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
        assert_eq!(roots.len(), 3, "test matrix must have simple roots");
        roots.sort_by(|a, b| b.total_cmp(a));
        [roots[0], roots[1], roots[2]]
    }

    fn residuals(m: &Mat3R, e: &SymEigen) -> f64 {
        (0..3)
            .map(|k| {
                let av = m.apply(&e.vectors[k]);
                (0..3)
                    .map(|i| (av[i] - e.values[k] * e.vectors[k][i]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_diagonal_are_exact() {
        assert_eq!(sym3_eigs(&Mat3R::identity()).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(
            sym3_eigs(&Mat3R::diag([0.04, 0.52, 0.04])).unwrap(),
            [0.52, 0.04, 0.04]
        );
    }

    #[test]
    fn rejects_asymmetric() {
        let mut m = Mat3R::identity();
        m.0[0][1] = 1e-6;
        assert!(matches!(sym3_eigs(&m), Err(QmathError::InvalidMatrix(_))));
    }

    #[test]
    fn uniform_ensemble_gram_matches_charpoly_oracle() {
        // Closed-form correlation matrix at equal weights.
        let t = Mat3R([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, -0.5]]);
        let g = t.gram();
        let got = sym3_eigs(&g).unwrap();
        // Spectrum {1/2, 0, 0}: a double root, which the bisection oracle
        // cannot bracket, so it is checked against trace and determinant.
        assert!((got[0] - 0.5).abs() < 1e-12);
        assert!(got[1].abs() < 1e-12 && got[2].abs() < 1e-12);
    }

    #[test]
    fn worked_example_gram_matches_charpoly_oracle() {
        let (p1, p2, p3, p4) = (0.4, 0.2, 0.2, 0.2);
        let t = Mat3R([
            [p1 - p2, -(p3 - p4), 0.0],
            [0.0, p1 - p2, p3 - p4],
            [p3 + p4, 0.0, -(p1 + p2)],
        ]);
        let g = t.gram();
        let got = sym3_eigen(&g).unwrap();
        let want = charpoly_roots(&g);
        for k in 0..3 {
            assert!((got.values[k] - want[k]).abs() < 1e-10, "{got:?} vs {want:?}");
        }
        assert!(residuals(&g, &got) < 1e-10);
    }

    #[test]
    fn degenerate_pair_uses_fallback() {
        // Rotated diag(2, 1, 1): repeated root.
        let c = (0.3_f64).cos();
        let s = (0.3_f64).sin();
        let r = Mat3R([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let m = r.mul(&Mat3R::diag([2.0, 1.0, 1.0])).mul(&r.transpose());
        let e = sym3_eigen(&m).unwrap();
        for (got, want) in e.values.iter().zip([2.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(residuals(&m, &e) < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sym() -> impl Strategy<Value = Mat3R> {
            proptest::array::uniform6(-2.0..2.0f64).prop_map(|[a, b, c, d, e, f]| {
                Mat3R([[a, d, e], [d, b, f], [e, f, c]])
            })
        }

        proptest! {
            #[test]
            fn trace_det_and_residuals(m in sym()) {
                let e = sym3_eigen(&m).unwrap();
                prop_assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
                let tr: f64 = e.values.iter().sum();
                let det: f64 = e.values.iter().product();
                prop_assert!((tr - m.trace()).abs() < 1e-10);
                prop_assert!((det - m.det()).abs() < 1e-10);
                prop_assert!(residuals(&m, &e) < 1e-10);
            }

            #[test]
            fn gram_spectrum_nonnegative(a in proptest::array::uniform9(-1.0..1.0f64)) {
                let t = Mat3R([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]);
                let e = sym3_eigs(&t.gram()).unwrap();
                prop_assert!(e[2] > -1e-12);
            }
        }
    }
}
