//! Hand-rolled reference model for cross-checking the library: amplitudes
//! are summed explicitly over spin and path components with plain complex
//! numbers, without the library's matrix, lift or projector code.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use pathspin_qkd::qmath::Mat3R;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Components indexed [spin][path], path 0 = T, 1 = R.
pub type Ket = [[C; 2]; 2];

/// Ψ, Ψ⊥, Φ, Φ⊥.
pub fn state(label: usize) -> Ket {
    let sign = if label.is_multiple_of(2) { 1.0 } else { -1.0 };
    // (|0⟩|T⟩ ± i|1⟩|R⟩)/√2
    let psi = [[c(H, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, sign * H)]];
    if label < 2 {
        return psi;
    }
    // Spin map |0⟩ → i(|0⟩−|1⟩)/√2, |1⟩ → (|0⟩+|1⟩)/√2, per path component.
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for p in 0..2 {
        let (a0, a1) = (psi[0][p], psi[1][p]);
        out[0][p] = c(0.0, H) * a0 + c(H, 0.0) * a1;
        out[1][p] = c(0.0, -H) * a0 + c(H, 0.0) * a1;
    }
    out
}

/// Outcome probabilities in order (T′,s0), (T′,s1), (R′,s0), (R′,s1) for
/// phase index `phi` (0 → 0, 1 → π/2) and basis `y` (false → Z, true → Y).
pub fn distribution(ket: &Ket, phi: usize, y: bool) -> [f64; 4] {
    let e = if phi == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
    // |T⟩ → e(|T′⟩ + i|R′⟩)/√2, |R⟩ → (|T′⟩ − i|R′⟩)/√2.
    let mut after = [[c(0.0, 0.0); 2]; 2];
    for s in 0..2 {
        let (t, r) = (ket[s][0], ket[s][1]);
        after[s][0] = (e * t + r) * H;
        after[s][1] = (c(0.0, 1.0) * e * t - c(0.0, 1.0) * r) * H;
    }
    if phi == 1 {
        let [up, down] = after;
        for port in 0..2 {
            after[0][port] = (up[port] + down[port]) * H;
            after[1][port] = (up[port] - down[port]) * H;
        }
    }
    // Bra components of the measured spin kets.
    let basis: [[C; 2]; 2] = if y {
        // χ₊ = (|1⟩ − i|0⟩)/√2, χ₋ = (|1⟩ + i|0⟩)/√2
        [[c(0.0, -H), c(H, 0.0)], [c(0.0, H), c(H, 0.0)]]
    } else {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
    };
    let mut out = [0.0; 4];
    for port in 0..2 {
        for (k, b) in basis.iter().enumerate() {
            let amp = b[0].conj() * after[0][port] + b[1].conj() * after[1][port];
            out[2 * port + k] = amp.norm_sqr();
        }
    }
    out
}

/// Keep/abort table: group 0 keeps (0, Y) and (π/2, Z); group 1 keeps
/// (0, Z) and (π/2, Y).
pub fn kept(label: usize, phi: usize, y: bool) -> bool {
    let g1 = label < 2;
    matches!((g1, phi, y), (true, 0, true) | (true, 1, false) | (false, 0, false) | (false, 1, true))
}

/// Member of the announced group consistent with the outcome.
pub fn decode(label: usize, phi: usize, y: bool, outcome: usize) -> Option<usize> {
    let first = label - label % 2;
    let hits: Vec<usize> = (first..first + 2)
        .filter(|&m| distribution(&state(m), phi, y)[outcome] > 1e-9)
        .collect();
    (hits.len() == 1).then(|| hits[0] % 2)
}

/// Maximum-likelihood label, ties to the lowest index.
pub fn guess(phi: usize, y: bool, outcome: usize) -> usize {
    let mut best = 0;
    for l in 1..4 {
        if distribution(&state(l), phi, y)[outcome] > distribution(&state(best), phi, y)[outcome] + 1e-12 {
            best = l;
        }
    }
    best
}

/// Exact mismatch rate over kept rounds for uniform sender and receiver
/// choices, with Eve intercepting a fraction `f` of rounds at a fixed
/// setting.
pub fn qber(eve_phi: usize, eve_y: bool, f: f64) -> f64 {
    let (mut keep, mut err) = (0.0, 0.0);
    for label in 0..4 {
        for phi in 0..2 {
            for y in [false, true] {
                if !kept(label, phi, y) {
                    continue;
                }
                let w = 0.25 * 0.25;
                let mut channel = vec![(label, 1.0 - f)];
                let eve_dist = distribution(&state(label), eve_phi, eve_y);
                for (o, p) in eve_dist.iter().enumerate() {
                    channel.push((guess(eve_phi, eve_y, o), f * p));
                }
                for (sent, pc) in channel {
                    for (o, p) in distribution(&state(sent), phi, y).iter().enumerate() {
                        if let Some(bit) = decode(label, phi, y, o) {
                            keep += w * pc * p;
                            if bit != label % 2 {
                                err += w * pc * p;
                            }
                        }
                    }
                }
            }
        }
    }
    err / keep
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// largest first.
pub fn sym3_eigenvalues(a: &Mat3R) -> [f64; 3] {
    let mut m = a.0;
    for _ in 0..100 {
        let off: f64 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = [[0.0; 3]; 3];
            for (i, row) in r.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            r[p][p] = c;
            r[q][q] = c;
            r[p][q] = s;
            r[q][p] = -s;
            // m <- rᵀ m r
            let mut tmp = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    tmp[i][j] = (0..3).map(|k| m[i][k] * r[k][j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = (0..3).map(|k| r[k][i] * tmp[k][j]).sum();
                }
            }
        }
    }
    let mut ev = [m[0][0], m[1][1], m[2][2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
