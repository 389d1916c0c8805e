use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::QmathError;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Counter-based random source keyed by `(seed, stream)`.
///
/// A value type: every draw returns the value together with the successor
/// generator, leaving `self` untouched. The ChaCha8 keystream makes the
/// sequence identical on every platform, and distinct streams are
/// independent, so protocol rounds can be generated in any order.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    core: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream);
        Self { seed, stream, core }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.core.get_word_pos()
    }

    pub fn next_u64(&self) -> (u64, Rng) {
        let mut next = self.clone();
        let x = next.core.next_u64();
        (x, next)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&self) -> (f64, Rng) {
        let (x, next) = self.next_u64();
        ((x >> 11) as f64 * (1.0 / (1u64 << 53) as f64), next)
    }

    /// Draws an index with probability proportional to `weights`, which must
    /// be non-negative and sum to 1 within 1e-9.
    pub fn sample(&self, weights: &[f64]) -> Result<(usize, Rng), QmathError> {
        check_distribution(weights)?;
        let (u, next) = self.next_f64();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
                acc += w;
                if u < acc {
                    return Ok((i, next));
                }
            }
        }
        // u landed in the rounding gap above the cumulative sum.
        Ok((last_positive, next))
    }
}

impl PartialEq for Rng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.stream == other.stream && self.position() == other.position()
    }
}

pub(crate) fn check_distribution(weights: &[f64]) -> Result<(), QmathError> {
    if weights.is_empty() {
        return Err(QmathError::InvalidDistribution("no weights".into()));
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !w.is_finite() || **w < 0.0)
    {
        return Err(QmathError::InvalidDistribution(format!(
            "weight {i} is {w}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(QmathError::InvalidDistribution(format!(
            "weights sum to {sum}"
        )));
    }
    Ok(())
}
