//! Random-stream derivation.
//!
//! Every stochastic operation takes an explicit `ChaCha8Rng`. Streams are
//! derived from a master seed plus a purpose/task index so that parallel work
//! is reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Calibration seed used for medians, variances and optimizer bounds.
pub const CALIBRATION_SEED: u64 = 12345;

pub mod purpose {
    pub const CALIBRATION: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const COHORT: u64 = 4;
    pub const ACCEPTED: u64 = 5;
    pub const RESAMPLE: u64 = 6;
    /// Applicant `i` uses stream `APPLICANT_BASE + i`.
    pub const APPLICANT_BASE: u64 = 1 << 32;
}

/// Independent stream for `(seed, index)`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
