//! Seeded random streams for instance generation.
//!
//! Every random field of an instance draws from its own ChaCha20 stream. The
//! 256-bit key holds the user seed (little-endian, bytes 0..8) and the
//! regeneration attempt (bytes 8..12); the 64-bit stream id is
//! `(field << 32) | index`, where `index` distinguishes repeated fields such
//! as the matrices of different constraints. Streams are independent of the
//! order in which fields are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Stream identifiers. Values are part of the instance format: changing them
/// changes every generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Field {
    QcqpLinear = 1,
    QcqpRotation = 2,
    QcqpSpectrum = 3,
    MimoChannel = 10,
    MimoSymbols = 11,
    MimoNoise = 12,
    MimoStart = 13,
    MlpFeatures = 20,
    MlpTeacher = 21,
    MlpNoise = 22,
    MlpStart = 23,
    MlpSubsample = 24,
}

pub fn stream(seed: u64, attempt: u32, field: Field, index: u32) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&attempt.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(((field as u64) << 32) | index as u64);
    rng
}

pub fn normals(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn uniforms(rng: &mut ChaCha20Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}
