//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit RNG so runs are reproducible. Independent
//! streams for concurrent work (one per utterance, one per batch item) are derived from a
//! base seed and a stream index.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use rand::SeedableRng;

pub type SplitRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SplitRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for stream `index` under `seed`; streams never overlap.
pub fn stream(seed: u64, index: u64) -> SplitRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}
