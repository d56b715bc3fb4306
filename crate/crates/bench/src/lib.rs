//! Shared fixtures for the benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsedom::generate::{random_multiplier, SignalKind};
use sparsedom::{HaarMultiplier, Signal};

/// A random multiplier and two Gaussian signals at `depth`, fixed by `seed`.
pub fn inputs(depth: u32, seed: u64) -> (HaarMultiplier, Signal, Signal) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = random_multiplier(depth, 0.5, &mut rng);
    let f = SignalKind::GaussianNoise
        .generate(depth, &mut rng)
        .expect("valid depth");
    let g = SignalKind::GaussianNoise
        .generate(depth, &mut rng)
        .expect("valid depth");
    (t, f, g)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
