//! Benchmark inputs shared by the criterion suites.

use qdist_core::channels::{random_channel, Channel};
use qdist_core::rng;

/// A deterministic pair of random channels of dimension `dim`.
pub fn random_pair(dim: usize, seed: u64) -> (Channel, Channel) {
    let mut r = rng::seeded(seed);
    let e = Channel::from_kraus(random_channel(dim, dim, &mut r));
    let f = Channel::from_kraus(random_channel(dim, 1, &mut r));
    (e, f)
}
