//! Benchmark fixtures.

use cfrelay_core::optimize::{flat_dirichlet, random_dist};
use cfrelay_core::{Alphabets, Channel, FactoredNetworkDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All-binary network with a random channel and a random input distribution.
pub fn binary_network(seed: u64) -> FactoredNetworkDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Alphabets::binary();
    let rows: Vec<Vec<f64>> = (0..8).map(|_| flat_dirichlet(8, &mut rng)).collect();
    let ch = Channel::from_fn(&a, |x0, x1, x2, y0, y1, y2| {
        rows[x0 * 4 + x1 * 2 + x2][y0 * 4 + y1 * 2 + y2]
    });
    random_dist(&a, &ch, seed)
}
