use cfrelay_core::check_against_theorem1;
use cfrelay_core::optimize::random_dist;
use cfrelay_core::pmf::{Alphabets, Channel, FactoredNetworkDistribution, FreeFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_binary_channel(seed: u64) -> (Alphabets, Channel) {
    let a = Alphabets::binary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<[f64; 8]> = (0..8)
        .map(|_| {
            let mut r = [0.0; 8];
            r.iter_mut().for_each(|x| *x = rng.random::<f64>());
            let s: f64 = r.iter().sum();
            r.map(|x| x / s)
        })
        .collect();
    let ch = Channel::from_fn(&a, |x0, x1, x2, y0, y1, y2| {
        rows[x0 * 4 + x1 * 2 + x2][y0 * 4 + y1 * 2 + y2]
    });
    (a, ch)
}

/// Pull both compression factors toward a constant output by `t`.
fn squeezed(mut d: FactoredNetworkDistribution, t: f64) -> FactoredNetworkDistribution {
    let a = d.alphabets;
    for f in [FreeFactor::Q1, FreeFactor::Q2] {
        let target = f.point_mass(&a);
        for (x, p) in d.factor_mut(f).probs_mut().iter_mut().zip(target.probs()) {
            *x = (1.0 - t) * *x + t * p;
        }
    }
    d
}

#[test]
fn elimination_matches_closed_form_on_random_binary_networks() {
    let mut feasible = 0;
    for seed in 0..120 {
        let (a, ch) = random_binary_channel(seed);
        let d = squeezed(random_dist(&a, &ch, seed + 1000), (seed % 10) as f64 / 9.0);
        let r = check_against_theorem1(&d).unwrap();
        feasible += r.theorem_feasible as usize;
        assert!(r.agreement() || r.boundary_case, "seed {seed}: {r:?}");
    }
    eprintln!("feasible: {feasible}/120");
}
