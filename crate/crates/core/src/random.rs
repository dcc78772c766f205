//! Seeded random numbers for property checks and power iterations.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample in `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut impl Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_in_range() {
        let (mut a, mut b) = (rng(3), rng(3));
        for _ in 0..100 {
            let x = uniform(&mut a);
            assert_eq!(x, uniform(&mut b));
            assert!((0.0..1.0).contains(&x));
        }
    }
}
