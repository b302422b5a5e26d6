//! Counter-based random streams.
//!
//! Every `(seed, stream, step)` triple addresses its own block range of a
//! ChaCha8 keystream: the key comes from the seed, the stream id is the path
//! index and the word position is `step << 32`. Draws for a path/step never
//! depend on which thread produced the neighbouring ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub const GENERATOR_ID: &str = "chacha8;stream=path;word_pos=step<<32";

/// Domain separators so independent consumers of one user seed never share a keystream.
pub mod domain {
    pub const SIMULATE: u64 = 0x0000_0000_0000_0000;
    pub const COUNTING: u64 = 0x636f_756e_7469_6e67;
    pub const PROBE: u64 = 0x7072_6f62_6500_0000;
}

pub fn step_rng(seed: u64, domain: u64, stream: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(step) << 32);
    rng
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Below this mean Poisson variates are drawn by sequential inversion.
pub const INVERSION_LIMIT: f64 = 30.0;

pub fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.gen();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut n = 0u64;
        while u > cdf {
            n += 1;
            p *= mean / n as f64;
            cdf += p;
            // The tail mass beyond here is below double precision.
            if p < 1e-300 || n > 10_000 {
                break;
            }
        }
        n
    } else {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_addressable() {
        let a: Vec<f64> = {
            let mut r = step_rng(7, domain::SIMULATE, 3, 5);
            (0..4).map(|_| r.gen()).collect()
        };
        let b: Vec<f64> = {
            let mut r = step_rng(7, domain::SIMULATE, 3, 5);
            (0..4).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
        let mut other = step_rng(7, domain::SIMULATE, 3, 6);
        assert_ne!(a[0], other.gen::<f64>());
        let mut other = step_rng(7, domain::SIMULATE, 4, 5);
        assert_ne!(a[0], other.gen::<f64>());
    }

    #[test]
    fn poisson_inversion_mean() {
        let mut rng = step_rng(1, 0, 0, 0);
        let n = 200_000;
        let mean = 0.7;
        let total: u64 = (0..n).map(|_| poisson(&mut rng, mean)).sum();
        let sample_mean = total as f64 / n as f64;
        let se = (mean / n as f64).sqrt();
        assert!((sample_mean - mean).abs() < 4.0 * se, "{sample_mean}");
        assert_eq!(poisson(&mut rng, 0.0), 0);
    }
}
