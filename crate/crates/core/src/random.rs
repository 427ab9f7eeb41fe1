//! Sampling primitives over any `RngCore` stream, plus seed derivation for
//! the independent per-replication streams.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream tags. Each replication owns one stream per tag so that changing
/// the decision layer (or the altruist rate) leaves the other arrival
/// sequences untouched.
pub(crate) const STREAM_PAIRS: u64 = 1;
pub(crate) const STREAM_NDADS: u64 = 2;
pub(crate) const STREAM_CROSSMATCH: u64 = 3;

/// Uniform draw in [0, 1) with 53 bits of precision.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli(p) draw.
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}

/// Poisson(mean) by sequential inversion of the CDF with a single uniform.
/// Large means are split into chunks so `exp(-mean)` never underflows.
pub fn poisson<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    const CHUNK: f64 = 500.0;
    if !(mean > 0.0) {
        return 0;
    }
    let mut remaining = mean;
    let mut total = 0u32;
    while remaining > 0.0 {
        let lambda = remaining.min(CHUNK);
        remaining -= lambda;
        total += poisson_inversion(rng, lambda);
    }
    total
}

fn poisson_inversion<R: RngCore + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    let u = uniform(rng);
    let mut k = 0u32;
    let mut p = libm::exp(-lambda);
    let mut cdf = p;
    // The tail mass past ~lambda + 40 sqrt(lambda) is below f64 resolution.
    let cap = (lambda + 40.0 * libm::sqrt(lambda) + 40.0) as u32;
    while u >= cdf && k < cap {
        k += 1;
        p *= lambda / f64::from(k);
        cdf += p;
    }
    k
}

/// Index drawn from a probability vector by inversion. Rounding slack at the
/// top end goes to the last entry with positive mass.
pub fn categorical<R: RngCore + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u = uniform(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent ChaCha stream for `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Seed for replication `index` under `base_seed`.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ mix64(index.wrapping_add(0x5EED)))
}

/// Small keyed generator: one per (donor, patient) encounter so crossmatch
/// verdicts do not depend on the order in which encounters are visited.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    state: u64,
}

impl KeyedRng {
    pub fn new(seed: u64, a: u64, b: u64) -> Self {
        KeyedRng { state: mix64(seed ^ mix64(a ^ mix64(b.wrapping_mul(0xA24B_AED4_963E_E407)))) }
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_zero_mean() {
        let mut rng = stream(1, 1);
        assert!((0..100).all(|_| poisson(&mut rng, 0.0) == 0));
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut rng = stream(7, 1);
        let n = 200_000;
        let draws: alloc::vec::Vec<f64> = (0..n).map(|_| f64::from(poisson(&mut rng, 37.0))).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - 37.0).abs() < 0.1, "mean {mean}");
        assert!((var - 37.0).abs() < 0.6, "var {var}");
    }

    #[test]
    fn poisson_large_mean_is_chunked() {
        let mut rng = stream(3, 1);
        let n = 2_000;
        let mean = (0..n).map(|_| f64::from(poisson(&mut rng, 1500.0))).sum::<f64>() / n as f64;
        assert!((mean - 1500.0).abs() < 3.0, "mean {mean}");
    }

    #[test]
    fn uniform_range() {
        let mut rng = stream(5, 2);
        for _ in 0..10_000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn categorical_skips_zero_mass() {
        let mut rng = stream(9, 1);
        for _ in 0..1000 {
            assert_ne!(categorical(&mut rng, &[0.5, 0.0, 0.5]), 1);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: alloc::vec::Vec<u64> = (0..4)
            .map({
                let mut r = stream(11, 1);
                move |_| r.next_u64()
            })
            .collect();
        let b: alloc::vec::Vec<u64> = (0..4)
            .map({
                let mut r = stream(11, 1);
                move |_| r.next_u64()
            })
            .collect();
        let c: alloc::vec::Vec<u64> = (0..4)
            .map({
                let mut r = stream(11, 2);
                move |_| r.next_u64()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
