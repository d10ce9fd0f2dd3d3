//! Seedable, splittable random streams and the handful of samplers the
//! simulator needs.
//!
//! # Stream derivation
//!
//! A stream is a ChaCha8 generator keyed by `seed_from_u64(master_seed)`
//! (the PCG32 seed expansion from `rand_core`) with its 64-bit ChaCha stream
//! number set to `stream_id`. Two streams with the same master seed and
//! different ids therefore share a key but never overlap. Child streams are
//! derived with [`RngStream::fork`]: the child master seed is
//! `splitmix64(master_seed ^ splitmix64(stream_id))` and its stream id is the
//! fork label.
//!
//! The experiment harness uses this scheme as follows:
//!
//! - episode stream: `split_stream(master_seed, episode_id)`
//! - asset values: `episode.fork(0)`
//! - focal agent: `episode.fork(1)`
//! - opponent agent: `episode.fork(2)`
//! - OOD parameter randomization: `episode.fork(3)`
//!
//! Uniform variates take the top 53 bits of a `u64` and reject an exact zero,
//! so they always lie in the open interval `(0, 1)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An independent, reproducible source of random draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Serializable snapshot of an [`RngStream`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub master_seed: u64,
    pub stream_id: u64,
    pub word_pos: u128,
}

/// Returns the stream identified by `(master_seed, stream_id)`, positioned at
/// its first draw.
pub fn split_stream(master_seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(master_seed, stream_id)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives a child stream. The child depends only on this stream's
    /// identity and `label`, never on how many draws were already taken.
    pub fn fork(&self, label: u64) -> RngStream {
        let child_master = splitmix64(self.master_seed ^ splitmix64(self.stream_id));
        RngStream::new(child_master, label)
    }

    pub fn state(&self) -> RngState {
        RngState {
            master_seed: self.master_seed,
            stream_id: self.stream_id,
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut stream = Self::new(state.master_seed, state.stream_id);
        stream.rng.set_word_pos(state.word_pos);
        stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform integer in `0..n`, by rejection so the result is unbiased.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }

    /// Uniform draw strictly inside `(0, 1)`.
    pub fn uniform01(&mut self) -> f64 {
        loop {
            let x = (self.next_u64() >> 11) as f64 * TWO_POW_MINUS_53;
            if x > 0.0 {
                return x;
            }
        }
    }

    /// Standard normal via Box-Muller; the second variate is discarded so the
    /// stream carries no cached state beyond its position.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn sample_uniform01(stream: &mut RngStream) -> f64 {
    stream.uniform01()
}

/// Draws from `Gamma(shape, 1)` using Marsaglia and Tsang's squeeze method,
/// with the `U^(1/shape)` boost for `shape < 1`.
pub fn sample_gamma(stream: &mut RngStream, shape: f64) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::parameter(
            "shape",
            format!("must be positive and finite, got {shape}"),
        ));
    }
    if shape < 1.0 {
        let boosted = gamma_large_shape(stream, shape + 1.0);
        let u = stream.uniform01();
        return Ok(boosted * u.powf(1.0 / shape));
    }
    Ok(gamma_large_shape(stream, shape))
}

fn gamma_large_shape(stream: &mut RngStream, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = stream.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = stream.uniform01();
        let x_sq = x * x;
        if u < 1.0 - 0.0331 * x_sq * x_sq {
            return d * v;
        }
        if u.ln() < 0.5 * x_sq + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Two-component Dirichlet draw scaled so the components sum to `scale`.
pub fn sample_asset_values(stream: &mut RngStream, alpha: [f64; 2], scale: f64) -> Result<(f64, f64)> {
    for (i, a) in alpha.iter().enumerate() {
        if !a.is_finite() || *a <= 0.0 {
            return Err(Error::parameter(
                "alpha",
                format!("component {i} must be positive, got {a}"),
            ));
        }
    }
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::parameter("scale", format!("must be positive, got {scale}")));
    }
    loop {
        let g0 = sample_gamma(stream, alpha[0])?;
        let g1 = sample_gamma(stream, alpha[1])?;
        let total = g0 + g1;
        if total > 0.0 && g0 > 0.0 && g1 > 0.0 {
            let v0 = scale * g0 / total;
            // Computed as a difference so the pair sums to `scale` exactly.
            let v1 = scale - v0;
            if v1 > 0.0 {
                return Ok((v0, v1));
            }
        }
    }
}

pub fn sample_beta(stream: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::parameter("a", format!("must be positive, got {a}")));
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::parameter("b", format!("must be positive, got {b}")));
    }
    loop {
        let x = sample_gamma(stream, a)?;
        let y = sample_gamma(stream, b)?;
        let r = x / (x + y);
        if r > 0.0 && r < 1.0 {
            return Ok(r);
        }
    }
}

/// Logistic activation noise `sigma * ln((1 - xi) / xi)`.
///
/// With `sigma == 0` this returns exactly zero without consuming a draw.
pub fn sample_activation_noise(stream: &mut RngStream, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let xi = stream.uniform01();
    sigma * ((1.0 - xi) / xi).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_n(stream: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| stream.next_u64()).collect()
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn same_inputs_same_sequence() {
        let a = first_n(&mut split_stream(42, 0), 10);
        let b = first_n(&mut split_stream(42, 0), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_stream_ids_differ() {
        let a = first_n(&mut split_stream(42, 0), 10);
        let b = first_n(&mut split_stream(42, 1), 10);
        assert_ne!(a, b);
    }

    #[test]
    fn state_round_trip_continues_sequence() {
        let mut s = split_stream(42, 7);
        first_n(&mut s, 13);
        let json = serde_json::to_string(&s.state()).unwrap();
        let mut restored = RngStream::from_state(serde_json::from_str(&json).unwrap());
        assert_eq!(first_n(&mut s, 10), first_n(&mut restored, 10));
    }

    #[test]
    fn fork_ignores_parent_position() {
        let parent = split_stream(9, 3);
        let mut advanced = parent.clone();
        first_n(&mut advanced, 5);
        assert_eq!(first_n(&mut parent.fork(1), 8), first_n(&mut advanced.fork(1), 8));
        assert_ne!(first_n(&mut parent.fork(1), 8), first_n(&mut parent.fork(2), 8));
    }

    #[test]
    fn interleaving_does_not_perturb_streams() {
        let mut a = split_stream(5, 0);
        let mut b = split_stream(5, 1);
        let mut mixed = Vec::new();
        for _ in 0..10 {
            mixed.push(a.next_u64());
            b.next_u64();
            b.next_u64();
        }
        assert_eq!(mixed, first_n(&mut split_stream(5, 0), 10));
    }

    #[test]
    fn below_covers_range() {
        let mut s = split_stream(1, 1);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[s.below(3)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 900));
    }

    #[test]
    fn uniform_moments() {
        let mut s = split_stream(11, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_uniform01(&mut s)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let (mean, var) = moments(&xs);
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.005, "var {var}");
    }

    #[test]
    fn gamma_moments_shape_three() {
        let mut s = split_stream(12, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_gamma(&mut s, 3.0).unwrap()).collect();
        let (mean, var) = moments(&xs);
        assert!((mean - 3.0).abs() < 0.02, "mean {mean}");
        assert!((var - 3.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn gamma_small_shape_mean() {
        let mut s = split_stream(13, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| sample_gamma(&mut s, 0.4).unwrap()).collect();
        let (mean, var) = moments(&xs);
        assert!((mean - 0.4).abs() < 0.01, "mean {mean}");
        assert!((var - 0.4).abs() < 0.02, "var {var}");
    }

    #[test]
    fn gamma_rejects_nonpositive_shape() {
        let mut s = split_stream(0, 0);
        assert!(matches!(sample_gamma(&mut s, 0.0), Err(Error::Parameter { .. })));
        assert!(sample_gamma(&mut s, -1.0).is_err());
        assert!(sample_gamma(&mut s, f64::NAN).is_err());
    }

    #[test]
    fn asset_values_sum_and_moments() {
        let mut s = split_stream(14, 0);
        let n = 100_000;
        let mut sum_v0 = 0.0;
        let mut mid = 0usize;
        for _ in 0..n {
            let (v0, v1) = sample_asset_values(&mut s, [3.0, 4.0], 100.0).unwrap();
            assert!(v0 > 0.0 && v1 > 0.0);
            assert!((v0 + v1 - 100.0).abs() < 1e-9);
            sum_v0 += v0;
            if (25.0..=75.0).contains(&v0) {
                mid += 1;
            }
        }
        // Dirichlet(3,4) first-component mean is 3/7.
        let mean = sum_v0 / n as f64;
        assert!((mean - 300.0 / 7.0).abs() < 0.3, "mean {mean}");
        // P(0.25 <= B <= 0.75) for B ~ Beta(3, 4), via the integer-shape
        // identity I_x(3, 4) = sum_{j=3}^{6} C(6, j) x^j (1 - x)^(6 - j).
        let cdf = |x: f64| -> f64 {
            let binom = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
            (3..=6)
                .map(|j| binom[j] * x.powi(j as i32) * (1.0 - x).powi(6 - j as i32))
                .sum()
        };
        let exact = cdf(0.75) - cdf(0.25);
        assert!((exact - 0.79296875).abs() < 1e-12);
        assert!((mid as f64 / n as f64 - exact).abs() < 0.005);
    }

    #[test]
    fn beta_moments() {
        let mut s = split_stream(15, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta(&mut s, 10.0, 10.0).unwrap()).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let (mean, var) = moments(&xs);
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!((var - 100.0 / 8400.0).abs() < 0.001, "var {var}");
        assert!(sample_beta(&mut s, 0.0, 1.0).is_err());
    }

    #[test]
    fn activation_noise_moments() {
        let mut s = split_stream(16, 0);
        assert_eq!(sample_activation_noise(&mut s, 0.0), 0.0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_activation_noise(&mut s, 0.25)).collect();
        let (mean, var) = moments(&xs);
        let expected = 0.25f64.powi(2) * std::f64::consts::PI.powi(2) / 3.0;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - expected).abs() < 0.01, "var {var}");
    }
}
