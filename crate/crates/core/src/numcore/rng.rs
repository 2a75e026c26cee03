//! Splittable, counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Its output is a ChaCha8
//! keystream keyed by the seed and nonce'd by the stream id, so the n-th value
//! depends only on the identity and the position, never on what other streams
//! have done. Child streams are derived by hashing the parent id with a child
//! index; the parent's position is irrelevant to the child.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::from_seed(key_from_seed(seed));
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    /// Root stream for a master seed.
    pub fn root(seed: u64) -> Self {
        RngStream::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Independent child stream. Depends only on `(seed, stream_id, child_id)`.
    pub fn split(&self, child_id: u64) -> RngStream {
        let mixed = splitmix64(self.stream_id.rotate_left(23) ^ splitmix64(child_id ^ 0xA076_1D64_78BD_642F));
        RngStream::new(self.seed, mixed)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniformly random permutation of `0..n` (Fisher-Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `rng_split`: child stream of `parent` with the given id.
pub fn rng_split(parent: &RngStream, child_id: u64) -> RngStream {
    parent.split(child_id)
}

/// Fills a `rows x cols` matrix with i.i.d. N(0, 1) draws, row by row.
pub fn sample_standard_normal(stream: &mut RngStream, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| stream.standard_normal()).collect();
    Matrix::from_vec(rows, cols, data).expect("normal draws are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn same_identity_reproduces() {
        let p = RngStream::root(42);
        let mut a = rng_split(&p, 7);
        let mut b = rng_split(&p, 7);
        let xa: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn split_ignores_parent_position() {
        let mut p = RngStream::root(3);
        let before = p.split(5).next_u64();
        for _ in 0..17 {
            p.next_u64();
        }
        assert_eq!(before, p.split(5).next_u64());
    }

    #[test]
    fn split_of_split_is_order_independent() {
        let root = RngStream::root(11);
        let a1 = root.split(1).split(2).next_u64();
        let _ = root.split(2).split(1).next_u64();
        let mut tmp = root.split(9);
        tmp.next_u64();
        let a2 = root.split(1).split(2).next_u64();
        assert_eq!(a1, a2);
        assert_ne!(root.split(1).split(2).stream_id(), root.split(2).split(1).stream_id());
    }

    #[test]
    fn siblings_are_uncorrelated() {
        let root = RngStream::root(2024);
        let x = sample_standard_normal(&mut root.split(0), 1000, 1);
        let y = sample_standard_normal(&mut root.split(1), 1000, 1);
        let (mx, vx) = mean_var(x.as_slice());
        let (my, vy) = mean_var(y.as_slice());
        let cov = x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / 999.0;
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 0.1, "rho = {rho}");
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(99, 1);
        let x = sample_standard_normal(&mut s, 100_000, 1);
        let (m, v) = mean_var(x.as_slice());
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.02, "var {v}");
    }

    #[test]
    fn fixed_stream_is_bit_identical() {
        let a = sample_standard_normal(&mut RngStream::new(5, 5), 4, 3);
        let b = sample_standard_normal(&mut RngStream::new(5, 5), 4, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn disjoint_streams_pass_two_sample_mean_test() {
        // Welch z-test at alpha = 0.01 (two-sided critical value 2.5758).
        let root = RngStream::root(77);
        let x = sample_standard_normal(&mut root.split(10), 5000, 1);
        let y = sample_standard_normal(&mut root.split(11), 5000, 1);
        let (mx, vx) = mean_var(x.as_slice());
        let (my, vy) = mean_var(y.as_slice());
        let z = (mx - my) / (vx / 5000.0 + vy / 5000.0).sqrt();
        assert!(z.abs() < 2.5758, "z = {z}");
        assert_ne!(x, y);
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut s = RngStream::root(1);
        let mut p = s.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn counter_advances() {
        let mut s = RngStream::root(1);
        let c0 = s.counter();
        s.standard_normal();
        assert!(s.counter() > c0);
    }
}
