//! Per-site uniforms addressed by `(master_seed, replica_id, n, j)`.
//!
//! The key is derived from the master seed, the ChaCha stream id is the replica
//! id, and site `(j, n - j)` owns the two keystream words at position
//! `2 * (n (n + 1) / 2 + j)`. Any site's uniform can be recomputed in isolation,
//! so the value a site sees never depends on which other sites were simulated,
//! on the order of simulation, or on the thread that ran the replica.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Converts 64 random bits to a uniform on `[0, 1)` with 53-bit resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn site_word_pos(n: usize, j: usize) -> u128 {
    let n = n as u128;
    2 * (n * (n + 1) / 2 + j as u128)
}

/// Sequential reader over the site uniforms of one replica.
#[derive(Clone)]
pub struct SiteStream {
    rng: ChaCha8Rng,
}

impl SiteStream {
    pub fn new(master_seed: u64, replica_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replica_id);
        SiteStream { rng }
    }

    /// Positions the stream at site `j` of diagonal `n`.
    #[inline]
    pub fn seek(&mut self, n: usize, j: usize) {
        self.rng.set_word_pos(site_word_pos(n, j));
    }

    /// Uniform of the current site; advances to site `j + 1` of the same diagonal.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        unit_f64(self.rng.next_u64())
    }

    /// Uniform of one site, without disturbing any other reader.
    pub fn uniform_at(master_seed: u64, replica_id: u64, n: usize, j: usize) -> f64 {
        let mut s = SiteStream::new(master_seed, replica_id);
        s.seek(n, j);
        s.next_uniform()
    }
}

/// Plain per-replica stream for models that consume uniforms sequentially.
pub fn replica_rng(master_seed: u64, replica_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_id);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_read_matches_random_access() {
        let mut s = SiteStream::new(42, 7);
        for n in [0usize, 1, 5, 63, 64, 1000] {
            s.seek(n, 0);
            let row: Vec<f64> = (0..=n).map(|_| s.next_uniform()).collect();
            for (j, &u) in row.iter().enumerate().step_by(7) {
                assert_eq!(u, SiteStream::uniform_at(42, 7, n, j));
            }
        }
    }

    #[test]
    fn diagonals_do_not_overlap() {
        // last site of diagonal n and first of n + 1 are adjacent words, not the same
        let a = SiteStream::uniform_at(1, 0, 3, 3);
        let b = SiteStream::uniform_at(1, 0, 4, 0);
        assert_ne!(a, b);
        let mut s = SiteStream::new(1, 0);
        s.seek(3, 3);
        s.next_uniform();
        assert_eq!(s.next_uniform(), b);
    }

    #[test]
    fn replicas_and_seeds_differ() {
        let base = SiteStream::uniform_at(5, 0, 10, 3);
        assert_ne!(base, SiteStream::uniform_at(5, 1, 10, 3));
        assert_ne!(base, SiteStream::uniform_at(6, 0, 10, 3));
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn uniforms_look_uniform() {
        let mut s = SiteStream::new(9, 3);
        s.seek(0, 0);
        let n = 200_000;
        let mut bins = [0u32; 10];
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.next_uniform();
            sum += u;
            bins[(u * 10.0) as usize] += 1;
        }
        assert!((sum / n as f64 - 0.5).abs() < 3.0 * (1.0f64 / 12.0 / n as f64).sqrt() * 1.5);
        let expected = n as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
        // 9 degrees of freedom; 0.999 quantile is 27.9
        assert!(chi2 < 27.9, "chi2 = {chi2}");
    }
}
