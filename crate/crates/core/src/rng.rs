//! Deterministic random-number plumbing shared by all simulators.
//!
//! Every randomized operation in this crate takes an explicit 64-bit master
//! seed. Operations that process work in chunks (Monte Carlo gate batches,
//! noise-synthesis blocks, photon classes) derive one independent
//! *substream* per chunk from the master seed and a fixed stream index:
//! identical seeds therefore give bit-identical results regardless of chunk
//! size, evaluation order or worker count, because no generator state is
//! ever shared across chunks.
//!
//! The generator is ChaCha with 8 rounds: cryptographically derived streams
//! (2^64 of them) are guaranteed independent, the implementation is stable
//! across platforms, and throughput is ample for the event counts simulated
//! here.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the deterministic generator for (`seed`, `stream`).
///
/// Streams with different indices are statistically independent; the same
/// pair always yields the same sequence.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_seed_and_stream_reproduce_bitwise() {
        let a: Vec<u64> = (0..32).map(|_| 0).collect::<Vec<_>>();
        let mut x = substream(42, 7);
        let mut y = substream(42, 7);
        let drawn_x: Vec<u64> = a.iter().map(|_| x.next_u64()).collect();
        let drawn_y: Vec<u64> = a.iter().map(|_| y.next_u64()).collect();
        assert_eq!(drawn_x, drawn_y);
    }

    #[test]
    fn different_streams_differ() {
        let mut x = substream(42, 0);
        let mut y = substream(42, 1);
        let same = (0..32).all(|_| x.next_u64() == y.next_u64());
        assert!(!same, "distinct streams must not coincide");
    }
}
