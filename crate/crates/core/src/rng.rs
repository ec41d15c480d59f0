//! Counter-addressed random streams.
//!
//! Every random object in the crate is drawn from a ChaCha8 stream whose key
//! is the master seed plus a domain tag, and whose 64-bit stream id packs the
//! column index `k` and the partition index `tau`. Any `(seed, domain, k, tau)`
//! can therefore be regenerated on its own, in any order, on any thread.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for. Distinct domains never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    GroundTruth = 0x6774_7275_7468,
    Sensing = 0x0073_656e_7369_6e67,
    Noise = 0x006e_6f69_7365,
}

/// Independent stream for `(master_seed, domain, k, tau)`.
///
/// Panics if `k` or `tau` does not fit in 32 bits.
pub fn stream(master_seed: u64, domain: Domain, k: usize, tau: usize) -> Stream {
    assert!(
        k <= u32::MAX as usize && tau <= u32::MAX as usize,
        "stream index overflow"
    );
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((k as u64) << 32) | tau as u64);
    rng
}
