//! Counter-based random streams: every draw is addressed by `(seed, domain, index)`
//! so any timestep can be regenerated independently of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; distinct so noise, dither and sampling never share bits.
pub const DOMAIN_NOISE: u64 = 0x6e6f_6973_65;
pub const DOMAIN_DITHER: u64 = 0x6469_7468_6572;
pub const DOMAIN_PERTURB: u64 = 0x7065_7274;

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
