//! Seeded ChaCha streams.
//!
//! Every consumer of randomness (each layer's init, batch shuffling, each
//! perturbation) gets its own stream of the same seed, so changing one
//! consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Well-known stream ids.
pub mod streams {
    /// Layer `i` initialises from `LAYER_BASE + i`.
    pub const LAYER_BASE: u64 = 1_000;
    pub const SHUFFLE: u64 = 1;
    pub const AUGMENT: u64 = 2;
    pub const PERTURB: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const TOY_DATA: u64 = 5;
}

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Full generator state as seven `u64` words: seed (4), stream, word position (lo, hi).
pub fn export_state(rng: &StreamRng) -> [u64; 7] {
    let seed = rng.get_seed();
    let mut out = [0u64; 7];
    for (i, chunk) in seed.chunks_exact(8).enumerate() {
        let mut b = [0u8; 8];
        b.copy_from_slice(chunk);
        out[i] = u64::from_le_bytes(b);
    }
    out[4] = rng.get_stream();
    let pos = rng.get_word_pos();
    out[5] = pos as u64;
    out[6] = (pos >> 64) as u64;
    out
}

pub fn import_state(words: &[u64; 7]) -> StreamRng {
    let mut seed = [0u8; 32];
    for (i, w) in words[..4].iter().enumerate() {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(words[4]);
    rng.set_word_pos(words[5] as u128 | ((words[6] as u128) << 64));
    rng
}
