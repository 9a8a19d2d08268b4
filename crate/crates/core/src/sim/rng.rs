//! Reproducible random streams keyed by `(study seed, replication, stream)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Replication index reserved for draws shared by a whole study.
pub const STUDY_LEVEL: u64 = u64::MAX;

pub mod streams {
    pub const PARAMETERS: u64 = 0;
    pub const DATA: u64 = 1;
    pub const FOLDS: u64 = 2;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, rep, stream)` triple. The key is
/// derived from `seed` and `rep`; `stream` selects a ChaCha stream.
pub fn stream_rng(seed: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(rep.rotate_left(32) ^ 0x5851_f42d_4c95_7f2d);
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// A derived 64-bit seed, used to seed fold assignment and learner CV.
pub fn derived_seed(seed: u64, rep: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(rep)) ^ stream)
}
