//! Seed splitting.
//!
//! Every random quantity derives from one `u64` seed. A replicate `r` of a
//! computation uses seed `seed + r`, and independent consumers inside one
//! replicate draw from separate ChaCha streams identified by a stream id.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream ids used across the crate.
pub mod streams {
    pub const COVARIATES: u64 = 1;
    pub const EVENT_TIMES: u64 = 2;
    pub const CENSORING: u64 = 3;
    pub const DIRECTIONS: u64 = 4;
    pub const CONE: u64 = 5;
    pub const STARTS: u64 = 6;
    pub const INSTANCES: u64 = 7;
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for replicate `replicate` of `stream`.
pub fn replicate_rng(seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    stream_rng(seed.wrapping_add(replicate), stream)
}
