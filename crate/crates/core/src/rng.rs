//! Named, derivable random streams.
//!
//! Every random draw in the pipeline comes from a stream identified by a
//! top-level seed, a label and an index. Streams with different labels or
//! indices are statistically independent, and a stage can be rerun in
//! isolation without replaying the draws of any other stage.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Mixes a seed with a label and index into a new 64-bit seed.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(label)).wrapping_add(splitmix64(index)))
}

/// Opens the stream `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ fnv1a(label)));
    rng.set_stream(index);
    rng
}
