//! Seed derivation.
//!
//! Every random stream in the toolkit is derived from the single top-level
//! seed as `derive_seed(seed, tag, index)`:
//!
//! ```text
//! h0 = splitmix64(seed)
//! h1 = splitmix64(h0 ^ fnv1a64(tag))
//! h2 = splitmix64(h1 ^ index)
//! ```
//!
//! `tag` names the purpose (for example `"split"`, `"neg-train"`, `"embed"`)
//! and `index` is usually a relation index. Streams are ChaCha8 seeded from
//! `h2`, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TAG_SPLIT: &str = "split";
pub const TAG_NEG_TRAIN: &str = "neg-train";
pub const TAG_NEG_TEST: &str = "neg-test";
pub const TAG_EMBED: &str = "embed";
pub const TAG_CURVE: &str = "curve";
pub const TAG_CURVE_NEG: &str = "curve-neg";
pub const TAG_SYNTH: &str = "synth";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let h = splitmix64(seed);
    let h = splitmix64(h ^ fnv1a64(tag.as_bytes()));
    splitmix64(h ^ index)
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, tag: &str, index: u64) -> Rng {
    rng_from(derive_seed(seed, tag, index))
}
