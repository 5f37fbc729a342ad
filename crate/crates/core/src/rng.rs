//! Seeded, splittable random streams.
//!
//! Every replication draws from its own ChaCha8 stream, selected by the
//! master seed plus a (purpose, index) pair, so results do not depend on
//! worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purposes keep streams for different experiment stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Purpose {
    Sample = 1,
    Dyadic = 2,
    Calibration = 3,
    ModelSim = 4,
    PriceMap = 5,
    Bench = 6,
    Misc = 7,
    Growth = 8,
}

pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
