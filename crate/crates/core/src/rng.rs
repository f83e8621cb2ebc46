//! Deterministic random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream keyed by the
//! run seed, a domain tag and an entity key (drop index, UE id, link), so
//! results do not depend on evaluation order or worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Streams in different domains never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Campaign,
    UePlacement,
    UeAttributes,
    Link,
    SiteShadow,
    Activity,
    Trajectory,
}

impl Domain {
    fn salt(self) -> u64 {
        match self {
            Domain::Campaign => 0x9e37_79b9_7f4a_7c15,
            Domain::UePlacement => 0xbf58_476d_1ce4_e5b9,
            Domain::UeAttributes => 0x94d0_49bb_1331_11eb,
            Domain::Link => 0x2545_f491_4f6c_dd1d,
            Domain::SiteShadow => 0x6a09_e667_f3bc_c909,
            Domain::Activity => 0xbb67_ae85_84ca_a73b,
            Domain::Trajectory => 0x3c6e_f372_fe94_f82b,
        }
    }
}

pub fn stream(seed: u64, domain: Domain, key: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.salt());
    rng.set_stream(key);
    rng
}

/// Key for a (UE, cell) pair.
pub fn pair_key(ue: u32, other: u32) -> u64 {
    (u64::from(ue) << 32) | u64::from(other)
}

/// Seed of the `index`-th drop of a campaign. Independent of the sweep point,
/// so every setting in a sweep sees the same drops.
pub fn drop_seed(master: u64, index: u64) -> u64 {
    stream(master, Domain::Campaign, index).next_u64()
}
