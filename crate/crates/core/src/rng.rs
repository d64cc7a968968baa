//! Per-agent random substreams derived from the master seed.
//!
//! A stream is keyed by (seed, agent, tick, purpose) so draws do not depend
//! on the order in which agents are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dialogue::AgentId;

/// What a substream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Cues = 1,
    Drive = 2,
    Utterance = 3,
    Init = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of the stream key, independent of the master seed.
fn key_hash(agent: AgentId, tick: u64, purpose: Purpose) -> u64 {
    let h = splitmix64(u64::from(agent.0));
    let h = splitmix64(h ^ tick);
    splitmix64(h ^ purpose as u64)
}

pub fn stream(seed: u64, agent: AgentId, tick: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ key_hash(agent, tick, purpose))
}
