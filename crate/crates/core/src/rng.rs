//! Counter-based random streams.
//!
//! Every random quantity in a simulation is drawn from its own ChaCha8 stream.
//! The key is the master seed; the 64-bit stream id packs
//! `trial << 24 | node << 8 | purpose`, so a draw depends only on
//! (seed, trial, node, purpose) and never on execution order or thread count.
//! `node` is an AP index, a UE index, or [`CPU_NODE`] for slot-wide material.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Node id used for quantities shared by all APs (the DL waveform).
pub const CPU_NODE: u64 = 0xFFFF;

const TRIAL_LIMIT: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Waveform = 1,
    EchoPhase = 2,
    Noise = 3,
    SelfInterference = 4,
    CrossLink = 5,
    BeamJitter = 6,
    UlChannel = 7,
    UlSymbols = 8,
    UlNoise = 9,
}

pub fn stream_id(trial: u64, node: u64, purpose: Purpose) -> u64 {
    assert!(
        trial < TRIAL_LIMIT,
        "trial index {trial} exceeds stream budget"
    );
    assert!(node <= CPU_NODE, "node index {node} exceeds stream budget");
    (trial << 24) | (node << 8) | purpose as u64
}

pub fn stream(seed: u64, trial: u64, node: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(trial, node, purpose));
    rng
}
