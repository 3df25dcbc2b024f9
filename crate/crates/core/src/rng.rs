//! Named, independent random streams derived from one replication seed.
//!
//! Every stream is a ChaCha8 generator keyed by the replication seed with a
//! distinct 64-bit stream id, so adding or removing draws on one stream never
//! shifts another. Per-UE streams keep common random numbers aligned across
//! configuration sweeps that share seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    TrafficOffset,
    DownlinkDecision,
    UplinkChannel,
    DownlinkChannel,
    Corpus,
    FoldSplit,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::TrafficOffset => 1,
            StreamKind::DownlinkDecision => 2,
            StreamKind::UplinkChannel => 3,
            StreamKind::DownlinkChannel => 4,
            StreamKind::Corpus => 5,
            StreamKind::FoldSplit => 6,
        }
    }
}

/// Generator for stream `kind`, sub-stream `index`, under root `seed`.
pub fn stream(seed: u64, kind: StreamKind, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind.tag() << 32) | u64::from(index));
    rng
}
