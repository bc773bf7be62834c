//! Seeded random streams. Every randomized operation draws from its own
//! ChaCha stream keyed by `(seed, tag)`, so adding a consumer never shifts
//! the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers, one per randomized operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    FeatureChoice = 1,
    SyntheticValues = 2,
    SyntheticSplit = 3,
    RandomLiterals = 4,
    ValuesOnly = 5,
    RelationalCover = 6,
    RelationalDrop = 7,
    Init = 8,
    Shuffle = 9,
    Dropout = 10,
    Negatives = 11,
    Fixture = 12,
}

pub fn stream(seed: u64, tag: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag as u64);
    rng
}
