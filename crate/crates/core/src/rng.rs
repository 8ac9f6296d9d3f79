//! Keyed random substreams.
//!
//! Every random draw in a run comes from a stream derived from the root
//! seed plus a key naming its purpose and owner. Results therefore do not
//! depend on the order in which vehicles or links are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scenario = 1,
    InitialReservation = 2,
    Shadowing = 3,
    Reselection = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, purpose: Purpose, a: u64, b: u64, window: u64) -> SimRng {
        let mut h = splitmix64(self.seed);
        for word in [purpose as u64, a, b, window] {
            h = splitmix64(h ^ word);
        }
        SimRng::seed_from_u64(h)
    }
}
