//! Seekable random stream for reproducible, shardable simulation.
//!
//! Every round consumes exactly [`WORDS_PER_ROUND`] 32-bit words of one
//! ChaCha8 keystream keyed by the seed, so the randomness of round `k` is a
//! pure function of `(seed, k)`. A shard seeks to its first round and reads
//! forward; how rounds are split across workers cannot change any draw.

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words drawn per round: one `u64` for the hidden angle, one for the setting.
pub const WORDS_PER_ROUND: u128 = 4;

/// The random inputs of one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundDraw {
    /// Uniform on `[-π, π)`.
    pub uniform_angle: f64,
    /// Raw 64 bits available for choosing a setting.
    pub choice: u64,
}

impl RoundDraw {
    /// One of four settings, uniformly, from the top two bits.
    pub fn setting_index(&self) -> usize {
        (self.choice >> 62) as usize
    }
}

/// Keystream positioned at a given round.
#[derive(Clone, Debug)]
pub struct RoundStream {
    rng: ChaCha8Rng,
}

impl RoundStream {
    /// Stream positioned at the start of round `round`.
    pub fn at(seed: u64, round: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(round as u128 * WORDS_PER_ROUND);
        Self { rng }
    }

    /// Draws the next round's inputs.
    pub fn next_round(&mut self) -> RoundDraw {
        let u: f64 = self.rng.gen();
        let choice = self.rng.next_u64();
        RoundDraw {
            uniform_angle: -PI + TAU * u,
            choice,
        }
    }
}
