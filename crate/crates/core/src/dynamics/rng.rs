use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8";

/// A reproducible random stream: ChaCha8 keyed by a 64-bit seed, with one of
/// 2^64 independent streams selected per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Stream for trajectory `trajectory` of sweep point `point`.
    pub fn for_task(seed: u64, point: u32, trajectory: u32) -> Self {
        RngStream {
            seed,
            stream: ((point as u64) << 32) | trajectory as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Generator positioned at `word_pos` 32-bit words into the stream.
    pub fn rng_at(&self, word_pos: u128) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_word_pos(word_pos);
        rng
    }
}
