//! Named random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Env = 0,
    Policy = 1,
    Batch = 2,
    Ga = 3,
    Rollout = 4,
    Init = 5,
}

impl Stream {
    pub const ALL: [Stream; 6] = [
        Stream::Env,
        Stream::Policy,
        Stream::Batch,
        Stream::Ga,
        Stream::Rollout,
        Stream::Init,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Env => "env",
            Stream::Policy => "policy",
            Stream::Batch => "batch",
            Stream::Ga => "ga",
            Stream::Rollout => "rollout",
            Stream::Init => "init",
        }
    }
}

const WORKER_STRIDE: u64 = 100;

/// Stream `stream` of `worker` under `master`. Worker 0 owns the serial streams.
pub fn stream_rng(master: u64, stream: Stream, worker: usize) -> Rng {
    let mut rng = Rng::seed_from_u64(master);
    rng.set_stream(stream as u64 + WORKER_STRIDE * worker as u64);
    rng
}

pub const STATE_WORDS: usize = 7;

#[derive(Debug, Error, PartialEq)]
#[error("rng state must have {STATE_WORDS} words, got {0}")]
pub struct StateLengthError(pub usize);

/// Seed, stream id and word position packed into seven words.
pub fn export_state(rng: &Rng) -> [u64; STATE_WORDS] {
    let seed = rng.get_seed();
    let mut out = [0u64; STATE_WORDS];
    for (i, chunk) in seed.chunks_exact(8).enumerate() {
        out[i] = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    out[4] = rng.get_stream();
    let pos = rng.get_word_pos();
    out[5] = pos as u64;
    out[6] = (pos >> 64) as u64;
    out
}

pub fn import_state(words: &[u64]) -> Result<Rng, StateLengthError> {
    if words.len() != STATE_WORDS {
        return Err(StateLengthError(words.len()));
    }
    let mut seed = [0u8; 32];
    for i in 0..4 {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&words[i].to_le_bytes());
    }
    let mut rng = Rng::from_seed(seed);
    rng.set_stream(words[4]);
    rng.set_word_pos(words[5] as u128 | ((words[6] as u128) << 64));
    Ok(rng)
}
