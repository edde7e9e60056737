//! Counter-based random streams.
//!
//! Every simulation run `r` draws from its own ChaCha8 stream positioned at
//! a word offset derived from `r`, keyed by the master seed and
//! `stream_id`. A run's numbers therefore depend only on
//! `(master_seed, stream_id, r)`, never on which worker executes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Runs folded sequentially inside one parallel task.
pub const CHUNK_RUNS: u64 = 4096;

/// 2^24 32-bit words reserved per run.
const RUN_WORD_SHIFT: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngContract {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngContract {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngContract {
            master_seed,
            stream_id,
        }
    }

    /// Generator for run `run`.
    pub fn run_rng(&self, run: u64) -> ChaCha8Rng {
        let mut rng = self.base_rng();
        rng.set_word_pos((run as u128) << RUN_WORD_SHIFT);
        rng
    }

    fn base_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Folds `n_runs` runs in fixed-size chunks on the rayon pool, then
    /// merges chunk results left to right. The chunking is independent of
    /// the worker count, so the result is bit-identical for any pool size.
    pub fn fold_runs<A, I, S, M>(&self, n_runs: u64, init: I, step: S, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        S: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
        M: Fn(A, A) -> A,
    {
        let chunks = n_runs.div_ceil(CHUNK_RUNS);
        let partials: Vec<A> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let base = self.base_rng();
                let start = c * CHUNK_RUNS;
                let end = (start + CHUNK_RUNS).min(n_runs);
                for run in start..end {
                    // same stream as run_rng(run), without re-keying
                    let mut rng = base.clone();
                    rng.set_word_pos((run as u128) << RUN_WORD_SHIFT);
                    step(&mut acc, run, &mut rng);
                }
                acc
            })
            .collect();
        partials.into_iter().fold(init(), merge)
    }
}
