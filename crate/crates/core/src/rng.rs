//! Seeded random streams and replica fan-out.
//!
//! Replica `i` of a run with seed `s` draws from the ChaCha8 stream seeded by
//! `s` with stream id `i`. Results are collected in replica order, so a
//! reduction over them does not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

/// The stream owned by replica `replica` of a run seeded with `seed`.
pub fn stream(seed: u64, replica: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Runs `f` once per replica on `workers` threads and returns results in
/// replica order. `workers <= 1` runs inline.
pub fn replicate<T, F>(samples: usize, seed: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, usize) -> T + Sync + Send,
{
    let run = |i: usize| {
        let mut rng = stream(seed, i as u64);
        f(&mut rng, i)
    };
    if workers <= 1 {
        return (0..samples).map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..samples).into_par_iter().map(run).collect()),
        Err(_) => (0..samples).map(run).collect(),
    }
}
