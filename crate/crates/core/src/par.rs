//! Indexed fan-out over independent Monte Carlo streams.
//!
//! Results always come back ordered by stream index, and every reduction
//! downstream walks that vector sequentially, so a run produces the same
//! bits whether it used one thread or many.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator for Monte Carlo stream `stream` under `master_seed`:
/// ChaCha8 keyed by the master seed, on its own 64-bit stream id. No
/// generator is ever shared between streams.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Worker-thread policy for Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    /// Rayon's global pool (all cores).
    #[default]
    Auto,
    /// A dedicated pool of this many threads; `Fixed(1)` runs inline.
    Fixed(usize),
}

impl Threads {
    pub fn from_option(threads: Option<usize>) -> Self {
        match threads {
            None | Some(0) => Threads::Auto,
            Some(n) => Threads::Fixed(n),
        }
    }
}

/// Evaluate `f(0..n)` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, threads: Threads, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match threads {
            Threads::Fixed(1) => (0..n).map(f).collect(),
            Threads::Auto => (0..n).into_par_iter().map(f).collect(),
            Threads::Fixed(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(_) => (0..n).map(f).collect(),
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        (0..n).map(f).collect()
    }
}
