//! Deterministic replicate-level parallelism.
//!
//! Replicate r always draws from rng stream r of the master seed, and
//! results are merged by replicate index, so output never depends on the
//! worker count. Workers take statically strided index sets; there is no
//! work stealing.

use crate::rng::RngFactory;
use rand_chacha::ChaCha8Rng;

/// Number of workers: the `ALPHATHETA_WORKERS` environment variable if set,
/// otherwise the available parallelism.
pub fn default_workers() -> usize {
    if let Ok(v) = std::env::var("ALPHATHETA_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run `reps` replicates of `f` over `workers` threads; replicate r uses
/// stream `stream_base + r`. The result vector is ordered by replicate.
pub fn run_replicates<T, F>(
    reps: u64,
    workers: usize,
    factory: &RngFactory,
    stream_base: u64,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    let workers = workers.max(1).min(reps.max(1) as usize);
    let mut slots: Vec<Option<T>> = (0..reps).map(|_| None).collect();
    if workers <= 1 {
        for (r, slot) in slots.iter_mut().enumerate() {
            let mut rng = factory.stream(stream_base + r as u64);
            *slot = Some(f(r as u64, &mut rng));
        }
    } else {
        let chunks = split_strided(&mut slots, workers);
        std::thread::scope(|scope| {
            for (w, chunk) in chunks.into_iter().enumerate() {
                let f = &f;
                scope.spawn(move || {
                    for (i, slot) in chunk {
                        let r = i as u64;
                        let _ = w;
                        let mut rng = factory.stream(stream_base + r);
                        *slot = Some(f(r, &mut rng));
                    }
                });
            }
        });
    }
    slots
        .into_iter()
        .map(|s| s.expect("replicate ran"))
        .collect()
}

/// Partition mutable slot references into strided per-worker chunks.
fn split_strided<T>(slots: &mut [Option<T>], workers: usize) -> Vec<Vec<(usize, &mut Option<T>)>> {
    let mut chunks: Vec<Vec<(usize, &mut Option<T>)>> = (0..workers).map(|_| Vec::new()).collect();
    for (i, slot) in slots.iter_mut().enumerate() {
        chunks[i % workers].push((i, slot));
    }
    chunks
}
