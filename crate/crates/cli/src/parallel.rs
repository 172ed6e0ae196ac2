//! Fan-out of sampled checks over worker threads.
//!
//! Samples are indexed and independent, so the index range is split into
//! contiguous windows, each worker checks its window, and the partial
//! reports merge into exactly the report a single-threaded run produces.

use sgk_core::certify::{CheckReport, SampleSpace};

pub fn run_check<E: Send>(
    space: &SampleSpace,
    workers: usize,
    f: impl Fn(&SampleSpace) -> Result<CheckReport, E> + Sync,
) -> Result<CheckReport, E> {
    let n = space.len();
    if workers <= 1 || n < 64 {
        return f(space);
    }
    let chunk = n.div_ceil(workers);
    let mut results: Vec<Result<CheckReport, E>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let start = w * chunk;
            if start >= n {
                break;
            }
            let sub = space.slice(start, chunk.min(n - start));
            let f = &f;
            handles.push(scope.spawn(move || f(&sub)));
        }
        for h in handles {
            results.push(h.join().expect("check worker panicked"));
        }
    });
    let mut merged: Option<CheckReport> = None;
    for r in results {
        let rep = r?;
        merged = Some(match merged {
            None => rep,
            Some(acc) => acc.merge(rep),
        });
    }
    Ok(merged.expect("at least one window"))
}

pub fn worker_count(flag: Option<usize>) -> usize {
    if let Some(n) = flag {
        return n.max(1);
    }
    if let Ok(env) = std::env::var("SGK_WORKERS") {
        if let Ok(n) = env.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
