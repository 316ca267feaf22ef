//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the `par_*` functions fan out over
//! the rayon pool; without it they alias the sequential versions. Both paths
//! produce identical output: work is split at fixed index boundaries and
//! randomness comes from substreams keyed by those indices, never by thread
//! identity or completion order.

use crate::rng::RngStream;

/// Elements per RNG substream in chunked random maps. Fixed so that results
/// are invariant to thread count.
pub const RNG_CHUNK: usize = 256;

/// Sequential indexed map; the reference semantics for `par_map_indexed`.
pub fn seq_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Indexed map over 0..n, parallel when the feature allows.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map_indexed(n, f)
}

/// Sequential chunked random map; the reference semantics for
/// `par_chunked_rng_map`.
pub fn seq_chunked_rng_map<F>(stream: &RngStream, n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut RngStream) -> f64,
{
    let mut out = Vec::with_capacity(n);
    for chunk_id in 0..n.div_ceil(RNG_CHUNK) {
        let mut rng = stream.substream(chunk_id as u64);
        let end = ((chunk_id + 1) * RNG_CHUNK).min(n);
        for i in chunk_id * RNG_CHUNK..end {
            out.push(f(i, &mut rng));
        }
    }
    out
}

/// Caps the global worker pool at `n` threads. Must be called before the
/// first parallel map; later calls fail. Without the `parallel` feature the
/// request is accepted and ignored because everything runs sequentially.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> crate::error::Result<()> {
    if n == 0 {
        return Err(crate::error::Error::Config(
            "thread count must be at least 1".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::error::Error::Config(format!("thread pool setup failed: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(n: usize) -> crate::error::Result<()> {
    if n == 0 {
        return Err(crate::error::Error::Config(
            "thread count must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Elementwise random map: element i is computed with the RNG substream of
/// its fixed-size chunk, so the result depends only on (stream, n, f).
#[cfg(feature = "parallel")]
pub fn par_chunked_rng_map<F>(stream: &RngStream, n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut RngStream) -> f64 + Sync,
{
    use rayon::prelude::*;
    let n_chunks = n.div_ceil(RNG_CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk_id| {
            let mut rng = stream.substream(chunk_id as u64);
            let end = ((chunk_id + 1) * RNG_CHUNK).min(n);
            (chunk_id * RNG_CHUNK..end).map(|i| f(i, &mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_chunked_rng_map<F>(stream: &RngStream, n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut RngStream) -> f64 + Sync,
{
    seq_chunked_rng_map(stream, n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_matches_sequential() {
        let a = par_map_indexed(1000, |i| i * i);
        let b = seq_map_indexed(1000, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn chunked_rng_map_is_schedule_invariant() {
        let stream = RngStream::new(77, 0);
        let f = |i: usize, rng: &mut RngStream| i as f64 + rng.uniform();
        let seq = seq_chunked_rng_map(&stream, 5000, f);
        let par = par_chunked_rng_map(&stream, 5000, f);
        assert_eq!(seq, par);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn chunked_rng_map_is_thread_count_invariant() {
        let stream = RngStream::new(78, 0);
        let f = |i: usize, rng: &mut RngStream| i as f64 * rng.uniform();
        let wide = par_chunked_rng_map(&stream, 4000, f);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let narrow = pool.install(|| par_chunked_rng_map(&stream, 4000, f));
        assert_eq!(wide, narrow);
    }

    #[test]
    fn chunk_boundaries_cover_exactly() {
        let stream = RngStream::new(79, 0);
        for n in [0, 1, RNG_CHUNK - 1, RNG_CHUNK, RNG_CHUNK + 1, 3 * RNG_CHUNK] {
            let out = par_chunked_rng_map(&stream, n, |i, _| i as f64);
            assert_eq!(out.len(), n);
            for (i, v) in out.iter().enumerate() {
                assert_eq!(*v, i as f64);
            }
        }
    }
}
