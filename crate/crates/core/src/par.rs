//! Tiny parallel/sequential switch for the exhaustive verifiers.
//!
//! The checkers iterate large product spaces (all composable triples, all
//! group elements times all objects, ...) looking for a counterexample.
//! With the `parallel` feature on, the search fans out over rayon; the
//! sequential path is kept callable either way so the two can be compared
//! in benches.

/// First counterexample produced by `f` over `0..n`, sequentially.
pub fn find_witness_seq<F>(n: usize, f: F) -> Option<String>
where
    F: Fn(usize) -> Option<String> + Sync,
{
    (0..n).find_map(f)
}

#[cfg(feature = "parallel")]
pub fn find_witness<F>(n: usize, f: F) -> Option<String>
where
    F: Fn(usize) -> Option<String> + Sync + Send,
{
    use rayon::prelude::*;
    // find_map_first keeps the reported witness deterministic.
    (0..n).into_par_iter().find_map_first(f)
}

#[cfg(not(feature = "parallel"))]
pub fn find_witness<F>(n: usize, f: F) -> Option<String>
where
    F: Fn(usize) -> Option<String> + Sync,
{
    find_witness_seq(n, f)
}

/// Map `0..n` and collect, in index order.
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    map_collect_seq(n, f)
}
