//! Order-preserving data-parallel map with a sequential fallback.
//!
//! All batch-level fan-out in this crate (sample generation, per-sample
//! gradients, frequency grids) goes through [`ordered_map`]. With the
//! `parallel` feature the closure runs on the rayon pool; without it the
//! same call runs sequentially. Because results are collected in input
//! order and reduced sequentially by the caller, the two paths are
//! bit-identical for any thread count — [`ordered_map_seq`] stays
//! available in every build so tests and benches can check exactly that.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, returning results in input order.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential twin of [`ordered_map`].
pub fn ordered_map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
