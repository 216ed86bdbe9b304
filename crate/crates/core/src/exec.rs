//! Data-parallel map with a sequential fallback.
//!
//! The parallel path preserves item order and all reductions downstream of
//! it run in fixed index order, so results are bitwise identical to the
//! sequential build regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map, always sequential. Kept unconditionally compiled so
/// benchmarks can compare both paths in one build.
pub fn ordered_map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Order-preserving parallel map.
#[cfg(feature = "parallel")]
pub fn ordered_map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving map on the default path for this build.
pub fn ordered_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        ordered_map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        ordered_map_seq(items, &f)
    }
}

/// Fallible map. Items are evaluated on the default path; errors are then
/// selected in item order, so the reported error does not depend on timing.
pub fn try_ordered_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    ordered_map(items, f).into_iter().collect()
}
