//! Bulk-map helpers with a data-parallel and a sequential build.
//!
//! With the `parallel` feature (on by default) these fan work out over the
//! rayon pool; compiled without it, the same entry points run sequentially.
//! Results are always collected in input order and each work item owns its
//! own rng, so both builds produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over owned items.
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Maps `f` over borrowed items.
pub fn map_ref<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
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

/// Maps a fallible `f` over borrowed items, stopping at the first error.
pub fn try_map_ref<'a, T, U, E, F>(items: &'a [T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&'a T) -> Result<U, E> + Sync + Send,
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

/// Caps worker parallelism for the process. Must be called before the first
/// parallel operation; later calls report an error from the pool builder.
/// A no-op in sequential builds.
pub fn set_max_threads(n: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_input_order() {
        let out = map((0..1000).collect::<Vec<u64>>(), |x| x * 2);
        assert_eq!(out, (0..1000).map(|x| x * 2).collect::<Vec<u64>>());
    }

    #[test]
    fn map_ref_preserves_input_order() {
        let items: Vec<String> = (0..100).map(|i| format!("item-{i}")).collect();
        let out = map_ref(&items, |s| s.len());
        let expected: Vec<usize> = items.iter().map(|s| s.len()).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn try_map_ref_propagates_errors() {
        let items = vec![1, 2, 3, 4];
        let ok: Result<Vec<i32>, String> = try_map_ref(&items, |&x| Ok(x + 1));
        assert_eq!(ok.unwrap(), vec![2, 3, 4, 5]);
        let err: Result<Vec<i32>, String> = try_map_ref(&items, |&x| {
            if x == 3 {
                Err("boom".to_string())
            } else {
                Ok(x)
            }
        });
        assert!(err.is_err());
    }
}
