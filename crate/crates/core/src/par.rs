//! Data-parallel helpers with a sequential fallback when the `parallel`
//! feature is off or a caller asks for a sequential run.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when `parallel` is set and the feature is
/// enabled. Output order always matches input order.
pub(crate) fn map<T, R, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return items.into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.into_iter().map(f).collect()
}

pub(crate) fn available() -> bool {
    cfg!(feature = "parallel")
}

pub(crate) fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Like [`map`] with a dedicated pool when `threads` is given.
pub(crate) fn map_with_threads<T, R, F>(items: Vec<T>, threads: Option<usize>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(|| map(items, n > 1, f));
            }
        }
    }
    let _ = threads;
    map(items, true, f)
}
