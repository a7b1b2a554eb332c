//! Data-parallel map with a sequential fallback. Results keep input order,
//! so reductions over them are deterministic.

use crate::error::{Error, Result};

/// Map `f` over `items`, in parallel when `parallel` is set and the
/// `parallel` feature is enabled.
pub fn map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Fix the worker count of the global pool. Must run before any parallel
/// work; without the `parallel` feature it only accepts 1.
pub fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("thread count must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if n == 1 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("built without the parallel feature".into()))
        }
    }
}

/// Whether parallel execution is compiled in.
pub fn available() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_preserved() {
        let v: Vec<u64> = (0..1000).collect();
        let a = super::map(&v, true, |x| x * x);
        let b = super::map(&v, false, |x| x * x);
        assert_eq!(a, b);
    }
}
