//! Sample-parallel evaluation. Results come back in sample order, so reductions
//! are independent of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn map_samples<T, F>(samples: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..samples).into_par_iter().map(f).collect()
}

/// Run `f` on a dedicated pool with `workers` threads (the global pool when `None`).
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("worker count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = with_workers(Some(3), || map_samples(100, |k| k * k)).unwrap();
        let b = map_samples(100, |k| k * k);
        assert_eq!(a, b);
        assert!(with_workers(Some(0), || 1).is_err());
    }
}
