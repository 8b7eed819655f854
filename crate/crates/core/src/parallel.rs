//! Order-preserving map over a slice, on a dedicated rayon pool or sequentially.

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Executor {
    jobs: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// `jobs = 0` picks the number of available cores.
    pub fn new(jobs: usize) -> Result<Self> {
        let jobs = if jobs == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            jobs
        };
        #[cfg(feature = "parallel")]
        {
            let pool = if jobs > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(jobs)
                        .build()
                        .map_err(|e| Error::Io(format!("thread pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Executor { jobs, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = (jobs, Error::DivisionByZero);
            Ok(Executor { jobs: 1 })
        }
    }

    pub fn sequential() -> Self {
        Executor {
            jobs: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Worker count actually in use.
    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// `items.iter().map(f).collect()`, results in input order.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::sequential()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let expect: Vec<u64> = items.iter().map(|x| x * x).collect();
        for jobs in [1, 2, 4, 8] {
            let ex = Executor::new(jobs).unwrap();
            assert_eq!(ex.map(&items, |x| x * x), expect);
        }
        assert!(!Executor::sequential().is_parallel());
    }
}
