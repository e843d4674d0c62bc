//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the indexed maps run on the rayon
//! pool; without it, or with [`Execution::Sequential`], they run in order.
//! Results are always collected in index order.

/// How to evaluate independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Number of worker threads this mode will use.
    pub fn threads(self) -> usize {
        match self {
            Execution::Sequential => 1,
            #[cfg(feature = "parallel")]
            Execution::Parallel => rayon::current_num_threads(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => 1,
        }
    }

    /// `(0..n).map(f).collect()`, possibly in parallel.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Configure the global rayon pool. No-op without the `parallel` feature.
pub fn set_thread_count(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().to_bits();
        assert_eq!(
            Execution::Sequential.map_indexed(1000, f),
            Execution::Parallel.map_indexed(1000, f)
        );
    }
}
