//! Data-parallel helpers. With the `parallel` feature the iterators come
//! from rayon; without it they fall back to the sequential std iterators.
//! Every caller collects into an ordered `Vec`, so results are identical
//! in both builds.

#[macro_export]
#[doc(hidden)]
macro_rules! par_iter {
    ($collection:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::IntoParallelRefIterator as _;
            $collection.par_iter()
        }
        #[cfg(not(feature = "parallel"))]
        {
            $collection.iter()
        }
    }};
}

#[macro_export]
#[doc(hidden)]
macro_rules! into_par_iter {
    ($collection:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::IntoParallelIterator as _;
            $collection.into_par_iter()
        }
        #[cfg(not(feature = "parallel"))]
        {
            $collection.into_iter()
        }
    }};
}

/// Configure the global worker pool. A no-op in sequential builds.
pub fn set_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            // A pool that is already initialised keeps its size.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
