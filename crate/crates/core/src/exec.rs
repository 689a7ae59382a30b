//! Node-wise evaluation with an optional rayon backend.
//!
//! Every kernel in the crate is a pure map over grid nodes followed by an
//! ordered reduction, so the parallel and sequential paths produce identical
//! bits.

/// How node-wise maps are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Small grids are not worth the scheduling overhead.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 2048;

/// Evaluates `f(i)` for `i in 0..len` and collects the results in index order.
pub fn map_nodes<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel if len >= PAR_THRESHOLD => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Fills `out[i] = f(i)` in place.
pub fn fill_nodes<T, F>(exec: Exec, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel if out.len() >= PAR_THRESHOLD => {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        }
        _ => {
            for (i, o) in out.iter_mut().enumerate() {
                *o = f(i);
            }
        }
    }
}
