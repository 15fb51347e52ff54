//! Execution policy for sample sweeps and grid updates.
//!
//! Every sweep in the crate goes through [`map_indexed`] so that the same
//! code path runs sequentially or on the rayon pool. Results are always
//! collected in index order, which keeps reductions bit-reproducible.
//! Without the `parallel` feature, [`Exec::Parallel`] falls back to the
//! sequential loop.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this policy actually runs on worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<U, F>(exec: Exec, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Maps `f` over a slice, returning results in order.
pub fn map_slice<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_indexed(exec, items.len(), |i| f(&items[i]))
}

/// Writes `f(i)` into `out[i]` for every index.
pub fn fill<U, F>(exec: Exec, out: &mut [U], f: F)
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let seq = map_indexed(Exec::Sequential, 1000, |i| (i as f64).sqrt().sin());
        let par = map_indexed(Exec::Parallel, 1000, |i| (i as f64).sqrt().sin());
        assert_eq!(seq, par);
        let mut buf = vec![0.0; 257];
        fill(Exec::Parallel, &mut buf, |i| i as f64 * 0.5);
        assert_eq!(buf[256], 128.0);
    }
}
