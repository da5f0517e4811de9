//! Data-parallel helpers. With the `parallel` feature, [`Exec::Parallel`]
//! runs on the rayon pool; without it every policy runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work items (grid nodes of one level, random trials,
/// initial times) are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Minimum items per rayon task for grid sweeps.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 64;

/// Fills `out[i] = f(i)`, stopping at the first error.
pub fn try_fill<T, E, F>(exec: Exec, out: &mut [T], f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return out
            .par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .enumerate()
            .try_for_each(|(i, slot)| {
                *slot = f(i)?;
                Ok(())
            });
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i)?;
    }
    Ok(())
}

/// Maps `f` over `0..n` keeping order; one item per task.
pub fn try_map<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Runs two closures, concurrently when allowed.
pub fn join<A, B, RA, RB>(exec: Exec, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::join(a, b);
    }
    let _ = exec;
    (a(), b())
}
