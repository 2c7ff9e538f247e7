//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) work is spread over the rayon
//! pool; without it every [`Execution`] runs sequentially. Results are always
//! returned in input order, so callers see identical output either way.

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
    /// The mode that will actually run given the compiled features.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Applies `f` to every index in `0..n` and concatenates the results in
/// index order.
pub fn flat_map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().flat_map_iter(f).collect()
        }
        _ => (0..n).flat_map(f).collect(),
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_slice<I, T, F>(items: &[I], exec: Execution, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (0..i % 4).map(|k| i * 10 + k).collect::<Vec<_>>();
        assert_eq!(flat_map_indices(500, Execution::Sequential, f), flat_map_indices(500, Execution::Parallel, f));
        let items: Vec<u32> = (0..300).collect();
        assert_eq!(map_slice(&items, Execution::Parallel, |x| x * 2), map_slice(&items, Execution::Sequential, |x| x * 2));
    }
}
