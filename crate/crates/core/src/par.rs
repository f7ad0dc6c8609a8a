//! Order-preserving parallel map; sequential when the `parallel` feature is off.

#[cfg(feature = "parallel")]
pub(crate) fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    (0..count).map(f).collect()
}
