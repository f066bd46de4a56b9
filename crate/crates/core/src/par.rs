//! Data-parallel helpers. With the `parallel` feature (default) work is spread
//! over the rayon pool; without it the same calls run sequentially, which is
//! what the benches compare.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map`] over an index range.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// True when the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    #[test]
    fn preserves_order() {
        let v: Vec<usize> = (0..1000).collect();
        assert_eq!(super::map(&v, |x| x * 2), (0..1000).map(|x| x * 2).collect::<Vec<_>>());
        assert_eq!(super::map_range(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}
