//! Order-independent reductions.
//!
//! Splits are fixed by index, never by thread scheduling, so the result is
//! bit-identical for any rayon pool size.

const LEAF: usize = 1024;

/// Pairwise (cascade) sum of `f(i)` over `0..n`.
pub(crate) fn pairwise_sum<F>(n: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    sum_range(0, n, f)
}

fn sum_range<F>(lo: usize, hi: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let len = hi - lo;
    if len <= LEAF {
        return leaf_sum(lo, hi, f);
    }
    let mid = lo + len / 2;
    let (a, b) = rayon::join(|| sum_range(lo, mid, f), || sum_range(mid, hi, f));
    a + b
}

fn leaf_sum<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    match hi - lo {
        0 => 0.0,
        1 => f(lo),
        len if len <= 8 => (lo..hi).map(f).sum(),
        len => {
            let mid = lo + len / 2;
            leaf_sum(lo, mid, f) + leaf_sum(mid, hi, f)
        }
    }
}
