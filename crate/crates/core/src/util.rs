//! Index bookkeeping and the optional rayon fan-out.

/// Evaluate `f(i)` for `i in 0..n`, in parallel when the `parallel` feature
/// is on. Output order is always `0..n`.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `√(n choose k)`, zero outside `0 ≤ k ≤ n`.
pub(crate) fn sqrt_binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    binom(n, k).sqrt()
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round_if_small()
}

trait RoundSmall {
    fn round_if_small(self) -> Self;
}

impl RoundSmall for f64 {
    // Binomials below 2^53 are exact integers; the running product can drift
    // by an ulp.
    fn round_if_small(self) -> Self {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

/// Table `t[n] = √(n!)` for `n ≤ max`.
pub(crate) fn sqrt_factorials(max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(max + 1);
    let mut acc = 1.0_f64;
    t.push(1.0);
    for n in 1..=max {
        acc *= (n as f64).sqrt();
        t.push(acc);
    }
    t
}
