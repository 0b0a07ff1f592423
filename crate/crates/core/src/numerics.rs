//! Log-space combinatorics.
//!
//! Everything is computed in natural logarithms through `lgamma`; callers
//! convert to bits with [`to_bits`]. Small factorials come from a lazily
//! built table so that repeated evaluation of the same counts is exact and
//! cheap.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

const TABLE_LEN: usize = 1 << 16;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..TABLE_LEN).map(|n| libm::lgamma(n as f64 + 1.0)).collect())
}

/// `ln(n!)`.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        table()[n as usize]
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `ln(x! / (x - k)!)`, the log of the falling factorial `x (x-1) ... (x-k+1)`.
///
/// Returns `-inf` when `k > x`.
pub fn ln_falling_factorial(x: u64, k: u64) -> f64 {
    if k > x {
        return f64::NEG_INFINITY;
    }
    if k == 0 {
        return 0.0;
    }
    // short products are summed directly; lgamma differences of large
    // arguments lose absolute precision
    if k <= 32 && x >= TABLE_LEN as u64 {
        return (0..k).map(|i| ((x - i) as f64).ln()).sum();
    }
    ln_factorial(x) - ln_factorial(x - k)
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    ln_falling_factorial(n, k) - ln_factorial(k)
}

/// `ln` of the number of weak compositions of `m` into `n` parts,
/// `C(n + m - 1, m)`. Zero parts admit only the empty composition of zero.
pub fn ln_multiset(n: u64, m: u64) -> f64 {
    if n == 0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial(n + m - 1, m)
}

#[inline]
pub fn to_bits(nats: f64) -> f64 {
    nats / LN_2
}

#[inline]
pub fn to_nats(bits: f64) -> f64 {
    bits * LN_2
}

/// Numerically stable `ln(Σ exp(x_i))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
