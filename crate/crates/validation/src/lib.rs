//! Exact rational reference laws for checking the floating-point engine.
//!
//! Everything here is computed with arbitrary-precision rationals straight
//! from binomial coefficients, sharing no code with `pivotk-core`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `C(n, k)`, zero when `k > n`.
pub fn choose(n: u32, k: u32) -> BigRational {
    if k > n {
        return BigRational::zero();
    }
    let mut c = BigRational::one();
    for i in 0..k {
        c *= BigRational::new(BigInt::from(n - i), BigInt::from(i + 1));
    }
    c
}

/// `P[A = k]` for `k = 0..=draws` under `Hypergeom(population, successes, draws)`.
pub fn hypergeom_pmf(population: u32, successes: u32, draws: u32) -> Vec<BigRational> {
    let total = choose(population, draws);
    (0..=draws)
        .map(|k| {
            if k > successes || draws - k > population - successes {
                BigRational::zero()
            } else {
                choose(successes, k) * choose(population - successes, draws - k) / &total
            }
        })
        .collect()
}

/// Law of the sum of two independent variables on `0..`.
pub fn convolve(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Law of the sum of `t >= 1` independent copies.
pub fn convolve_power(law: &[BigRational], t: u32) -> Vec<BigRational> {
    assert!(t >= 1, "at least one copy");
    (1..t).fold(law.to_vec(), |acc, _| convolve(&acc, law))
}

/// `P[X > x]`, rounded to `f64` once at the end.
pub fn tail_gt(law: &[BigRational], x: usize) -> f64 {
    law.iter()
        .skip(x + 1)
        .fold(BigRational::zero(), |acc, p| acc + p)
        .to_f64()
        .unwrap()
}

/// `P[X >= r]`.
pub fn tail_ge(law: &[BigRational], r: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        tail_gt(law, r - 1)
    }
}
