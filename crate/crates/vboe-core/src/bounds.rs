//! Closed-form concentration bounds used by the security analysis, exact
//! big-integer tail oracles for validating them, and small estimator helpers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::vboe::{validate_params, ParamViolation, ProtocolParams};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("parameters out of range")]
    BadParams,
    #[error("tail direction inconsistent with k vs np")]
    DirectionMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid protocol parameters: {0:?}")]
    InvalidParams(Vec<ParamViolation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Tail {
    Lower,
    Upper,
}

/// Two-sided Hoeffding bound on a mean of `n` Bernoulli samples:
/// `2 exp(-2 eps^2 n)`.
// The negated comparison rejects NaN epsilon; `epsilon <= 0.0` would not.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn hoeffding_mean_bound(epsilon: f64, n: usize) -> Result<f64, BoundsError> {
    if !(epsilon > 0.0) || n < 1 {
        return Err(BoundsError::BadParams);
    }
    Ok(2.0 * libm::exp(-2.0 * epsilon * epsilon * n as f64))
}

/// One-sided Hoeffding bound for a Binomial(n, p) tail at threshold `k`:
/// `exp(-2 (np - k)^2 / n)`. Lower tail requires `k <= np`, upper `k >= np`.
pub fn binomial_tail_bound(n: usize, p: f64, k: f64, tail: Tail) -> Result<f64, BoundsError> {
    if n < 1 || !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::BadParams);
    }
    let np = n as f64 * p;
    match tail {
        Tail::Lower if k > np => return Err(BoundsError::DirectionMismatch),
        Tail::Upper if k < np => return Err(BoundsError::DirectionMismatch),
        _ => {}
    }
    let d = np - k;
    Ok(libm::exp(-2.0 * d * d / n as f64))
}

/// Serfling-style tail bound for a hypergeometric draw of `n` from `cap`
/// items of which `marked` are marked: `exp(-2 n (marked/cap - lambda/n)^2)`.
/// Lower tail requires `lambda/n <= marked/cap`, upper the reverse.
pub fn hypergeometric_tail_bound(
    cap: usize,
    marked: usize,
    n: usize,
    lambda: f64,
    tail: Tail,
) -> Result<f64, BoundsError> {
    if cap < 1 || marked > cap || n > cap || n < 1 {
        return Err(BoundsError::BadParams);
    }
    let mean_frac = marked as f64 / cap as f64;
    let frac = lambda / n as f64;
    match tail {
        Tail::Lower if frac > mean_frac => return Err(BoundsError::DirectionMismatch),
        Tail::Upper if frac < mean_frac => return Err(BoundsError::DirectionMismatch),
        _ => {}
    }
    let d = mean_frac - frac;
    Ok(libm::exp(-2.0 * n as f64 * d * d))
}

fn binomial_coefficient(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact hypergeometric PMF `C(K,k) C(N-K,n-k) / C(N,n)`; the only float
/// operation is the final division.
pub fn exact_hypergeometric_pmf(
    cap: usize,
    marked: usize,
    n: usize,
    k: usize,
) -> Result<f64, BoundsError> {
    if marked > cap || n > cap {
        return Err(BoundsError::BadParams);
    }
    if k > n || k > marked || n - k > cap - marked {
        return Ok(0.0);
    }
    let num = binomial_coefficient(marked, k) * binomial_coefficient(cap - marked, n - k);
    let r = BigRational::new(num, binomial_coefficient(cap, n));
    Ok(r.to_f64().expect("pmf fits in f64"))
}

/// Exact hypergeometric tail probability (inclusive threshold).
pub fn exact_hypergeometric_tail(
    cap: usize,
    marked: usize,
    n: usize,
    lambda: usize,
    tail: Tail,
) -> Result<f64, BoundsError> {
    if marked > cap || n > cap {
        return Err(BoundsError::BadParams);
    }
    let range: Vec<usize> = match tail {
        Tail::Lower => (0..=lambda.min(n)).collect(),
        Tail::Upper => (lambda..=n).collect(),
    };
    let mut acc = 0.0;
    for k in range {
        acc += exact_hypergeometric_pmf(cap, marked, n, k)?;
    }
    Ok(acc.min(1.0))
}

/// Exact Binomial(n, p_num/p_den) PMF as a vector over `k = 0..=n`. All
/// arithmetic is big-integer over the common denominator `p_den^n`; floats
/// appear only in the final divisions.
pub fn exact_binomial_pmf_table(
    n: usize,
    p_num: u64,
    p_den: u64,
) -> Result<Vec<f64>, BoundsError> {
    if p_den == 0 || p_num > p_den {
        return Err(BoundsError::BadParams);
    }
    let (pn, qn) = (BigInt::from(p_num), BigInt::from(p_den - p_num));
    let den = num_traits::pow(BigInt::from(p_den), n);
    let mut table = Vec::with_capacity(n + 1);
    // numerator_k = C(n,k) pn^k qn^(n-k), built incrementally.
    let mut num = num_traits::pow(qn.clone(), n);
    for k in 0..=n {
        table.push(
            BigRational::new(num.clone(), den.clone())
                .to_f64()
                .expect("pmf fits in f64"),
        );
        if k < n && !qn.is_zero() {
            num = num * BigInt::from(n - k) * &pn / (BigInt::from(k + 1) * &qn);
        } else if k < n {
            num = binomial_coefficient(n, k + 1) * num_traits::pow(pn.clone(), k + 1);
        }
    }
    Ok(table)
}

/// Exact binomial tail (inclusive threshold) with `p = p_num/p_den`.
pub fn exact_binomial_tail(
    n: usize,
    p_num: u64,
    p_den: u64,
    k: usize,
    tail: Tail,
) -> Result<f64, BoundsError> {
    let table = exact_binomial_pmf_table(n, p_num, p_den)?;
    let acc: f64 = match tail {
        Tail::Lower => table[..=k.min(n)].iter().sum(),
        Tail::Upper => table[k.min(n + 1).min(table.len() - 1)..].iter().sum(),
    };
    Ok(acc.min(1.0))
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exact hypergeometric tails for every threshold at once:
/// `lower[k] = Pr[X <= k]`, `upper[k] = Pr[X >= k]`. Valid for `cap <= 64`
/// (all integer sums fit in 128 bits); floats appear only in the final
/// divisions. This is the workhorse for exhaustive domination sweeps, where
/// re-deriving each tail from big-integer PMFs would be needlessly slow.
pub fn exact_hypergeometric_tail_table(
    cap: usize,
    marked: usize,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), BoundsError> {
    if cap > 64 || marked > cap || n > cap {
        return Err(BoundsError::BadParams);
    }
    let nums: Vec<u128> = (0..=n)
        .map(|k| {
            if k > marked || n - k > cap - marked {
                0
            } else {
                binomial_u128(marked, k) * binomial_u128(cap - marked, n - k)
            }
        })
        .collect();
    let den = binomial_u128(cap, n) as f64;
    let mut lower = Vec::with_capacity(n + 1);
    let mut acc: u128 = 0;
    for &x in &nums {
        acc += x;
        lower.push((acc as f64 / den).min(1.0));
    }
    let mut upper = alloc::vec![0.0; n + 1];
    let mut acc: u128 = 0;
    for k in (0..=n).rev() {
        acc += nums[k];
        upper[k] = (acc as f64 / den).min(1.0);
    }
    Ok((lower, upper))
}

/// Attack bookkeeping for one grouped deviation strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackTally {
    /// Attacked rounds in total.
    pub m: usize,
    /// Attacked computation rounds.
    pub z: usize,
    /// Attacked test rounds.
    pub x: usize,
    /// Failed test rounds.
    pub y: usize,
    /// Split threshold `(kw + gamma2/2)(N_c + N_t)`.
    pub m0: f64,
}

impl AttackTally {
    pub fn new(z: usize, x: usize, y: usize, params: &ProtocolParams) -> Result<Self, BoundsError> {
        let m = z + x;
        if y > x || m > params.n_c + params.n_t {
            return Err(BoundsError::BadParams);
        }
        let m0 = (params.k as f64 * params.w + params.gamma2 / 2.0)
            * (params.n_c + params.n_t) as f64;
        Ok(AttackTally { m, z, x, y, m0 })
    }
}

/// The four closed-form terms of the acceptance-despite-bias bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub gamma1_term: f64,
    pub bound_z_term: f64,
    pub bound_y_term_test: f64,
    pub bound_y_term_binom: f64,
    pub total: f64,
}

/// Bound on `Pr[Accept and |estimate - p| >= epsilon]` for any deviation.
///
/// The few-attacks branch maximizes
/// `exp(-2 N_c ((kw + gamma2) - m/(N_c+N_t))^2)` over `m <= m0`; the exponent
/// magnitude shrinks as `m` grows (the difference stays positive up to `m0`),
/// so the max sits at `m = m0` and we evaluate there.
pub fn security_failure_bound(params: &ProtocolParams) -> Result<BoundReport, BoundsError> {
    let violations = validate_params(params);
    if !violations.is_empty() {
        return Err(BoundsError::InvalidParams(violations));
    }
    let n_c = params.n_c as f64;
    let n_t = params.n_t as f64;
    let kw = params.k as f64 * params.w;
    let g1 = params.gamma1;
    let g2 = params.gamma2;

    let gamma1_term = (2.0 * libm::exp(-2.0 * g1 * g1 * n_c)).min(1.0);
    let m0_frac = kw + g2 / 2.0;
    let dz = (kw + g2) - m0_frac;
    let bound_z_term = libm::exp(-2.0 * n_c * dz * dz).min(1.0);
    let bound_y_term_test = libm::exp(-n_t * g2 * g2 / 2.0).min(1.0);
    let k2 = (params.k * params.k) as f64;
    let bound_y_term_binom =
        libm::exp(-(g2 * g2 / (8.0 * k2)) * n_c / (kw + g2 / 4.0)).min(1.0);
    let total =
        (gamma1_term + bound_z_term + bound_y_term_test + bound_y_term_binom).clamp(0.0, 1.0);
    Ok(BoundReport {
        gamma1_term,
        bound_z_term,
        bound_y_term_test,
        bound_y_term_binom,
        total,
    })
}

/// Mean of a bit sample.
pub fn empirical_average(bits: &[u8]) -> Result<f64, BoundsError> {
    if bits.is_empty() {
        return Err(BoundsError::EmptyInput);
    }
    let ones: usize = bits.iter().map(|b| usize::from(*b & 1)).sum();
    Ok(ones as f64 / bits.len() as f64)
}

/// Half L1 distance between the empirical distributions of two samples.
pub fn tvd_estimate<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, BoundsError> {
    if a.is_empty() || b.is_empty() {
        return Err(BoundsError::EmptyInput);
    }
    let mut counts: BTreeMap<T, (usize, usize)> = BTreeMap::new();
    for x in a {
        counts.entry(x.clone()).or_default().0 += 1;
    }
    for x in b {
        counts.entry(x.clone()).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut l1 = 0.0;
    for (_, (ca, cb)) in counts {
        l1 += (ca as f64 / na - cb as f64 / nb).abs();
    }
    Ok(l1 / 2.0)
}
