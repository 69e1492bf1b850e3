//! The discrete Sugeno integral and the threshold classifier built on it.
//!
//! Three evaluators are provided: the sorted-chain form (the one used in
//! production), the disjunctive normal form over all subsets, and the median
//! form. They agree exactly on the same inputs.

use crate::capacity::{Capacity, SubsetMask};
use crate::error::{Error, Result};

/// Default cap on `m` for the `2^m`-term normal form.
pub const DNF_MAX_M: usize = 20;

/// Ascending sort of a utility vector together with its nested chain
/// `A_j = {order[j], ..., order[m-1]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortChain {
    pub order: Vec<usize>,
    pub sets: Vec<SubsetMask>,
}

impl SortChain {
    /// Ties are broken by ascending feature index.
    pub fn new(u: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..u.len()).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        let mut sets = vec![SubsetMask::EMPTY; u.len()];
        let mut set = SubsetMask::EMPTY;
        for j in (0..u.len()).rev() {
            set = set.with(order[j]);
            sets[j] = set;
        }
        SortChain { order, sets }
    }
}

pub(crate) fn check_utilities(mu: &Capacity, u: &[f64]) -> Result<()> {
    if u.len() != mu.m() {
        return Err(Error::LengthMismatch {
            expected: mu.m(),
            got: u.len(),
        });
    }
    if let Some(bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("utility {bad} is outside [0, 1]")));
    }
    Ok(())
}

/// `max_j min(u_(j), mu(A_(j)))` over the ascending sort of `u`.
pub fn sugeno_sorted(mu: &Capacity, u: &[f64]) -> Result<f64> {
    check_utilities(mu, u)?;
    Ok(sorted_unchecked(mu, u))
}

pub(crate) fn sorted_unchecked(mu: &Capacity, u: &[f64]) -> f64 {
    let chain = SortChain::new(u);
    let caps = mu.chain_values(&chain.order);
    chain
        .order
        .iter()
        .zip(&caps)
        .map(|(&i, &c)| u[i].min(c))
        .fold(0.0, f64::max)
}

/// `max over A ⊆ [m]` of `min(min_{j in A} u_j, mu(A))`. Enumerates all
/// `2^m` subsets, so it is meant as a reference evaluator.
pub fn sugeno_dnf(mu: &Capacity, u: &[f64]) -> Result<f64> {
    sugeno_dnf_capped(mu, u, DNF_MAX_M)
}

pub fn sugeno_dnf_capped(mu: &Capacity, u: &[f64], max_m: usize) -> Result<f64> {
    check_utilities(mu, u)?;
    if mu.m() > max_m {
        return Err(Error::invalid(format!(
            "normal form enumeration limited to m <= {max_m}, got {}",
            mu.m()
        )));
    }
    let m = mu.m();
    // the empty set contributes mu(∅) = 0
    let mut best = 0.0f64;
    let mut min_u = vec![1.0f64; 1 << m];
    for bits in 1..(1u32 << m) {
        let a = SubsetMask(bits);
        let low = a.0.trailing_zeros() as usize;
        let rest = a.without(low).0 as usize;
        min_u[bits as usize] = min_u[rest].min(u[low]);
        best = best.max(min_u[bits as usize].min(mu.eval_in_range(a)));
    }
    Ok(best)
}

/// Median of `u_1..u_m` and the chain capacities `mu(A_(2))..mu(A_(m))`,
/// capped at `mu([m])`. The cap is inactive for normalized capacities, where
/// this is the textbook median form.
pub fn sugeno_median(mu: &Capacity, u: &[f64]) -> Result<f64> {
    check_utilities(mu, u)?;
    let m = u.len();
    let chain = SortChain::new(u);
    let caps = mu.chain_values(&chain.order);
    let mut vals: Vec<f64> = u.iter().copied().chain(caps[1..].iter().copied()).collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals[m - 1].min(caps[0]))
}

/// Threshold rule `S_mu(u) >= beta`.
pub fn threshold_classify(mu: &Capacity, beta: f64, u: &[f64]) -> Result<bool> {
    Ok(sugeno_sorted(mu, u)? >= beta)
}

/// Normal-form classifier: positive iff every utility on some boundary set
/// reaches `beta`.
pub fn classify_dnf(mu: &Capacity, beta: f64, u: &[f64]) -> Result<bool> {
    check_utilities(mu, u)?;
    if beta <= 0.0 {
        return Ok(true);
    }
    Ok(mu
        .boundary_sets(beta)
        .iter()
        .any(|a| a.indices().all(|j| u[j] >= beta)))
}
