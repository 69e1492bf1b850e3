//! Seeded generators for capacities and planted datasets, used by tests,
//! the acceptance suite and the CLI demos.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::capacity::{Capacity, SubsetMask};
use crate::error::Result;

/// Monotone capacity of order `k`: uniform draws lifted by running maxima over
/// one-element-smaller subsets. With `normalized`, the value on `[m]` is 1
/// (only meaningful when `k == m`).
pub fn monotone_capacity<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    k: usize,
    normalized: bool,
) -> Result<Capacity> {
    let mut raw = vec![0.0f64; 1 << m];
    let full = SubsetMask::full(m);
    for bits in 1..(1u32 << m) {
        let a = SubsetMask(bits);
        if a.len() > k {
            continue;
        }
        let below = a
            .indices()
            .map(|i| raw[a.without(i).0 as usize])
            .fold(0.0, f64::max);
        let draw: f64 = rng.gen();
        raw[bits as usize] = if normalized && a == full {
            1.0
        } else {
            below.max(draw)
        };
    }
    Capacity::from_fn(m, k, |a| raw[a.0 as usize])
}

/// Like [`monotone_capacity`] but with values drawn from a coarse grid
/// `{0, 1/levels, ..., 1}` so that ties and exact maxitivity occur often.
pub fn grid_capacity<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    levels: u32,
    normalized: bool,
) -> Result<Capacity> {
    let mut raw = vec![0.0f64; 1 << m];
    let full = SubsetMask::full(m);
    for bits in 1..(1u32 << m) {
        let a = SubsetMask(bits);
        let below = a
            .indices()
            .map(|i| raw[a.without(i).0 as usize])
            .fold(0.0, f64::max);
        let draw = f64::from(rng.gen_range(0..=levels)) / f64::from(levels);
        raw[bits as usize] = if normalized && a == full {
            1.0
        } else {
            below.max(draw)
        };
    }
    Capacity::from_fn(m, m, |a| raw[a.0 as usize])
}

/// Random antichain of rules with sizes in `1..=max_size`.
pub fn rule_antichain<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n_rules: usize,
    max_size: usize,
) -> Vec<SubsetMask> {
    let mut rules: Vec<SubsetMask> = Vec::new();
    let mut attempts = 0;
    while rules.len() < n_rules && attempts < 1000 {
        attempts += 1;
        let size = rng.gen_range(1..=max_size.min(m));
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(rng);
        let r = SubsetMask::from_indices(idx[..size].iter().copied());
        if rules
            .iter()
            .all(|o| !o.is_subset_of(r) && !r.is_subset_of(*o))
        {
            rules.push(r);
        }
    }
    rules.sort_by_key(|r| (r.len(), r.0));
    rules
}

/// Utility vector with entries uniform in `[0, 1]`.
pub fn utilities<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen()).collect()
}

/// Noiseless data labelled by a rule capacity with `n_rules` distinct random
/// rules of exactly `rule_size` features (so the capacity is
/// `rule_size`-maxitive): `x` is uniform on `[0, 1]^m` and the label is
/// `S_mu(x) >= beta`.
pub struct Planted {
    pub capacity: Capacity,
    pub rules: Vec<SubsetMask>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

pub fn planted_rules<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
    n_rules: usize,
    rule_size: usize,
    beta: f64,
) -> Result<Planted> {
    let pool: Vec<SubsetMask> = SubsetMask::full(m).subsets_of_size(rule_size).collect();
    let mut rules: Vec<SubsetMask> = pool.choose_multiple(rng, n_rules.min(pool.len())).copied().collect();
    rules.sort_by_key(|r| r.0);
    let capacity = Capacity::rules(m, &rules)?.truncate(rule_size.clamp(1, m))?;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| utilities(rng, m)).collect();
    let labels = rows
        .iter()
        .map(|u| crate::integral::sugeno_sorted(&capacity, u).map(|s| s >= beta))
        .collect::<Result<Vec<_>>>()?;
    Ok(Planted {
        capacity,
        rules,
        rows,
        labels,
    })
}
