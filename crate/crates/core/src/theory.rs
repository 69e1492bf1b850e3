//! Executable checks of two structural facts: threshold Sugeno classifiers
//! shatter the Sperner dataset, and projecting a capacity onto small sets
//! moves the integral by at most the projection error.

use rand::Rng;
use serde::Serialize;

use crate::capacity::{binomial, Capacity, SubsetMask, AXIOM_TOL};
use crate::error::{Error, Result};
use crate::integral::sorted_unchecked;

/// All `floor(m/2)`-subsets of `[m]`, in combination order.
pub fn sperner_sets(m: usize) -> Vec<SubsetMask> {
    SubsetMask::full(m).subsets_of_size(m / 2).collect()
}

/// Indicator vector of `a` in `[0, 1]^m`.
pub fn indicator(m: usize, a: SubsetMask) -> Vec<f64> {
    (0..m).map(|i| if a.contains(i) { 1.0 } else { 0.0 }).collect()
}

/// Builds the shattering capacity for `labels` (one per Sperner set) and
/// checks that the classifier at `beta = 1/2` reproduces them.
pub fn shatter_realizes(m: usize, labels: &[bool]) -> Result<bool> {
    let sets = sperner_sets(m);
    if labels.len() != sets.len() {
        return Err(Error::LengthMismatch {
            expected: sets.len(),
            got: labels.len(),
        });
    }
    let positives: Vec<SubsetMask> = sets.iter().zip(labels).filter(|(_, &y)| y).map(|(&a, _)| a).collect();
    let mu = Capacity::shatter(m, &positives)?;
    Ok(sets
        .iter()
        .zip(labels)
        .all(|(&a, &y)| (sorted_unchecked(&mu, &indicator(m, a)) >= 0.5) == y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShatterReport {
    pub m: usize,
    pub instances: usize,
    pub labelings_checked: u64,
    pub realized: u64,
    pub exhaustive: bool,
}

/// Checks every labelling when there are at most `samples` of them, and
/// `samples` uniformly drawn labellings otherwise.
pub fn shatter_demo<R: Rng + ?Sized>(m: usize, samples: u64, rng: &mut R) -> Result<ShatterReport> {
    if !(1..=12).contains(&m) {
        return Err(Error::invalid(format!("shattering demo supports 1 <= m <= 12, got {m}")));
    }
    let n = binomial(m, m / 2) as usize;
    let total = if n < 64 { Some(1u64 << n) } else { None };
    let exhaustive = total.is_some_and(|t| t <= samples);
    let mut checked = 0;
    let mut realized = 0;
    let mut check = |labels: &[bool]| -> Result<()> {
        checked += 1;
        if shatter_realizes(m, labels)? {
            realized += 1;
        }
        Ok(())
    };
    if exhaustive {
        for code in 0..total.expect("exhaustive implies a finite count") {
            let labels: Vec<bool> = (0..n).map(|i| code >> i & 1 == 1).collect();
            check(&labels)?;
        }
    } else {
        for _ in 0..samples {
            let labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            check(&labels)?;
        }
    }
    Ok(ShatterReport {
        m,
        instances: n,
        labelings_checked: checked,
        realized,
        exhaustive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eps: f64,
    pub k_star: usize,
    pub grid_points: u64,
    pub min_gap: f64,
    pub max_gap: f64,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.min_gap >= -AXIOM_TOL && self.max_gap <= self.eps + AXIOM_TOL
    }
}

/// Visits every point of the grid `{0, step, 2 step, ..., 1}^m`.
pub fn for_each_grid_point<F: FnMut(&[f64])>(m: usize, step: f64, mut f: F) -> Result<u64> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step {step} must lie in (0, 1]")));
    }
    let levels = (1.0 / step).round() as usize;
    let values: Vec<f64> = (0..=levels).map(|i| (i as f64 / levels as f64).min(1.0)).collect();
    let mut digits = vec![0usize; m];
    let mut u = vec![0.0; m];
    let mut count = 0u64;
    loop {
        for (x, &d) in u.iter_mut().zip(&digits) {
            *x = values[d];
        }
        f(&u);
        count += 1;
        let mut pos = 0;
        while pos < m && digits[pos] == levels {
            digits[pos] = 0;
            pos += 1;
        }
        if pos == m {
            return Ok(count);
        }
        digits[pos] += 1;
    }
}

/// Integral over a dense table of all `2^m` set values, with `order` and
/// `u` sorted ascending by the caller.
fn integral_dense(table: &[f64], order: &[usize], u: &[f64]) -> f64 {
    let mut set = 0usize;
    let mut best = 0.0f64;
    for &i in order.iter().rev() {
        set |= 1 << i;
        best = best.max(u[i].min(table[set]));
    }
    best
}

/// Projects `mu` onto its `k*`-subsets for tolerance `eps` and measures
/// `S_mu(u) - S_mu*(u)` over a utility grid.
pub fn stability_check(mu: &Capacity, eps: f64, step: f64) -> Result<StabilityReport> {
    Ok(stability_sweep(mu, &[eps], step)?.remove(0))
}

/// [`stability_check`] for several tolerances with one walk over the grid.
pub fn stability_sweep(mu: &Capacity, eps: &[f64], step: f64) -> Result<Vec<StabilityReport>> {
    let full = mu.to_full();
    let m = full.m();
    let dense = |c: &Capacity| -> Vec<f64> {
        (0..1u32 << m).map(|bits| c.eval_in_range(SubsetMask(bits))).collect()
    };
    let base = dense(&full);
    let ks = eps.iter().map(|&e| full.k_star(e)).collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<usize> = ks.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let tables = distinct
        .iter()
        .map(|&k| Ok(dense(&full.maxitive_projection(k)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..m).collect();
    let mut min_gap = vec![f64::INFINITY; distinct.len()];
    let mut max_gap = vec![f64::NEG_INFINITY; distinct.len()];
    let points = for_each_grid_point(m, step, |u| {
        order.sort_by(|&x, &y| u[x].total_cmp(&u[y]).then(x.cmp(&y)));
        let s = integral_dense(&base, &order, u);
        for (j, t) in tables.iter().enumerate() {
            let gap = s - integral_dense(t, &order, u);
            min_gap[j] = min_gap[j].min(gap);
            max_gap[j] = max_gap[j].max(gap);
        }
    })?;
    Ok(eps
        .iter()
        .zip(&ks)
        .map(|(&e, &k)| {
            let j = distinct.binary_search(&k).expect("k is in the distinct list");
            StabilityReport {
                eps: e,
                k_star: k,
                grid_points: points,
                min_gap: min_gap[j],
                max_gap: max_gap[j],
            }
        })
        .collect())
}
