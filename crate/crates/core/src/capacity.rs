//! Capacities (fuzzy measures) on a finite ground set `[m]`.
//!
//! A [`Capacity`] stores values only on its generator sets, i.e. all subsets
//! `A` with `1 <= |A| <= k`. Values on larger sets follow from the maxitive
//! closure `mu(U) = max { mu(V) : V ⊆ U, |V| <= k }`. The empty set always
//! has value zero and is never stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ground set. Closure evaluation enumerates subsets, so
/// the bitmask never exceeds a `u32`.
pub const MAX_GROUND_SET: usize = 20;

/// Tolerance used by the axiom checks.
pub const AXIOM_TOL: f64 = 1e-12;

/// A subset of `[m]` encoded as a bitmask; bit `i` stands for feature `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// The full ground set `[m]`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_GROUND_SET);
        SubsetMask(((1u64 << m) - 1) as u32)
    }

    /// `{i + 1}` for the zero-based index `i`.
    pub fn singleton(i: usize) -> Self {
        SubsetMask(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        SubsetMask(indices.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_superset_of(self, other: SubsetMask) -> bool {
        other.is_subset_of(self)
    }

    pub fn union(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn with(self, i: usize) -> Self {
        SubsetMask(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        SubsetMask(self.0 & !(1 << i))
    }

    /// Whether every element lies in `[m]`.
    pub fn fits(self, m: usize) -> bool {
        m >= 32 || self.0 >> m == 0
    }

    /// Zero-based element indices in ascending order.
    pub fn indices(self) -> Indices {
        Indices(self.0)
    }

    /// All submasks, including the empty set and `self`.
    pub fn submasks(self) -> Submasks {
        Submasks {
            mask: self.0,
            next: Some(self.0),
        }
    }

    /// All subsets of `self` with exactly `size` elements, in lexicographic
    /// order of their sorted index lists.
    pub fn subsets_of_size(self, size: usize) -> SubsetsOfSize {
        SubsetsOfSize::new(self.indices().collect(), size)
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One-based set notation, e.g. `{1,3}`.
impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, i) in self.indices().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

pub struct Indices(u32);

impl Iterator for Indices {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

pub struct Submasks {
    mask: u32,
    next: Option<u32>,
}

impl Iterator for Submasks {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & self.mask)
        };
        Some(SubsetMask(cur))
    }
}

pub struct SubsetsOfSize {
    elems: Vec<usize>,
    idx: Vec<usize>,
    done: bool,
}

impl SubsetsOfSize {
    fn new(elems: Vec<usize>, size: usize) -> Self {
        let done = size > elems.len();
        SubsetsOfSize {
            idx: (0..size).collect(),
            elems,
            done,
        }
    }
}

impl Iterator for SubsetsOfSize {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        if self.done {
            return None;
        }
        let out = SubsetMask::from_indices(self.idx.iter().map(|&i| self.elems[i]));
        let n = self.elems.len();
        let k = self.idx.len();
        // advance to the next combination
        let mut pos = k;
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if self.idx[pos] < n - k + pos {
                self.idx[pos] += 1;
                for j in pos + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Binomial coefficient as `u64`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Number of free values of a k-maxitive capacity on `[m]`.
pub fn param_count(m: usize, k: usize) -> u64 {
    (1..=k.min(m)).map(|i| binomial(m, i)).sum()
}

fn check_ground_set(m: usize) -> Result<()> {
    if m == 0 || m > MAX_GROUND_SET {
        return Err(Error::GroundSetSize(m));
    }
    Ok(())
}

/// A set function on `[m]` with values in `[0, 1]`, stored on all subsets of
/// size at most `k` and extended to larger sets by maxitive closure.
///
/// Monotonicity is not enforced on construction; use [`Capacity::is_monotone`].
#[derive(Clone, PartialEq)]
pub struct Capacity {
    m: usize,
    k: usize,
    // indexed by mask; only slots with 1 <= popcount <= k are meaningful
    values: Vec<f64>,
}

impl Capacity {
    /// Builds a capacity of order `k` by evaluating `f` on every generator set.
    pub fn from_fn<F>(m: usize, k: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(SubsetMask) -> f64,
    {
        check_ground_set(m)?;
        if k == 0 || k > m {
            return Err(Error::InvalidOrder { k, m });
        }
        let mut values = vec![0.0; 1 << m];
        for bits in 1..(1u32 << m) {
            let a = SubsetMask(bits);
            if a.len() <= k {
                let v = f(a);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ValueOutOfRange { mask: bits, value: v });
                }
                values[bits as usize] = v;
            }
        }
        Ok(Capacity { m, k, values })
    }

    /// Builds a capacity from explicit `(mask, value)` pairs. Every generator
    /// set must appear exactly once.
    pub fn from_entries<I>(m: usize, k: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (SubsetMask, f64)>,
    {
        check_ground_set(m)?;
        if k == 0 || k > m {
            return Err(Error::InvalidOrder { k, m });
        }
        let mut values = vec![f64::NAN; 1 << m];
        for (a, v) in entries {
            if !a.fits(m) || a.is_empty() {
                return Err(Error::MaskOutOfRange { mask: a.0, m });
            }
            if a.len() > k {
                return Err(Error::invalid(format!(
                    "entry {a} has more than k = {k} elements"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange { mask: a.0, value: v });
            }
            if !values[a.0 as usize].is_nan() {
                return Err(Error::invalid(format!("duplicate entry for {a}")));
            }
            values[a.0 as usize] = v;
        }
        for bits in 1..(1u32 << m) {
            let a = SubsetMask(bits);
            if a.len() > k {
                values[bits as usize] = 0.0;
            } else if values[bits as usize].is_nan() {
                return Err(Error::invalid(format!("missing entry for {a}")));
            }
        }
        values[0] = 0.0;
        Ok(Capacity { m, k, values })
    }

    /// `mu(A) = |A| / m`, fully general.
    pub fn cardinality(m: usize) -> Result<Self> {
        Capacity::from_fn(m, m, |a| a.len() as f64 / m as f64)
    }

    /// `mu(A) = 1` for every nonempty `A`.
    pub fn max_measure(m: usize) -> Result<Self> {
        Capacity::from_fn(m, m, |_| 1.0)
    }

    /// `mu(A) = 1` iff `A = [m]`.
    pub fn min_measure(m: usize) -> Result<Self> {
        let full = SubsetMask::full(m);
        Capacity::from_fn(m, m, |a| if a == full { 1.0 } else { 0.0 })
    }

    /// 0/1 capacity that is one exactly on supersets of some rule.
    pub fn rules(m: usize, rules: &[SubsetMask]) -> Result<Self> {
        check_ground_set(m)?;
        if rules.is_empty() {
            return Err(Error::invalid("rule capacity needs at least one rule"));
        }
        for r in rules {
            if r.is_empty() {
                return Err(Error::invalid("rules must be nonempty"));
            }
            if !r.fits(m) {
                return Err(Error::MaskOutOfRange { mask: r.0, m });
            }
        }
        Capacity::from_fn(m, m, |a| {
            if rules.iter().any(|r| r.is_subset_of(a)) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Capacity realizing an arbitrary labelling of the Sperner dataset: one
    /// on supersets of the indicator sets in `positives`, zero elsewhere.
    /// Every member of `positives` must have exactly `floor(m / 2)` elements.
    pub fn shatter(m: usize, positives: &[SubsetMask]) -> Result<Self> {
        check_ground_set(m)?;
        let q = m / 2;
        for p in positives {
            if !p.fits(m) {
                return Err(Error::MaskOutOfRange { mask: p.0, m });
            }
            if p.len() != q {
                return Err(Error::invalid(format!(
                    "{p} does not have floor(m/2) = {q} elements"
                )));
            }
        }
        Capacity::from_fn(m, m, |a| {
            if positives.iter().any(|p| p.is_subset_of(a)) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_fully_general(&self) -> bool {
        self.k == self.m
    }

    /// Stored generator entries, ordered by mask.
    pub fn entries(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        (1..(1u32 << self.m))
            .map(SubsetMask)
            .filter(move |a| a.len() <= self.k)
            .map(move |a| (a, self.values[a.0 as usize]))
    }

    /// Evaluates the capacity on `a`, applying the closure rule when
    /// `|a| > k`.
    pub fn eval(&self, a: SubsetMask) -> Result<f64> {
        if !a.fits(self.m) {
            return Err(Error::MaskOutOfRange { mask: a.0, m: self.m });
        }
        Ok(self.eval_in_range(a))
    }

    pub(crate) fn eval_in_range(&self, a: SubsetMask) -> f64 {
        let size = a.len();
        if size == 0 {
            0.0
        } else if size <= self.k {
            self.values[a.0 as usize]
        } else {
            self.closure(a)
        }
    }

    fn closure(&self, a: SubsetMask) -> f64 {
        let mut best = 0.0f64;
        for size in 1..=self.k {
            for v in a.subsets_of_size(size) {
                best = best.max(self.values[v.0 as usize]);
            }
        }
        best
    }

    /// Capacity values on the nested chain `{order[j], ..., order[m-1]}` for
    /// `j = 0..m`. Closure values are built incrementally along the chain.
    pub(crate) fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        let m = order.len();
        let mut out = vec![0.0; m];
        let mut set = SubsetMask::EMPTY;
        let mut running = 0.0f64;
        for j in (0..m).rev() {
            let added = order[j];
            let prev = set;
            set = set.with(added);
            let size = set.len();
            if size <= self.k {
                out[j] = self.values[set.0 as usize];
                continue;
            }
            if size == self.k + 1 {
                running = self.closure(set);
            } else {
                // new subsets of size <= k are exactly those containing `added`
                for s in 0..self.k {
                    for v in prev.subsets_of_size(s) {
                        running = running.max(self.values[v.with(added).0 as usize]);
                    }
                }
            }
            out[j] = running;
        }
        out
    }

    /// Materializes all `2^m - 1` values, returning a fully general capacity.
    pub fn to_full(&self) -> Capacity {
        if self.is_fully_general() {
            return self.clone();
        }
        // best[A] = max over V ⊆ A with |V| <= k of the stored values
        let mut best = vec![0.0f64; 1 << self.m];
        let mut values = vec![0.0; 1 << self.m];
        for bits in 1..(1u32 << self.m) {
            let a = SubsetMask(bits);
            let below = a
                .indices()
                .map(|i| best[a.without(i).0 as usize])
                .fold(0.0, f64::max);
            if a.len() <= self.k {
                values[bits as usize] = self.values[bits as usize];
                best[bits as usize] = below.max(self.values[bits as usize]);
            } else {
                values[bits as usize] = below;
                best[bits as usize] = below;
            }
        }
        Capacity {
            m: self.m,
            k: self.m,
            values,
        }
    }

    /// True iff `mu(A) <= mu(A ∪ {b})` for every stored pair within order `k`.
    pub fn is_monotone(&self) -> bool {
        for bits in 1..(1u32 << self.m) {
            let a = SubsetMask(bits);
            if a.len() >= self.k {
                continue;
            }
            let va = self.values[bits as usize];
            for b in 0..self.m {
                if !a.contains(b) && va > self.values[a.with(b).0 as usize] + AXIOM_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// True iff every `U` with `|U| > k0` has `mu(U)` equal to the maximum of
    /// `mu` over proper subsets of `U`.
    pub fn is_k_maxitive(&self, k0: usize) -> bool {
        let m = self.m;
        if k0 >= m {
            return true;
        }
        let full = self.to_full();
        // best_proper[U] = max over proper subsets V of U
        let mut best_proper = vec![0.0f64; 1 << m];
        for bits in 1..(1u32 << m) {
            let u = SubsetMask(bits);
            let mut best = 0.0f64;
            for i in u.indices() {
                let v = u.without(i).0 as usize;
                best = best.max(full.values[v]).max(best_proper[v]);
            }
            best_proper[bits as usize] = best;
            if u.len() > k0 && (full.values[bits as usize] - best).abs() > AXIOM_TOL {
                return false;
            }
        }
        true
    }

    /// Values on subsets of size `<= level`, extended by the maximum over
    /// `level`-subsets elsewhere. This is the projection used for the
    /// stability bound; it returns a fully general capacity.
    pub fn maxitive_projection(&self, level: usize) -> Result<Capacity> {
        if level == 0 || level > self.m {
            return Err(Error::InvalidOrder { k: level, m: self.m });
        }
        let mut values = vec![0.0; 1 << self.m];
        for bits in 1..(1u32 << self.m) {
            let b = SubsetMask(bits);
            values[bits as usize] = if b.len() <= level {
                self.eval_in_range(b)
            } else {
                b.subsets_of_size(level)
                    .map(|a| self.eval_in_range(a))
                    .fold(0.0, f64::max)
            };
        }
        Ok(Capacity {
            m: self.m,
            k: self.m,
            values,
        })
    }

    /// Keeps only the generator values of size `<= level`; larger sets then
    /// follow from the closure.
    pub fn truncate(&self, level: usize) -> Result<Capacity> {
        if level == 0 || level > self.k {
            return Err(Error::InvalidOrder { k: level, m: self.m });
        }
        let mut out = self.clone();
        out.k = level;
        for bits in 1..(1u32 << self.m) {
            if SubsetMask(bits).len() > level {
                out.values[bits as usize] = 0.0;
            }
        }
        Ok(out)
    }

    /// Largest gap `mu(B) - max_{A ⊆ B, |A| <= level} mu(A)` over nonempty `B`.
    pub fn maxitivity_gap(&self, level: usize) -> f64 {
        let m = self.m;
        let mut low = vec![0.0f64; 1 << m];
        let mut gap = 0.0f64;
        for bits in 1..(1u32 << m) {
            let b = SubsetMask(bits);
            let value = self.eval_in_range(b);
            low[bits as usize] = if b.len() <= level {
                // includes B itself and, through the recursion, every smaller set
                b.indices()
                    .map(|i| low[b.without(i).0 as usize])
                    .fold(value, f64::max)
            } else {
                b.indices()
                    .map(|i| low[b.without(i).0 as usize])
                    .fold(0.0, f64::max)
            };
            gap = gap.max(value - low[bits as usize]);
        }
        gap
    }

    /// Smallest `k` such that every nonempty set is within `eps` of the best
    /// value reachable with subsets of size at most `k`.
    pub fn k_star(&self, eps: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::invalid(format!("eps = {eps} must lie in [0, 1)")));
        }
        Ok((1..=self.m)
            .find(|&level| self.maxitivity_gap(level) <= eps + AXIOM_TOL)
            .unwrap_or(self.m))
    }

    /// Minimal subsets whose capacity reaches `beta`, ordered by size and then
    /// by mask. The result is an antichain.
    pub fn boundary_sets(&self, beta: f64) -> Vec<SubsetMask> {
        let mut found: Vec<SubsetMask> = Vec::new();
        // sets above order k are never minimal: their value is the maximum
        // over smaller subsets
        for size in 1..=self.k {
            for a in SubsetMask::full(self.m).subsets_of_size(size) {
                if self.values[a.0 as usize] >= beta
                    && !found.iter().any(|f| f.is_subset_of(a))
                {
                    found.push(a);
                }
            }
        }
        found.sort_by_key(|a| (a.len(), a.0));
        found
    }
}

impl fmt::Debug for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (a, v) in self.entries() {
            map.entry(&a, &v);
        }
        map.finish()
    }
}

/// On-disk form: `m`, `k` and the generator entries as `[mask, value]` pairs.
#[derive(Serialize, Deserialize)]
struct CapacityDoc {
    m: usize,
    k: usize,
    entries: Vec<(u32, f64)>,
}

impl Serialize for Capacity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CapacityDoc {
            m: self.m,
            k: self.k,
            entries: self.entries().map(|(a, v)| (a.0, v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CapacityDoc::deserialize(d)?;
        Capacity::from_entries(
            doc.m,
            doc.k,
            doc.entries.into_iter().map(|(a, v)| (SubsetMask(a), v)),
        )
        .map_err(serde::de::Error::custom)
    }
}
