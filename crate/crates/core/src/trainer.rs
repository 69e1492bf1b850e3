//! Learning a Sugeno classifier from data.
//!
//! The threshold is fixed first with a surrogate rule on the median of the
//! utilities; the capacity is then learned by a linear program that minimizes
//! the total slack over per-example margin constraints, subject to
//! monotonicity. k and the margin are chosen by internal cross-validation.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{Capacity, SubsetMask};
use crate::error::{Error, Result};
use crate::eval::Dataset;
use crate::features::{detect_direction, Direction, DirectionProbeConfig, FeatureTransform};
use crate::integral::{sorted_unchecked, SortChain};
use crate::lp::{self, LinearProgram, LpStatus, VarId};
use crate::model::{CvResult, SugenoModel, TrainingMeta};

pub const DEFAULT_RHO_GRID: [f64; 5] = [0.0, 0.02, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Default)]
pub enum DirectionMode {
    #[default]
    AssumeIncreasing,
    Detect(DirectionProbeConfig),
    Given(Vec<Direction>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    #[default]
    Surrogate,
    SurrogateThenReoptimize,
}

/// Which chain set a positive example constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositiveIndexRule {
    /// `A_(p)`, the chain set starting at the first utility above the margin.
    #[default]
    Derived,
    /// `A_(p-1)`, one position earlier in the chain.
    Preceding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `None` means `1..=m`.
    pub k_grid: Option<Vec<usize>>,
    pub rho_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub directions: DirectionMode,
    pub threshold: ThresholdMode,
    pub positive_index: PositiveIndexRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_grid: None,
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
            folds: 10,
            seed: 0,
            directions: DirectionMode::AssumeIncreasing,
            threshold: ThresholdMode::Surrogate,
            positive_index: PositiveIndexRule::Derived,
        }
    }
}

impl TrainConfig {
    fn k_values(&self, m: usize) -> Result<Vec<usize>> {
        let ks = match &self.k_grid {
            None => (1..=m).collect(),
            Some(ks) => ks.clone(),
        };
        if ks.is_empty() {
            return Err(Error::Config("k grid is empty".into()));
        }
        if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > m) {
            return Err(Error::Config(format!("k = {bad} is outside 1..={m}")));
        }
        Ok(ks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(Error::Config("rho grid is empty".into()));
        }
        if let Some(bad) = self.rho_grid.iter().find(|r| !(0.0..0.5).contains(*r)) {
            return Err(Error::Config(format!("rho = {bad} is outside [0, 0.5)")));
        }
        if self.folds < 2 {
            return Err(Error::Config("at least two folds are required".into()));
        }
        Ok(())
    }
}

/// Mixes tags into a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(t);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Median of the utilities; the mean of the two central values for even `m`.
pub fn surrogate_median(u: &[f64]) -> f64 {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub beta: f64,
    /// Total hinge slack at `beta`.
    pub objective: f64,
    /// Interval of optimal thresholds; `beta` is its midpoint.
    pub interval: (f64, f64),
}

/// Total slack `sum max(0, beta - s)` over positives plus `sum max(0, s - beta)`
/// over negatives.
pub fn threshold_objective(scores: &[f64], labels: &[bool], beta: f64) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| if y { (beta - s).max(0.0) } else { (s - beta).max(0.0) })
        .sum()
}

/// Minimizes [`threshold_objective`] over `beta ∈ [0, 1]` by scanning the
/// breakpoints of the piecewise-linear convex objective.
pub fn learn_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdFit> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::invalid("threshold learning needs one label per score"));
    }
    let mut cands: Vec<f64> = scores.iter().map(|s| s.clamp(0.0, 1.0)).collect();
    cands.push(0.0);
    cands.push(1.0);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let objs: Vec<f64> = cands
        .iter()
        .map(|&b| threshold_objective(scores, labels, b))
        .collect();
    let best = objs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.max(1.0);
    let optimal: Vec<f64> = cands
        .iter()
        .zip(&objs)
        .filter(|(_, &o)| o <= best + tol)
        .map(|(&b, _)| b)
        .collect();
    let lo = optimal[0];
    let hi = optimal[optimal.len() - 1];
    let beta = 0.5 * (lo + hi);
    Ok(ThresholdFit {
        beta,
        objective: threshold_objective(scores, labels, beta),
        interval: (lo, hi),
    })
}

/// The same threshold problem as a generic LP over `beta` and one slack per
/// instance, for cross-checking [`learn_threshold`].
pub fn threshold_program(scores: &[f64], labels: &[bool]) -> Result<LinearProgram> {
    let mut prog = LinearProgram::new();
    let beta = prog.add_var("beta", 0.0, 1.0)?;
    for (i, (&s, &y)) in scores.iter().zip(labels).enumerate() {
        let z = prog.add_var(format!("zeta_{}", i + 1), 0.0, 1.0)?;
        prog.add_objective(z, 1.0);
        if y {
            prog.add_le(vec![(beta, 1.0), (z, -1.0)], s);
        } else {
            prog.add_le(vec![(beta, -1.0), (z, -1.0)], -s);
        }
    }
    Ok(prog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VacuousReason {
    /// The margin condition holds for every capacity.
    Satisfied,
    /// No capacity can meet the margin for this example.
    Irreducible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `c_A + xi >= bound`
    Positive,
    /// `c_A - xi <= bound` for every listed `A`, sharing one slack.
    Negative,
    Vacuous(VacuousReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleConstraint {
    pub example: usize,
    pub kind: ConstraintKind,
    pub sets: Vec<SubsetMask>,
    /// `beta + rho` for positives, `beta - rho` for negatives.
    pub bound: f64,
    /// The chain set the constraint is derived from, before any reduction to
    /// k-subsets.
    pub target: Option<SubsetMask>,
}

impl ExampleConstraint {
    pub fn is_vacuous(&self) -> bool {
        matches!(self.kind, ConstraintKind::Vacuous(_))
    }
}

fn check_margins(beta: f64, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) || rho < 0.0 || beta + rho > 1.0 || beta - rho < 0.0 {
        return Err(Error::Config(format!(
            "beta = {beta} with margin rho = {rho} leaves [0, 1]"
        )));
    }
    Ok(())
}

/// Derives the capacity constraint one example imposes under threshold
/// `beta`, margin `rho` and maxitivity order `k`. `rng` draws the k-subset of an
/// oversized positive target set.
pub fn build_example_constraint<R: rand::Rng + ?Sized>(
    example: usize,
    u: &[f64],
    positive: bool,
    beta: f64,
    rho: f64,
    k: usize,
    rule: PositiveIndexRule,
    rng: &mut R,
) -> Result<ExampleConstraint> {
    check_margins(beta, rho)?;
    let m = u.len();
    if k == 0 || k > m {
        return Err(Error::InvalidOrder { k, m });
    }
    let chain = SortChain::new(u);
    let sorted: Vec<f64> = chain.order.iter().map(|&i| u[i]).collect();
    let vacuous = |reason| ExampleConstraint {
        example,
        kind: ConstraintKind::Vacuous(reason),
        sets: Vec::new(),
        bound: if positive { beta + rho } else { beta - rho },
        target: None,
    };

    if positive {
        let hi = beta + rho;
        // zero-based p: first sorted position with u >= hi
        let Some(p) = sorted.iter().position(|&v| v >= hi) else {
            return Ok(vacuous(VacuousReason::Irreducible));
        };
        if p == 0 {
            return Ok(vacuous(VacuousReason::Satisfied));
        }
        let target = match rule {
            PositiveIndexRule::Derived => chain.sets[p],
            PositiveIndexRule::Preceding => chain.sets[p - 1],
        };
        let set = if target.len() <= k {
            target
        } else {
            let elems: Vec<usize> = target.indices().collect();
            let picked = sample(rng, elems.len(), k);
            SubsetMask::from_indices(picked.iter().map(|i| elems[i]))
        };
        Ok(ExampleConstraint {
            example,
            kind: ConstraintKind::Positive,
            sets: vec![set],
            bound: hi,
            target: Some(target),
        })
    } else {
        let lo = beta - rho;
        // zero-based p: last sorted position with u < lo
        let Some(p) = sorted.iter().rposition(|&v| v < lo) else {
            return Ok(vacuous(VacuousReason::Irreducible));
        };
        if p == m - 1 {
            return Ok(vacuous(VacuousReason::Satisfied));
        }
        let target = chain.sets[p + 1];
        let size = k.min(target.len());
        Ok(ExampleConstraint {
            example,
            kind: ConstraintKind::Negative,
            sets: target.subsets_of_size(size).collect(),
            bound: lo,
            target: Some(target),
        })
    }
}

/// The capacity LP together with the variable layout needed to read a
/// capacity back from its solution.
#[derive(Debug, Clone)]
pub struct CapacityProgram {
    pub lp: LinearProgram,
    pub m: usize,
    pub k: usize,
    pub capacity_vars: Vec<(SubsetMask, VarId)>,
    pub slack_vars: Vec<(usize, VarId)>,
    pub constraints: Vec<ExampleConstraint>,
}

fn set_name(a: SubsetMask) -> String {
    let mut s = String::from("c");
    for i in a.indices() {
        s.push('_');
        s.push_str(&(i + 1).to_string());
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub fn build_capacity_program(
    utilities: &[Vec<f64>],
    labels: &[bool],
    m: usize,
    beta: f64,
    rho: f64,
    k: usize,
    rule: PositiveIndexRule,
    seed: u64,
) -> Result<CapacityProgram> {
    check_margins(beta, rho)?;
    if k == 0 || k > m {
        return Err(Error::InvalidOrder { k, m });
    }
    if utilities.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: utilities.len(),
            got: labels.len(),
        });
    }
    let mut lp = LinearProgram::new();
    let full = SubsetMask::full(m);
    let mut slot = vec![usize::MAX; 1 << m];
    let mut capacity_vars = Vec::new();
    for size in 1..=k {
        for a in full.subsets_of_size(size) {
            // the full set is normalized when it is a free variable
            let lower = if a == full { 1.0 } else { 0.0 };
            let v = lp.add_var(set_name(a), lower, 1.0)?;
            slot[a.0 as usize] = v.0;
            capacity_vars.push((a, v));
        }
    }
    let var = |a: SubsetMask| VarId(slot[a.0 as usize]);

    for &(a, va) in &capacity_vars {
        if a.len() >= k {
            continue;
        }
        for b in 0..m {
            if !a.contains(b) {
                lp.add_le(vec![(va, 1.0), (var(a.with(b)), -1.0)], 0.0);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slack_vars = Vec::new();
    let mut constraints = Vec::with_capacity(utilities.len());
    for (i, (u, &y)) in utilities.iter().zip(labels).enumerate() {
        if u.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: u.len() });
        }
        let ec = build_example_constraint(i, u, y, beta, rho, k, rule, &mut rng)?;
        match ec.kind {
            ConstraintKind::Positive | ConstraintKind::Negative => {
                let xi = lp.add_var(format!("xi_{}", i + 1), 0.0, 1.0)?;
                lp.add_objective(xi, 1.0);
                slack_vars.push((i, xi));
                for &a in &ec.sets {
                    if ec.kind == ConstraintKind::Positive {
                        lp.add_ge(vec![(var(a), 1.0), (xi, 1.0)], ec.bound);
                    } else {
                        lp.add_le(vec![(var(a), 1.0), (xi, -1.0)], ec.bound);
                    }
                }
            }
            ConstraintKind::Vacuous(_) => {}
        }
        constraints.push(ec);
    }
    Ok(CapacityProgram {
        lp,
        m,
        k,
        capacity_vars,
        slack_vars,
        constraints,
    })
}

#[derive(Debug, Clone)]
pub struct CapacityFit {
    pub capacity: Capacity,
    pub objective: f64,
}

impl CapacityProgram {
    pub fn solve(&self) -> Result<CapacityFit> {
        let sol = lp::solve(&self.lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp {
                status: sol.status,
                context: format!("capacity program with m = {}, k = {}", self.m, self.k),
            });
        }
        let mut values = vec![0.0f64; 1 << self.m];
        for &(a, v) in &self.capacity_vars {
            values[a.0 as usize] = sol.value(v);
        }
        // absorb solver-tolerance violations so monotonicity holds exactly
        for &(a, _) in &self.capacity_vars {
            let below = a
                .indices()
                .map(|i| values[a.without(i).0 as usize])
                .fold(0.0, f64::max);
            let slot = &mut values[a.0 as usize];
            *slot = slot.max(below).clamp(0.0, 1.0);
        }
        let capacity = Capacity::from_fn(self.m, self.k, |a| values[a.0 as usize])?;
        Ok(CapacityFit {
            capacity,
            objective: sol.objective,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn learn_capacity(
    utilities: &[Vec<f64>],
    labels: &[bool],
    m: usize,
    beta: f64,
    rho: f64,
    k: usize,
    rule: PositiveIndexRule,
    seed: u64,
) -> Result<CapacityFit> {
    build_capacity_program(utilities, labels, m, beta, rho, k, rule, seed)?.solve()
}

/// Re-fits the threshold on the Sugeno scores of the training instances.
pub fn reoptimize_threshold(mu: &Capacity, utilities: &[Vec<f64>], labels: &[bool]) -> Result<ThresholdFit> {
    let scores: Vec<f64> = utilities.iter().map(|u| sorted_unchecked(mu, u)).collect();
    learn_threshold(&scores, labels)
}

fn errors(mu: &Capacity, beta: f64, utilities: &[Vec<f64>], labels: &[bool]) -> usize {
    utilities
        .iter()
        .zip(labels)
        .filter(|(u, &y)| (sorted_unchecked(mu, u) >= beta) != y)
        .count()
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Everything [`fit`] produces: the model and the final capacity program.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: SugenoModel,
    pub program: CapacityProgram,
}

struct Prepared {
    directions: Vec<Direction>,
    transforms: Vec<FeatureTransform>,
    utilities: Vec<Vec<f64>>,
    threshold: ThresholdFit,
}

fn prepare(data: &Dataset, cfg: &TrainConfig) -> Result<Prepared> {
    let m = data.m();
    let directions = match &cfg.directions {
        DirectionMode::AssumeIncreasing => vec![Direction::Increasing; m],
        DirectionMode::Detect(probe) => detect_direction(&data.rows, &data.labels, probe)?,
        DirectionMode::Given(d) => {
            if d.len() != m {
                return Err(Error::LengthMismatch { expected: m, got: d.len() });
            }
            d.clone()
        }
    };
    let transforms = (0..m)
        .map(|j| FeatureTransform::fit_oriented(&data.column(j), directions[j]))
        .collect::<Result<Vec<_>>>()?;
    let utilities: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|row| row.iter().zip(&transforms).map(|(&x, f)| f.apply(x)).collect())
        .collect();
    let medians: Vec<f64> = utilities.iter().map(|u| surrogate_median(u)).collect();
    let threshold = learn_threshold(&medians, &data.labels)?;
    Ok(Prepared {
        directions,
        transforms,
        utilities,
        threshold,
    })
}

/// Fits a capacity and, in re-optimizing mode, moves the threshold to the
/// best value for that capacity.
#[allow(clippy::too_many_arguments)]
fn fit_capacity_and_threshold(
    utilities: &[Vec<f64>],
    labels: &[bool],
    m: usize,
    beta: f64,
    rho: f64,
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(CapacityProgram, CapacityFit, f64)> {
    let program = build_capacity_program(utilities, labels, m, beta, rho, k, cfg.positive_index, seed)?;
    let fit = program.solve()?;
    let final_beta = match cfg.threshold {
        ThresholdMode::Surrogate => beta,
        ThresholdMode::SurrogateThenReoptimize => {
            reoptimize_threshold(&fit.capacity, utilities, labels)?.beta
        }
    };
    Ok((program, fit, final_beta))
}

/// The full training pipeline: orientation, transforms, surrogate threshold,
/// cross-validated choice of `(k, rho)`, refit on all data.
pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let n = data.n();
    let m = data.m();
    let positives = data.labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == n {
        return Err(Error::data("training data must contain both classes"));
    }
    let ks = cfg.k_values(m)?;
    let prep = prepare(data, cfg)?;
    let beta = prep.threshold.beta;

    let mut grid: Vec<(usize, usize, f64)> = Vec::new();
    for &k in &ks {
        for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
            if check_margins(beta, rho).is_ok() {
                grid.push((k, ri, rho));
            } else {
                log::warn!("skipping rho = {rho}: margin leaves [0, 1] around beta = {beta:.4}");
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::Config(format!(
            "no margin in the grid is compatible with beta = {beta:.4}"
        )));
    }

    let mut cv = Vec::new();
    let (k_best, rho_best) = if grid.len() == 1 {
        (grid[0].0, grid[0].2)
    } else {
        if n < cfg.folds {
            return Err(Error::data(format!(
                "{n} instances cannot fill {} folds",
                cfg.folds
            )));
        }
        let assignment = stratified_folds(&data.labels, cfg.folds, derive_seed(cfg.seed, &[1]));
        for &(k, ri, rho) in &grid {
            let mut wrong = 0usize;
            for fold in 0..cfg.folds {
                let (mut tu, mut ty, mut vu, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for i in 0..n {
                    if assignment[i] == fold {
                        vu.push(prep.utilities[i].clone());
                        vy.push(data.labels[i]);
                    } else {
                        tu.push(prep.utilities[i].clone());
                        ty.push(data.labels[i]);
                    }
                }
                let seed = derive_seed(cfg.seed, &[2, k as u64, ri as u64, fold as u64]);
                let (_, fitted, b) = fit_capacity_and_threshold(&tu, &ty, m, beta, rho, k, cfg, seed)?;
                wrong += errors(&fitted.capacity, b, &vu, &vy);
            }
            cv.push(CvResult {
                k,
                rho,
                errors: wrong,
                loss: wrong as f64 / n as f64,
            });
        }
        // grid is ordered by k then rho, so the first minimum prefers smaller values
        let best = cv.iter().min_by_key(|r| r.errors).expect("grid is nonempty");
        (best.k, best.rho)
    };

    let rho_index = cfg
        .rho_grid
        .iter()
        .position(|&r| r == rho_best)
        .unwrap_or(0) as u64;
    let final_seed = derive_seed(cfg.seed, &[3, k_best as u64, rho_index]);
    let (program, fitted, final_beta) =
        fit_capacity_and_threshold(&prep.utilities, &data.labels, m, beta, rho_best, k_best, cfg, final_seed)?;
    let training_errors = errors(&fitted.capacity, final_beta, &prep.utilities, &data.labels);

    let model = SugenoModel {
        feature_names: data.feature_names.clone(),
        directions: prep.directions,
        transforms: prep.transforms,
        capacity: fitted.capacity,
        beta: final_beta,
        meta: TrainingMeta {
            k: k_best,
            rho: rho_best,
            seed: cfg.seed,
            surrogate_beta: beta,
            lp_objective: fitted.objective,
            training_loss: training_errors as f64 / n as f64,
            cv,
        },
    };
    Ok(FitOutcome { model, program })
}
