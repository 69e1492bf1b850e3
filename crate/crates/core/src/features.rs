//! Feature transformation into unit-interval utilities.
//!
//! Each feature is mapped through a piecewise-linear empirical distribution
//! function whose knots sit at the distinct training values, with mid-rank
//! levels `(#{x_l < v} + #{x_l <= v}) / (2n)`. Values below the first knot
//! map to 0 and values above the last knot map to 1.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of a raw feature: whether larger raw values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Direction::Increasing),
            -1 => Ok(Direction::Decreasing),
            other => Err(Error::invalid(format!("direction must be +1 or -1, got {other}"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Increasing => "+1",
            Direction::Decreasing => "-1",
        })
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i32(self.sign() as i32)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i32::deserialize(d)?;
        Direction::from_sign(v).map_err(serde::de::Error::custom)
    }
}

/// Piecewise-linear map from (oriented) raw values to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    /// `(x, level)` pairs with strictly increasing `x` and level, in the
    /// oriented scale `direction * raw`.
    pub knots: Vec<(f64, f64)>,
    #[serde(default)]
    pub direction: Direction,
}

impl FeatureTransform {
    /// Fits the mid-rank ECDF of `column`, taken as is.
    pub fn fit(column: &[f64]) -> Result<Self> {
        Self::fit_oriented(column, Direction::Increasing)
    }

    /// Fits the mid-rank ECDF of `direction * column`.
    pub fn fit_oriented(column: &[f64], direction: Direction) -> Result<Self> {
        if column.is_empty() {
            return Err(Error::data("cannot fit a transform on an empty column"));
        }
        if let Some(bad) = column.iter().find(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite feature value {bad}")));
        }
        let mut xs: Vec<f64> = column.iter().map(|v| v * direction.sign()).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut knots = Vec::new();
        let mut start = 0;
        while start < xs.len() {
            let v = xs[start];
            let end = start + xs[start..].iter().take_while(|&&x| x == v).count();
            // start = #{x < v}, end = #{x <= v}
            knots.push((v, (start + end) as f64 / (2.0 * n)));
            start = end;
        }
        if knots.len() == 1 {
            log::warn!("constant feature column; its transform maps every value to 0.5");
        }
        Ok(FeatureTransform { knots, direction })
    }

    /// A column with a single distinct value carries no ordering information.
    pub fn is_degenerate(&self) -> bool {
        self.knots.len() == 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::data("transform has no knots"));
        }
        for w in self.knots.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                return Err(Error::data("transform knots must be strictly increasing"));
            }
        }
        if self
            .knots
            .iter()
            .any(|&(x, l)| !x.is_finite() || !(0.0..=1.0).contains(&l))
        {
            return Err(Error::data("transform knot out of range"));
        }
        Ok(())
    }

    pub fn apply(&self, raw: f64) -> f64 {
        if self.is_degenerate() {
            return 0.5;
        }
        let x = raw * self.direction.sign();
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x < first.0 {
            return 0.0;
        }
        if x > last.0 {
            return 1.0;
        }
        // first knot with knot.x >= x
        let idx = self.knots.partition_point(|&(kx, _)| kx < x);
        let (x1, l1) = self.knots[idx];
        if x1 == x || idx == 0 {
            return l1;
        }
        let (x0, l0) = self.knots[idx - 1];
        l0 + (l1 - l0) * (x - x0) / (x1 - x0)
    }

    /// Smallest raw value whose utility reaches `level`, if any. Used to read
    /// utility thresholds back on the raw scale.
    pub fn raw_threshold(&self, level: f64) -> Option<f64> {
        if self.is_degenerate() {
            return None;
        }
        if level <= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        let idx = self.knots.iter().position(|&(_, l)| l >= level)?;
        let x = if idx == 0 {
            self.knots[0].0
        } else {
            let (x0, l0) = self.knots[idx - 1];
            let (x1, l1) = self.knots[idx];
            x0 + (x1 - x0) * (level - l0) / (l1 - l0)
        };
        Some(x * self.direction.sign())
    }
}

/// Negates the columns marked [`Direction::Decreasing`].
pub fn orient(rows: &[Vec<f64>], directions: &[Direction]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| row.iter().zip(directions).map(|(x, d)| x * d.sign()).collect())
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Settings for the direction probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionProbeConfig {
    /// Perturbation as a fraction of each feature's standard deviation.
    pub delta_factor: f64,
    /// Multiplier on the Scott-rule bandwidth `std * n^(-1/(d+4))`.
    pub bandwidth_scale: f64,
    /// Training points above this count are subsampled (seeded).
    pub max_points: usize,
    pub seed: u64,
}

impl Default for DirectionProbeConfig {
    fn default() -> Self {
        DirectionProbeConfig {
            delta_factor: 0.1,
            bandwidth_scale: 1.0,
            max_points: 2000,
            seed: 0,
        }
    }
}

/// A fitted model of `P(y = 1 | x)` used only to probe feature directions.
pub trait Probe {
    fn predict(&self, x: &[f64]) -> f64;
}

/// Nadaraya-Watson smoother with a product Gaussian kernel.
pub struct KernelSmoother {
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
    inv_bandwidth: Vec<f64>,
}

impl KernelSmoother {
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], bandwidth_scale: f64) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let active = (0..m).filter(|&j| mean_std(&column(rows, j)).1 > 0.0).count().max(1);
        let factor = (n as f64).powf(-1.0 / (active as f64 + 4.0)) * bandwidth_scale;
        let inv_bandwidth = (0..m)
            .map(|j| {
                let sd = mean_std(&column(rows, j)).1;
                // constant features do not enter the kernel
                if sd > 0.0 {
                    1.0 / (sd * factor)
                } else {
                    0.0
                }
            })
            .collect();
        KernelSmoother {
            points: rows.to_vec(),
            targets: labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect(),
            inv_bandwidth,
        }
    }
}

impl Probe for KernelSmoother {
    fn predict(&self, x: &[f64]) -> f64 {
        // log-sum-exp style shift keeps far-away queries from underflowing
        let dists: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(x)
                    .zip(&self.inv_bandwidth)
                    .map(|((a, b), h)| {
                        let z = (a - b) * h;
                        z * z
                    })
                    .sum::<f64>()
                    * 0.5
            })
            .collect();
        let shift = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let mut num = 0.0;
        let mut den = 0.0;
        for (d, t) in dists.iter().zip(&self.targets) {
            let w = (-(d - shift)).exp();
            num += w * t;
            den += w;
        }
        num / den
    }
}

/// Counts, per feature, how often a small increase of that feature raises or
/// lowers the probe's prediction over the training points, and orients the
/// feature by the majority (ties count as increasing).
pub fn detect_direction(
    rows: &[Vec<f64>],
    labels: &[bool],
    cfg: &DirectionProbeConfig,
) -> Result<Vec<Direction>> {
    use rand::seq::index::sample;
    use rand::SeedableRng;

    if rows.len() < 2 || rows.len() != labels.len() {
        return Err(Error::data("direction detection needs at least two labelled rows"));
    }
    if cfg.delta_factor <= 0.0 {
        return Err(Error::Config("delta factor must be positive".into()));
    }
    let m = rows[0].len();
    let stds: Vec<f64> = (0..m).map(|j| mean_std(&column(rows, j)).1).collect();
    if stds.iter().all(|&s| s == 0.0) {
        return Err(Error::data("every feature is constant"));
    }

    let (points, targets): (Vec<Vec<f64>>, Vec<bool>) = if rows.len() > cfg.max_points {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx = sample(&mut rng, rows.len(), cfg.max_points).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| (rows[i].clone(), labels[i])).unzip()
    } else {
        (rows.to_vec(), labels.to_vec())
    };
    let probe = KernelSmoother::fit(&points, &targets, cfg.bandwidth_scale);
    Ok(probe_directions(&probe, &points, &stds, cfg.delta_factor))
}

/// Direction counting against an arbitrary probe.
pub fn probe_directions<P: Probe>(
    probe: &P,
    points: &[Vec<f64>],
    stds: &[f64],
    delta_factor: f64,
) -> Vec<Direction> {
    let base: Vec<f64> = points.iter().map(|p| probe.predict(p)).collect();
    stds.iter()
        .enumerate()
        .map(|(j, &sd)| {
            if sd == 0.0 {
                log::warn!("feature {} is constant; assuming increasing direction", j + 1);
                return Direction::Increasing;
            }
            let delta = delta_factor * sd;
            let (mut up, mut down) = (0usize, 0usize);
            for (p, &b) in points.iter().zip(&base) {
                let mut q = p.clone();
                q[j] += delta;
                let v = probe.predict(&q);
                if v > b {
                    up += 1;
                } else if v < b {
                    down += 1;
                }
            }
            if up >= down {
                Direction::Increasing
            } else {
                Direction::Decreasing
            }
        })
        .collect()
}

/// Reads a directions file with one `name,+1|-1` line per feature, returning
/// directions in the order of `names`.
pub fn read_directions(path: &Path, names: &[String]) -> Result<Vec<Direction>> {
    let text = std::fs::read_to_string(path)?;
    parse_directions(&text, names)
}

pub fn parse_directions(text: &str, names: &[String]) -> Result<Vec<Direction>> {
    let mut out = vec![None; names.len()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, sign) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::data(format!("directions line {}: expected name,+1|-1", lineno + 1)))?;
        let sign: i32 = sign
            .trim()
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::data(format!("directions line {}: bad sign {sign:?}", lineno + 1)))?;
        let j = names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| Error::data(format!("directions file names unknown feature {name:?}")))?;
        out[j] = Some(Direction::from_sign(sign)?);
    }
    out.into_iter()
        .zip(names)
        .map(|(d, n)| d.ok_or_else(|| Error::data(format!("no direction given for feature {n:?}"))))
        .collect()
}

pub fn format_directions(names: &[String], directions: &[Direction]) -> String {
    names
        .iter()
        .zip(directions)
        .map(|(n, d)| format!("{n},{d}\n"))
        .collect()
}
