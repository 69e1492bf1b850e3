//! Reading a trained classifier as a disjunction of conjunctive rules.

use serde::Serialize;

use crate::capacity::{Capacity, SubsetMask};
use crate::features::{Direction, FeatureTransform};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    /// Zero-based feature indices.
    pub indices: Vec<usize>,
    pub features: Vec<String>,
    /// Per-feature bound on the raw scale, when transforms are supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_bounds: Option<Vec<RawBound>>,
}

/// `raw >= value` for increasing features, `raw <= value` for decreasing ones.
/// A missing value means no raw input reaches the level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawBound {
    pub op: &'static str,
    pub value: Option<f64>,
}

impl RawBound {
    fn of(t: &FeatureTransform, level: f64) -> Self {
        let op = match t.direction {
            Direction::Increasing => ">=",
            Direction::Decreasing => "<=",
        };
        RawBound {
            op,
            value: t.raw_threshold(level).filter(|v| v.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    pub beta: f64,
    pub rules: Vec<Rule>,
}

/// One rule per boundary set of `mu` at level `beta`: an instance is positive
/// iff all utilities in some rule reach `beta`.
pub fn extract_rules(
    mu: &Capacity,
    beta: f64,
    names: &[String],
    transforms: Option<&[FeatureTransform]>,
) -> RuleSet {
    let sets: Vec<SubsetMask> = if beta <= 0.0 {
        vec![SubsetMask::EMPTY]
    } else {
        mu.boundary_sets(beta)
    };
    if sets.is_empty() {
        log::debug!("no subset reaches beta = {beta}; every instance is negative");
    }
    let rules = sets
        .into_iter()
        .map(|a| {
            let indices: Vec<usize> = a.indices().collect();
            let features = indices
                .iter()
                .map(|&i| names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1)))
                .collect();
            let raw_bounds =
                transforms.map(|ts| indices.iter().map(|&i| RawBound::of(&ts[i], beta)).collect());
            Rule {
                indices,
                features,
                raw_bounds,
            }
        })
        .collect();
    RuleSet { beta, rules }
}

impl RuleSet {
    /// One rule per line, e.g. `IF u(age) >= 0.42 AND u(nodes) >= 0.42 THEN positive`.
    pub fn to_text(&self) -> String {
        if self.rules.is_empty() {
            return "no rules: every instance is classified negative\n".to_string();
        }
        let mut out = String::new();
        for r in &self.rules {
            if r.indices.is_empty() {
                out.push_str("ALWAYS positive\n");
                continue;
            }
            let terms: Vec<String> = r
                .features
                .iter()
                .enumerate()
                .map(|(j, f)| match &r.raw_bounds {
                    Some(b) => format!("u({f}) >= {} [{f} {}]", self.beta, fmt_raw(&b[j])),
                    None => format!("u({f}) >= {}", self.beta),
                })
                .collect();
            out.push_str("IF ");
            out.push_str(&terms.join(" AND "));
            out.push_str(" THEN positive\n");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule sets always serialize")
    }
}

fn fmt_raw(b: &RawBound) -> String {
    match b.value {
        Some(v) => format!("{} {v}", b.op),
        None => "unreachable".to_string(),
    }
}
