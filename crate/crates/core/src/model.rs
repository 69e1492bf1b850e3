//! A trained classifier and its JSON file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::Capacity;
use crate::error::{Error, Result};
use crate::features::{Direction, FeatureTransform};
use crate::integral::sorted_unchecked;

pub const MODEL_VERSION: u32 = 1;

/// Cross-validated loss of one `(k, rho)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub rho: f64,
    pub errors: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub k: usize,
    pub rho: f64,
    pub seed: u64,
    pub surrogate_beta: f64,
    pub lp_objective: f64,
    pub training_loss: f64,
    #[serde(default)]
    pub cv: Vec<CvResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SugenoModel {
    pub feature_names: Vec<String>,
    pub directions: Vec<Direction>,
    pub transforms: Vec<FeatureTransform>,
    pub capacity: Capacity,
    pub beta: f64,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    feature_names: Vec<String>,
    directions: Vec<Direction>,
    transforms: Vec<FeatureTransform>,
    capacity: Capacity,
    beta: f64,
    #[serde(flatten)]
    meta: TrainingMeta,
}

impl SugenoModel {
    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.directions.len() != m || self.transforms.len() != m || self.capacity.m() != m {
            return Err(Error::data(format!(
                "model lists {m} features but has {} directions, {} transforms and a capacity on {}",
                self.directions.len(),
                self.transforms.len(),
                self.capacity.m()
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::data(format!("threshold {} is outside [0, 1]", self.beta)));
        }
        for t in &self.transforms {
            t.validate()?;
        }
        if !self.capacity.is_monotone() {
            return Err(Error::data("model capacity is not monotone"));
        }
        Ok(())
    }

    pub fn utilities(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                got: row.len(),
            });
        }
        Ok(row.iter().zip(&self.transforms).map(|(&x, t)| t.apply(x)).collect())
    }

    pub fn score(&self, row: &[f64]) -> Result<f64> {
        let u = self.utilities(row)?;
        Ok(sorted_unchecked(&self.capacity, &u))
    }

    pub fn predict(&self, row: &[f64]) -> Result<bool> {
        Ok(self.score(row)? >= self.beta)
    }

    /// Permutation taking columns named `names` to the model's feature order.
    pub fn column_order(&self, names: &[String]) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| Error::data(format!("input has no column named {f:?}")))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            feature_names: self.feature_names.clone(),
            directions: self.directions.clone(),
            transforms: self.transforms.clone(),
            capacity: self.capacity.clone(),
            beta: self.beta,
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::data(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let model = SugenoModel {
            feature_names: file.feature_names,
            directions: file.directions,
            transforms: file.transforms,
            capacity: file.capacity,
            beta: file.beta,
            meta: file.meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
