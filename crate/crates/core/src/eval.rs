//! Datasets, random splits and the repeated train/test benchmark.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trainer::{fit, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    /// Where the data came from, for reports.
    pub provenance: String,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != feature_names.len()) {
            return Err(Error::LengthMismatch {
                expected: feature_names.len(),
                got: r.len(),
            });
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::data("feature values must be finite"));
        }
        Ok(Dataset {
            feature_names,
            rows,
            labels,
            provenance: String::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// A numeric table read from CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// The raw text of the excluded column, if one was named.
    pub excluded: Option<Vec<String>>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads every column as a number except `exclude`, whose cells are kept as
/// text. Rows with a missing cell (`""` or `"?"`) are dropped with a warning.
pub fn read_table(path: &Path, exclude: Option<&str>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let skip = match exclude {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::data(format!("no column named {name:?} in {}", path.display())))?,
        ),
        None => None,
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    let mut excluded = skip.map(|_| Vec::new());
    let mut missing = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().any(is_missing) {
            missing += 1;
            continue;
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == skip {
                if let Some(e) = excluded.as_mut() {
                    e.push(cell.to_string());
                }
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::data(format!(
                    "{}: row {}, column {:?}: cannot parse {cell:?} as a number",
                    path.display(),
                    line + 2,
                    header[j]
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if missing > 0 {
        log::warn!("{}: dropped {missing} rows with missing values", path.display());
    }
    if rows.is_empty() {
        return Err(Error::data(format!("{}: no complete rows", path.display())));
    }
    Ok(Table { names, rows, excluded })
}

/// Loads a labelled dataset. The label column defaults to the last column;
/// a row is positive when its label text equals `positive`.
pub fn load_csv(path: &Path, label: Option<&str>, positive: &str) -> Result<Dataset> {
    let label = match label {
        Some(l) => l.to_string(),
        None => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
            rdr.headers()?
                .iter()
                .next_back()
                .ok_or_else(|| Error::data(format!("{} has an empty header", path.display())))?
                .to_string()
        }
    };
    let table = read_table(path, Some(&label))?;
    let labels: Vec<bool> = table
        .excluded
        .expect("label column was excluded")
        .iter()
        .map(|l| l == positive)
        .collect();
    if table.names.is_empty() {
        return Err(Error::data("dataset has no feature columns"));
    }
    let mut d = Dataset::new(table.names, table.rows, labels)?;
    d.provenance = path.display().to_string();
    Ok(d)
}

/// Random split into `round(fraction * n)` training and the remaining test
/// indices.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {fraction} is outside (0, 1)")));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!(
            "train fraction {fraction} of {n} instances leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn zero_one_loss(predicted: &[bool], truth: &[bool]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    wrong as f64 / truth.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub splits: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub train: TrainConfig,
    /// Also train a fully general capacity (k = m) on each split.
    pub compare_full: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            splits: 100,
            train_fraction: 0.8,
            seed: 0,
            train: TrainConfig::default(),
            compare_full: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub split: usize,
    pub seed: u64,
    pub test_loss: Option<f64>,
    pub k: Option<usize>,
    pub rho: Option<f64>,
    pub full_test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        mean,
        std,
        count: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub n: usize,
    pub m: usize,
    pub train_fraction: f64,
    pub loss: Option<Summary>,
    pub mean_k: Option<f64>,
    pub full_loss: Option<Summary>,
    pub failures: usize,
    pub splits: Vec<SplitResult>,
}

fn test_loss(data: &Dataset, train_idx: &[usize], test_idx: &[usize], cfg: &TrainConfig) -> Result<(f64, usize, f64)> {
    let train = data.subset(train_idx);
    let out = fit(&train, cfg)?;
    let predicted = test_idx
        .iter()
        .map(|&i| out.model.predict(&data.rows[i]))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<bool> = test_idx.iter().map(|&i| data.labels[i]).collect();
    Ok((zero_one_loss(&predicted, &truth), out.model.meta.k, out.model.meta.rho))
}

/// One train/test split with seed `cfg.seed + split`. Training errors are
/// recorded in the result rather than returned.
pub fn run_split(data: &Dataset, cfg: &BenchmarkConfig, split_index: usize) -> SplitResult {
    let seed = cfg.seed.wrapping_add(split_index as u64);
    let mut result = SplitResult {
        split: split_index,
        seed,
        test_loss: None,
        k: None,
        rho: None,
        full_test_loss: None,
        error: None,
    };
    let (train_idx, test_idx) = match split(data.n(), cfg.train_fraction, seed) {
        Ok(s) => s,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    match test_loss(data, &train_idx, &test_idx, &train_cfg) {
        Ok((loss, k, rho)) => {
            result.test_loss = Some(loss);
            result.k = Some(k);
            result.rho = Some(rho);
        }
        Err(e) => {
            log::warn!("split {split_index}: {e}");
            result.error = Some(e.to_string());
        }
    }
    if cfg.compare_full {
        let full_cfg = TrainConfig {
            k_grid: Some(vec![data.m()]),
            ..train_cfg
        };
        match test_loss(data, &train_idx, &test_idx, &full_cfg) {
            Ok((loss, _, _)) => result.full_test_loss = Some(loss),
            Err(e) => {
                log::warn!("split {split_index} (k = m): {e}");
                result.error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    result
}

pub fn summarize_splits(data: &Dataset, cfg: &BenchmarkConfig, splits: Vec<SplitResult>) -> BenchmarkReport {
    let losses: Vec<f64> = splits.iter().filter_map(|s| s.test_loss).collect();
    let ks: Vec<f64> = splits.iter().filter_map(|s| s.k.map(|k| k as f64)).collect();
    let full: Vec<f64> = splits.iter().filter_map(|s| s.full_test_loss).collect();
    BenchmarkReport {
        dataset: data.provenance.clone(),
        n: data.n(),
        m: data.m(),
        train_fraction: cfg.train_fraction,
        loss: summarize(&losses),
        mean_k: summarize(&ks).map(|s| s.mean),
        full_loss: summarize(&full),
        failures: splits.iter().filter(|s| s.error.is_some()).count(),
        splits,
    }
}

pub fn run_benchmark(data: &Dataset, cfg: &BenchmarkConfig) -> BenchmarkReport {
    let splits = (0..cfg.splits).map(|i| run_split(data, cfg, i)).collect();
    summarize_splits(data, cfg, splits)
}

impl BenchmarkReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset      {}", self.dataset);
        let _ = writeln!(s, "instances    {} ({} features)", self.n, self.m);
        let _ = writeln!(s, "train share  {}", self.train_fraction);
        let _ = writeln!(s, "splits       {} ({} failed)", self.splits.len(), self.failures);
        match &self.loss {
            Some(l) => {
                let _ = writeln!(s, "test loss    {:.4} +- {:.4}", l.mean, l.std);
            }
            None => {
                let _ = writeln!(s, "test loss    n/a");
            }
        }
        if let Some(k) = self.mean_k {
            let _ = writeln!(s, "mean k       {k:.2}");
        }
        if let Some(f) = &self.full_loss {
            let _ = writeln!(s, "k = m loss   {:.4} +- {:.4}", f.mean, f.std);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_with_default_label_column() {
        let f = write_csv("a,b,y\n1,2,1\n3,4,2\n");
        let d = load_csv(f.path(), None, "2").unwrap();
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.labels, vec![false, true]);
    }

    #[test]
    fn rows_with_missing_values_are_dropped() {
        let f = write_csv("a,y\n?,1\n,0\n3,1\n4,?\n");
        let d = load_csv(f.path(), None, "1").unwrap();
        assert_eq!(d.n(), 1);
        assert_eq!(d.rows, vec![vec![3.0]]);
        let f = write_csv("a,y\n?,1\n");
        assert!(load_csv(f.path(), None, "1").is_err());
    }

    #[test]
    fn bad_cell_is_an_error() {
        let f = write_csv("a,y\nx,1\n");
        assert!(matches!(load_csv(f.path(), None, "1"), Err(Error::Data(_))));
    }

    #[test]
    fn unknown_label_column() {
        let f = write_csv("a,y\n1,1\n");
        assert!(load_csv(f.path(), Some("z"), "1").is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split(10, 0.75, 3).unwrap();
        assert_eq!(tr.len(), 8);
        assert_eq!(te.len(), 2);
        assert_eq!(split(10, 0.75, 3).unwrap(), (tr.clone(), te));
        let mut all = tr;
        all.extend(split(10, 0.75, 3).unwrap().1);
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split(306, 0.8, 0).unwrap().0.len(), 245);
        assert!(split(3, 0.1, 0).is_err());
        assert!(split(10, 1.0, 0).is_err());
    }

    #[test]
    fn loss_and_summary() {
        assert_eq!(zero_one_loss(&[true, false, true, true], &[true, true, true, false]), 0.5);
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert!(summarize(&[]).is_none());
    }
}
