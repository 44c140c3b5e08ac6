use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::train::EpochLog;
use crate::data::{Category, DataType};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Which candidate the model picked, counted over a test set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub chosen: BTreeMap<Category, usize>,
}

impl Evaluation {
    pub fn record(&mut self, category: Category) {
        self.n += 1;
        *self.chosen.entry(category).or_default() += 1;
    }

    pub fn count(&self, category: Category) -> usize {
        self.chosen.get(&category).copied().unwrap_or(0)
    }

    /// Selection accuracy; with one pick among single-labelled candidates
    /// this equals micro-averaged F1.
    pub fn f1(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.count(Category::Correct) as f64 / self.n as f64
    }

    /// Fraction of the test set lost to each error category.
    pub fn error_fractions(&self) -> BTreeMap<Category, f64> {
        Category::ERRORS
            .iter()
            .map(|&c| (c, if self.n == 0 { 0.0 } else { self.count(c) as f64 / self.n as f64 }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub f1: f64,
    pub errors: BTreeMap<Category, f64>,
    pub evaluation: Evaluation,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub epochs: Vec<EpochLog>,
}

/// Results of one configuration over its seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: ModelSpec,
    pub train_type: DataType,
    pub test_type: DataType,
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    /// Ids of the test episodes' correct candidates, in test order.
    pub test_fingerprint: String,
    pub runs: Vec<SeedRun>,
    pub mean_f1: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std_f1: f64,
    pub mean_errors: BTreeMap<Category, f64>,
    pub config: TrainConfig,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const CSV_HEADER: &str = "model,train_type,test_type,seed,f1,Coord,WNA,AE,WN1,WN2";

impl RunReport {
    /// Aggregate per-seed runs.
    #[allow(clippy::too_many_arguments)]
    pub fn aggregate(
        config: &TrainConfig,
        spec: ModelSpec,
        sizes: (usize, usize, usize),
        test_fingerprint: String,
        runs: Vec<SeedRun>,
    ) -> Self {
        let f1s: Vec<f64> = runs.iter().map(|r| r.f1).collect();
        let (mean_f1, std_f1) = mean_std(&f1s);
        let mean_errors = Category::ERRORS
            .iter()
            .map(|&c| {
                let xs: Vec<f64> = runs.iter().map(|r| r.errors[&c]).collect();
                (c, mean_std(&xs).0)
            })
            .collect();
        RunReport {
            spec,
            train_type: config.train_type,
            test_type: config.test_type,
            train_size: sizes.0,
            dev_size: sizes.1,
            test_size: sizes.2,
            test_fingerprint,
            runs,
            mean_f1,
            std_f1,
            mean_errors,
            config: config.clone(),
        }
    }

    pub fn label(&self) -> String {
        format!("{} {}->{}", self.spec.label(), self.train_type.name(), self.test_type.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed report: {e}")))
    }

    /// One row per seed and a `mean` row, under [`CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        let row = |seed: &str, f1: f64, errors: &BTreeMap<Category, f64>| {
            let errs: Vec<String> = Category::ERRORS.iter().map(|c| errors[c].to_string()).collect();
            format!(
                "{},{},{},{seed},{f1},{}",
                self.spec.label(),
                self.train_type.name(),
                self.test_type.name(),
                errs.join(",")
            )
        };
        let mut rows: Vec<String> = self.runs.iter().map(|r| row(&r.seed.to_string(), r.f1, &r.errors)).collect();
        rows.push(row("mean", self.mean_f1, &self.mean_errors));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        for r in self.csv_rows() {
            out.push('\n');
            out.push_str(&r);
        }
        out.push('\n');
        out
    }

    /// Write `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    fn run(seed: u64, picks: &[Category]) -> SeedRun {
        let mut e = Evaluation::default();
        picks.iter().for_each(|&c| e.record(c));
        SeedRun {
            seed,
            f1: e.f1(),
            errors: e.error_fractions(),
            evaluation: e,
            best_epoch: 1,
            best_dev_f1: 0.5,
            epochs: vec![],
        }
    }

    fn report(runs: Vec<SeedRun>) -> RunReport {
        let c = TrainConfig::new(ModelKind::BaselineFfnn);
        RunReport::aggregate(&c, c.spec().unwrap(), (8, 2, 4), "x".into(), runs)
    }

    #[test]
    fn fractions_partition_the_test_set() {
        use Category::*;
        let r = run(0, &[Correct, Wn2, Wn2, Ae, Correct, Coord, Correct]);
        let total: f64 = r.f1 + r.errors.values().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(r.errors[&Wn2], 2.0 / 7.0);
        assert_eq!(r.errors[&Wna], 0.0);
    }

    #[test]
    fn single_seed_has_zero_std() {
        let r = report(vec![run(3, &[Category::Correct, Category::Wn1])]);
        assert_eq!((r.mean_f1, r.std_f1), (0.5, 0.0));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        use Category::*;
        let r = report(vec![run(0, &[Correct, Wn2, Ae]), run(1, &[Correct, Correct, Wna])]);
        assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn csv_has_a_row_per_seed_and_a_mean() {
        let r = report(vec![run(0, &[Category::Correct]), run(1, &[Category::Wn2])]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "Baseline_FFNN,I,I,mean,0.5,0,0,0,0,0.5");
    }
}
