use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::report::{RunReport, SeedRun};
use super::train::{evaluate, train};
use crate::data::{
    generate_synthetic, load_dataset, manifest_path, split_dataset, subsample_train, BlmEpisode, Category, DataSplit,
    DataType, EmbeddingStore,
};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Reshape};

/// Train+dev budgets of a learning curve.
pub const DEFAULT_CURVE_SIZES: [usize; 7] = [50, 100, 250, 500, 1000, 1658, 2073];

#[derive(Clone, Debug)]
pub struct Dataset {
    pub episodes: Vec<BlmEpisode>,
    pub store: EmbeddingStore,
}

/// The data types available to an experiment.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    sets: BTreeMap<DataType, Dataset>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, data_type: DataType, set: Dataset) {
        self.sets.insert(data_type, set);
    }

    pub fn get(&self, data_type: DataType) -> Result<&Dataset> {
        self.sets.get(&data_type).ok_or_else(|| Error::Config(format!("no Type {} data available", data_type.name())))
    }

    pub fn types(&self) -> Vec<DataType> {
        self.sets.keys().copied().collect()
    }

    /// Every (train, test) pair of available types.
    pub fn pairs(&self) -> Vec<(DataType, DataType)> {
        let t = self.types();
        t.iter().flat_map(|&a| t.iter().map(move |&b| (a, b))).collect()
    }

    /// Load every `type_*.jsonl` manifest present in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut c = Corpus::new();
        for t in DataType::ALL {
            let m = manifest_path(dir, t);
            if m.exists() {
                let (episodes, store) = load_dataset(&m)?;
                c.insert(t, Dataset { episodes, store });
            }
        }
        if c.sets.is_empty() {
            return Err(Error::Config(format!("no type_I/II/III manifests in {}", dir.display())));
        }
        Ok(c)
    }

    /// Synthetic data of every type, `n` episodes each.
    pub fn synthetic(seed: u64, n: usize) -> Result<Self> {
        let mut c = Corpus::new();
        for t in DataType::ALL {
            let (episodes, store) = generate_synthetic(seed, n, t)?;
            c.insert(t, Dataset { episodes, store });
        }
        Ok(c)
    }
}

/// Train/dev/test episodes of a configuration, with the stores they read from.
pub struct Prepared<'a> {
    pub split: DataSplit,
    pub train_store: &'a EmbeddingStore,
    pub test_store: &'a EmbeddingStore,
}

/// Split the train type, apply the budget, and take the test set from the
/// test type's split.
pub fn prepare<'a>(config: &TrainConfig, corpus: &'a Corpus) -> Result<Prepared<'a>> {
    let train = corpus.get(config.train_type)?;
    let test = corpus.get(config.test_type)?;
    let mut split = split_dataset(&train.episodes, config.split_seed)?;
    if let Some(n) = config.budget() {
        split = subsample_train(&split, n)?;
    }
    if config.test_type != config.train_type {
        split.test = split_dataset(&test.episodes, config.split_seed)?.test;
    }
    Ok(Prepared { split, train_store: &train.store, test_store: &test.store })
}

/// Hash of the test set's correct-answer ids, to tell test sets apart.
pub fn test_fingerprint(test: &[BlmEpisode]) -> String {
    let mut h = Sha256::new();
    for ep in test {
        h.update(ep.candidates[ep.correct_index()].id.as_bytes());
        h.update([0]);
    }
    hex::encode(&h.finalize()[..8])
}

pub fn run_stem(config: &TrainConfig) -> String {
    let spec = match config.reshape {
        Some(r) => format!("{}_{r}", config.model),
        None => config.model.to_string(),
    };
    let budget = config.budget().map(|n| format!("_n{n}")).unwrap_or_default();
    format!("{spec}_{}-{}{budget}", config.train_type.name(), config.test_type.name())
}

pub fn checkpoint_path(dir: &Path, config: &TrainConfig, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}.blmc", run_stem(config)))
}

fn run_seed(config: &TrainConfig, prepared: &Prepared<'_>, seed: u64) -> Result<SeedRun> {
    let outcome = train(config, seed, &prepared.split, prepared.train_store)?;
    let evaluation = evaluate(&outcome.model, &prepared.split.test, prepared.test_store)?;
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&checkpoint_path(dir, config, seed), &outcome.model, &config.to_toml())?;
    }
    log::info!("{} seed {seed}: F1 {:.4}", run_stem(config), evaluation.f1());
    Ok(SeedRun {
        seed,
        f1: evaluation.f1(),
        errors: evaluation.error_fractions(),
        evaluation,
        best_epoch: outcome.best_epoch,
        best_dev_f1: outcome.best_dev_f1,
        epochs: outcome.log,
    })
}

/// Train and test once per seed and aggregate. Seeds train concurrently;
/// results are independent of scheduling.
pub fn multi_run(config: &TrainConfig, corpus: &Corpus) -> Result<RunReport> {
    config.validate()?;
    let prepared = prepare(config, corpus)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut runs = Vec::with_capacity(config.seeds.len());
    for wave in config.seeds.chunks(workers) {
        let results: Vec<Result<SeedRun>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&seed| {
                    let prepared = &prepared;
                    s.spawn(move || run_seed(config, prepared, seed))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        });
        for r in results {
            runs.push(r?);
        }
    }
    let s = &prepared.split;
    let report = RunReport::aggregate(
        config,
        config.spec()?,
        (s.train.len(), s.dev.len(), s.test.len()),
        test_fingerprint(&s.test),
        runs,
    );
    if let Some(dir) = &config.report_dir {
        report.write(dir, &run_stem(config))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReshapeCell {
    pub train_type: DataType,
    pub test_type: DataType,
    pub reshape: Reshape,
    pub report: RunReport,
}

/// F1 over the four grid shapes for each (train, test) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReshapeTable {
    pub cells: Vec<ReshapeCell>,
}

impl ReshapeTable {
    pub fn cell(&self, train: DataType, test: DataType, reshape: Reshape) -> Option<&ReshapeCell> {
        self.cells.iter().find(|c| c.train_type == train && c.test_type == test && c.reshape == reshape)
    }

    /// `train_type,test_type,16x48,24x32,32x24,48x16` with `mean (std)` cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_type,test_type");
        for r in Reshape::ALLOWED {
            out.push_str(&format!(",{r}"));
        }
        let mut pairs: Vec<(DataType, DataType)> = self.cells.iter().map(|c| (c.train_type, c.test_type)).collect();
        pairs.dedup();
        for (a, b) in pairs {
            out.push_str(&format!("\n{},{}", a.name(), b.name()));
            for r in Reshape::ALLOWED {
                match self.cell(a, b, r) {
                    Some(c) => out.push_str(&format!(",{:.4} ({:.4})", c.report.mean_f1, c.report.std_f1)),
                    None => out.push(','),
                }
            }
        }
        out.push('\n');
        out
    }
}

/// One multi-seed run per grid shape and (train, test) pair.
pub fn sweep_reshape(config: &TrainConfig, corpus: &Corpus, pairs: &[(DataType, DataType)]) -> Result<ReshapeTable> {
    if !config.model.is_2d() {
        return Err(Error::Config(format!("{} does not take reshaped input", config.model)));
    }
    let mut cells = Vec::new();
    for &(train_type, test_type) in pairs {
        for reshape in Reshape::ALLOWED {
            let c = TrainConfig { reshape: Some(reshape), train_type, test_type, ..config.clone() };
            cells.push(ReshapeCell { train_type, test_type, reshape, report: multi_run(&c, corpus)? });
        }
    }
    Ok(ReshapeTable { cells })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_type: DataType,
    pub test_type: DataType,
    pub size: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    pub reports: Vec<RunReport>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_type,test_type,size,mean_f1,std_f1\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.train_type.name(),
                p.test_type.name(),
                p.size,
                p.mean_f1,
                p.std_f1
            ));
        }
        out
    }
}

/// One multi-seed run per train+dev budget and (train, test) pair.
pub fn learning_curve(
    config: &TrainConfig,
    corpus: &Corpus,
    pairs: &[(DataType, DataType)],
    sizes: &[usize],
) -> Result<LearningCurve> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("curve sizes must be non-empty and strictly ascending, got {sizes:?}")));
    }
    for &(train_type, _) in pairs {
        let c = TrainConfig { train_type, train_size: sizes.last().copied(), ..config.clone() };
        prepare(&c, corpus)?;
    }
    let mut points = Vec::new();
    let mut reports = Vec::new();
    for &(train_type, test_type) in pairs {
        for &size in sizes {
            let c = TrainConfig { train_type, test_type, train_size: Some(size), ..config.clone() };
            let r = multi_run(&c, corpus)?;
            points.push(CurvePoint { train_type, test_type, size, mean_f1: r.mean_f1, std_f1: r.std_f1 });
            reports.push(r);
        }
    }
    Ok(LearningCurve { points, reports })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub system: String,
    pub f1: f64,
    /// Percent of the test set per error category.
    pub percent: BTreeMap<Category, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub test_type: DataType,
    pub test_size: usize,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,f1,Coord,WNA,AE,WN1,WN2\n");
        for r in &self.rows {
            let pct: Vec<String> = Category::ERRORS.iter().map(|c| format!("{:.2}", r.percent[c])).collect();
            out.push_str(&format!("{},{:.4},{}\n", r.system, r.f1, pct.join(",")));
        }
        out
    }

    /// The error category with the largest share in a row.
    pub fn dominant(&self, row: usize) -> Option<Category> {
        let r = self.rows.get(row)?;
        Category::ERRORS.into_iter().filter(|c| r.percent[c] > 0.0).max_by(|a, b| r.percent[a].total_cmp(&r.percent[b]))
    }
}

/// Per-system error percentages relative to a shared test set.
pub fn error_analysis(reports: &[RunReport]) -> Result<ErrorTable> {
    let first = reports.first().ok_or_else(|| Error::Config("error analysis needs at least one report".into()))?;
    if let Some(r) =
        reports.iter().find(|r| r.test_fingerprint != first.test_fingerprint || r.test_type != first.test_type)
    {
        return Err(Error::Config(format!("{} and {} were scored on different test sets", first.label(), r.label())));
    }
    let rows = reports
        .iter()
        .map(|r| ErrorRow {
            system: r.label(),
            f1: r.mean_f1,
            percent: r.mean_errors.iter().map(|(c, f)| (*c, 100.0 * f)).collect(),
        })
        .collect();
    Ok(ErrorTable { test_type: first.test_type, test_size: first.test_size, rows })
}
