//! Command-line front end: training, evaluation, experiment drivers,
//! synthetic data and model inspection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blm_probe::data::{
    generate_synthetic, manifest_path, split_dataset, store_path_for, write_manifest, write_store, DataType,
};
use blm_probe::harness::{
    error_analysis, evaluate, learning_curve, multi_run, prepare, run_stem, sweep_reshape, train, Corpus, RunReport,
    TrainConfig, DEFAULT_CURVE_SIZES,
};
use blm_probe::model::{load_checkpoint, parameter_report, save_checkpoint, ModelKind, ModelSpec, Reshape};
use blm_probe::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "blm-probe", version, about = "Probe subject-verb agreement in sentence-embedding sequences")]
struct Cli {
    /// TOML file with TrainConfig fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated run seeds, e.g. 0,1,2,3,4.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Directory holding type_{I,II,III}.jsonl manifests and their .blme stores.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Where checkpoints, reports and tables are written.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Log progress (repeat for per-epoch detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    /// Grid for 2D models: 16x48, 24x32, 32x24 or 48x16.
    #[arg(long)]
    reshape: Option<Reshape>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    train_type: Option<DataType>,
    #[arg(long)]
    test_type: Option<DataType>,
    /// Cap train+dev at 2073 episodes.
    #[arg(long)]
    restricted: bool,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed and save the best-dev checkpoint.
    Train(RunArgs),
    /// Score a checkpoint on a test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test_type: Option<DataType>,
    },
    /// Train and test every seed, then aggregate.
    Multirun(RunArgs),
    /// Multi-seed runs over the four 2D grids and every train/test pair.
    SweepReshape(RunArgs),
    /// Multi-seed runs over increasing train+dev budgets.
    LearningCurve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Compare error categories across reports scored on one test set.
    ErrorAnalysis {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Write synthetic manifests and stores into the data directory.
    GenSynthetic {
        #[arg(long, default_value_t = 2304)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = DataType::ALL)]
        types: Vec<DataType>,
    },
    /// Print the layer table of a model.
    InspectModel {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        reshape: Option<Reshape>,
        #[arg(long, default_value_t = 100)]
        batch: usize,
    },
}

fn resolve_config(cli: &Cli, run: &RunArgs) -> Result<TrainConfig> {
    let mut c = match (&cli.config, run.model) {
        (Some(path), _) => TrainConfig::load(path)?,
        (None, Some(kind)) => TrainConfig::new(kind),
        (None, None) => return Err(Error::Config("give --config or --model".into())),
    };
    if let Some(kind) = run.model {
        if kind != c.model {
            c.reshape = kind.is_2d().then_some(c.reshape.unwrap_or(Reshape { rows: 48, cols: 16 }));
        }
        c.model = kind;
    }
    if run.reshape.is_some() {
        c.reshape = run.reshape;
    }
    c.epochs = run.epochs.or(c.epochs);
    c.batch = run.batch.unwrap_or(c.batch);
    c.lr = run.lr.unwrap_or(c.lr);
    c.train_type = run.train_type.unwrap_or(c.train_type);
    c.test_type = run.test_type.unwrap_or(c.test_type);
    c.restricted |= run.restricted;
    c.train_size = run.train_size.or(c.train_size);
    c.split_seed = run.split_seed.unwrap_or(c.split_seed);
    if let Some(seeds) = &cli.seed_list {
        c.seeds = seeds.clone();
    }
    if let Some(dir) = &cli.data_dir {
        c.data_dir = Some(dir.clone());
    }
    if let Some(out) = &cli.out_dir {
        c.checkpoint_dir.get_or_insert_with(|| out.join("checkpoints"));
        c.report_dir.get_or_insert_with(|| out.join("reports"));
    }
    c.validate()?;
    Ok(c)
}

fn data_dir(cli: &Cli, config: Option<&TrainConfig>) -> Result<PathBuf> {
    cli.data_dir
        .clone()
        .or_else(|| config.and_then(|c| c.data_dir.clone()))
        .ok_or_else(|| Error::Config("no data directory; pass --data-dir".into()))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn summary(r: &RunReport) -> String {
    format!("{}: F1 {:.4} ({:.4}) over {} seed(s)", r.label(), r.mean_f1, r.std_f1, r.runs.len())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(args) => {
            let c = resolve_config(cli, args)?;
            let corpus = Corpus::load(&data_dir(cli, Some(&c))?)?;
            let prepared = prepare(&c, &corpus)?;
            let seed = c.seeds[0];
            let outcome = train(&c, seed, &prepared.split, prepared.train_store)?;
            let eval = evaluate(&outcome.model, &prepared.split.test, prepared.test_store)?;
            let out = out_dir(cli);
            let ck = c.checkpoint_dir.clone().unwrap_or_else(|| out.join("checkpoints"));
            let path = ck.join(format!("{}_seed{seed}.blmc", run_stem(&c)));
            std::fs::create_dir_all(&ck).map_err(|e| Error::io(&ck, e))?;
            save_checkpoint(&path, &outcome.model, &c.to_toml())?;
            let log = json!({
                "seed": seed,
                "best_epoch": outcome.best_epoch,
                "best_dev_f1": outcome.best_dev_f1,
                "test": eval,
                "test_f1": eval.f1(),
                "epochs": outcome.log,
            });
            write(&out.join(format!("{}_seed{seed}.log.json", run_stem(&c))), &format!("{log:#}"))?;
            println!(
                "{} seed {seed}: best dev F1 {:.4} at epoch {}, test F1 {:.4}; checkpoint {}",
                c.spec()?.label(),
                outcome.best_dev_f1,
                outcome.best_epoch,
                eval.f1(),
                path.display()
            );
        }
        Command::Evaluate { checkpoint, test_type } => {
            let ck = load_checkpoint(checkpoint)?;
            let trained = TrainConfig::from_toml(&ck.config)?;
            let test_type = test_type.unwrap_or(trained.test_type);
            let corpus = Corpus::load(&data_dir(cli, Some(&trained))?)?;
            let test = split_dataset(&corpus.get(test_type)?.episodes, trained.split_seed)?.test;
            let eval = evaluate(&ck.model, &test, &corpus.get(test_type)?.store)?;
            let record = json!({
                "model": ck.model.spec().label(),
                "test_type": test_type,
                "f1": eval.f1(),
                "errors": eval.error_fractions(),
                "evaluation": eval,
            });
            println!("{record:#}");
            if let Some(out) = &cli.out_dir {
                let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
                write(&out.join(format!("{stem}.eval.json")), &format!("{record:#}"))?;
            }
        }
        Command::Multirun(args) => {
            let mut c = resolve_config(cli, args)?;
            c.report_dir.get_or_insert_with(|| out_dir(cli).join("reports"));
            let corpus = Corpus::load(&data_dir(cli, Some(&c))?)?;
            let r = multi_run(&c, &corpus)?;
            println!("{}", summary(&r));
        }
        Command::SweepReshape(args) => {
            let c = resolve_config(cli, args)?;
            let corpus = Corpus::load(&data_dir(cli, Some(&c))?)?;
            let table = sweep_reshape(&c, &corpus, &corpus.pairs())?;
            let out = out_dir(cli);
            let stem = format!("sweep_{}", c.model);
            write(&out.join(format!("{stem}.csv")), &table.to_csv())?;
            write(&out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&table).expect("serializable"))?;
            print!("{}", table.to_csv());
        }
        Command::LearningCurve { run, sizes } => {
            let c = resolve_config(cli, run)?;
            let corpus = Corpus::load(&data_dir(cli, Some(&c))?)?;
            let sizes = sizes.clone().unwrap_or_else(|| DEFAULT_CURVE_SIZES.to_vec());
            let curve = learning_curve(&c, &corpus, &corpus.pairs(), &sizes)?;
            let out = out_dir(cli);
            let stem = format!("curve_{}", run_stem(&TrainConfig { train_size: None, ..c.clone() }));
            write(&out.join(format!("{stem}.csv")), &curve.to_csv())?;
            write(&out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&curve).expect("serializable"))?;
            print!("{}", curve.to_csv());
        }
        Command::ErrorAnalysis { reports } => {
            let reports: Vec<RunReport> = reports.iter().map(|p| RunReport::read(p)).collect::<Result<_>>()?;
            let table = error_analysis(&reports)?;
            if let Some(out) = &cli.out_dir {
                write(&out.join("error_analysis.csv"), &table.to_csv())?;
            }
            print!("{}", table.to_csv());
        }
        Command::GenSynthetic { episodes, seed, types } => {
            let dir = data_dir(cli, None).unwrap_or_else(|_| PathBuf::from("data"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for &t in types {
                let (eps, store) = generate_synthetic(*seed, *episodes, t)?;
                let m = manifest_path(&dir, t);
                write_manifest(&m, &eps)?;
                write_store(&store_path_for(&m), &store)?;
                println!("{}: {} episodes, {} sentences", m.display(), eps.len(), store.len());
            }
        }
        Command::InspectModel { model, reshape, batch } => {
            let reshape = reshape.or(model.is_2d().then_some(Reshape { rows: 48, cols: 16 }));
            let spec = ModelSpec::new(*model, reshape)?;
            print!("{}", parameter_report(&spec)?.render(*batch));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
